// DOM wiring for the operator console. Pure logic lives in compose.ts /
// scene.ts / panel.ts; this file only moves data between the API client and
// the page. Every action round-trips: the optimistic path is disabled so
// the view can never drift from the server.

import { ApiClient, SessionState } from "./api.js";
import {
  ACTION_RELATIONS,
  ActionRelation,
  ComposerState,
  composeArrange,
  composerLine,
  gridClickLine,
} from "./compose.js";
import { renderSceneSvg } from "./scene.js";
import {
  PanelModel,
  formatEntropy,
  initialPanel,
  sparklinePath,
  togglePanel,
  updatePanel,
} from "./panel.js";

const api = new ApiClient("");
const composer: ComposerState = { subject: null, relation: null, target: null };
let panel: PanelModel = initialPanel();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function showToast(text: string, kind: "ok" | "error" | "warn") {
  const history = el<HTMLUListElement>("toasts");
  const item = document.createElement("li");
  item.className = `toast ${kind}`;
  item.textContent = text;
  history.prepend(item);
  while (history.children.length > 8) history.removeChild(history.lastChild!);
}

function showBanner(text: string | null) {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

function renderPanel() {
  const box = el<HTMLDivElement>("panel");
  box.style.display = panel.visible ? "block" : "none";
  if (!panel.visible) return;
  el<HTMLSpanElement>("panel-unique").textContent = String(panel.unique);
  el<HTMLSpanElement>("panel-entropy").textContent = formatEntropy(panel.entropyNats);
  el<HTMLElement>("sparkline-path").setAttribute("d", sparklinePath(panel.growth));
}

function fillPickers(state: SessionState) {
  const subject = el<HTMLSelectElement>("pick-subject");
  const target = el<HTMLSelectElement>("pick-target");
  const relation = el<HTMLSelectElement>("pick-relation");
  for (const sel of [subject, target]) {
    const prior = sel.value;
    sel.innerHTML = '<option value="">(object)</option>';
    for (const name of state.catalog) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      sel.appendChild(opt);
    }
    sel.value = prior;
  }
  if (relation.options.length <= 1) {
    relation.innerHTML = '<option value="">(relation)</option>';
    for (const rel of ACTION_RELATIONS) {
      const opt = document.createElement("option");
      opt.value = rel;
      opt.textContent = rel;
      relation.appendChild(opt);
    }
  }
}

function renderScene(state: SessionState) {
  el<HTMLDivElement>("scene-box").innerHTML = renderSceneSvg(state);
  for (const rect of document.querySelectorAll<SVGRectElement>("rect.cell")) {
    rect.addEventListener("click", () => {
      const cell = rect.getAttribute("data-cell")!;
      const line = gridClickLine(composer, cell);
      if (!line) {
        showToast("pick an object first, then click a grid cell", "warn");
        return;
      }
      void submit(line);
    });
  }
  for (const glyph of document.querySelectorAll<SVGElement>(".obj")) {
    glyph.addEventListener("click", () => {
      composer.subject = glyph.getAttribute("data-name");
      el<HTMLSelectElement>("pick-subject").value = composer.subject ?? "";
    });
  }
}

async function refresh() {
  try {
    const state = await api.state();
    showBanner(null);
    el<HTMLSpanElement>("session-label").textContent =
      `${state.scenario} · seed ${state.seed} · ${state.mode} · step ${state.transition_count}`;
    el<HTMLPreElement>("graph-text").textContent = state.graph_text;
    fillPickers(state);
    renderScene(state);
  } catch {
    showBanner("connection lost - retrying");
    setTimeout(refresh, 1500);
  }
}

async function submit(line: string) {
  el<HTMLInputElement>("free-line").value = line;
  let result;
  try {
    result = await api.submitSkill(line);
  } catch {
    showBanner("network failure - the action was not applied; retry when reconnected");
    return;
  }
  if (!result.ok) {
    if (result.status === 409) {
      showToast("session is observer-mode; actions are disabled", "warn");
    } else {
      el<HTMLDivElement>("inline-error").textContent = result.error ?? "rejected";
    }
    return;
  }
  el<HTMLDivElement>("inline-error").textContent = "";
  const outcome = result.outcome!;
  showToast(`${line} -> ${outcome.status}${outcome.note ? ` (${outcome.note})` : ""}`,
    outcome.status === "Success" ? "ok" : "warn");
  if (result.metrics) panel = updatePanel(panel, result.metrics);
  renderPanel();
  await refresh();
}

function wire() {
  el<HTMLSelectElement>("pick-subject").addEventListener("change", (e) => {
    composer.subject = (e.target as HTMLSelectElement).value || null;
  });
  el<HTMLSelectElement>("pick-relation").addEventListener("change", (e) => {
    composer.relation = ((e.target as HTMLSelectElement).value || null) as ActionRelation | null;
  });
  el<HTMLSelectElement>("pick-target").addEventListener("change", (e) => {
    composer.target = (e.target as HTMLSelectElement).value || null;
  });
  el<HTMLButtonElement>("submit-move").addEventListener("click", () => {
    const line = composerLine(composer);
    if (!line) {
      showToast("select object, relation, and target", "warn");
      return;
    }
    void submit(line);
  });
  el<HTMLButtonElement>("submit-arrange").addEventListener("click", () => {
    if (!composer.subject) {
      showToast("select an object to arrange", "warn");
      return;
    }
    void submit(composeArrange(composer.subject));
  });
  el<HTMLFormElement>("free-form").addEventListener("submit", (e) => {
    e.preventDefault();
    const line = el<HTMLInputElement>("free-line").value.trim();
    if (line) void submit(line);
  });
  el<HTMLButtonElement>("panel-toggle").addEventListener("click", () => {
    panel = togglePanel(panel);
    renderPanel();
  });
}

if (typeof document !== "undefined" && document.getElementById("scene-box")) {
  wire();
  void refresh();
}
