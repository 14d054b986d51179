// Scene rendering from server state. The SVG is rebuilt from the state
// JSON on every refresh: object positions, stack levels, and highlights all
// come from the server, never from local prediction.

import type { ObjectRecord, SessionState } from "./api.js";

export const SCALE = 500;

export interface SceneGeometry {
  width: number;
  height: number;
}

function sx(x: number): number {
  return x * SCALE;
}

function sy(y: number): number {
  return SCALE - y * SCALE; // svg y points down, table y points away
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function gridCellRects(state: SessionState): string[] {
  const rows = state.grid.rows;
  const cols = state.grid.cols;
  const cw = SCALE / cols.length;
  const ch = SCALE / rows.length;
  const parts: string[] = [];
  rows.forEach((row, ri) => {
    cols.forEach((col, ci) => {
      const x = ci * cw;
      const y = SCALE - (ri + 1) * ch;
      const id = `${row}${col}`;
      parts.push(
        `<rect class="cell" data-cell="${id}" x="${x.toFixed(1)}" y="${y.toFixed(1)}" ` +
          `width="${cw.toFixed(1)}" height="${ch.toFixed(1)}"/>`,
        `<text class="cell-label" x="${(x + 3).toFixed(1)}" y="${(y + 11).toFixed(1)}">${id}</text>`,
      );
    });
  });
  return parts;
}

export function objectGlyph(obj: ObjectRecord, highlighted: boolean): string {
  const cls = highlighted ? "obj highlight" : "obj";
  const cx = sx(obj.x);
  const cy = sy(obj.y);
  const pieces: string[] = [];
  if (obj.polygon && obj.polygon.length >= 3) {
    const pts = obj.polygon
      .map(([px, py]) => `${sx(px).toFixed(1)},${sy(py).toFixed(1)}`)
      .join(" ");
    pieces.push(
      `<polygon class="${cls}" data-name="${esc(obj.name)}" data-z="${obj.z_level}" points="${pts}"/>`,
    );
  } else {
    const r = (obj.r ?? 0.03) * SCALE;
    pieces.push(
      `<circle class="${cls}" data-name="${esc(obj.name)}" data-z="${obj.z_level}" ` +
        `cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="${r.toFixed(1)}"/>`,
    );
  }
  pieces.push(
    `<text class="obj-label" x="${cx.toFixed(1)}" y="${(cy - 8).toFixed(1)}">${esc(obj.name)}</text>`,
  );
  if (obj.z_level > 0) {
    pieces.push(
      `<text class="stack-badge" data-name="${esc(obj.name)}" x="${cx.toFixed(1)}" ` +
        `y="${(cy + 4).toFixed(1)}">${obj.z_level + 1}</text>`,
    );
  }
  return pieces.join("");
}

/** Full scene SVG. Objects draw bottom-up so stacked glyphs sit on top. */
export function renderSceneSvg(state: SessionState): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SCALE} ${SCALE}" class="scene">`,
    `<rect class="table" x="0" y="0" width="${SCALE}" height="${SCALE}"/>`,
    ...gridCellRects(state),
  ];
  const highlighted = new Set(state.last_moved.map((n) => n.toLowerCase()));
  const ordered = [...state.objects].sort((a, b) => a.z_level - b.z_level);
  for (const obj of ordered) {
    parts.push(objectGlyph(obj, highlighted.has(obj.name.toLowerCase())));
  }
  parts.push("</svg>");
  return parts.join("\n");
}

/** All data-cell ids present in a rendered scene, for bijectivity checks. */
export function cellIdsIn(svg: string): string[] {
  const out: string[] = [];
  const re = /data-cell="([^"]+)"/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(svg)) !== null) out.push(m[1]);
  return out;
}
