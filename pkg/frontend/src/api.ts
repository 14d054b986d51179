// Typed client for the session API. Every view in the console derives from
// these responses; nothing is simulated client-side.

export interface ObjectRecord {
  name: string;
  x: number;
  y: number;
  z_level: number;
  support: string | null;
  r?: number;
  polygon?: [number, number][];
}

export interface QuickMetrics {
  unique: number;
  entropy_nats: number;
}

export interface SessionState {
  scenario: string;
  seed: number;
  mode: "human_operator" | "observer";
  step_count: number;
  transition_count: number;
  objects: ObjectRecord[];
  graph: { nodes: string[]; edges: [string, string, string][] };
  graph_text: string;
  metrics: QuickMetrics;
  grid: { rows: string[]; cols: number[]; cells: string[] };
  svg: string;
  catalog: string[];
  last_moved: string[];
}

export interface SkillResult {
  ok: boolean;
  status?: number;
  outcome?: { status: string; note: string };
  metrics?: QuickMetrics;
  transition_count?: number;
  error?: string;
}

export interface MetricsReport {
  unique: number;
  entropy_nats: number;
  ig_per_episode: number[];
  empowerment_mean: number | null;
  [key: string]: unknown;
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async state(): Promise<SessionState> {
    const resp = await fetch(this.url("/state"));
    if (!resp.ok) throw new Error(`GET /state failed: ${resp.status}`);
    return resp.json();
  }

  async metrics(): Promise<MetricsReport> {
    const resp = await fetch(this.url("/metrics"));
    if (!resp.ok) throw new Error(`GET /metrics failed: ${resp.status}`);
    return resp.json();
  }

  async submitSkill(line: string): Promise<SkillResult> {
    const resp = await fetch(this.url("/skill"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ line }),
    });
    if (resp.ok) {
      const body = await resp.json();
      return {
        ok: true,
        status: resp.status,
        outcome: body.outcome,
        metrics: body.metrics,
        transition_count: body.transition_count,
      };
    }
    let detail = `HTTP ${resp.status}`;
    try {
      const body = await resp.json();
      if (body.detail) detail = String(body.detail);
    } catch {
      // body was not JSON; keep the status line
    }
    return { ok: false, status: resp.status, error: detail };
  }

  async reset(scenario: string | null, seed: number): Promise<SessionState> {
    const resp = await fetch(this.url("/reset"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(scenario ? { scenario, seed } : { seed }),
    });
    if (!resp.ok) throw new Error(`POST /reset failed: ${resp.status}`);
    return resp.json();
  }

  async trajectory(): Promise<string> {
    const resp = await fetch(this.url("/trajectory"));
    if (!resp.ok) throw new Error(`GET /trajectory failed: ${resp.status}`);
    return resp.text();
  }

  async sessionDir(): Promise<string> {
    const resp = await fetch(this.url("/session-dir"));
    if (!resp.ok) throw new Error(`GET /session-dir failed: ${resp.status}`);
    const body = await resp.json();
    return body.directory;
  }
}
