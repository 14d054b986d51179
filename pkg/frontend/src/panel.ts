// The novelty panel: unique-graph count, entropy, and a growth sparkline.
// Hidden by default so baseline sessions run without metric feedback; the
// numbers shown are always the server's, fetched after every action.

import type { QuickMetrics } from "./api.js";

export interface PanelModel {
  visible: boolean;
  unique: number;
  entropyNats: number;
  growth: number[]; // cumulative unique count after each action
}

export function initialPanel(): PanelModel {
  return { visible: false, unique: 0, entropyNats: 0, growth: [] };
}

export function updatePanel(panel: PanelModel, metrics: QuickMetrics): PanelModel {
  return {
    ...panel,
    unique: metrics.unique,
    entropyNats: metrics.entropy_nats,
    growth: [...panel.growth, metrics.unique],
  };
}

export function togglePanel(panel: PanelModel): PanelModel {
  return { ...panel, visible: !panel.visible };
}

export function formatEntropy(nats: number): string {
  return `${nats.toFixed(3)} nats`;
}

/** SVG path for the growth sparkline, scaled into width x height. */
export function sparklinePath(growth: number[], width = 120, height = 28): string {
  if (growth.length === 0) return "";
  const peak = Math.max(...growth, 1);
  const stepX = growth.length > 1 ? width / (growth.length - 1) : 0;
  return growth
    .map((v, i) => {
      const x = (i * stepX).toFixed(1);
      const y = (height - (v / peak) * (height - 2) - 1).toFixed(1);
      return `${i === 0 ? "M" : "L"}${x},${y}`;
    })
    .join(" ");
}
