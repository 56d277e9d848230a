// Rolling strip charts for per-wheel speed and current over the last 30 s,
// with vertical markers at PID retune instants so transients are visible.

import type { ChartMarker } from "./session.js";

export interface Series {
  label: string;
  color: string;
  points: { t: number; v: number }[];
}

export function seriesRange(series: Series[]): { lo: number; hi: number } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      if (p.v < lo) lo = p.v;
      if (p.v > hi) hi = p.v;
    }
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return { lo: -1, hi: 1 };
  if (hi - lo < 1e-9) {
    const pad = Math.max(1e-3, Math.abs(hi) * 0.1);
    return { lo: lo - pad, hi: hi + pad };
  }
  const pad = 0.08 * (hi - lo);
  return { lo: lo - pad, hi: hi + pad };
}

export class StripChart {
  constructor(
    private canvas: HTMLCanvasElement,
    private title: string,
    private windowS = 30,
  ) {}

  draw(series: Series[], markers: ChartMarker[]): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.fillStyle = "#141920";
    ctx.fillRect(0, 0, w, h);

    const tMax = Math.max(
      0,
      ...series.flatMap((s) => s.points.map((p) => p.t)),
    );
    const tMin = Math.max(0, tMax - this.windowS);
    const { lo, hi } = seriesRange(series);
    const tx = (t: number) => ((t - tMin) / Math.max(1e-9, tMax - tMin)) * (w - 8) + 4;
    const vy = (v: number) => h - 4 - ((v - lo) / (hi - lo)) * (h - 20);

    // zero axis when in range
    if (lo < 0 && hi > 0) {
      ctx.strokeStyle = "#2a3340";
      ctx.beginPath();
      ctx.moveTo(0, vy(0));
      ctx.lineTo(w, vy(0));
      ctx.stroke();
    }

    for (const marker of markers) {
      if (marker.time_s < tMin || marker.time_s > tMax) continue;
      ctx.strokeStyle = "#c678dd";
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(tx(marker.time_s), 0);
      ctx.lineTo(tx(marker.time_s), h);
      ctx.stroke();
      ctx.setLineDash([]);
    }

    for (const s of series) {
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 1.2;
      ctx.beginPath();
      let started = false;
      for (const p of s.points) {
        if (p.t < tMin) continue;
        const x = tx(p.t);
        const y = vy(p.v);
        started ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
        started = true;
      }
      ctx.stroke();
    }

    ctx.fillStyle = "#9fb0c3";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${this.title}  [${lo.toFixed(2)}, ${hi.toFixed(2)}]`, 6, 12);
  }
}
