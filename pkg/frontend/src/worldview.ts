// Top-down world rendering: arena, obstacles, floor lines, the robot with
// its IR rays (alert-colored at the avoidance threshold), bumper flash, and
// the recent pose trail. Pure helpers are separated from canvas calls so
// the color/geometry rules are directly testable.

import type { SceneDescription, TelemetryMsg } from "./protocol.js";
import type { UiSessionModel } from "./session.js";

export const IR_ALERT_COLOR = "#ff4d4f";
export const IR_NORMAL_COLOR = "#49b6ff";

export function irColor(voltage: number, alertVoltage: number): string {
  return voltage >= alertVoltage ? IR_ALERT_COLOR : IR_NORMAL_COLOR;
}

// Invert the ranger curve v = k/(d + d0): ray length for a given voltage.
export function irRayLength(
  voltage: number,
  curve: { k: number; d0: number; max_range_m: number },
): number {
  if (voltage <= 0) return curve.max_range_m;
  const d = curve.k / voltage - curve.d0;
  return Math.min(Math.max(d, 0), curve.max_range_m);
}

export interface Viewport {
  width: number;
  height: number;
  bounds: [number, number, number, number];
  margin: number;
}

// World y grows up; canvas y grows down.
export function worldToScreen(
  x: number,
  y: number,
  vp: Viewport,
): [number, number] {
  const [x0, y0, x1, y1] = vp.bounds;
  const sx = (vp.width - 2 * vp.margin) / (x1 - x0);
  const sy = (vp.height - 2 * vp.margin) / (y1 - y0);
  const s = Math.min(sx, sy);
  return [vp.margin + (x - x0) * s, vp.height - vp.margin - (y - y0) * s];
}

export function scale(vp: Viewport): number {
  const [x0, y0, x1, y1] = vp.bounds;
  return Math.min(
    (vp.width - 2 * vp.margin) / (x1 - x0),
    (vp.height - 2 * vp.margin) / (y1 - y0),
  );
}

export class WorldView {
  constructor(private canvas: HTMLCanvasElement) {}

  render(model: UiSessionModel): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !model.scene) return;
    const scene = model.scene;
    const vp: Viewport = {
      width: this.canvas.width,
      height: this.canvas.height,
      bounds: scene.bounds,
      margin: 16,
    };
    const s = scale(vp);
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, vp.width, vp.height);

    // arena bounds
    const [bx0, by0] = worldToScreen(scene.bounds[0], scene.bounds[3], vp);
    ctx.strokeStyle = "#3a4452";
    ctx.lineWidth = 1.5;
    ctx.strokeRect(
      bx0,
      by0,
      (scene.bounds[2] - scene.bounds[0]) * s,
      (scene.bounds[3] - scene.bounds[1]) * s,
    );

    // floor lines
    ctx.strokeStyle = "#e8d44d";
    for (const line of scene.floor_lines) {
      ctx.lineWidth = Math.max(1, line.width * s);
      ctx.beginPath();
      line.points.forEach(([x, y], i) => {
        const [px, py] = worldToScreen(x, y, vp);
        i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
      });
      ctx.stroke();
    }

    // obstacles
    ctx.fillStyle = "#59636f";
    ctx.strokeStyle = "#7d8a99";
    for (const ob of scene.obstacles) {
      if (ob.type === "circle") {
        const [px, py] = worldToScreen(ob.cx, ob.cy, vp);
        ctx.beginPath();
        ctx.arc(px, py, ob.r * s, 0, 2 * Math.PI);
        ctx.fill();
      } else {
        const [ax, ay] = worldToScreen(ob.x1, ob.y1, vp);
        const [bx, by] = worldToScreen(ob.x2, ob.y2, vp);
        ctx.lineWidth = Math.max(2, ob.thickness * s);
        ctx.beginPath();
        ctx.moveTo(ax, ay);
        ctx.lineTo(bx, by);
        ctx.stroke();
      }
    }

    // pose trail
    const trail = model.trail.toArray();
    if (trail.length > 1) {
      ctx.strokeStyle = "rgba(120, 200, 160, 0.5)";
      ctx.lineWidth = 1;
      ctx.beginPath();
      trail.forEach((p, i) => {
        const [px, py] = worldToScreen(p.x, p.y, vp);
        i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
      });
      ctx.stroke();
    }

    const t = model.latest;
    if (!t) return;
    this.renderRobot(ctx, t, scene, vp, s);
  }

  private renderRobot(
    ctx: CanvasRenderingContext2D,
    t: TelemetryMsg,
    scene: SceneDescription,
    vp: Viewport,
    s: number,
  ): void {
    const { x, y, theta } = t.pose;
    const r = scene.robot.body_radius_m;
    const spacing = (scene.ir.spacing_deg * Math.PI) / 180;

    // IR rays from the body perimeter, colored by threshold
    for (let k = 0; k < t.ir.length; k++) {
      const v = t.ir[k];
      const ang = theta + k * spacing;
      const len = irRayLength(v, scene.ir.curve);
      const ox = x + r * Math.cos(ang);
      const oy = y + r * Math.sin(ang);
      const [sx, sy] = worldToScreen(ox, oy, vp);
      const [ex, ey] = worldToScreen(ox + len * Math.cos(ang), oy + len * Math.sin(ang), vp);
      ctx.strokeStyle = irColor(v, scene.ir.alert_voltage);
      ctx.lineWidth = v >= scene.ir.alert_voltage ? 2 : 1;
      ctx.beginPath();
      ctx.moveTo(sx, sy);
      ctx.lineTo(ex, ey);
      ctx.stroke();
    }

    // body: flashes on bumper contact
    const [px, py] = worldToScreen(x, y, vp);
    ctx.fillStyle = t.bumper ? "#ff4d4f" : "#68c17c";
    ctx.beginPath();
    ctx.arc(px, py, r * s, 0, 2 * Math.PI);
    ctx.fill();

    // heading tick
    const [hx, hy] = worldToScreen(x + r * Math.cos(theta), y + r * Math.sin(theta), vp);
    ctx.strokeStyle = "#10141a";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(hx, hy);
    ctx.stroke();
  }
}
