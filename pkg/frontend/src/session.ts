// Client-side session state: the latest snapshot, a bounded telemetry
// history for the charts, current PID gains, and chart markers. Rendering
// reads this model; every mutation of the robot goes out as a wire message.

import type { SceneDescription, TelemetryMsg } from "./protocol.js";

export class RingBuffer<T> {
  private items: T[] = [];
  private start = 0;

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be at least 1");
  }

  push(item: T): void {
    if (this.items.length < this.capacity) {
      this.items.push(item);
    } else {
      this.items[this.start] = item;
      this.start = (this.start + 1) % this.capacity;
    }
  }

  get length(): number {
    return this.items.length;
  }

  toArray(): T[] {
    return this.items
      .slice(this.start)
      .concat(this.items.slice(0, this.start));
  }

  last(): T | undefined {
    if (this.items.length === 0) return undefined;
    const idx = (this.start + this.items.length - 1) % this.items.length;
    return this.items[idx];
  }

  clear(): void {
    this.items = [];
    this.start = 0;
  }
}

export interface PidGains {
  kp: number;
  ki: number;
  kd: number;
}

export interface ChartMarker {
  time_s: number;
  label: string;
}

export type ConnectionState = "disconnected" | "connecting" | "connected";

const HISTORY_SECONDS = 30;

export class UiSessionModel {
  connection: ConnectionState = "connecting";
  scene: SceneDescription | null = null;
  latest: TelemetryMsg | null = null;
  history: RingBuffer<TelemetryMsg>;
  trail: RingBuffer<{ x: number; y: number }>;
  gains: PidGains[] = [
    { kp: 0, ki: 0, kd: 0 },
    { kp: 0, ki: 0, kd: 0 },
    { kp: 0, ki: 0, kd: 0 },
  ];
  controller = "external";
  markers: ChartMarker[] = [];

  constructor(telemetryRateHz = 20) {
    this.history = new RingBuffer(HISTORY_SECONDS * telemetryRateHz);
    this.trail = new RingBuffer(600);
  }

  applyConnection(connected: boolean): void {
    this.connection = connected ? "connected" : "disconnected";
  }

  applyScene(scene: SceneDescription, controller: string): void {
    this.scene = scene;
    this.controller = controller;
  }

  applyTelemetry(t: TelemetryMsg): void {
    this.latest = t;
    this.history.push(t);
    this.trail.push({ x: t.pose.x, y: t.pose.y });
    this.controller = t.controller;
  }

  applyGains(wheel: number, gains: PidGains): void {
    if (wheel < 0 || wheel > 2) throw new Error(`wheel out of range: ${wheel}`);
    this.gains[wheel] = gains;
  }

  markRetune(wheel: number): void {
    const time = this.latest?.time_s ?? 0;
    this.markers.push({ time_s: time, label: `W${wheel} retune` });
    if (this.markers.length > 20) this.markers.shift();
  }

  reset(): void {
    this.history.clear();
    this.trail.clear();
    this.markers = [];
    this.latest = null;
  }
}

export function validateGains(kp: number, ki: number, kd: number): string | null {
  for (const [name, v] of [["kp", kp], ["ki", ki], ["kd", kd]] as const) {
    if (!Number.isFinite(v)) return `${name} must be a number`;
    if (v < 0) return `${name} must be non-negative`;
  }
  return null;
}
