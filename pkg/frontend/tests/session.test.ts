import { describe, expect, it } from "vitest";

import type { TelemetryMsg } from "../src/protocol.js";
import { RingBuffer, UiSessionModel, validateGains } from "../src/session.js";

function telemetry(time: number, x = 0): TelemetryMsg {
  return {
    op: "telemetry",
    seq: Math.round(time * 100),
    dropped: 0,
    time_s: time,
    pose: { x, y: 0, theta: 0 },
    twist: { vx: 0, vy: 0, omega: 0 },
    wheels: [
      { setpoint: 0, speed: 0, current: 0, voltage: 0 },
      { setpoint: 0, speed: 0, current: 0, voltage: 0 },
      { setpoint: 0, speed: 0, current: 0, voltage: 0 },
    ],
    ir: Array(9).fill(0.28),
    bumper: false,
    cmd: { vx: 0, vy: 0, omega: 0 },
    controller: "external",
    reason: "running",
    terminated: false,
  };
}

describe("RingBuffer", () => {
  it("never exceeds its capacity and keeps newest items in order", () => {
    const rb = new RingBuffer<number>(4);
    for (let i = 0; i < 10; i++) rb.push(i);
    expect(rb.length).toBe(4);
    expect(rb.toArray()).toEqual([6, 7, 8, 9]);
    expect(rb.last()).toBe(9);
  });

  it("handles partial fill", () => {
    const rb = new RingBuffer<number>(5);
    rb.push(1);
    rb.push(2);
    expect(rb.toArray()).toEqual([1, 2]);
    expect(rb.last()).toBe(2);
  });

  it("clear empties it", () => {
    const rb = new RingBuffer<number>(3);
    rb.push(1);
    rb.clear();
    expect(rb.length).toBe(0);
    expect(rb.last()).toBeUndefined();
  });

  it("rejects nonsense capacity", () => {
    expect(() => new RingBuffer(0)).toThrow();
  });
});

describe("UiSessionModel", () => {
  it("tracks the latest snapshot and bounded history", () => {
    const m = new UiSessionModel(2); // 30 s * 2 Hz = 60 samples
    for (let i = 0; i < 100; i++) m.applyTelemetry(telemetry(i * 0.5));
    expect(m.history.length).toBe(60);
    expect(m.latest?.time_s).toBeCloseTo(49.5);
  });

  it("marks retunes at the current telemetry time", () => {
    const m = new UiSessionModel();
    m.applyTelemetry(telemetry(12.3));
    m.markRetune(1);
    expect(m.markers).toHaveLength(1);
    expect(m.markers[0].time_s).toBeCloseTo(12.3);
    expect(m.markers[0].label).toContain("1");
  });

  it("applyGains guards the wheel index", () => {
    const m = new UiSessionModel();
    m.applyGains(2, { kp: 1, ki: 2, kd: 3 });
    expect(m.gains[2]).toEqual({ kp: 1, ki: 2, kd: 3 });
    expect(() => m.applyGains(3, { kp: 0, ki: 0, kd: 0 })).toThrow();
  });

  it("reset clears run-scoped state", () => {
    const m = new UiSessionModel();
    m.applyTelemetry(telemetry(1));
    m.markRetune(0);
    m.reset();
    expect(m.history.length).toBe(0);
    expect(m.markers).toHaveLength(0);
    expect(m.latest).toBeNull();
  });
});

describe("validateGains", () => {
  it("accepts non-negative finite gains", () => {
    expect(validateGains(0.05, 0.3, 0)).toBeNull();
  });

  it("rejects negative values naming the field", () => {
    expect(validateGains(-1, 0, 0)).toContain("kp");
    expect(validateGains(0, -0.1, 0)).toContain("ki");
  });

  it("rejects NaN", () => {
    expect(validateGains(Number.NaN, 0, 0)).toContain("kp");
  });
});
