import { describe, expect, it } from "vitest";

import {
  decodeLine,
  encodeLine,
  RobotClient,
  Transport,
} from "../src/protocol.js";

class FakeTransport implements Transport {
  sent: string[] = [];
  private lineCb: ((line: string) => void) | null = null;
  private statusCb: ((c: boolean) => void) | null = null;

  send(line: string): void {
    this.sent.push(line);
  }
  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }
  onStatus(cb: (c: boolean) => void): void {
    this.statusCb = cb;
  }
  close(): void {}

  // test hooks
  receive(msg: object): void {
    this.lineCb?.(JSON.stringify(msg));
  }
  receiveRaw(line: string): void {
    this.lineCb?.(line);
  }
}

describe("line codec", () => {
  it("encodes compact single-line JSON", () => {
    const line = encodeLine({ op: "hello", seq: 1 });
    expect(line).not.toContain("\n");
    expect(JSON.parse(line)).toEqual({ op: "hello", seq: 1 });
  });

  it("decodes server messages", () => {
    const msg = decodeLine('{"op":"ack","seq":3}');
    expect(msg.op).toBe("ack");
  });

  it("rejects lines without an op", () => {
    expect(() => decodeLine('{"seq":1}')).toThrow();
  });
});

describe("RobotClient", () => {
  it("correlates requests and responses by seq", async () => {
    const t = new FakeTransport();
    const client = new RobotClient(t);
    const p1 = client.request("get_pid", { wheel: 0 });
    const p2 = client.request("get_pid", { wheel: 1 });
    const sent = t.sent.map((line) => JSON.parse(line));
    // answer out of order
    t.receive({ op: "ack", seq: sent[1].seq, wheel: 1, kp: 2 });
    t.receive({ op: "ack", seq: sent[0].seq, wheel: 0, kp: 1 });
    const [r1, r2] = await Promise.all([p1, p2]);
    expect((r1 as { wheel: number }).wheel).toBe(0);
    expect((r2 as { wheel: number }).wheel).toBe(1);
  });

  it("routes telemetry to the stream handler, not pending requests", async () => {
    const t = new FakeTransport();
    const client = new RobotClient(t);
    const seen: number[] = [];
    client.onTelemetry((m) => seen.push(m.seq));
    t.receive({ op: "telemetry", seq: 1, time_s: 0 });
    t.receive({ op: "telemetry", seq: 2, time_s: 0.1 });
    expect(seen).toEqual([1, 2]);
  });

  it("resolves errors to the matching request", async () => {
    const t = new FakeTransport();
    const client = new RobotClient(t);
    const p = client.request("set_pid", { wheel: 9 });
    const seq = JSON.parse(t.sent[0]).seq;
    t.receive({ op: "error", seq, reason: "wheel index out of range: 9" });
    const reply = await p;
    expect(reply.op).toBe("error");
  });

  it("ignores unparseable lines from the wire", () => {
    const t = new FakeTransport();
    new RobotClient(t);
    expect(() => t.receiveRaw("not json")).not.toThrow();
  });

  it("records every sent line in the transcript", () => {
    const t = new FakeTransport();
    const client = new RobotClient(t);
    client.send("set_velocity", { vx: 100, vy: 0, omega: 0 });
    void client.request("get_bumper").catch(() => {});
    expect(client.transcript.length).toBe(2);
    expect(client.transcript).toEqual(t.sent);
  });
});
