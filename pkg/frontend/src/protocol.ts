// Wire protocol client: newline-delimited JSON messages with seq correlation.
// The same line grammar travels over TCP (tests) and WebSocket (browser).

export type ControllerName = "external" | "line_follow" | "avoid_obstacles";

export interface PoseMsg {
  x: number;
  y: number;
  theta: number;
}

export interface WheelTelemetry {
  setpoint: number;
  speed: number;
  current: number;
  voltage: number;
}

export interface TelemetryMsg {
  op: "telemetry";
  seq: number;
  dropped: number;
  time_s: number;
  pose: PoseMsg;
  twist: { vx: number; vy: number; omega: number };
  wheels: WheelTelemetry[];
  ir: number[];
  bumper: boolean;
  cmd: { vx: number; vy: number; omega: number };
  controller: string;
  reason: string;
  terminated: boolean;
}

export interface FrameMsg {
  op: "frame";
  seq: number | string | null;
  width: number;
  height: number;
  pgm_base64: string;
  line: { found: boolean; x_px: number; strength: number };
}

export interface AckMsg {
  op: "ack";
  seq: number | string | null;
  [key: string]: unknown;
}

export interface ErrorMsg {
  op: "error";
  seq: number | string | null;
  reason: string;
}

export type ServerMessage = TelemetryMsg | FrameMsg | AckMsg | ErrorMsg;

export interface SceneDescription {
  bounds: [number, number, number, number];
  obstacles: Array<
    | { type: "circle"; cx: number; cy: number; r: number }
    | {
        type: "segment";
        x1: number;
        y1: number;
        x2: number;
        y2: number;
        thickness: number;
      }
  >;
  floor_lines: Array<{ width: number; points: [number, number][] }>;
  spawn: PoseMsg;
  robot: { body_radius_m: number; max_speed_m_s: number; max_omega_rad_s: number };
  camera: { width_px: number; height_px: number };
  ir: {
    count: number;
    spacing_deg: number;
    alert_voltage: number;
    curve: { k: number; d0: number; v_max: number; max_range_m: number };
  };
}

export function encodeLine(msg: Record<string, unknown>): string {
  return JSON.stringify(msg);
}

export function decodeLine(line: string): ServerMessage {
  const msg = JSON.parse(line) as Record<string, unknown>;
  if (typeof msg !== "object" || msg === null || typeof msg.op !== "string") {
    throw new Error(`malformed server message: ${line}`);
  }
  return msg as unknown as ServerMessage;
}

// One line in, one line out; implemented by the WebSocket transport in the
// browser and a TCP shim in the node tests.
export interface Transport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onStatus(cb: (connected: boolean) => void): void;
  close(): void;
}

export class WsTransport implements Transport {
  private ws: WebSocket;
  private lineCb: ((line: string) => void) | null = null;
  private statusCb: ((connected: boolean) => void) | null = null;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.statusCb?.(true);
    this.ws.onclose = () => this.statusCb?.(false);
    this.ws.onerror = () => this.statusCb?.(false);
    this.ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.lineCb?.(ev.data);
    };
  }

  send(line: string): void {
    if (this.ws.readyState === WebSocket.OPEN) this.ws.send(line);
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onStatus(cb: (connected: boolean) => void): void {
    this.statusCb = cb;
    if (this.ws.readyState === WebSocket.OPEN) cb(true);
  }

  close(): void {
    this.ws.close();
  }
}

type Pending = {
  resolve: (msg: ServerMessage) => void;
  reject: (err: Error) => void;
};

// Request/response client with telemetry fan-out and a transcript recorder:
// every line sent is appended to `transcript`, so a whole session can be
// replayed against a fresh server.
export class RobotClient {
  readonly transcript: string[] = [];
  private nextSeq = 1;
  private pending = new Map<number, Pending>();
  private telemetryCb: ((t: TelemetryMsg) => void) | null = null;
  private errorCb: ((e: ErrorMsg) => void) | null = null;

  constructor(private transport: Transport) {
    transport.onLine((line) => this.handleLine(line));
  }

  private handleLine(line: string): void {
    let msg: ServerMessage;
    try {
      msg = decodeLine(line);
    } catch {
      return; // tolerate garbage from the wire
    }
    if (msg.op === "telemetry") {
      this.telemetryCb?.(msg as TelemetryMsg);
      return;
    }
    const seq = msg.seq;
    if (typeof seq === "number" && this.pending.has(seq)) {
      const entry = this.pending.get(seq)!;
      this.pending.delete(seq);
      entry.resolve(msg);
      return;
    }
    if (msg.op === "error") this.errorCb?.(msg as ErrorMsg);
  }

  onTelemetry(cb: (t: TelemetryMsg) => void): void {
    this.telemetryCb = cb;
  }

  onUnmatchedError(cb: (e: ErrorMsg) => void): void {
    this.errorCb = cb;
  }

  // Fire-and-forget send (teleop path: we still get the ack matched later
  // if awaited, but the 20 Hz stream does not wait on round trips).
  send(op: string, payload: Record<string, unknown> = {}): number {
    const seq = this.nextSeq++;
    const line = encodeLine({ op, seq, ...payload });
    this.transcript.push(line);
    this.transport.send(line);
    return seq;
  }

  request(
    op: string,
    payload: Record<string, unknown> = {},
    timeoutMs = 5000,
  ): Promise<ServerMessage> {
    return new Promise((resolve, reject) => {
      const seq = this.nextSeq++;
      const line = encodeLine({ op, seq, ...payload });
      this.pending.set(seq, { resolve, reject });
      const timer = setTimeout(() => {
        if (this.pending.delete(seq)) reject(new Error(`timeout waiting for ${op}`));
      }, timeoutMs);
      const entry = this.pending.get(seq)!;
      entry.resolve = (msg) => {
        clearTimeout(timer);
        resolve(msg);
      };
      entry.reject = (err) => {
        clearTimeout(timer);
        reject(err);
      };
      this.transcript.push(line);
      this.transport.send(line);
    });
  }

  close(): void {
    this.transport.close();
  }
}
