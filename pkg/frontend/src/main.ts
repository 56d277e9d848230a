// Browser entry point: connects to the WebSocket gateway, wires the teleop
// keys, PID tuning forms, controller selector, charts, and the world view.

import {
  AckMsg,
  FrameMsg,
  RobotClient,
  SceneDescription,
  TelemetryMsg,
  WsTransport,
} from "./protocol.js";
import { UiSessionModel, validateGains } from "./session.js";
import { Teleop } from "./teleop.js";
import { WorldView } from "./worldview.js";
import { Series, StripChart } from "./charts.js";
import { base64ToBytes, decodePgm, drawFrame } from "./camera.js";

const TELEMETRY_HZ = 20;
const FRAME_PERIOD_MS = 500;
const WHEEL_COLORS = ["#61afef", "#98c379", "#e5c07b"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function wsUrl(): string {
  const params = new URLSearchParams(location.search);
  return `ws://${params.get("ws") ?? "127.0.0.1:8082"}`;
}

async function start(): Promise<void> {
  const model = new UiSessionModel(TELEMETRY_HZ);
  const transport = new WsTransport(wsUrl());
  const client = new RobotClient(transport);
  const banner = el<HTMLDivElement>("banner");
  const world = new WorldView(el<HTMLCanvasElement>("world"));
  const speedChart = new StripChart(el<HTMLCanvasElement>("chart-speed"), "wheel speed (rad/s)");
  const currentChart = new StripChart(el<HTMLCanvasElement>("chart-current"), "motor current (A)");
  const cameraCanvas = el<HTMLCanvasElement>("camera");
  const statusLine = el<HTMLDivElement>("status");

  const teleop = new Teleop((cmd) =>
    client.send("set_velocity", { vx: cmd.vx, vy: cmd.vy, omega: cmd.omega }),
  );

  const setConnected = (ok: boolean) => {
    model.applyConnection(ok);
    banner.textContent = ok ? "connected" : "disconnected - controls disabled";
    banner.className = ok ? "banner ok" : "banner bad";
    document
      .querySelectorAll<HTMLButtonElement | HTMLInputElement>("button, input, select")
      .forEach((node) => (node.disabled = !ok));
    if (!ok) teleop.releaseAll();
  };

  transport.onStatus(async (ok) => {
    setConnected(ok);
    if (!ok) return;
    const hello = (await client.request("hello")) as AckMsg;
    model.applyScene(hello.scene as unknown as SceneDescription, String(hello.controller));
    (el<HTMLSelectElement>("controller")).value = model.controller;
    for (let wheel = 0; wheel < 3; wheel++) await refreshGains(wheel);
    await client.request("subscribe_telemetry", { rate_hz: TELEMETRY_HZ });
  });

  client.onTelemetry((t: TelemetryMsg) => {
    model.applyTelemetry(t);
    statusLine.textContent =
      `t=${t.time_s.toFixed(2)}s  pose=(${t.pose.x.toFixed(2)}, ${t.pose.y.toFixed(2)}, ` +
      `${((t.pose.theta * 180) / Math.PI).toFixed(0)}°)  controller=${t.controller}` +
      `  reason=${t.reason}${t.dropped ? `  dropped=${t.dropped}` : ""}`;
  });

  async function refreshGains(wheel: number): Promise<void> {
    const reply = (await client.request("get_pid", { wheel })) as AckMsg;
    if (reply.op !== "ack") return;
    const gains = {
      kp: Number(reply.kp),
      ki: Number(reply.ki),
      kd: Number(reply.kd),
    };
    model.applyGains(wheel, gains);
    for (const key of ["kp", "ki", "kd"] as const) {
      el<HTMLInputElement>(`${key}-${wheel}`).value = String(gains[key]);
    }
  }

  for (let wheel = 0; wheel < 3; wheel++) {
    el<HTMLButtonElement>(`apply-${wheel}`).addEventListener("click", async () => {
      const kp = Number(el<HTMLInputElement>(`kp-${wheel}`).value);
      const ki = Number(el<HTMLInputElement>(`ki-${wheel}`).value);
      const kd = Number(el<HTMLInputElement>(`kd-${wheel}`).value);
      const problem = validateGains(kp, ki, kd);
      const note = el<HTMLSpanElement>(`pid-note-${wheel}`);
      if (problem) {
        note.textContent = problem; // client-side validation blocks the send
        return;
      }
      const reply = await client.request("set_pid", { wheel, kp, ki, kd });
      if (reply.op === "error") {
        note.textContent = (reply as { reason: string }).reason;
        return;
      }
      note.textContent = "applied";
      model.markRetune(wheel);
      await refreshGains(wheel);
    });
  }

  el<HTMLSelectElement>("controller").addEventListener("change", async (ev) => {
    const controller = (ev.target as HTMLSelectElement).value;
    await client.request("select_controller", { controller });
  });
  el<HTMLButtonElement>("reset").addEventListener("click", async () => {
    await client.request("reset");
    model.reset();
  });

  window.addEventListener("keydown", (ev) => {
    if ((ev.target as HTMLElement)?.tagName === "INPUT") return;
    if (teleop.keyDown(ev.code)) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => {
    if (teleop.keyUp(ev.code)) ev.preventDefault();
  });
  window.addEventListener("blur", () => teleop.releaseAll());
  teleop.start();

  // periodic camera frame fetch
  setInterval(async () => {
    if (model.connection !== "connected") return;
    try {
      const frame = (await client.request("get_frame")) as FrameMsg;
      if (frame.op !== "frame") return;
      cameraCanvas.width = frame.width;
      cameraCanvas.height = frame.height;
      const ctx = cameraCanvas.getContext("2d");
      if (ctx) drawFrame(ctx, decodePgm(base64ToBytes(frame.pgm_base64)), frame.line);
    } catch {
      // frame fetch is best-effort
    }
  }, FRAME_PERIOD_MS);

  // render loop
  const render = () => {
    world.render(model);
    const history = model.history.toArray();
    const speeds: Series[] = [0, 1, 2].map((w) => ({
      label: `w${w}`,
      color: WHEEL_COLORS[w],
      points: history.map((t) => ({ t: t.time_s, v: t.wheels[w].speed })),
    }));
    const setpoints: Series[] = [0, 1, 2].map((w) => ({
      label: `w${w} set`,
      color: "#8a93a2",
      points: history.map((t) => ({ t: t.time_s, v: t.wheels[w].setpoint })),
    }));
    speedChart.draw([...setpoints, ...speeds], model.markers);
    const currents: Series[] = [0, 1, 2].map((w) => ({
      label: `i${w}`,
      color: WHEEL_COLORS[w],
      points: history.map((t) => ({ t: t.time_s, v: t.wheels[w].current })),
    }));
    currentChart.draw(currents, model.markers);
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

start().catch((err) => {
  console.error(err);
  const banner = document.getElementById("banner");
  if (banner) banner.textContent = String(err);
});
