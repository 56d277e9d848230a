// Integration against a live control server: the dashboard client drives a
// real robot over TCP, its recorded transcript replays, and the resulting
// trace reproduces byte-for-byte through the replay checker.

import { spawn, execFile, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import path from "node:path";
import readline from "node:readline";
import { afterEach, describe, expect, it } from "vitest";

import { RobotClient, Transport } from "../src/protocol.js";

const PYTHON = process.env.OMNIBOT_PYTHON ?? "python3";

class TcpTransport implements Transport {
  private lineCb: ((line: string) => void) | null = null;
  private statusCb: ((c: boolean) => void) | null = null;

  constructor(private sock: net.Socket) {
    const rl = readline.createInterface({ input: sock });
    rl.on("line", (line) => this.lineCb?.(line));
    sock.on("close", () => this.statusCb?.(false));
  }

  send(line: string): void {
    this.sock.write(line + "\n");
  }
  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }
  onStatus(cb: (c: boolean) => void): void {
    this.statusCb = cb;
  }
  close(): void {
    this.sock.destroy();
  }
}

interface Server {
  proc: ChildProcess;
  port: number;
}

const running: ChildProcess[] = [];

function spawnServer(args: string[]): Promise<Server> {
  const proc = spawn(PYTHON, ["-m", "omnibot.cli", "serve", ...args], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  running.push(proc);
  let stderr = "";
  proc.stderr?.on("data", (chunk) => (stderr += chunk));
  return new Promise((resolve, reject) => {
    const rl = readline.createInterface({ input: proc.stdout! });
    let resolved = false;
    rl.on("line", (line) => {
      const m = line.match(/listening on .*:(\d+)/);
      if (m && !resolved) {
        resolved = true;
        resolve({ proc, port: Number(m[1]) });
      }
    });
    proc.on("exit", (code) => {
      if (!resolved) reject(new Error(`server exited (${code}): ${stderr}`));
    });
  });
}

function connect(port: number): Promise<RobotClient> {
  return new Promise((resolve, reject) => {
    const sock = net.createConnection({ host: "127.0.0.1", port }, () =>
      resolve(new RobotClient(new TcpTransport(sock))),
    );
    sock.on("error", reject);
  });
}

function waitExit(proc: ChildProcess, ms = 60_000): Promise<number | null> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not exit")), ms);
    proc.on("exit", (code) => {
      clearTimeout(timer);
      resolve(code);
    });
    if (proc.exitCode !== null) {
      clearTimeout(timer);
      resolve(proc.exitCode);
    }
  });
}

function runCli(args: string[]): Promise<{ code: number; out: string }> {
  return new Promise((resolve) => {
    execFile(PYTHON, ["-m", "omnibot.cli", ...args], (err, stdout, stderr) => {
      resolve({ code: err ? (err as { code?: number }).code ?? 1 : 0, out: stdout + stderr });
    });
  });
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

afterEach(() => {
  for (const proc of running.splice(0)) {
    if (proc.exitCode === null) proc.kill("SIGTERM");
  }
});

describe("teleop session against a live server", () => {
  it("records a transcript whose trace replays byte-for-byte", async () => {
    const dir = mkdtempSync(path.join(tmpdir(), "omnibot-ui-"));
    const tracePath = path.join(dir, "teleop.csv");
    // tuning_demo runs 2 simulated seconds; at half speed that is ~1 s wall
    const server = await spawnServer([
      "tuning_demo",
      "--bind",
      "127.0.0.1:0",
      "--throttle",
      "0.5",
      "--once",
      "--trace",
      tracePath,
    ]);
    const client = await connect(server.port);
    const hello = await client.request("hello");
    expect(hello.op).toBe("ack");

    // scripted teleop: forward burst, then a turn, at the 20 Hz cadence
    for (let i = 0; i < 8; i++) {
      client.send("set_velocity", { vx: 300, vy: 0, omega: 0 });
      await sleep(50);
    }
    for (let i = 0; i < 8; i++) {
      client.send("set_velocity", { vx: 0, vy: 0, omega: 45 });
      await sleep(50);
    }
    client.send("set_velocity", { vx: 0, vy: 0, omega: 0 });
    expect(client.transcript.length).toBe(18); // hello + 17 commands

    await waitExit(server.proc);
    client.close();

    const trace = readFileSync(tracePath, "utf-8");
    expect(trace).toContain("# cmd ");
    expect(trace.split("\n").some((l) => l.startsWith("# cmd ") && l.includes("300"))).toBe(true);

    const replay = await runCli(["replay", tracePath, "--check"]);
    expect(replay.out).toContain("match");
    expect(replay.code).toBe(0);
  });
});

describe("PID panel against a live server", () => {
  const SCENARIO = `
[scene]
bounds = 0 0 8 8
spawn = 4 4 0
[run]
controller = external
duration_s = 600
`;

  function scenarioFile(): string {
    const dir = mkdtempSync(path.join(tmpdir(), "omnibot-ui-"));
    const p = path.join(dir, "long.scn");
    writeFileSync(p, SCENARIO, "utf-8");
    return p;
  }

  it("read-your-write: get_pid echoes set_pid; bad gains are rejected", async () => {
    const server = await spawnServer([scenarioFile(), "--bind", "127.0.0.1:0"]);
    const client = await connect(server.port);
    const applied = await client.request("set_pid", {
      wheel: 2,
      kp: 0.07,
      ki: 0.25,
      kd: 0.001,
    });
    expect(applied.op).toBe("ack");
    const echoed = await client.request("get_pid", { wheel: 2 });
    expect(echoed).toMatchObject({ op: "ack", wheel: 2, kp: 0.07, ki: 0.25, kd: 0.001 });

    const rejected = await client.request("set_pid", { wheel: 0, kp: -1, ki: 0, kd: 0 });
    expect(rejected.op).toBe("error");
    expect(String((rejected as { reason: string }).reason)).toContain("non-negative");
    client.close();
  });

  it("a recorded transcript replays against a fresh server with identical replies", async () => {
    const scn = scenarioFile();
    const first = await spawnServer([scn, "--bind", "127.0.0.1:0"]);
    const a = await connect(first.port);
    const replies: string[] = [];
    const collect = async (op: string, payload: Record<string, unknown> = {}) => {
      const reply = await a.request(op, payload);
      replies.push(JSON.stringify(reply));
    };
    await collect("hello");
    await collect("get_pid", { wheel: 0 });
    await collect("set_pid", { wheel: 1, kp: 0.08, ki: 0.2, kd: 0 });
    await collect("get_pid", { wheel: 1 });
    await collect("set_pid", { wheel: 1, kp: -5, ki: 0, kd: 0 });
    await collect("get_bumper");
    const transcript = [...a.transcript];
    a.close();
    first.proc.kill("SIGTERM");

    const second = await spawnServer([scn, "--bind", "127.0.0.1:0"]);
    const sock = net.createConnection({ host: "127.0.0.1", port: second.port });
    await new Promise((r) => sock.on("connect", r));
    const rl = readline.createInterface({ input: sock });
    const replayed: string[] = [];
    const done = new Promise<void>((resolve) => {
      rl.on("line", (line) => {
        replayed.push(line);
        if (replayed.length === transcript.length) resolve();
      });
    });
    for (const line of transcript) sock.write(line + "\n");
    await done;
    sock.destroy();

    expect(replayed.map((l) => JSON.parse(l))).toEqual(replies.map((l) => JSON.parse(l)));
  });
});
