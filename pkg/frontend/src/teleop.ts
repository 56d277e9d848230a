// Keyboard teleop: streams set_velocity at a fixed cadence while any key is
// held, and sends a single zero command on release (dead-man behavior that
// pairs with the server's watchdog).

export interface TeleopCommand {
  vx: number; // mm/s
  vy: number;
  omega: number; // deg/s
}

export interface TeleopOptions {
  speedMmS: number;
  strafeMmS: number;
  turnDegS: number;
}

const DEFAULTS: TeleopOptions = { speedMmS: 300, strafeMmS: 300, turnDegS: 60 };

const KEY_AXES: Record<string, Partial<TeleopCommand>> = {
  KeyW: { vx: 1 },
  ArrowUp: { vx: 1 },
  KeyS: { vx: -1 },
  ArrowDown: { vx: -1 },
  KeyA: { vy: 1 }, // +y is the robot's left
  KeyD: { vy: -1 },
  KeyQ: { omega: 1 },
  ArrowLeft: { omega: 1 },
  KeyE: { omega: -1 },
  ArrowRight: { omega: -1 },
};

export class Teleop {
  static readonly RATE_HZ = 20;
  private held = new Set<string>();
  private wasActive = false;
  private opts: TeleopOptions;

  constructor(
    private send: (cmd: TeleopCommand) => void,
    opts: Partial<TeleopOptions> = {},
  ) {
    this.opts = { ...DEFAULTS, ...opts };
  }

  keyDown(code: string): boolean {
    if (!(code in KEY_AXES)) return false;
    this.held.add(code);
    return true;
  }

  keyUp(code: string): boolean {
    if (!(code in KEY_AXES)) return false;
    this.held.delete(code);
    return true;
  }

  releaseAll(): void {
    this.held.clear();
  }

  command(): TeleopCommand {
    let vx = 0;
    let vy = 0;
    let omega = 0;
    for (const code of this.held) {
      const axis = KEY_AXES[code];
      vx += (axis.vx ?? 0) * this.opts.speedMmS;
      vy += (axis.vy ?? 0) * this.opts.strafeMmS;
      omega += (axis.omega ?? 0) * this.opts.turnDegS;
    }
    return { vx, vy, omega };
  }

  get active(): boolean {
    return this.held.size > 0;
  }

  // One cadence step: emit the live command while driving, and exactly one
  // zero command on the transition to idle.
  tick(): void {
    if (this.active) {
      this.send(this.command());
      this.wasActive = true;
    } else if (this.wasActive) {
      this.send({ vx: 0, vy: 0, omega: 0 });
      this.wasActive = false;
    }
  }

  start(intervalFn: typeof setInterval = setInterval): ReturnType<typeof setInterval> {
    return intervalFn(() => this.tick(), 1000 / Teleop.RATE_HZ);
  }
}
