"""Deterministic fixed-step world loop: sense, decide, act, resolve, record.

Time is accounted in integer physics ticks (time_s == tick * dt_physics), so
record k of a run carries time k * dt_control exactly. A run is reproducible
bit-for-bit from its scenario plus the tick-stamped command schedule; both
are embedded in the trace preamble so a trace can replay itself.

Trace CSV columns:
    tick,time_s,x,y,theta,vx,vy,omega,
    w0_set,w0,i0,u0,w1_set,w1,i1,u1,w2_set,w2,i2,u2,
    ir0..ir8,bumper,cmd_vx,cmd_vy,cmd_omega,reason

Each row logs one control period: time_s/tick stamp the period start, the
sensor columns are the snapshot the controller saw, and pose/twist/wheel
columns are the state after the period's physics.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from pathlib import Path

from .controllers import (
    STOP,
    AvoidState,
    REASON_RUNNING,
    REASON_TIMEOUT,
    VelocityCommand,
    avoid_step,
    line_follow_step,
    to_body_twist,
)
from .drivetrain import Drivetrain, RigidBodyState, WheelTelemetry
from .scenario import Scenario, parse_scenario
from .sensors import (
    CameraFrame,
    IrReading,
    LineDetection,
    SensorSuite,
    detect_line_x,
    frame_to_pgm,
)
from .world import Pose, nearest_contact, point_obstacle_distance

CAMERA_TICK_DIVISOR = 3  # camera refreshes every third control tick
REASON_ABORTED = "aborted"

TRACE_COLUMNS = (
    ["tick", "time_s", "x", "y", "theta", "vx", "vy", "omega"]
    + [col for k in range(3) for col in (f"w{k}_set", f"w{k}", f"i{k}", f"u{k}")]
    + [f"ir{k}" for k in range(9)]
    + ["bumper", "cmd_vx", "cmd_vy", "cmd_omega", "reason"]
)


@dataclass(frozen=True)
class SensorFrame:
    """One control tick's sensor snapshot."""

    ir: tuple[IrReading, ...]
    bumper: bool
    camera: CameraFrame
    seq: int


@dataclass(frozen=True)
class TraceRecord:
    tick: int
    time_s: float
    x: float
    y: float
    theta: float
    vx: float
    vy: float
    omega: float
    wheels: tuple[WheelTelemetry, WheelTelemetry, WheelTelemetry]
    ir_voltages: tuple[float, ...]
    bumper: bool
    cmd: VelocityCommand
    reason: str

    def csv_row(self) -> str:
        parts: list[str] = [str(self.tick), _fmt(self.time_s)]
        parts += [_fmt(v) for v in (self.x, self.y, self.theta, self.vx, self.vy, self.omega)]
        for w in self.wheels:
            parts += [
                _fmt(w.setpoint_rad_s),
                _fmt(w.speed_rad_s),
                _fmt(w.current_a),
                _fmt(w.voltage_v),
            ]
        parts += [_fmt(v) for v in self.ir_voltages]
        parts.append("1" if self.bumper else "0")
        parts += [_fmt(self.cmd.vx_mm_s), _fmt(self.cmd.vy_mm_s), _fmt(self.cmd.omega_deg_s)]
        parts.append(self.reason)
        return ",".join(parts)


def _fmt(x: float) -> str:
    return repr(float(x))


def resolve_collision(rb, params, scene):
    """Project a penetrating footprint back to exact contact.

    Contacts are resolved sequentially, deepest first, up to a few passes
    (a corner needs one pass per touching surface). The velocity component
    driving into each surface is zeroed; tangential motion is preserved.
    Returns (state, touched).
    """
    x, y = rb.pose.x, rb.pose.y
    vx, vy = rb.vx_world, rb.vy_world
    touched = False
    for _ in range(8):
        d, nx, ny = nearest_contact(x, y, scene)
        pen = params.body_radius_m - d
        if pen <= 0.0:
            break
        touched = True
        x += nx * pen
        y += ny * pen
        vn = vx * nx + vy * ny
        if vn < 0.0:
            vx -= vn * nx
            vy -= vn * ny
    if not touched:
        return rb, False
    return (
        RigidBodyState(pose=Pose(x, y, rb.pose.theta), vx_world=vx, vy_world=vy, omega=rb.omega),
        True,
    )


class SimEngine:
    """Owns one simulated robot. Exactly one thread may call step()/run();
    concurrent readers go through the locked snapshot helpers."""

    def __init__(self, scenario: Scenario, *, watchdog_ticks: int | None = None):
        scenario.validate()
        self.scenario = scenario
        self.watchdog_ticks = watchdog_ticks
        self._lock = threading.RLock()
        self._pending: list[VelocityCommand] = []
        self.reset()

    # -- lifecycle ----------------------------------------------------------

    def reset(self) -> None:
        sc = self.scenario
        with self._lock:
            self.drivetrain = Drivetrain(
                sc.robot,
                sc.motor,
                sc.pid,
                dt_physics_s=sc.dt_physics_s,
                dt_control_s=sc.dt_control_s,
                spawn=sc.scene.spawn,
            )
            self.sensors = SensorSuite(sc.robot, sc.sensors, seed=sc.seed)
            self.control_ticks_total = int(round(sc.duration_s / sc.dt_control_s))
            self.control_tick = 0
            self.physics_tick = 0
            self.controller = sc.controller
            self.avoid = AvoidState()
            self.last_cmd = STOP
            self.last_detection = LineDetection(found=False)
            self.last_sensors: SensorFrame | None = None
            self.last_wheels: tuple[WheelTelemetry, ...] = ()
            self._sensor_seq = 0
            self._camera: CameraFrame | None = None
            self.records: list[TraceRecord] = []
            self.command_log: list[tuple[int, VelocityCommand]] = []
            self._schedule: list[tuple[int, VelocityCommand]] = []
            self._pending.clear()
            self._ticks_since_cmd = 10**9
            self.terminated = False
            self.reason = ""
            self.collisions = 0
            self._in_contact = False
            self.min_clearance_m = self._clearance()

    def schedule_commands(self, commands: list[tuple[int, VelocityCommand]]) -> None:
        """Queue tick-stamped external commands (used by replay/headless runs)."""
        with self._lock:
            self._schedule = sorted(commands, key=lambda tc: tc[0])

    def submit_command(self, cmd: VelocityCommand) -> None:
        """Queue an external command; it lands at the next control tick."""
        with self._lock:
            self._pending.append(cmd)

    def set_pid_gains(self, wheel: int, gains) -> None:
        with self._lock:
            self.drivetrain.set_pid_gains(wheel, gains)

    def get_pid_gains(self, wheel: int):
        with self._lock:
            return self.drivetrain.get_pid_gains(wheel)

    def select_controller(self, name: str) -> None:
        from .scenario import CONTROLLERS

        if name not in CONTROLLERS:
            raise ValueError(f"unknown controller {name!r}")
        with self._lock:
            self.controller = name
            self.avoid = AvoidState()
            self.last_cmd = STOP
            self._pending.clear()  # commands from before the switch are stale

    # -- stepping -----------------------------------------------------------

    def step(self) -> TraceRecord:
        """Advance one control tick. Must not be called after termination."""
        with self._lock:
            if self.terminated:
                raise RuntimeError("engine already terminated")
            sc = self.scenario
            k = self.control_tick
            elapsed = k * sc.dt_control_s

            rb0 = self.drivetrain.rb
            if not all(
                math.isfinite(v)
                for v in (rb0.pose.x, rb0.pose.y, rb0.vx_world, rb0.vy_world, rb0.omega)
            ):
                return self._abort_record(k, elapsed)

            # (1) sensor snapshot
            pose = self.drivetrain.rb.pose
            ir = self.sensors.read_ir(pose, sc.scene)
            # contact found by the collision resolver also trips the bumper
            bump = self._in_contact or self.sensors.read_bumper(pose, sc.scene)
            camera_fresh = self._camera is None or k % CAMERA_TICK_DIVISOR == 0
            if camera_fresh:
                self._camera = self.sensors.read_camera(pose, sc.scene)
            self._sensor_seq += 1
            frame = SensorFrame(ir=ir, bumper=bump, camera=self._camera, seq=self._sensor_seq)
            self.last_sensors = frame

            # (2) decide
            reason = REASON_RUNNING
            if self.controller == "avoid_obstacles":
                cmd, self.avoid = avoid_step(
                    ir[0].voltage_v, ir[1].voltage_v, ir[8].voltage_v, bump, elapsed
                )
                reason = self.avoid.reason
            elif self.controller == "line_follow":
                if camera_fresh:  # carried-forward frames reuse the detection
                    self.last_detection = detect_line_x(
                        self._camera, sc.sensors.line_threshold
                    )
                cmd = line_follow_step(self.last_detection, sc.line_follow)
            else:
                while self._schedule and self._schedule[0][0] <= k:
                    _, queued = self._schedule.pop(0)
                    self.last_cmd = queued
                    self.command_log.append((k, queued))
                    self._ticks_since_cmd = 0
                if self._pending:
                    for queued in self._pending:
                        self.last_cmd = queued
                        self.command_log.append((k, queued))
                    self._pending.clear()
                    self._ticks_since_cmd = 0
                elif (
                    self.watchdog_ticks is not None
                    and self._ticks_since_cmd >= self.watchdog_ticks
                    and self.last_cmd != STOP
                ):
                    # log the zeroing so the trace replays without a watchdog
                    self.last_cmd = STOP
                    self.command_log.append((k, STOP))
                cmd = self.last_cmd
                self._ticks_since_cmd += 1
            if self.controller != "external":
                self.last_cmd = cmd

            # (3) act
            try:
                twist = to_body_twist(cmd)
                self.last_wheels = tuple(self.drivetrain.drive_tick(twist))
            except ValueError:
                # numeric blow-up mid-step (non-finite state propagating)
                return self._abort_record(k, elapsed)
            self.physics_tick += self.drivetrain.substeps

            # (4) resolve contacts
            self._resolve_collision()
            clearance = self._clearance()
            if clearance < self.min_clearance_m:
                self.min_clearance_m = clearance

            rb = self.drivetrain.rb
            tw = rb.body_twist()
            finite = all(
                math.isfinite(v)
                for v in (rb.pose.x, rb.pose.y, rb.pose.theta, tw.vx, tw.vy, tw.omega)
            ) and all(
                math.isfinite(m.current_a) and math.isfinite(m.omega_rad_s)
                for m in self.drivetrain.motors
            )
            if not finite:
                reason = REASON_ABORTED

            # (5) record
            rec = TraceRecord(
                tick=k * self.drivetrain.substeps,
                time_s=elapsed,
                x=rb.pose.x,
                y=rb.pose.y,
                theta=rb.pose.theta,
                vx=tw.vx,
                vy=tw.vy,
                omega=tw.omega,
                wheels=self.last_wheels,
                ir_voltages=tuple(r.voltage_v for r in ir),
                bumper=bump,
                cmd=cmd,
                reason=reason,
            )
            self.records.append(rec)

            self.control_tick += 1
            if reason == REASON_ABORTED:
                self.terminated = True
                self.reason = REASON_ABORTED
            elif self.controller == "avoid_obstacles" and self.avoid.terminated:
                self.terminated = True
                self.reason = self.avoid.reason
            elif self.control_tick >= self.control_ticks_total:
                self.terminated = True
                self.reason = REASON_TIMEOUT
            return rec

    def _abort_record(self, k: int, elapsed: float) -> TraceRecord:
        """Diagnostic record for a numerically broken state; terminates the run."""
        rb = self.drivetrain.rb
        wheels = self.last_wheels or tuple(WheelTelemetry(0.0, 0.0, 0.0, 0.0) for _ in range(3))
        ir = (
            tuple(r.voltage_v for r in self.last_sensors.ir)
            if self.last_sensors
            else (0.0,) * 9
        )
        rec = TraceRecord(
            tick=k * self.drivetrain.substeps,
            time_s=elapsed,
            x=rb.pose.x,
            y=rb.pose.y,
            theta=rb.pose.theta,
            vx=rb.vx_world,
            vy=rb.vy_world,
            omega=rb.omega,
            wheels=wheels[:3],
            ir_voltages=ir,
            bumper=False,
            cmd=self.last_cmd,
            reason=REASON_ABORTED,
        )
        self.records.append(rec)
        self.control_tick += 1
        self.terminated = True
        self.reason = REASON_ABORTED
        return rec

    def _clearance(self) -> float:
        pose = self.drivetrain.rb.pose
        return (
            point_obstacle_distance(pose.x, pose.y, self.scenario.scene)
            - self.scenario.robot.body_radius_m
        )

    def _resolve_collision(self) -> None:
        rb, touched = resolve_collision(
            self.drivetrain.rb, self.scenario.robot, self.scenario.scene
        )
        if touched:
            self.drivetrain.rb = rb
            if not self._in_contact:
                self.collisions += 1
        self._in_contact = touched

    def run(self, *, frames_dir: str | None = None) -> dict:
        """Step to completion; returns the run summary."""
        frames_path = Path(frames_dir) if frames_dir else None
        if frames_path:
            frames_path.mkdir(parents=True, exist_ok=True)
        while not self.terminated:
            self.step()
            if frames_path and (self.control_tick - 1) % CAMERA_TICK_DIVISOR == 0:
                name = f"frame_{self.control_tick - 1:06d}.pgm"
                (frames_path / name).write_bytes(frame_to_pgm(self.last_sensors.camera))
        return self.summary()

    def summary(self) -> dict:
        pose = self.drivetrain.rb.pose
        return {
            "reason": self.reason,
            "final_pose": {"x": pose.x, "y": pose.y, "theta": pose.theta},
            "min_clearance_m": self.min_clearance_m,
            "collisions": self.collisions,
            "ticks": len(self.records),
        }

    # -- thread-safe views for the protocol server --------------------------

    def telemetry_view(self) -> dict:
        with self._lock:
            rb = self.drivetrain.rb
            tw = rb.body_twist()
            ir = self.last_sensors.ir if self.last_sensors else self.sensors.read_ir(
                rb.pose, self.scenario.scene
            )
            bump = self.last_sensors.bumper if self.last_sensors else False
            wheels = self.last_wheels or tuple(
                WheelTelemetry(0.0, m.omega_rad_s / self.scenario.robot.gear_ratio,
                               m.current_a, m.applied_voltage_v)
                for m in self.drivetrain.motors
            )
            return {
                "time_s": self.control_tick * self.scenario.dt_control_s,
                "pose": {"x": rb.pose.x, "y": rb.pose.y, "theta": rb.pose.theta},
                "twist": {"vx": tw.vx, "vy": tw.vy, "omega": tw.omega},
                "wheels": [
                    {
                        "setpoint": w.setpoint_rad_s,
                        "speed": w.speed_rad_s,
                        "current": w.current_a,
                        "voltage": w.voltage_v,
                    }
                    for w in wheels
                ],
                "ir": [r.voltage_v for r in ir],
                "bumper": bump,
                "cmd": {
                    "vx": self.last_cmd.vx_mm_s,
                    "vy": self.last_cmd.vy_mm_s,
                    "omega": self.last_cmd.omega_deg_s,
                },
                "controller": self.controller,
                "reason": self.reason if self.terminated else REASON_RUNNING,
                "terminated": self.terminated,
            }

    def frame_view(self) -> tuple[CameraFrame, LineDetection]:
        with self._lock:
            cam = self._camera
            if cam is None:
                cam = self.sensors.read_camera(
                    self.drivetrain.rb.pose, self.scenario.scene
                )
                self._camera = cam
            det = detect_line_x(cam, self.scenario.sensors.line_threshold)
            return cam, det


# ---------------------------------------------------------------------------
# Trace files

TRACE_MAGIC = "# omnibot-trace v1"


def trace_text(scenario_text: str, commands, records) -> str:
    lines = [TRACE_MAGIC, "# scenario-begin"]
    lines += [f"# {line}" for line in scenario_text.rstrip("\n").splitlines()]
    lines.append("# scenario-end")
    for tick, cmd in commands:
        lines.append(
            f"# cmd {tick} {_fmt(cmd.vx_mm_s)} {_fmt(cmd.vy_mm_s)} {_fmt(cmd.omega_deg_s)}"
        )
    lines.append(",".join(TRACE_COLUMNS))
    lines += [r.csv_row() for r in records]
    return "\n".join(lines) + "\n"


def write_trace(path, scenario_text: str, commands, records) -> None:
    Path(path).write_text(trace_text(scenario_text, commands, records), encoding="utf-8")


def read_trace(path) -> tuple[str, list[tuple[int, VelocityCommand]], list[str]]:
    """Parse a trace file into (scenario text, command schedule, data lines).

    Data lines include the CSV header, exactly as written.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != TRACE_MAGIC:
        raise ValueError("not an omnibot trace file")
    scenario_lines: list[str] = []
    commands: list[tuple[int, VelocityCommand]] = []
    data: list[str] = []
    in_scenario = False
    for line in lines[1:]:
        if line == "# scenario-begin":
            in_scenario = True
        elif line == "# scenario-end":
            in_scenario = False
        elif in_scenario:
            scenario_lines.append(line[2:] if line.startswith("# ") else line.lstrip("#"))
        elif line.startswith("# cmd "):
            toks = line[len("# cmd "):].split()
            commands.append(
                (int(toks[0]), VelocityCommand(float(toks[1]), float(toks[2]), float(toks[3])))
            )
        elif line.startswith("#"):
            continue
        else:
            data.append(line)
    return "\n".join(scenario_lines) + "\n", commands, data


def run_headless(
    scenario_text: str,
    commands: list[tuple[int, VelocityCommand]] | None = None,
    *,
    frames_dir: str | None = None,
) -> tuple[SimEngine, dict]:
    """Run a scenario document to completion at full speed."""
    scenario = parse_scenario(scenario_text)
    engine = SimEngine(scenario)
    if commands:
        engine.schedule_commands(commands)
    summary = engine.run(frames_dir=frames_dir)
    return engine, summary


def replay_check(path) -> tuple[bool, str]:
    """Re-run a trace's embedded scenario + commands and diff the rows."""
    scenario_text, commands, data = read_trace(path)
    engine, _ = run_headless(scenario_text, commands)
    fresh = [",".join(TRACE_COLUMNS)] + [r.csv_row() for r in engine.records]
    if fresh == data:
        return True, f"identical ({len(engine.records)} records)"
    n = min(len(fresh), len(data))
    for i in range(n):
        if fresh[i] != data[i]:
            return False, f"first difference at data line {i}"
    return False, f"row count differs: {len(data)} in file, {len(fresh)} re-run"
