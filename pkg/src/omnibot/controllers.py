"""Decision-level behaviors: IR obstacle avoidance and camera line following.

Commands use the legacy wire units (mm/s and deg/s); they are converted to
SI exactly once, at the drivetrain boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .sensors import LineDetection
from .world import BodyTwist

# Obstacle-avoidance constants: forward speed, in-place turn rate, the ranger
# voltage that counts as "obstacle ahead", and the session time limit.
AVOID_FORWARD_MM_S = 500.0
AVOID_TURN_DEG_S = 100.0
AVOID_VOLTAGE_THRESHOLD = 0.7
AVOID_TIME_LIMIT_S = 60.0

REASON_RUNNING = "running"
REASON_TIMEOUT = "timeout"
REASON_BUMPER = "bumper"


@dataclass(frozen=True)
class VelocityCommand:
    """Chassis velocity in wire units: mm/s forward/left, deg/s CCW."""

    vx_mm_s: float = 0.0
    vy_mm_s: float = 0.0
    omega_deg_s: float = 0.0

    def __post_init__(self):
        if not (
            math.isfinite(self.vx_mm_s)
            and math.isfinite(self.vy_mm_s)
            and math.isfinite(self.omega_deg_s)
        ):
            raise ValueError("non-finite velocity command")


STOP = VelocityCommand(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AvoidState:
    elapsed_s: float = 0.0
    terminated: bool = False
    reason: str = REASON_RUNNING


def avoid_step(
    v0: float,
    v1: float,
    v8: float,
    bumper: bool,
    elapsed_s: float,
    time_limit_s: float = AVOID_TIME_LIMIT_S,
) -> tuple[VelocityCommand, AvoidState]:
    """One decision of the IR avoidance behavior.

    Exit on bumper contact, then on the time limit; otherwise rotate in
    place while any of the three front rangers reads at or above 0.7 V,
    else drive straight ahead.
    """
    if v0 < 0 or v1 < 0 or v8 < 0:
        raise ValueError("ranger voltages must be non-negative")
    if bumper:
        return STOP, AvoidState(elapsed_s, True, REASON_BUMPER)
    if elapsed_s >= time_limit_s:
        return STOP, AvoidState(elapsed_s, True, REASON_TIMEOUT)
    if (
        AVOID_VOLTAGE_THRESHOLD <= v0
        or AVOID_VOLTAGE_THRESHOLD <= v1
        or AVOID_VOLTAGE_THRESHOLD <= v8
    ):
        cmd = VelocityCommand(0.0, 0.0, AVOID_TURN_DEG_S)
    else:
        cmd = VelocityCommand(AVOID_FORWARD_MM_S, 0.0, 0.0)
    return cmd, AvoidState(elapsed_s, False, REASON_RUNNING)


LOST_LINE_STOP = "stop"
LOST_LINE_ROTATE = "rotate_search"


@dataclass(frozen=True)
class LineFollowConfig:
    width_px: int = 640
    dead_band_px: float = 20.0
    forward_mm_s: float = 150.0
    turn_deg_s: float = 30.0
    lost_line_policy: str = LOST_LINE_STOP

    def validate(self) -> None:
        if not 0 < self.dead_band_px < self.width_px / 2:
            raise ValueError("dead band must be in (0, width/2)")
        if self.lost_line_policy not in (LOST_LINE_STOP, LOST_LINE_ROTATE):
            raise ValueError(f"unknown lost-line policy {self.lost_line_policy!r}")


def line_follow_step(d: LineDetection, cfg: LineFollowConfig) -> VelocityCommand:
    """Steer toward the line center; straight inside the dead band.

    Column 0 is the robot's left, so a line left of center (x below the
    middle) needs a CCW (positive omega) correction.
    """
    if not d.found:
        if cfg.lost_line_policy == LOST_LINE_ROTATE:
            return VelocityCommand(0.0, 0.0, cfg.turn_deg_s)
        return STOP
    mid = cfg.width_px / 2.0
    if abs(d.x_px - mid) <= cfg.dead_band_px:
        return VelocityCommand(cfg.forward_mm_s, 0.0, 0.0)
    if d.x_px < mid:
        return VelocityCommand(cfg.forward_mm_s, 0.0, cfg.turn_deg_s)
    return VelocityCommand(cfg.forward_mm_s, 0.0, -cfg.turn_deg_s)


def to_body_twist(c: VelocityCommand) -> BodyTwist:
    """Wire units to SI: mm/s -> m/s, deg/s -> rad/s."""
    return BodyTwist(
        c.vx_mm_s * 0.001,
        c.vy_mm_s * 0.001,
        math.radians(c.omega_deg_s),
    )
