"""Scenario documents: arena, robot parameters, and run settings.

Line-oriented UTF-8 format. `#` starts a comment, `[name]` opens a section,
and everything else is `key = value`. Unknown sections or keys are errors so
typos fail loudly. Geometry values are plain space-separated numbers.

Sections:

    [scene]   bounds, spawn, repeated circle / segment / line entries
    [robot]   overrides for any RobotParams field
    [run]     controller, duration_s, dt_physics_s, dt_control_s, seed
    [motor]   overrides for any MotorParams field        (optional)
    [pid]     kp / ki / kd / integral_limit              (optional)
    [sensors] camera + IR settings                       (optional)
    [line_follow]  behavior tuning                       (optional)
"""
from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, fields, replace

from .controllers import LineFollowConfig
from .drivetrain import MotorParams, PidGains
from .kinematics import KinematicJacobian
from .sensors import SensorConfig
from .world import Bounds, Circle, FloorLine, Pose, RobotParams, Wall, WorldScene

CONTROLLERS = ("external", "line_follow", "avoid_obstacles")


class ScenarioError(ValueError):
    """Parse or validation failure, carrying the offending line when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


@dataclass(frozen=True)
class Scenario:
    scene: WorldScene
    robot: RobotParams
    controller: str = "external"
    duration_s: float = 60.0
    dt_physics_s: float = 0.001
    dt_control_s: float = 0.01
    seed: int = 0
    motor: MotorParams = MotorParams()
    pid: PidGains = PidGains()
    sensors: SensorConfig = SensorConfig()
    line_follow: LineFollowConfig = LineFollowConfig()

    def control_substeps(self) -> int:
        return int(round(self.dt_control_s / self.dt_physics_s))

    def validate(self) -> None:
        self.scene.validate()
        self.robot.validate()
        self.motor.validate()
        self.pid.validate()
        self.sensors.validate()
        self.line_follow.validate()
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {self.controller!r}")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ScenarioError("duration_s must be positive")
        if self.dt_physics_s <= 0 or self.dt_control_s <= 0:
            raise ScenarioError("time steps must be positive")
        n = self.control_substeps()
        if n < 1 or abs(n * self.dt_physics_s - self.dt_control_s) > 1e-12:
            raise ScenarioError("dt_control_s must be an integer multiple of dt_physics_s")
        if self.seed < 0:
            raise ScenarioError("seed must be a non-negative integer")
        try:
            KinematicJacobian.from_params(self.robot)
        except ValueError as e:
            raise ScenarioError(str(e)) from e
        if self.line_follow.width_px != self.sensors.camera_width_px:
            raise ScenarioError("line_follow width_px must match the camera width")


def _floats(value: str, n: int | None, key: str, line_no: int) -> list[float]:
    try:
        vals = [float(tok) for tok in value.split()]
    except ValueError:
        raise ScenarioError(f"{key}: expected numbers, got {value!r}", line_no)
    if n is not None and len(vals) != n:
        raise ScenarioError(f"{key}: expected {n} numbers, got {len(vals)}", line_no)
    return vals


_SIMPLE_SECTIONS = {
    "robot": RobotParams,
    "motor": MotorParams,
    "pid": PidGains,
    "sensors": SensorConfig,
    "line_follow": LineFollowConfig,
}

_RUN_KEYS = {"controller", "duration_s", "dt_physics_s", "dt_control_s", "seed"}


def _coerce(cls, section: str, key: str, value: str, line_no: int):
    field_types = {f.name: f.type for f in fields(cls)}
    if key not in field_types:
        raise ScenarioError(f"unknown key {key!r} in [{section}]", line_no)
    t = field_types[key]
    if key == "mount_angles_rad":
        return tuple(_floats(value, 3, key, line_no))
    if t in ("int", int):
        try:
            return int(value)
        except ValueError:
            raise ScenarioError(f"{key}: expected an integer, got {value!r}", line_no)
    if t in ("str", str):
        return value
    return _floats(value, 1, key, line_no)[0]


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    section = None
    bounds = None
    spawn = None
    obstacles: list = []
    floor_lines: list[FloorLine] = []
    overrides: dict[str, dict] = {name: {} for name in _SIMPLE_SECTIONS}
    run: dict = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("scene", "run", *_SIMPLE_SECTIONS):
                raise ScenarioError(f"unknown section [{section}]", line_no)
            continue
        if section is None:
            raise ScenarioError("key before any [section]", line_no)
        if "=" not in line:
            raise ScenarioError(f"expected key = value, got {line!r}", line_no)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()

        if section == "scene":
            if key == "bounds":
                x0, y0, x1, y1 = _floats(value, 4, key, line_no)
                bounds = Bounds(x0, y0, x1, y1)
            elif key == "spawn":
                x, y, deg = _floats(value, 3, key, line_no)
                spawn = Pose(x, y, math.radians(deg))
            elif key == "circle":
                cx, cy, r = _floats(value, 3, key, line_no)
                obstacles.append(Circle(cx, cy, r))
            elif key == "segment":
                x1, y1, x2, y2, t = _floats(value, 5, key, line_no)
                obstacles.append(Wall(x1, y1, x2, y2, t))
            elif key == "line":
                vals = _floats(value, None, key, line_no)
                if len(vals) < 5 or len(vals) % 2 == 0:
                    raise ScenarioError(
                        "line: expected width followed by at least two x y pairs", line_no
                    )
                pts = tuple(zip(vals[1::2], vals[2::2]))
                floor_lines.append(FloorLine(width_m=vals[0], points=pts))
            else:
                raise ScenarioError(f"unknown key {key!r} in [scene]", line_no)
        elif section == "run":
            if key not in _RUN_KEYS:
                raise ScenarioError(f"unknown key {key!r} in [run]", line_no)
            if key == "controller":
                if value not in CONTROLLERS:
                    raise ScenarioError(f"unknown controller {value!r}", line_no)
                run[key] = value
            elif key == "seed":
                try:
                    run[key] = int(value)
                except ValueError:
                    raise ScenarioError(f"seed: expected an integer, got {value!r}", line_no)
            else:
                run[key] = _floats(value, 1, key, line_no)[0]
        else:
            overrides[section][key] = _coerce(
                _SIMPLE_SECTIONS[section], section, key, value, line_no
            )

    if bounds is None:
        raise ScenarioError("missing [scene] bounds")
    if spawn is None:
        raise ScenarioError("missing [scene] spawn")

    scene = WorldScene(
        bounds=bounds,
        spawn=spawn,
        obstacles=tuple(obstacles),
        floor_lines=tuple(floor_lines),
    )
    scenario = Scenario(
        scene=scene,
        robot=replace(RobotParams(), **overrides["robot"]),
        motor=replace(MotorParams(), **overrides["motor"]),
        pid=replace(PidGains(), **overrides["pid"]),
        sensors=replace(SensorConfig(), **overrides["sensors"]),
        line_follow=replace(LineFollowConfig(), **overrides["line_follow"]),
        **run,
    )
    try:
        scenario.validate()
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    return scenario


def load_scenario(path) -> Scenario:
    """Read a scenario file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def packaged_scenario_text(name: str) -> str:
    """Text of a scenario shipped with the package (e.g. 'avoid_demo')."""
    if not name.endswith(".scn"):
        name += ".scn"
    res = importlib.resources.files("omnibot").joinpath("scenarios").joinpath(name)
    return res.read_text(encoding="utf-8")


def packaged_scenario(name: str) -> Scenario:
    return parse_scenario(packaged_scenario_text(name))
