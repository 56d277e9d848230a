"""Deterministic three-wheel omnidirectional robot simulator and control stack."""

from .controllers import AvoidState, LineFollowConfig, VelocityCommand, avoid_step, line_follow_step
from .drivetrain import Drivetrain, MotorParams, MotorState, PidGains, PidState
from .engine import SimEngine, replay_check, run_headless
from .kinematics import forward_kinematics, integrate_pose, inverse_kinematics
from .scenario import Scenario, ScenarioError, load_scenario, packaged_scenario, parse_scenario
from .sensors import CameraFrame, IrRing, LineDetection, detect_line_x, prewitt_gradient
from .world import BodyTwist, Pose, RobotParams, WorldScene, normalize_angle

__version__ = "0.1.0"

__all__ = [
    "AvoidState",
    "BodyTwist",
    "CameraFrame",
    "Drivetrain",
    "IrRing",
    "LineDetection",
    "LineFollowConfig",
    "MotorParams",
    "MotorState",
    "PidGains",
    "PidState",
    "Pose",
    "RobotParams",
    "Scenario",
    "ScenarioError",
    "SimEngine",
    "VelocityCommand",
    "WorldScene",
    "avoid_step",
    "detect_line_x",
    "forward_kinematics",
    "integrate_pose",
    "inverse_kinematics",
    "line_follow_step",
    "load_scenario",
    "normalize_angle",
    "packaged_scenario",
    "parse_scenario",
    "prewitt_gradient",
    "replay_check",
    "run_headless",
]
