"""Kinematics of the three-wheel omni drive and exact pose integration.

Wheel i is mounted at angle a_i (CCW from body +x) at distance d from the
center and drives along the tangent direction (-sin a_i, cos a_i). The
contact-speed map is therefore

    s_i = -sin(a_i) * vx + cos(a_i) * vy + d * omega        [m/s]

and the wheel shaft turns at s_i / wheel_radius. This row convention is the
single source of truth; everything else (forward kinematics, the drivetrain
force model) derives from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import BodyTwist, Pose, RobotParams, WheelSpeeds

# Below this |omega| the constant-twist arc degenerates to a straight line;
# avoids sin(w*dt)/w cancellation.
STRAIGHT_OMEGA_EPS = 1e-9


@dataclass(frozen=True)
class KinematicJacobian:
    """3x3 map from (vx, vy, omega) to wheel contact speeds, plus its inverse."""

    j: np.ndarray
    j_inv: np.ndarray

    @classmethod
    def from_params(cls, params: RobotParams) -> "KinematicJacobian":
        d = params.wheel_distance_m
        j = np.array(
            [[-math.sin(a), math.cos(a), d] for a in params.mount_angles_rad],
            dtype=float,
        )
        det = np.linalg.det(j)
        if abs(det) < 1e-9:
            raise ValueError(
                f"kinematic matrix is singular (det={det:.3e}); "
                "check wheel mount angles"
            )
        return cls(j=j, j_inv=np.linalg.inv(j))


def inverse_kinematics(t: BodyTwist, params: RobotParams) -> WheelSpeeds:
    """Wheel shaft speeds (rad/s, post-gearbox) realizing a body twist."""
    r = params.wheel_radius_m
    d = params.wheel_distance_m
    out = []
    for a in params.mount_angles_rad:
        contact = -math.sin(a) * t.vx + math.cos(a) * t.vy + d * t.omega
        out.append(contact / r)
    return (out[0], out[1], out[2])


def forward_kinematics(w: WheelSpeeds, params: RobotParams) -> BodyTwist:
    """Body twist produced by the given wheel shaft speeds."""
    jac = KinematicJacobian.from_params(params)
    contact = np.asarray(w, dtype=float) * params.wheel_radius_m
    vx, vy, omega = jac.j_inv @ contact
    return BodyTwist(float(vx), float(vy), float(omega))


def integrate_pose(p: Pose, t: BodyTwist, dt: float) -> Pose:
    """Advance a pose by a constant body twist for dt seconds (closed form).

    For |omega| above the straight-line threshold the robot follows a
    circular arc; the update integrates R(theta(t)) @ (vx, vy) exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = t.omega
    if abs(w) < STRAIGHT_OMEGA_EPS:
        dx, dy = dt * t.vx, dt * t.vy
        c, s = math.cos(p.theta), math.sin(p.theta)
        return Pose(p.x + c * dx - s * dy, p.y + s * dx + c * dy, p.theta + w * dt)
    th0 = p.theta
    th1 = th0 + w * dt
    ds = math.sin(th1) - math.sin(th0)
    dc = math.cos(th1) - math.cos(th0)
    x = p.x + (t.vx * ds + t.vy * dc) / w
    y = p.y + (-t.vx * dc + t.vy * ds) / w
    return Pose(x, y, th1)
