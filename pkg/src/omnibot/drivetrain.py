"""DC motor model, per-wheel PID speed loops, and planar rigid-body dynamics.

Each wheel is driven by a brushed DC motor through a lossless gearbox. The
electrical loop (Kirchhoff) and the mechanical balance are

    L di/dt = V - R i - k_e w          J dw/dt = k_t i - b w - tau_load

stepped with an implicit Euler update solved in closed form (the system is
linear in (i, w), so one step is a 2x2 solve). Implicit stepping keeps the
stiff electrical loop stable at the 1 ms physics step and never increases
the stored energy 0.5 J w^2 + 0.5 L i^2 when the motor is unpowered.

The wheel/ground contact transmits force through a stiff viscous coupling:
the force on the chassis is proportional to the slip between the wheel's
rolling speed and the chassis speed at the contact point. The reaction of
that force, reflected through the gearbox, is the motor's load torque, so
energy flows consistently between the electrical and mechanical sides. In
steady state the slip vanishes and the chassis twist equals the forward
kinematics of the wheel speeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import inverse_kinematics
from .world import BodyTwist, Pose, RobotParams, clamp, normalize_angle

MAX_PHYSICS_DT = 0.002  # stability bound for the motor/body steps


@dataclass(frozen=True)
class MotorParams:
    """Brushed DC motor constants (SI). k_e == k_t for a consistent model."""

    resistance_ohm: float = 0.46
    inductance_h: float = 0.33e-3
    back_emf_v_s_rad: float = 0.0302
    torque_nm_a: float = 0.0302
    rotor_inertia_kg_m2: float = 5.8e-6
    viscous_friction_nm_s: float = 1.0e-5
    max_voltage_v: float = 24.0

    def validate(self) -> None:
        for name in (
            "resistance_ohm",
            "inductance_h",
            "back_emf_v_s_rad",
            "torque_nm_a",
            "rotor_inertia_kg_m2",
            "viscous_friction_nm_s",
            "max_voltage_v",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"motor parameter {name} must be positive, got {v!r}")

    def steady_state_speed(self, voltage_v: float) -> float:
        """Analytic no-load steady state: k_t V / (R b + k_e k_t)."""
        return (
            self.torque_nm_a
            * voltage_v
            / (
                self.resistance_ohm * self.viscous_friction_nm_s
                + self.back_emf_v_s_rad * self.torque_nm_a
            )
        )


@dataclass(frozen=True)
class MotorState:
    current_a: float = 0.0
    omega_rad_s: float = 0.0  # motor shaft, pre-gearbox
    applied_voltage_v: float = 0.0


def motor_step(
    s: MotorState,
    p: MotorParams,
    voltage_v: float,
    load_torque_nm: float,
    dt_s: float,
) -> MotorState:
    """One implicit Euler step of the motor ODEs (closed-form 2x2 solve)."""
    if not (math.isfinite(voltage_v) and math.isfinite(load_torque_nm)):
        raise ValueError("non-finite motor input")
    if not (math.isfinite(s.current_a) and math.isfinite(s.omega_rad_s)):
        raise ValueError("non-finite motor state")
    if not (0.0 < dt_s <= MAX_PHYSICS_DT):
        raise ValueError(f"motor step dt must be in (0, {MAX_PHYSICS_DT}] s")
    v = clamp(voltage_v, -p.max_voltage_v, p.max_voltage_v)
    L, R = p.inductance_h, p.resistance_ohm
    J, b = p.rotor_inertia_kg_m2, p.viscous_friction_nm_s
    # (1 + dt R/L) i' + (dt k_e/L) w' = i + dt V/L
    # (-dt k_t/J) i' + (1 + dt b/J) w' = w - dt tau/J
    a11 = 1.0 + dt_s * R / L
    a12 = dt_s * p.back_emf_v_s_rad / L
    a21 = -dt_s * p.torque_nm_a / J
    a22 = 1.0 + dt_s * b / J
    r1 = s.current_a + dt_s * v / L
    r2 = s.omega_rad_s - dt_s * load_torque_nm / J
    det = a11 * a22 - a12 * a21
    i = (r1 * a22 - a12 * r2) / det
    w = (a11 * r2 - r1 * a21) / det
    return MotorState(current_a=i, omega_rad_s=w, applied_voltage_v=v)


@dataclass(frozen=True)
class PidGains:
    """Speed-loop gains in volts per rad/s of motor-shaft error."""

    kp: float = 0.05
    ki: float = 0.3
    kd: float = 0.0
    integral_limit: float = 1000.0  # |integral| clamp, (rad/s)*s

    def validate(self) -> None:
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("PID gains must be non-negative")
        if not (math.isfinite(self.integral_limit) and self.integral_limit > 0):
            raise ValueError("integral limit must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    saturated: bool = False


def pid_step(
    g: PidGains,
    st: PidState,
    setpoint: float,
    measured: float,
    dt_s: float,
    out_min: float,
    out_max: float,
) -> tuple[float, PidState]:
    """One PID update with conditional anti-windup.

    The integral freezes whenever the unsaturated output exceeds a limit and
    the current error would push it further in the same direction.
    """
    if dt_s <= 0 or out_min >= out_max:
        raise ValueError("pid_step needs dt > 0 and out_min < out_max")
    e = setpoint - measured
    deriv = (e - st.prev_error) / dt_s
    held = g.kp * e + g.ki * st.integral + g.kd * deriv
    if (held > out_max and e > 0) or (held < out_min and e < 0):
        integral = st.integral  # integrating would dig deeper into saturation
    else:
        integral = clamp(st.integral + e * dt_s, -g.integral_limit, g.integral_limit)
    unsat = g.kp * e + g.ki * integral + g.kd * deriv
    command = clamp(unsat, out_min, out_max)
    saturated = unsat > out_max or unsat < out_min
    return command, PidState(integral=integral, prev_error=e, saturated=saturated)


@dataclass(frozen=True)
class RigidBodyState:
    """Chassis pose plus world-frame linear velocity and yaw rate."""

    pose: Pose
    vx_world: float = 0.0
    vy_world: float = 0.0
    omega: float = 0.0

    def body_twist(self) -> BodyTwist:
        c, s = math.cos(self.pose.theta), math.sin(self.pose.theta)
        return BodyTwist(
            c * self.vx_world + s * self.vy_world,
            -s * self.vx_world + c * self.vy_world,
            self.omega,
        )


def body_step(
    rb: RigidBodyState,
    wheel_torques: tuple[float, float, float],
    params: RobotParams,
    dt_s: float,
) -> RigidBodyState:
    """Semi-implicit Euler step of the chassis under wheel drive forces.

    Wheel i pushes the chassis with F_i = tau_i / wheel_radius along its
    drive tangent (-sin a_i, cos a_i) in the body frame and contributes
    d * F_i of yaw torque.
    """
    if not (0.0 < dt_s <= MAX_PHYSICS_DT):
        raise ValueError(f"body step dt must be in (0, {MAX_PHYSICS_DT}] s")
    r = params.wheel_radius_m
    fx_b = fy_b = tz = 0.0
    for a, tau in zip(params.mount_angles_rad, wheel_torques):
        f = tau / r
        fx_b += -math.sin(a) * f
        fy_b += math.cos(a) * f
        tz += params.wheel_distance_m * f
    c, s = math.cos(rb.pose.theta), math.sin(rb.pose.theta)
    fx_w = c * fx_b - s * fy_b
    fy_w = s * fx_b + c * fy_b
    vx = rb.vx_world + dt_s * fx_w / params.mass_kg
    vy = rb.vy_world + dt_s * fy_w / params.mass_kg
    om = rb.omega + dt_s * tz / params.inertia_z_kg_m2
    pose = Pose(
        rb.pose.x + dt_s * vx,
        rb.pose.y + dt_s * vy,
        normalize_angle(rb.pose.theta + dt_s * om),
    )
    return RigidBodyState(pose=pose, vx_world=vx, vy_world=vy, omega=om)


@dataclass(frozen=True)
class WheelTelemetry:
    """Per-wheel snapshot published every control tick (wheel-shaft rad/s)."""

    setpoint_rad_s: float
    speed_rad_s: float
    current_a: float
    voltage_v: float


class Drivetrain:
    """Three motors, their speed loops, and the chassis they drive.

    Single-owner mutable state: exactly one caller may step it. Telemetry
    values are immutable snapshots.
    """

    def __init__(
        self,
        robot: RobotParams,
        motor: MotorParams | None = None,
        gains: PidGains | None = None,
        *,
        dt_physics_s: float = 0.001,
        dt_control_s: float = 0.01,
        spawn: Pose | None = None,
    ):
        robot.validate()
        self.robot = robot
        self.motor_params = motor if motor is not None else MotorParams()
        self.motor_params.validate()
        base_gains = gains if gains is not None else PidGains()
        base_gains.validate()
        self.gains: list[PidGains] = [base_gains] * 3
        self.dt_physics_s = dt_physics_s
        self.dt_control_s = dt_control_s
        self.substeps = int(round(dt_control_s / dt_physics_s))
        if self.substeps < 1 or abs(self.substeps * dt_physics_s - dt_control_s) > 1e-12:
            raise ValueError("dt_control_s must be an integer multiple of dt_physics_s")
        self.rb = RigidBodyState(pose=spawn if spawn is not None else Pose())
        self.motors = [MotorState()] * 3
        self.pids = [PidState()] * 3
        # Precompute drive-direction rows (-sin a, cos a, d).
        d = robot.wheel_distance_m
        self._rows = [
            (-math.sin(a), math.cos(a), d) for a in robot.mount_angles_rad
        ]

    def set_pid_gains(self, wheel: int, g: PidGains) -> None:
        """Replace one wheel's gains; takes effect at the next control tick."""
        if not 0 <= wheel <= 2:
            raise IndexError(f"wheel index out of range: {wheel}")
        g.validate()
        self.gains[wheel] = g
        self.pids[wheel] = PidState()

    def get_pid_gains(self, wheel: int) -> PidGains:
        if not 0 <= wheel <= 2:
            raise IndexError(f"wheel index out of range: {wheel}")
        return self.gains[wheel]

    def clamp_setpoint(self, t: BodyTwist) -> BodyTwist:
        """Scale the linear velocity to max_speed and clamp omega."""
        speed = math.hypot(t.vx, t.vy)
        vx, vy = t.vx, t.vy
        if speed > self.robot.max_speed_m_s:
            k = self.robot.max_speed_m_s / speed
            vx, vy = vx * k, vy * k
        omega = clamp(t.omega, -self.robot.max_omega_rad_s, self.robot.max_omega_rad_s)
        return BodyTwist(vx, vy, omega)

    def drive_tick(self, setpoint: BodyTwist) -> list[WheelTelemetry]:
        """Run one control period: PID once, physics sub-stepped.

        Returns per-wheel telemetry sampled at the end of the period.
        """
        sp = self.clamp_setpoint(setpoint)
        wheel_set = inverse_kinematics(sp, self.robot)
        G = self.robot.gear_ratio
        vmax = self.motor_params.max_voltage_v
        volts = []
        for k in range(3):
            u, self.pids[k] = pid_step(
                self.gains[k],
                self.pids[k],
                wheel_set[k] * G,
                self.motors[k].omega_rad_s,
                self.dt_control_s,
                -vmax,
                vmax,
            )
            volts.append(u)

        r = self.robot.wheel_radius_m
        c_tr = self.robot.wheel_traction_n_s_m
        for _ in range(self.substeps):
            tw = self.rb.body_twist()
            torques = []
            for k in range(3):
                row = self._rows[k]
                v_body = row[0] * tw.vx + row[1] * tw.vy + row[2] * tw.omega
                v_wheel = self.motors[k].omega_rad_s / G * r
                force = c_tr * (v_wheel - v_body)
                tau_wheel = force * r
                self.motors[k] = motor_step(
                    self.motors[k],
                    self.motor_params,
                    volts[k],
                    tau_wheel / G,
                    self.dt_physics_s,
                )
                torques.append(tau_wheel)
            self.rb = body_step(self.rb, tuple(torques), self.robot, self.dt_physics_s)

        return [
            WheelTelemetry(
                setpoint_rad_s=wheel_set[k],
                speed_rad_s=self.motors[k].omega_rad_s / G,
                current_a=self.motors[k].current_a,
                voltage_v=self.motors[k].applied_voltage_v,
            )
            for k in range(3)
        ]
