"""Core geometric types, robot parameters, and scene queries.

World frame: x right, y up, angles CCW in radians. Body frame: +x is the
robot's forward direction, +y its left. Headings are kept in (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"non-finite angle: {theta!r}")
    r = math.remainder(theta, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


@dataclass(frozen=True)
class Pose:
    """Robot pose in the world frame (meters, radians)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("non-finite pose")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def transform_to_world(self, bx: float, by: float) -> tuple[float, float]:
        """Map a body-frame point into the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.x + c * bx - s * by, self.y + s * bx + c * by


@dataclass(frozen=True)
class BodyTwist:
    """Velocity in the body frame: forward vx, leftward vy (m/s), CCW omega (rad/s)."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.vx) and math.isfinite(self.vy) and math.isfinite(self.omega)):
            raise ValueError("non-finite twist")


# Angular speeds of the three wheels at the wheel (post-gearbox) shaft, rad/s.
# Index i corresponds to RobotParams.mount_angles_rad[i].
WheelSpeeds = tuple[float, float, float]


@dataclass(frozen=True)
class RobotParams:
    """Physical robot parameters. All distances meters, angles radians."""

    wheel_radius_m: float = 0.040
    wheel_distance_m: float = 0.125
    mount_angles_rad: tuple[float, float, float] = (
        math.radians(60.0),
        math.radians(180.0),
        math.radians(300.0),
    )
    gear_ratio: float = 16.0
    mass_kg: float = 11.0
    inertia_z_kg_m2: float = 0.20
    max_speed_m_s: float = 1.0
    max_omega_rad_s: float = 3.0
    body_radius_m: float = 0.225
    # Viscous wheel/ground contact coupling; governs how fast the chassis
    # velocity converges on the rolling velocity of the wheels. Stiff enough
    # that the chassis inertia loads the motors within a control period.
    wheel_traction_n_s_m: float = 600.0

    def validate(self) -> None:
        for name in (
            "wheel_radius_m",
            "wheel_distance_m",
            "gear_ratio",
            "mass_kg",
            "inertia_z_kg_m2",
            "max_speed_m_s",
            "max_omega_rad_s",
            "body_radius_m",
            "wheel_traction_n_s_m",
        ):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"robot parameter {name} must be positive, got {v!r}")
        if len(self.mount_angles_rad) != 3:
            raise ValueError("exactly three wheel mount angles required")
        angles = [normalize_angle(a) for a in self.mount_angles_rad]
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(normalize_angle(angles[i] - angles[j])) < 1e-9:
                    raise ValueError("wheel mount angles must be pairwise distinct")


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def signed_distance(self, px: float, py: float) -> float:
        return math.hypot(px - self.cx, py - self.cy) - self.r

    def normal_at(self, px: float, py: float) -> tuple[float, float]:
        dx, dy = px - self.cx, py - self.cy
        n = math.hypot(dx, dy)
        if n < 1e-12:
            return 1.0, 0.0
        return dx / n, dy / n


@dataclass(frozen=True)
class Wall:
    """Thick line segment (capsule footprint)."""

    x1: float
    y1: float
    x2: float
    y2: float
    thickness: float

    def _closest_on_axis(self, px: float, py: float) -> tuple[float, float]:
        ax, ay = self.x1, self.y1
        ux, uy = self.x2 - ax, self.y2 - ay
        L2 = ux * ux + uy * uy
        if L2 < 1e-18:
            return ax, ay
        t = clamp(((px - ax) * ux + (py - ay) * uy) / L2, 0.0, 1.0)
        return ax + t * ux, ay + t * uy

    def signed_distance(self, px: float, py: float) -> float:
        qx, qy = self._closest_on_axis(px, py)
        return math.hypot(px - qx, py - qy) - 0.5 * self.thickness

    def normal_at(self, px: float, py: float) -> tuple[float, float]:
        qx, qy = self._closest_on_axis(px, py)
        dx, dy = px - qx, py - qy
        n = math.hypot(dx, dy)
        if n < 1e-12:
            # On the axis itself; fall back to a perpendicular.
            ux, uy = self.x2 - self.x1, self.y2 - self.y1
            L = math.hypot(ux, uy)
            if L < 1e-12:
                return 1.0, 0.0
            return -uy / L, ux / L
        return dx / n, dy / n


Obstacle = Circle | Wall


@dataclass(frozen=True)
class FloorLine:
    """Painted floor polyline the camera can see. Not an obstacle."""

    width_m: float
    points: tuple[tuple[float, float], ...]

    def validate(self) -> None:
        if self.width_m <= 0:
            raise ValueError("floor line width must be positive")
        if len(self.points) < 2:
            raise ValueError("floor line needs at least 2 vertices")


@dataclass(frozen=True)
class Bounds:
    x0: float
    y0: float
    x1: float
    y1: float

    def validate(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("bounds must satisfy x0 < x1 and y0 < y1")

    def contains(self, px: float, py: float) -> bool:
        return self.x0 <= px <= self.x1 and self.y0 <= py <= self.y1

    def interior_clearance(self, px: float, py: float) -> float:
        """Distance to the boundary rectangle; 0 when on or outside it."""
        d = min(px - self.x0, self.x1 - px, py - self.y0, self.y1 - py)
        return max(0.0, d)


@dataclass(frozen=True)
class WorldScene:
    bounds: Bounds
    spawn: Pose
    obstacles: tuple[Obstacle, ...] = ()
    floor_lines: tuple[FloorLine, ...] = ()

    def validate(self) -> None:
        self.bounds.validate()
        for line in self.floor_lines:
            line.validate()
        for ob in self.obstacles:
            if isinstance(ob, Circle) and ob.r <= 0:
                raise ValueError("circle radius must be positive")
            if isinstance(ob, Wall) and ob.thickness <= 0:
                raise ValueError("segment thickness must be positive")
        if not self.bounds.contains(self.spawn.x, self.spawn.y):
            raise ValueError("spawn outside bounds")
        for ob in self.obstacles:
            if ob.signed_distance(self.spawn.x, self.spawn.y) <= 0:
                raise ValueError("spawn inside obstacle")


def point_obstacle_distance(px: float, py: float, scene: WorldScene) -> float:
    """Distance from a point to the nearest obstacle boundary or scene bound.

    Returns 0 when the point lies on or inside an obstacle (or on/outside
    the bounds). 1-Lipschitz in the point.
    """
    if not (math.isfinite(px) and math.isfinite(py)):
        raise ValueError("non-finite point")
    d = scene.bounds.interior_clearance(px, py)
    for ob in scene.obstacles:
        d = min(d, max(0.0, ob.signed_distance(px, py)))
        if d == 0.0:
            return 0.0
    return d


def nearest_contact(px: float, py: float, scene: WorldScene) -> tuple[float, float, float]:
    """Signed clearance and outward normal of the closest obstacle/bound.

    Negative clearance means the point is inside that obstacle (or outside
    the bounds). The normal points from the surface toward the point, i.e.
    the direction to push the point to increase clearance.
    """
    b = scene.bounds
    # Bounds act as four inward-facing walls.
    best = px - b.x0
    nx, ny = 1.0, 0.0
    for d, cnx, cny in (
        (b.x1 - px, -1.0, 0.0),
        (py - b.y0, 0.0, 1.0),
        (b.y1 - py, 0.0, -1.0),
    ):
        if d < best:
            best, nx, ny = d, cnx, cny
    for ob in scene.obstacles:
        d = ob.signed_distance(px, py)
        if d < best:
            best = d
            nx, ny = ob.normal_at(px, py)
    return best, nx, ny


# ---------------------------------------------------------------------------
# Ray queries (used by the IR sensor ring)

def _ray_circle(ox, oy, dx, dy, cx, cy, r):
    """Smallest t >= 0 with |o + t d - c| = r, or None."""
    mx, my = ox - cx, oy - cy
    b = mx * dx + my * dy
    c = mx * mx + my * my - r * r
    if c <= 0.0:
        return 0.0  # origin on or inside the circle
    disc = b * b - c
    if disc < 0.0:
        return None
    t = -b - math.sqrt(disc)
    return t if t >= 0.0 else None


def _ray_segment(ox, oy, dx, dy, ax, ay, bx, by):
    """Smallest t >= 0 where the ray crosses segment ab, or None."""
    ex, ey = bx - ax, by - ay
    denom = dx * ey - dy * ex
    if abs(denom) < 1e-15:
        return None
    t = ((ax - ox) * ey - (ay - oy) * ex) / denom
    s = ((ax - ox) * dy - (ay - oy) * dx) / denom
    if t >= 0.0 and 0.0 <= s <= 1.0:
        return t
    return None


def _ray_capsule(ox, oy, dx, dy, wall: Wall):
    h = 0.5 * wall.thickness
    if wall.signed_distance(ox, oy) <= 0.0:
        return 0.0
    best = None
    for cx, cy in ((wall.x1, wall.y1), (wall.x2, wall.y2)):
        t = _ray_circle(ox, oy, dx, dy, cx, cy, h)
        if t is not None and (best is None or t < best):
            best = t
    ux, uy = wall.x2 - wall.x1, wall.y2 - wall.y1
    L = math.hypot(ux, uy)
    if L > 1e-12:
        nx, ny = -uy / L, ux / L
        for sgn in (1.0, -1.0):
            t = _ray_segment(
                ox, oy, dx, dy,
                wall.x1 + sgn * h * nx, wall.y1 + sgn * h * ny,
                wall.x2 + sgn * h * nx, wall.y2 + sgn * h * ny,
            )
            if t is not None and (best is None or t < best):
                best = t
    return best


def _ray_bounds(ox, oy, dx, dy, b: Bounds):
    """Distance to the first crossing of the boundary rectangle's edges."""
    best = None
    for ax, ay, bx, by in (
        (b.x0, b.y0, b.x1, b.y0),
        (b.x1, b.y0, b.x1, b.y1),
        (b.x1, b.y1, b.x0, b.y1),
        (b.x0, b.y1, b.x0, b.y0),
    ):
        t = _ray_segment(ox, oy, dx, dy, ax, ay, bx, by)
        if t is not None and (best is None or t < best):
            best = t
    return best


def ray_scene_distance(
    ox: float, oy: float, dx: float, dy: float, scene: WorldScene, max_range: float
) -> float:
    """Distance along a unit-direction ray to the first obstacle or bound hit.

    Returns max_range when nothing is hit within range.
    """
    best = max_range
    t = _ray_bounds(ox, oy, dx, dy, scene.bounds)
    if t is not None:
        best = min(best, t)
    for ob in scene.obstacles:
        if isinstance(ob, Circle):
            t = _ray_circle(ox, oy, dx, dy, ob.cx, ob.cy, ob.r)
        else:
            t = _ray_capsule(ox, oy, dx, dy, ob)
        if t is not None and t < best:
            best = t
    return best
