"""Simulated sensor suite: IR distance ring, bumper, and floor camera.

The camera is an orthographic top-down view of a floor patch ahead of the
robot. Only painted floor lines are visible; everything else renders as
uniform background. The line detector mirrors the classic "X output"
convention: column 0 is the robot's left, and a detected line reports the
image column of its center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import (
    Pose,
    RobotParams,
    WorldScene,
    clamp,
    point_obstacle_distance,
    ray_scene_distance,
)

IR_COUNT = 9
IR_SPACING_RAD = math.radians(40.0)

# Hyperbolic ranger curve v = k / (d + d0), clamped to [0, v_max], calibrated
# so a 0.30 m standoff reads exactly 0.7 V.
IR_CURVE_D0_M = 0.04
IR_CURVE_V_MAX = 2.55
IR_CAL_DISTANCE_M = 0.30
IR_CAL_VOLTAGE = 0.7
IR_CURVE_K = IR_CAL_VOLTAGE * (IR_CAL_DISTANCE_M + IR_CURVE_D0_M)

# Orthographic floor patch seen by the camera, in the body frame: spans
# PATCH_NEAR..PATCH_NEAR+PATCH_DEPTH ahead of the center, PATCH_WIDTH across.
CAMERA_PATCH_NEAR_M = 0.1
CAMERA_PATCH_DEPTH_M = 0.3
CAMERA_PATCH_WIDTH_M = 0.4

CAMERA_BACKGROUND = 30
CAMERA_LINE_INTENSITY = 220

# 8x the worst lower-half column sum of the horizontal-gradient magnitudes
# on a sigma=2 noise calibration frame (640x480); see tests for the recipe.
LINE_STRENGTH_THRESHOLD = 9300.0


@dataclass(frozen=True)
class IrRing:
    """Nine rangers on the body perimeter, sensor k looking out at k*40 deg CCW."""

    max_range_m: float = 0.8
    mount_radius_m: float = 0.225

    count: int = IR_COUNT

    def bearings(self) -> tuple[float, ...]:
        return tuple(k * IR_SPACING_RAD for k in range(IR_COUNT))


@dataclass(frozen=True)
class IrReading:
    distance_m: float
    voltage_v: float


def voltage_curve(distance_m: float) -> float:
    """Ranger voltage for a target distance; monotone non-increasing."""
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    return clamp(IR_CURVE_K / (distance_m + IR_CURVE_D0_M), 0.0, IR_CURVE_V_MAX)


def raycast_ir(pose: Pose, ring: IrRing, scene: WorldScene) -> tuple[IrReading, ...]:
    """Cast all nine rays from the body perimeter along their bearings."""
    readings = []
    for bearing in ring.bearings():
        ang = pose.theta + bearing
        dx, dy = math.cos(ang), math.sin(ang)
        ox = pose.x + ring.mount_radius_m * dx
        oy = pose.y + ring.mount_radius_m * dy
        d = ray_scene_distance(ox, oy, dx, dy, scene, ring.max_range_m)
        readings.append(IrReading(distance_m=d, voltage_v=voltage_curve(d)))
    return tuple(readings)


def bumper(pose: Pose, params: RobotParams, scene: WorldScene) -> bool:
    """True when the circular footprint touches any obstacle or bound."""
    return point_obstacle_distance(pose.x, pose.y, scene) <= params.body_radius_m


@dataclass(frozen=True)
class CameraFrame:
    """Grayscale frame, row 0 at the far edge of the patch, column 0 left."""

    width_px: int
    height_px: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        if self.pixels.shape != (self.height_px, self.width_px):
            raise ValueError("pixel buffer shape does not match frame dims")


@dataclass(frozen=True)
class LineDetection:
    found: bool
    x_px: float = 0.0
    strength: float = 0.0


_grid_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _patch_axes(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame x per image row (descending) and y per column (descending)."""
    key = (width, height)
    if key not in _grid_cache:
        rows = (np.arange(height) + 0.5) / height
        cols = (np.arange(width) + 0.5) / width
        xb = CAMERA_PATCH_NEAR_M + CAMERA_PATCH_DEPTH_M * (1.0 - rows)
        yb = CAMERA_PATCH_WIDTH_M * (0.5 - cols)
        _grid_cache[key] = (xb, yb)
    return _grid_cache[key]


def _paint_segment(img, xb, yb, ax, ay, bx, by, radius):
    """Mark pixels within radius of a body-frame segment."""
    # xb and yb are strictly decreasing, so bounding-box clipping keeps a
    # contiguous row/column window.
    lox, hix = min(ax, bx) - radius, max(ax, bx) + radius
    loy, hiy = min(ay, by) - radius, max(ay, by) + radius
    r0 = int(np.searchsorted(-xb, -hix, side="left"))
    r1 = int(np.searchsorted(-xb, -lox, side="right"))
    c0 = int(np.searchsorted(-yb, -hiy, side="left"))
    c1 = int(np.searchsorted(-yb, -loy, side="right"))
    if r0 >= r1 or c0 >= c1:
        return
    X = xb[r0:r1, None]
    Y = yb[None, c0:c1]
    ux, uy = bx - ax, by - ay
    L2 = ux * ux + uy * uy
    if L2 < 1e-18:
        dx = X - ax
        dy = Y - ay
    else:
        t = np.clip(((X - ax) * ux + (Y - ay) * uy) / L2, 0.0, 1.0)
        dx = X - (ax + t * ux)
        dy = Y - (ay + t * uy)
    mask = dx * dx + dy * dy <= radius * radius
    sub = img[r0:r1, c0:c1]
    sub[mask] = CAMERA_LINE_INTENSITY


def render_camera(
    pose: Pose,
    scene: WorldScene,
    width: int,
    height: int,
    *,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> CameraFrame:
    """Orthographic top-down rendering of the floor patch ahead of the robot."""
    if width < 1 or height < 1:
        raise ValueError("camera dims must be positive")
    img = np.full((height, width), CAMERA_BACKGROUND, dtype=np.uint8)
    if scene.floor_lines:
        xb, yb = _patch_axes(width, height)
        c, s = math.cos(pose.theta), math.sin(pose.theta)
        for line in scene.floor_lines:
            half = 0.5 * line.width_m
            pts = line.points
            for (awx, awy), (bwx, bwy) in zip(pts[:-1], pts[1:]):
                # segment endpoints into the body frame
                dxa, dya = awx - pose.x, awy - pose.y
                dxb, dyb = bwx - pose.x, bwy - pose.y
                ax, ay = c * dxa + s * dya, -s * dxa + c * dya
                bx, by = c * dxb + s * dyb, -s * dxb + c * dyb
                _paint_segment(img, xb, yb, ax, ay, bx, by, half)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise requires a seeded generator")
        noisy = img.astype(np.float64) + rng.normal(0.0, noise_sigma, img.shape)
        img = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return CameraFrame(width_px=width, height_px=height, pixels=img)


def prewitt_gradient(f: CameraFrame) -> np.ndarray:
    """Magnitude of the horizontal Prewitt response (vertical edges).

    Integer arithmetic; border pixels are 0.
    """
    if f.width_px < 3 or f.height_px < 3:
        raise ValueError("frame too small for a 3x3 kernel")
    px = f.pixels.astype(np.int32)
    out = np.zeros_like(px)
    col_diff = px[:, 2:] - px[:, :-2]
    out[1:-1, 1:-1] = np.abs(col_diff[:-2] + col_diff[1:-1] + col_diff[2:])
    return out


def _edge_centroid(s: np.ndarray, j: int) -> float:
    lo, hi = max(0, j - 1), min(len(s) - 1, j + 1)
    w = s[lo : hi + 1].astype(np.float64)
    total = w.sum()
    if total <= 0:
        return float(j)
    return float((w * np.arange(lo, hi + 1)).sum() / total)


def detect_line_x(
    f: CameraFrame, threshold: float = LINE_STRENGTH_THRESHOLD
) -> LineDetection:
    """Locate the floor line's center column from the lower half of the frame.

    Column sums of the gradient magnitudes peak at the line's two edges; the
    reported x is the midpoint of the edge pair (sub-pixel refined). Both
    peaks must clear the strength threshold for a detection.
    """
    if f.width_px < 3 or f.height_px < 3:
        return LineDetection(found=False)
    h2 = f.height_px // 2
    # Gradient of the lower half only (one guard row above; the bottom border
    # row and side border columns are zero and contribute nothing).
    px = f.pixels[h2 - 1 :].astype(np.int32)
    col_diff = px[:, 2:] - px[:, :-2]
    resp = np.abs(col_diff[:-2] + col_diff[1:-1] + col_diff[2:])
    sums = np.zeros(f.width_px, dtype=np.int64)
    sums[1:-1] = resp.sum(axis=0, dtype=np.int64)
    j1 = int(np.argmax(sums))
    if sums[j1] <= 0:
        return LineDetection(found=False)
    masked = sums.copy()
    masked[max(0, j1 - 2) : j1 + 3] = -1
    j2 = int(np.argmax(masked))
    if masked[j2] < 0:
        return LineDetection(found=False)
    if min(sums[j1], sums[j2]) < threshold:
        return LineDetection(found=False)
    e1 = _edge_centroid(sums, j1)
    e2 = _edge_centroid(sums, j2)
    x = 0.5 * (e1 + e2)
    jlo, jhi = min(j1, j2), max(j1, j2)
    band_cols = slice(max(jlo, 1) - 1, min(jhi, f.width_px - 2))
    band_sum = int(resp[:, band_cols].sum())
    area = (f.height_px - h2) * (jhi - jlo + 1)
    return LineDetection(found=True, x_px=x, strength=band_sum / area)


def frame_to_pgm(f: CameraFrame) -> bytes:
    """Serialize as binary PGM (P5, maxval 255)."""
    header = f"P5\n{f.width_px} {f.height_px}\n255\n".encode("ascii")
    return header + f.pixels.tobytes()


def pgm_to_frame(data: bytes) -> CameraFrame:
    """Parse a binary PGM produced by frame_to_pgm."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not a supported P5 PGM")
    w, h = (int(v) for v in parts[1].split())
    px = np.frombuffer(parts[3][: w * h], dtype=np.uint8).reshape(h, w)
    return CameraFrame(width_px=w, height_px=h, pixels=px.copy())


@dataclass(frozen=True)
class SensorConfig:
    """Per-scenario sensor settings (noise defaults to off)."""

    camera_width_px: int = 640
    camera_height_px: int = 480
    ir_max_range_m: float = 0.8
    camera_noise_sigma: float = 0.0
    ir_noise_sigma: float = 0.0
    line_threshold: float = LINE_STRENGTH_THRESHOLD

    def validate(self) -> None:
        if self.camera_width_px not in (320, 640):
            raise ValueError("camera width must be 320 or 640")
        if self.camera_height_px < 3:
            raise ValueError("camera height too small")
        if self.ir_max_range_m <= 0:
            raise ValueError("ir_max_range_m must be positive")
        if self.camera_noise_sigma < 0 or self.ir_noise_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")


class SensorSuite:
    """Bundles the ring + camera, with the optional seeded noise hook."""

    def __init__(self, params: RobotParams, config: SensorConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.ring = IrRing(
            max_range_m=config.ir_max_range_m, mount_radius_m=params.body_radius_m
        )
        self.params = params
        self._rng = np.random.default_rng(seed)

    def read_ir(self, pose: Pose, scene: WorldScene) -> tuple[IrReading, ...]:
        readings = raycast_ir(pose, self.ring, scene)
        sigma = self.config.ir_noise_sigma
        if sigma > 0.0:
            readings = tuple(
                IrReading(
                    distance_m=r.distance_m,
                    voltage_v=clamp(
                        r.voltage_v + float(self._rng.normal(0.0, sigma)),
                        0.0,
                        IR_CURVE_V_MAX,
                    ),
                )
                for r in readings
            )
        return readings

    def read_bumper(self, pose: Pose, scene: WorldScene) -> bool:
        return bumper(pose, self.params, scene)

    def read_camera(self, pose: Pose, scene: WorldScene) -> CameraFrame:
        return render_camera(
            pose,
            scene,
            self.config.camera_width_px,
            self.config.camera_height_px,
            noise_sigma=self.config.camera_noise_sigma,
            rng=self._rng if self.config.camera_noise_sigma > 0 else None,
        )
