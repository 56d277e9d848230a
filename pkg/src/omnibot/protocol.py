"""Newline-delimited JSON wire protocol.

Every message is one JSON object per line with an "op" field. Requests may
carry a client correlation id in "seq", echoed verbatim in the response.
Velocities travel in the legacy units (mm/s, deg/s); ranger values in volts;
camera frames as base64-encoded binary PGM.
"""
from __future__ import annotations

import base64
import json
import math

OPS = frozenset(
    {
        "hello",
        "set_velocity",
        "get_distances",
        "get_bumper",
        "get_frame",
        "set_pid",
        "get_pid",
        "select_controller",
        "reset",
        "subscribe_telemetry",
        "telemetry",
        "frame",
        "ack",
        "error",
    }
)

SERVER_SENT = frozenset({"telemetry", "frame", "ack", "error"})

DEFAULT_BIND = "127.0.0.1:8081"
BIND_ENV_VAR = "OMNIBOT_BIND"


class ProtocolError(Exception):
    """Malformed or invalid message; the reason goes back to the client."""


def encode(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":")) + "\n"


def parse_line(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"parse: {e.msg}") from e
    if not isinstance(msg, dict):
        raise ProtocolError("parse: message must be a JSON object")
    op = msg.get("op")
    if not isinstance(op, str):
        raise ProtocolError("parse: missing op")
    if op not in OPS:
        raise ProtocolError(f"unknown op {op!r}")
    return msg


def echo_seq(msg: dict):
    seq = msg.get("seq")
    return seq if isinstance(seq, (int, str)) else None


def number(msg: dict, key: str) -> float:
    v = msg.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ProtocolError(f"{key}: expected a finite number")
    return float(v)


def integer(msg: dict, key: str) -> int:
    v = msg.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProtocolError(f"{key}: expected an integer")
    return v


def ack(seq, **payload) -> dict:
    return {"op": "ack", "seq": seq, **payload}


def error(seq, reason: str) -> dict:
    return {"op": "error", "seq": seq, "reason": reason}


def frame_message(seq, camera, detection) -> dict:
    from .sensors import frame_to_pgm

    return {
        "op": "frame",
        "seq": seq,
        "width": camera.width_px,
        "height": camera.height_px,
        "pgm_base64": base64.b64encode(frame_to_pgm(camera)).decode("ascii"),
        "line": {
            "found": detection.found,
            "x_px": detection.x_px,
            "strength": detection.strength,
        },
    }


def scene_description(scenario) -> dict:
    """Static world geometry, sent once in the hello response."""
    from .sensors import IR_CURVE_D0_M, IR_CURVE_K, IR_CURVE_V_MAX
    from .world import Circle

    scene = scenario.scene
    obstacles = []
    for ob in scene.obstacles:
        if isinstance(ob, Circle):
            obstacles.append({"type": "circle", "cx": ob.cx, "cy": ob.cy, "r": ob.r})
        else:
            obstacles.append(
                {
                    "type": "segment",
                    "x1": ob.x1,
                    "y1": ob.y1,
                    "x2": ob.x2,
                    "y2": ob.y2,
                    "thickness": ob.thickness,
                }
            )
    return {
        "bounds": [scene.bounds.x0, scene.bounds.y0, scene.bounds.x1, scene.bounds.y1],
        "obstacles": obstacles,
        "floor_lines": [
            {"width": fl.width_m, "points": [[p[0], p[1]] for p in fl.points]}
            for fl in scene.floor_lines
        ],
        "spawn": {"x": scene.spawn.x, "y": scene.spawn.y, "theta": scene.spawn.theta},
        "robot": {
            "body_radius_m": scenario.robot.body_radius_m,
            "max_speed_m_s": scenario.robot.max_speed_m_s,
            "max_omega_rad_s": scenario.robot.max_omega_rad_s,
        },
        "camera": {
            "width_px": scenario.sensors.camera_width_px,
            "height_px": scenario.sensors.camera_height_px,
        },
        "ir": {
            "count": 9,
            "spacing_deg": 40.0,
            "alert_voltage": 0.7,
            # ranger curve v = k/(d + d0) clamped to v_max, so clients can
            # draw rays with physical lengths
            "curve": {
                "k": IR_CURVE_K,
                "d0": IR_CURVE_D0_M,
                "v_max": IR_CURVE_V_MAX,
                "max_range_m": scenario.sensors.ir_max_range_m,
            },
        },
    }


def parse_bind(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port:
        raise ValueError(f"bind address must be host:port, got {addr!r}")
    return host, int(port)
