import math
import random

import pytest

from omnibot.scenario import (
    Scenario,
    ScenarioError,
    packaged_scenario,
    packaged_scenario_text,
    parse_scenario,
)
from omnibot.world import Circle, Wall

MINIMAL = """
[scene]
bounds = 0 0 10 10
spawn = 5 5 0
"""

FULL = """
# comment line
[scene]
bounds = 0 0 5 4
spawn = 1 1 90   # trailing comment
circle = 3 3 0.4
segment = 0 0 5 0 0.1
line = 0.02 1 1 4 1

[robot]
wheel_radius_m = 0.05
mount_angles_rad = 1.0472 3.1416 5.236

[pid]
kp = 0.04

[run]
controller = avoid_obstacles
duration_s = 30
dt_physics_s = 0.001
dt_control_s = 0.01
seed = 7
"""


def test_minimal_document():
    sc = parse_scenario(MINIMAL)
    assert sc.scene.obstacles == ()
    assert sc.controller == "external"
    assert sc.scene.spawn.x == 5


def test_full_document():
    sc = parse_scenario(FULL)
    assert len(sc.scene.obstacles) == 2
    assert isinstance(sc.scene.obstacles[0], Circle)
    assert isinstance(sc.scene.obstacles[1], Wall)
    assert len(sc.scene.floor_lines) == 1
    assert sc.robot.wheel_radius_m == 0.05
    assert sc.pid.kp == 0.04
    assert sc.controller == "avoid_obstacles"
    assert sc.seed == 7
    assert sc.scene.spawn.theta == pytest.approx(math.pi / 2)


def test_spawn_inside_obstacle_names_invariant():
    doc = MINIMAL + "circle = 5 5 1\n"
    with pytest.raises(ScenarioError, match="spawn inside obstacle"):
        parse_scenario(doc)


def test_unknown_key_reports_line():
    doc = "[scene]\nbounds = 0 0 1 1\nspawnn = 0.5 0.5 0\n"
    with pytest.raises(ScenarioError, match="line 3"):
        parse_scenario(doc)


def test_unknown_section_rejected():
    with pytest.raises(ScenarioError, match=r"unknown section"):
        parse_scenario("[scenes]\n")


def test_key_outside_section_rejected():
    with pytest.raises(ScenarioError, match="before any"):
        parse_scenario("bounds = 0 0 1 1\n")


def test_bad_number_reports_key():
    doc = "[scene]\nbounds = 0 0 ten 10\nspawn = 5 5 0\n"
    with pytest.raises(ScenarioError, match="bounds"):
        parse_scenario(doc)


def test_unknown_controller_rejected():
    doc = MINIMAL + "[run]\ncontroller = chase_cat\n"
    with pytest.raises(ScenarioError, match="chase_cat"):
        parse_scenario(doc)


def test_dt_multiple_enforced():
    doc = MINIMAL + "[run]\ndt_physics_s = 0.0007\ndt_control_s = 0.01\n"
    with pytest.raises(ScenarioError, match="integer multiple"):
        parse_scenario(doc)


def test_duration_must_be_positive():
    doc = MINIMAL + "[run]\nduration_s = 0\n"
    with pytest.raises(ScenarioError, match="duration"):
        parse_scenario(doc)


def test_degenerate_mount_angles_rejected_at_load():
    doc = MINIMAL + "[robot]\nmount_angles_rad = 0.0 0.0 2.0\n"
    with pytest.raises(ScenarioError, match="distinct"):
        parse_scenario(doc)


def test_line_follow_width_must_match_camera():
    doc = MINIMAL + "[line_follow]\nwidth_px = 320\n"
    with pytest.raises(ScenarioError, match="width"):
        parse_scenario(doc)


def test_avoid_demo_arena_composition():
    sc = packaged_scenario("avoid_demo")
    assert sc.duration_s == 60
    assert sc.controller == "avoid_obstacles"
    walls = [o for o in sc.scene.obstacles if isinstance(o, Wall)]
    circles = [o for o in sc.scene.obstacles if isinstance(o, Circle)]
    assert len(walls) == 4 and len(circles) == 3


@pytest.mark.parametrize("name", ["avoid_demo", "line_demo", "line_curve_demo", "tuning_demo"])
def test_packaged_scenarios_parse(name):
    packaged_scenario(name)


def test_parsing_is_total_under_fuzz():
    # every mutation either parses or raises a structured error, never crashes
    rng = random.Random(2025)
    base = packaged_scenario_text("avoid_demo")
    alphabet = "abcdefgh= 0123456789.[]#\n-"
    for _ in range(400):
        lines = base.splitlines()
        op = rng.randrange(4)
        if op == 0 and lines:
            lines.pop(rng.randrange(len(lines)))
        elif op == 1:
            lines.insert(
                rng.randrange(len(lines) + 1),
                "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 30))),
            )
        elif op == 2 and lines:
            i = rng.randrange(len(lines))
            line = lines[i]
            if line:
                j = rng.randrange(len(line))
                lines[i] = line[:j] + rng.choice(alphabet) + line[j + 1 :]
        else:
            rng.shuffle(lines)
        doc = "\n".join(lines)
        try:
            sc = parse_scenario(doc)
            assert isinstance(sc, Scenario)
        except ScenarioError:
            pass
