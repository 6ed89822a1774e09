"""Smoke test for the kinonav_py extension.

Build and run from the repository root:

    cargo build --release -p kinonav-py --features extension-module
    cp target/release/libkinonav_py.so python/kinonav_py.so
    python3 python/smoke_test.py
"""

import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

import kinonav_py as kn

SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def check_plan():
    sc = kn.Scenario.load(str(SCENARIOS / "free_space.toml"))
    p = kn.plan(sc)
    assert math.isfinite(p.cost) and p.duration > 0
    assert p.refined_collision_free
    assert p.max_deviation < 0.25
    samples = p.samples(0.1)
    t, pos, _ = samples[-1]
    assert math.dist(pos, sc.goal) <= 1.0, (pos, sc.goal)
    assert p.refined_position(t) is not None

    moving = kn.plan(kn.Scenario.load(str(SCENARIOS / "moving_wall.toml")))
    m = moving.metrics()
    assert (m["start_vx"], m["start_vy"], m["start_vz"]) == (4.0, 0.0, 0.0)

    try:
        kn.plan(kn.Scenario.load(str(SCENARIOS / "sealed_goal.toml")))
    except kn.NoPathError:
        pass
    else:
        raise AssertionError("sealed goal planned")


def check_scenario_errors():
    try:
        kn.Scenario.from_toml("[goal]\nposition = [1.0]\n")
    except ValueError as e:
        assert "position" in str(e)
    else:
        raise AssertionError("bad scenario accepted")
    try:
        kn.Scenario.load(str(SCENARIOS / "does_not_exist.toml"))
    except OSError:
        pass
    else:
        raise AssertionError("missing file accepted")
    sc = kn.Scenario.load(str(SCENARIOS / "line_15.toml"))
    again = kn.Scenario.from_toml(sc.to_toml())
    assert again.to_toml() == sc.to_toml()


def check_mission():
    sc = kn.Scenario.load(str(SCENARIOS / "line_15.toml"))
    sc.drag_comp = False
    a = kn.run_mission(sc)
    b = kn.run_mission(sc)
    assert a.outcome == "reached" and a.exit_code == 0
    assert a.control_csv() == b.control_csv()
    s = a.summary()
    # uncompensated: lag stays near the closed form once cruising
    assert abs(s["max_tracking_error"] - kn.predicted_lag(15.0)) < 0.5, s
    assert a.positions()[-1][1][0] > 290.0


def check_controller_and_fit():
    hover = 1.5 * 9.80665
    thrust, r = kn.control_step([0, 0, 1], [0, 0, 0], [0, 0, 1], [0, 0, 0])
    assert abs(thrust - hover) < 1e-9
    assert all(abs(r[i][j] - (i == j)) < 1e-12 for i in range(3) for j in range(3))
    # compensating drag at 10 m/s tilts the commanded body z axis forward
    _, on = kn.control_step([0, 0, 1], [10, 0, 0], [0, 0, 1], [10, 0, 0], drag_comp=True)
    _, off = kn.control_step([0, 0, 1], [10, 0, 0], [0, 0, 1], [10, 0, 0], drag_comp=False)
    assert abs(off[0][2]) < 1e-12
    assert abs(on[0][2] / on[2][2] - 0.2 * 10 / 9.80665) < 1e-9

    poly = kn.fit([[0, 0, 0], [1, 2, 0], [3, 2, 1]], [0.0, 1.0, 2.5])
    assert abs(poly.duration - 2.5) < 1e-12
    for t, want in [(0.0, [0, 0, 0]), (1.0, [1, 2, 0]), (2.5, [3, 2, 1])]:
        assert math.dist(poly.eval(t), want) < 1e-9
    assert math.dist(poly.eval(2.5, 1), [0, 0, 0]) < 1e-9
    assert 30 < kn.saturation_speed(1.2 * hover) < 35


if __name__ == "__main__":
    check_scenario_errors()
    check_controller_and_fit()
    check_plan()
    check_mission()
    print("smoke test passed")
