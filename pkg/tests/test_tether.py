import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcsim.tether import (N_BINS, HookModel, TetherState, circle_trajectory, load_hook_model, sample_hook_catch,
                          update_tether, winch_climb_step, wrap_angle)
from tcsim.world import Pole, WorldModel

POLE = Pole((4.0, 4.0), 0.1, 0.0, 2.0)


def pole_world(poles=(POLE,)):
    return WorldModel(np.zeros((81, 81)), 0.1, (0.0, 0.0), [], list(poles))


def bearing(p, c=POLE.center):
    return math.atan2(p[1] - c[1], p[0] - c[0])


def angdiff(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


# -- winding plan ----------------------------------------------------------

def test_closed_circle_has_five_waypoints():
    plan = circle_trajectory((0.0, 0.0), 0.1, 1.0, 2.0, 0.0, 90.0, (-3.0, 0.0))
    assert len(plan.waypoints) == 5
    np.testing.assert_allclose(plan.waypoints[-1], plan.waypoints[0], atol=1e-12)
    assert plan.swept_angle == 360.0


def test_half_revolution_ends_opposite_entry():
    plan = circle_trajectory((1.0, 2.0), 0.05, 0.6, 1.5, 180.0, 7.0, (4.0, 6.0))
    start = math.atan2(6.0 - 2.0, 4.0 - 1.0)
    assert plan.start_bearing == pytest.approx(start, abs=1e-12)
    end = bearing(plan.waypoints[-1], (1.0, 2.0))
    assert angdiff(end, start + math.pi) <= 1e-9
    assert angdiff(bearing(plan.waypoints[0], (1.0, 2.0)), start) <= 1e-9
    assert plan.swept_angle == 540.0


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.2, 3.0), rev=st.floats(0.0, 359.0), step=st.floats(1.0, 90.0),
       ux=st.floats(-10, 10), uy=st.floats(-10, 10))
def test_waypoints_on_circle_and_counter_clockwise(r, rev, step, ux, uy):
    if math.hypot(ux, uy) < 1e-3:
        return
    plan = circle_trajectory((0.0, 0.0), 0.1, r, 1.0, rev, step, (ux, uy))
    d = np.hypot(plan.waypoints[:, 0], plan.waypoints[:, 1])
    assert np.abs(d - r).max() <= 1e-9
    sweep = np.diff(np.unwrap(np.arctan2(plan.waypoints[:, 1], plan.waypoints[:, 0])))
    assert np.all(sweep > 0)
    assert math.degrees(sweep.sum()) == pytest.approx(360.0 + rev, abs=1e-9)
    assert np.all(plan.waypoints[:, 2] == 1.0)


def test_circle_rejects_bad_radius_and_step():
    with pytest.raises(ValueError):
        circle_trajectory((0, 0), 0.5, 0.5, 1.0, 0.0, 10.0, (1, 0))
    with pytest.raises(ValueError):
        circle_trajectory((0, 0), 0.1, 0.5, 1.0, 0.0, 0.0, (1, 0))


# -- hook model ------------------------------------------------------------

def test_default_hook_peaks_at_zero_and_half_turn():
    m = HookModel.default()
    assert m.probabilities.shape == (N_BINS,)
    assert m.bin_of(float(np.argmax(m.probabilities)) * 20.0) in (m.bin_of(0.0), m.bin_of(180.0))
    best = m.probabilities.max()
    assert m.probability(0.0) == best and m.probability(180.0) == best
    assert m.probabilities.min() >= 0.1


def test_bin_lookup():
    m = HookModel(np.arange(N_BINS) / 20.0)
    assert m.probability(0.0) == 0.0
    assert m.probability(19.999) == 0.0
    assert m.probability(20.0) == 0.05
    assert m.probability(359.9) == 17 / 20.0


@pytest.mark.parametrize("p, expected", [(1.0, True), (0.0, False)])
def test_certain_bins(p, expected):
    m = HookModel(np.full(N_BINS, p))
    rng = np.random.default_rng(3)
    assert all(sample_hook_catch(m, a, rng) is expected for a in np.linspace(0, 359, 200))


def test_half_probability_rate():
    m = HookModel(np.full(N_BINS, 0.5))
    rng = np.random.default_rng(12345)
    rate = np.mean([sample_hook_catch(m, 180.0, rng) for _ in range(10_000)])
    assert abs(rate - 0.5) <= 0.02


def test_hook_draws_are_seeded():
    m = HookModel.default()
    a = [sample_hook_catch(m, 100.0, np.random.default_rng(8)) for _ in range(5)]
    b = [sample_hook_catch(m, 100.0, np.random.default_rng(8)) for _ in range(5)]
    assert a == b


def test_hook_angle_validation():
    with pytest.raises(ValueError):
        sample_hook_catch(HookModel.default(), 360.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_hook_catch(HookModel.default(), -1.0, np.random.default_rng(0))


def test_hook_model_validation():
    with pytest.raises(ValueError):
        HookModel(np.full(17, 0.5))
    with pytest.raises(ValueError):
        HookModel(np.full(N_BINS, 1.5))


def test_hook_csv_round_trip(tmp_path):
    m = HookModel(np.random.default_rng(1).random(N_BINS), np.arange(N_BINS))
    m.to_csv(tmp_path / "hook.csv")
    back = HookModel.from_csv(tmp_path / "hook.csv")
    np.testing.assert_array_equal(back.probabilities, m.probabilities)
    np.testing.assert_array_equal(back.trials, m.trials)
    assert isinstance(load_hook_model(None), HookModel)


def test_hook_csv_errors(tmp_path):
    p = tmp_path / "hook.csv"
    p.write_text("bin_start_deg,probability,trials\n0,0.5,3\n")
    with pytest.raises(ValueError, match="every"):
        HookModel.from_csv(p)
    p.write_text("bin_start_deg,probability,trials\n15,0.5,3\n")
    with pytest.raises(ValueError, match="bad bin"):
        HookModel.from_csv(p)


# -- tether geometry -------------------------------------------------------

def test_no_pole_between_endpoints_is_straight():
    t = TetherState([1.0, 1.0, 0.3], [2.0, 1.0, 1.0], 20.0)
    update_tether(t, [1.0, 1.0, 0.3], [2.0, 2.0, 1.5], pole_world())
    assert len(t.points) == 2
    np.testing.assert_array_equal(t.points[-1], [2.0, 2.0, 1.5])
    assert t.polyline_length() <= t.deployed + 1e-6


def test_tether_over_pole_top_does_not_wrap():
    low = Pole((4.0, 4.0), 0.1, 0.0, 0.5)
    t = TetherState([1.0, 4.0, 1.0], [3.0, 4.0, 1.0], 20.0)
    update_tether(t, t.start, [6.0, 4.0, 1.0], pole_world([low]))
    assert t.wraps == []


def _fly(plan, upto=None, ugv=(1.0, 4.0, 0.3)):
    t = TetherState(np.array(ugv), plan.waypoints[0], 30.0)
    world = pole_world()
    counts, ok = [], True
    for wp in plan.waypoints[:upto]:
        update_tether(t, t.start, wp, world)
        counts.append(len(t.wraps))
        ok &= t.polyline_length() <= t.deployed + 1e-6
    return t, counts, ok


@pytest.fixture
def plan():
    return circle_trajectory(POLE.center, POLE.radius, 0.6, 1.0, 180.0, 5.0, (1.0, 4.0))


def test_half_circle_wraps_onto_tangent_points(plan):
    # after 180 degrees the UAV is behind the pole, opposite the UGV
    t, _, _ = _fly(plan, upto=37)
    uav = plan.waypoints[36]
    assert angdiff(bearing(uav), 0.0) < 1e-9
    assert t.wraps
    for w in t.wraps:
        assert math.hypot(w[0] - 4.0, w[1] - 4.0) == pytest.approx(POLE.radius, abs=1e-12)
        assert POLE.base <= w[2] <= POLE.top
    # line-circle oracle: the contact arc runs from the UGV's tangent point to the UAV's
    def tangents(p):
        d = math.hypot(p[0] - 4.0, p[1] - 4.0)
        phi = bearing(p)
        beta = math.acos(POLE.radius / d)
        return phi - beta, phi + beta
    assert min(angdiff(bearing(t.wraps[0]), a) for a in tangents(t.start)) < 1e-9
    assert min(angdiff(bearing(t.wraps[-1]), a) for a in tangents(uav)) < 1e-9
    # the free span just touches the pole
    q, u = t.wraps[-1][:2], uav[:2]
    s = np.clip(np.dot(np.array([4.0, 4.0]) - q, u - q) / np.dot(u - q, u - q), 0, 1)
    assert np.hypot(*(q + s * (u - q) - 4.0)) >= POLE.radius - 1e-9


def test_full_winding_subtends_more_than_a_turn(plan):
    t, counts, ok = _fly(plan)
    assert ok
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert wrap_angle(t, POLE) > 2 * math.pi
    assert t.wrapped_pole == 0
    assert t.deployed + t.wound == t.total


def test_initial_span_longer_than_tether_rejected():
    with pytest.raises(ValueError):
        TetherState([0.0, 0.0, 0.0], [10.0, 0.0, 0.0], 5.0)


# -- winch climb -----------------------------------------------------------

def plane_world(grade):
    X, _ = np.meshgrid(np.arange(201) * 0.05, np.arange(41) * 0.05)
    return WorldModel(grade * X, 0.05)


def test_flat_climb_advances_wind_rate():
    world = plane_world(0.0)
    p = np.array([1.0, 1.0, 0.0])
    anchor = np.array([6.0, 1.0, 0.0])
    free = 5.0
    for k in range(3):
        step = winch_climb_step(p, anchor, world, 1.0, 1.0, free)
        assert step.position[0] == pytest.approx(p[0] + 1.0, abs=1e-9)
        assert step.free_length == pytest.approx(free - 1.0, abs=1e-12)
        p, free = step.position, step.free_length
        assert not step.stalled and not step.climbed


def test_slope_climb_ascent_rate():
    world = plane_world(1.0)
    p = np.array([1.0, 1.0, 1.0])
    anchor = np.array([8.0, 1.0, 8.0])
    free = math.dist(p, anchor)
    dt = 0.1
    for _ in range(20):
        step = winch_climb_step(p, anchor, world, 1.0, dt, free)
        rate = (step.position[2] - p[2]) / dt
        assert rate == pytest.approx(math.sin(math.radians(45)), rel=0.05)
        p, free = step.position, step.free_length


def test_at_anchor_is_climbed():
    step = winch_climb_step([3.0, 1.0, 0.0], [3.1, 1.0, 0.5], plane_world(0.0), 1.0, 0.1, 0.0)
    assert step.climbed and not step.stalled


def test_slack_tether_only_winds():
    step = winch_climb_step([1.0, 1.0, 0.0], [3.0, 1.0, 0.0], plane_world(0.0), 0.5, 1.0, 4.0)
    np.testing.assert_array_equal(step.position, [1.0, 1.0, 0.0])
    assert step.free_length == 3.5


def test_anchor_out_of_reach_stalls():
    # anchor hangs higher above the ground than the remaining tether: no point on the line fits
    p, anchor = [1.0, 1.0, 0.0], [3.0, 1.0, 5.0]
    step = winch_climb_step(p, anchor, plane_world(0.0), 1.0, 1.0, math.dist(p, anchor))
    assert step.stalled and not step.climbed
    np.testing.assert_array_equal(step.position, p)


def test_climb_conserves_length():
    world = plane_world(0.5)
    p = np.array([1.0, 1.0, 0.5])
    anchor = np.array([7.0, 1.0, 3.6])
    total = 12.0
    free = math.dist(p, anchor)
    wound = total - free
    for _ in range(400):
        step = winch_climb_step(p, anchor, world, 0.4, 0.05, free)
        wound += free - step.free_length
        assert abs(step.free_length + wound - total) <= 1e-9
        p, free = step.position, step.free_length
        assert math.dist(p, anchor) <= free + 1e-9
        if step.climbed:
            break
    assert step.climbed
