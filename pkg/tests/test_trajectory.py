import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tetherplan.errors import DegenerateWaypoints, NoMatchingTime, OutOfRange
from tetherplan.trajectory import (
    PiecewiseTrajectory,
    SyncFollowerState,
    _deriv_coeffs,
    _horner,
    evaluate,
    evaluate_clamped,
    fit_trajectory,
    resolve_follower_time,
    sample,
    shared_durations,
)


def random_waypoints(rng, n, step=0.3):
    return np.cumsum(rng.normal(0, step, (n, 3)), axis=0)


def random_pair(rng, n=8, speed=0.3):
    """Two index-aligned waypoint lists sharing one timing, like a decomposed formation path."""
    mid = random_waypoints(rng, n)
    off = rng.normal(0, 0.2, (n, 3)) + (0.5, 0, 0)
    wp1, wp2 = mid + off, mid - off
    dur = shared_durations(wp1, wp2, speed)
    return fit_trajectory(wp1, durations=dur), fit_trajectory(wp2, durations=dur), wp1, wp2


# below this leader speed a position no longer pins down time to 1e-6 s in double precision
MIN_IDENTIFIABLE_SPEED = 1e-7


def check_resolved(tr1, tr2, t1, t, wp2):
    """Exact time where the leader moves; an equivalent position in the rest tails."""
    np.testing.assert_allclose(wp2, evaluate(tr2, t), atol=1e-12)
    if np.linalg.norm(evaluate(tr1, t1, 1)) >= MIN_IDENTIFIABLE_SPEED:
        assert abs(t - t1) <= 1e-6
    else:
        assert np.linalg.norm(evaluate(tr1, t) - evaluate(tr1, t1)) <= 1e-9
        assert np.linalg.norm(wp2 - evaluate(tr2, t1)) <= 1e-9


def test_two_waypoint_rest_to_rest():
    tr = fit_trajectory([(0, 0, 0), (1, 0, 0)], speed=0.5)
    assert tr.n_segments == 1
    assert tr.total_duration == pytest.approx(2.0, abs=1e-15)
    for t in (0.0, 2.0):
        for r in (1, 2, 3):
            np.testing.assert_allclose(evaluate(tr, t, r), 0, atol=1e-9)
    np.testing.assert_allclose(evaluate(tr, 0.0), [0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(evaluate(tr, 2.0), [1, 0, 0], atol=1e-12)


def test_collinear_waypoints_monotone_x():
    tr = fit_trajectory([(0, 0, 0), (1, 0, 0), (2.5, 0, 0)], speed=0.5)
    pts = sample(tr, np.linspace(0, tr.total_duration, 2001))
    assert np.all(np.diff(pts[:, 0]) >= -1e-12)
    np.testing.assert_array_equal(pts[:, 1:], 0.0)


@pytest.mark.parametrize("seed", range(100))
def test_interpolation_residual(seed):
    rng = np.random.default_rng(seed)
    wp = random_waypoints(rng, int(rng.integers(2, 15)))
    tr = fit_trajectory(wp, speed=float(rng.uniform(0.1, 1.0)))
    ends = np.append(tr.starts, tr.total_duration)
    got = sample(tr, ends)
    assert np.abs(got - wp).max() < 1e-9
    np.testing.assert_allclose(tr.starts[1:], np.cumsum(tr.durations)[:-1], rtol=0, atol=1e-12)


def test_joint_continuity_through_sixth_derivative(rng):
    tr = fit_trajectory(random_waypoints(rng, 10), speed=0.4)
    for k in range(tr.n_segments - 1):
        for r in range(7):
            left = _horner(_deriv_coeffs(tr.coeffs[k], r), tr.durations[k])
            right = _horner(_deriv_coeffs(tr.coeffs[k + 1], r), 0.0)
            scale = max(1.0, float(np.abs(left).max()))
            np.testing.assert_allclose(left, right, atol=1e-9 * scale)


def test_boundary_evaluation_from_both_sides(rng):
    tr = fit_trajectory(random_waypoints(rng, 6), speed=0.3)
    for tk in tr.starts[1:]:
        a = evaluate(tr, float(np.nextafter(tk, -np.inf)))
        b = evaluate(tr, float(tk))
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_finite_difference_derivative(rng):
    tr = fit_trajectory(random_waypoints(rng, 8), speed=0.3)
    h = 1e-6
    for t in rng.uniform(h, tr.total_duration - h, 1000):
        fd = (evaluate(tr, t + h) - evaluate(tr, t - h)) / (2 * h)
        np.testing.assert_allclose(fd, evaluate(tr, t, 1), atol=1e-6)


def test_degenerate_waypoints_raise():
    with pytest.raises(DegenerateWaypoints):
        fit_trajectory([(0, 0, 0), (0, 0, 5e-10), (1, 0, 0)], speed=1.0)


def test_out_of_range_and_clamped():
    tr = fit_trajectory([(0, 0, 0), (1, 1, 0)], speed=1.0)
    T = tr.total_duration
    with pytest.raises(OutOfRange):
        evaluate(tr, T + 1e-6)
    with pytest.raises(OutOfRange):
        evaluate(tr, -1e-6)
    np.testing.assert_allclose(evaluate_clamped(tr, T + 5.0), [1, 1, 0], atol=1e-12)
    np.testing.assert_array_equal(evaluate_clamped(tr, T + 5.0, 1), 0.0)


def test_serialization_round_trip(rng):
    tr = fit_trajectory(random_waypoints(rng, 5), speed=0.3)
    back = PiecewiseTrajectory.from_dict(json.loads(tr.dumps()))
    for t in np.linspace(0, tr.total_duration, 37):
        np.testing.assert_array_equal(evaluate(back, t), evaluate(tr, t))


def test_resolve_at_start():
    rng = np.random.default_rng(4)
    tr1, tr2, _, _ = random_pair(rng)
    sync = SyncFollowerState(tr1, tr2)
    t, wp2 = resolve_follower_time(sync, evaluate(tr1, 0.0))
    assert t == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(wp2, evaluate(tr2, 0.0), atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_sync_sweep_recovers_generating_time(seed):
    rng = np.random.default_rng(seed)
    tr1, tr2, _, _ = random_pair(rng, n=int(rng.integers(2, 12)))
    sync = SyncFollowerState(tr1, tr2)
    T = tr1.total_duration
    last_segment = 0
    for t1 in np.append(np.arange(0.0, T, 0.05), T):
        t, wp2 = resolve_follower_time(sync, evaluate(tr1, t1))
        check_resolved(tr1, tr2, t1, t, wp2)
        assert sync.segment >= last_segment
        last_segment = sync.segment
    assert sync.from_scratch_count == 0


@settings(max_examples=200)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_round_trip_dense(seed, frac):
    rng = np.random.default_rng(seed)
    tr1, tr2, _, _ = random_pair(rng, n=5)
    t1 = frac * tr1.total_duration
    t, wp2 = resolve_follower_time(SyncFollowerState(tr1, tr2), evaluate(tr1, t1))
    check_resolved(tr1, tr2, t1, t, wp2)


def test_rest_end_resolves_exactly():
    tr1, tr2, _, _ = random_pair(np.random.default_rng(3))
    T = tr1.total_duration
    t, wp2 = resolve_follower_time(SyncFollowerState(tr1, tr2), evaluate(tr1, T))
    assert t == T
    np.testing.assert_array_equal(wp2, evaluate(tr2, T))


def test_corrupted_waypoint_raises():
    rng = np.random.default_rng(1)
    tr1, tr2, _, _ = random_pair(rng)
    far = sample(tr1, np.linspace(0, tr1.total_duration, 50)).max(axis=0) + 10.0
    with pytest.raises(NoMatchingTime):
        resolve_follower_time(SyncFollowerState(tr1, tr2), far)


def test_stationary_axes_are_wildcards():
    # only x moves: y and z stay constant and must not block the match
    wp1 = np.array([(0, 1, 2), (1, 1, 2), (2.5, 1, 2)], dtype=float)
    wp2 = wp1 - (0, 2, 0)
    tr1, tr2 = fit_trajectory(wp1, speed=0.5), fit_trajectory(wp2, speed=0.5)
    sync = SyncFollowerState(tr1, tr2)
    for t1 in np.linspace(0, tr1.total_duration, 31):
        t, wp2 = resolve_follower_time(sync, evaluate(tr1, t1))
        check_resolved(tr1, tr2, t1, t, wp2)
    # a stationary axis off its constant value cannot match
    bad = evaluate(tr1, 1.0) + (0, 0.5, 0)
    with pytest.raises(NoMatchingTime):
        resolve_follower_time(SyncFollowerState(tr1, tr2), bad)


def test_fallback_scan_after_jump_back():
    rng = np.random.default_rng(2)
    tr1, tr2, _, _ = random_pair(rng, n=6)
    sync = SyncFollowerState(tr1, tr2)
    resolve_follower_time(sync, evaluate(tr1, tr1.total_duration * 0.9))
    t, _ = resolve_follower_time(sync, evaluate(tr1, 0.1))
    assert abs(t - 0.1) <= 1e-6
    assert sync.from_scratch_count == 1
    sync.reset()
    assert sync.segment == 0


def test_duration_floor():
    tr = fit_trajectory([(0, 0, 0), (0.01, 0, 0), (1, 0, 0)], speed=1.0)
    assert tr.durations[0] == pytest.approx(0.25)
    assert math.isclose(tr.durations[1], 0.99)
