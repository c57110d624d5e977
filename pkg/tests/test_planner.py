import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from tetherplan.errors import NoPathFound
from tetherplan.formation import FormationState, decompose_array
from tetherplan.geometry import box_mesh
from tetherplan.planner import (
    FormationPath,
    MetricWeights,
    Obstacle,
    PlanRequest,
    StateSpaceBounds,
    StateValidator,
    decompose_path,
    is_state_valid,
    path_violations,
    plan,
    recompose_waypoints,
    simplify,
)
from tetherplan.scenes import bundled_scene
from tetherplan.vbody import VBodyConfig, body_for_state

L = 2.0
BOUNDS = StateSpaceBounds((-3.0, -3.0, 0.5), (3.0, 3.0, 3.5), 0.4, 1.8)
METRIC = MetricWeights()

states6 = st.tuples(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
    st.floats(-math.pi, math.pi), st.floats(0.3, 1.9), st.floats(-1.04, 1.04),
).map(np.array)


def symmetric_sag(d, length=L):
    """Depth of the lowest point below level mounts, from the catenary length equation."""
    a = brentq(lambda a: 2 * a * math.sinh(d / (2 * a)) - length, 0.02, 1e3)
    return a * math.cosh(d / (2 * a)) - a


def request(start, goal, env=(), **kw):
    return PlanRequest(start, goal, BOUNDS, list(env), VBodyConfig(), L, **kw)


def test_empty_environment_any_state_valid(rng):
    for _ in range(50):
        s = FormationState.from_array(BOUNDS.sample(rng))
        assert is_state_valid(s, [], VBodyConfig(), L, BOUNDS)


def test_floor_slab_sag_example():
    slab = [box_mesh((-5, -5, -1), (5, 5, 0))]
    h = 0.8
    # close formation: the lowest rope point dips below z = 0 while both vehicles are above it
    assert h - symmetric_sag(0.6) < 0
    close = FormationState(0, 0, h, 0, 0.6, 0)
    assert not is_state_valid(close, slab, VBodyConfig(), L)
    # wide formation: sag shrinks and the whole body clears the slab
    assert h - symmetric_sag(1.8) > VBodyConfig().safety_dx
    wide = FormationState(0, 0, h, 0, 1.8, 0)
    assert is_state_valid(wide, slab, VBodyConfig(), L)


def test_start_equals_goal_single_state():
    s = FormationState(0, 0, 2, 0.3, 1.0, 0.1)
    path = plan(request(s, s))
    assert len(path) == 1
    np.testing.assert_array_equal(path.states[0], s.as_array())


def test_empty_scene_straight_line_simplifies():
    a = FormationState(-2, -1, 1, 0.0, 0.6, 0.0)
    b = FormationState(2, 1, 3, 1.5, 1.5, 0.5)
    raw = plan(request(a, b, rng_seed=3))
    v = StateValidator([], VBodyConfig(), L, BOUNDS)
    short = simplify(raw, v, 3)
    assert len(short) <= 3
    np.testing.assert_array_equal(short.states[0], a.as_array())
    np.testing.assert_array_equal(short.states[-1], b.as_array())


def test_already_straight_path_unchanged():
    v = StateValidator([], VBodyConfig(), L, BOUNDS)
    path = FormationPath(np.array([[0, 0, 1, 0, 1, 0], [1, 0, 1, 0, 1, 0]], dtype=float))
    out = simplify(path, v, 0)
    np.testing.assert_array_equal(out.states, path.states)


def test_zigzag_collapses_in_empty_space():
    v = StateValidator([], VBodyConfig(), L, BOUNDS)
    xs = np.linspace(-2, 2, 11)
    states = np.array([[x, 0.5 * (-1) ** i, 2.0, 0.0, 1.0, 0.0] for i, x in enumerate(xs)])
    out = simplify(FormationPath(states), v, 1)
    assert len(out) == 2
    assert out.length() <= FormationPath(states).length()


def test_plan_deterministic_for_seed():
    env = [Obstacle.from_mesh(box_mesh((-0.2, -3, 0.5), (0.2, 0.2, 3.5)))]
    a = FormationState(-1.5, 0, 2, 0, 0.8, 0)
    b = FormationState(1.5, 0, 2, 0, 0.8, 0)
    p1 = plan(request(a, b, env, rng_seed=7))
    p2 = plan(request(a, b, env, rng_seed=7))
    assert p1.states.tobytes() == p2.states.tobytes()
    v = StateValidator(env, VBodyConfig(), L, BOUNDS)
    assert not path_violations(p1, v, 0.005)


def test_no_path_found_carries_stats():
    # a closed wall across the whole position box
    env = [Obstacle.from_mesh(box_mesh((-0.2, -5, -1), (0.2, 5, 6)))]
    a = FormationState(-1.5, 0, 2, 0, 0.8, 0)
    b = FormationState(1.5, 0, 2, 0, 0.8, 0)
    with pytest.raises(NoPathFound) as exc:
        plan(request(a, b, env, max_iterations=200))
    assert exc.value.iterations == 200
    assert exc.value.nodes >= 1
    assert "nodes=" in str(exc.value)


def _planar_scene(rng):
    """Three random low boxes below the flight band."""
    env = []
    for _ in range(3):
        c = rng.uniform([-1.5, -2, 0.5], [1.5, 2, 0.5])
        env.append(Obstacle.from_mesh(box_mesh(c - (0.2, 0.4, 0), c + (0.2, 0.4, 0.3))))
    return env


@pytest.mark.parametrize("seed", range(100))
def test_simplify_never_lengthens_or_invalidates(seed):
    rng = np.random.default_rng(seed)
    env = _planar_scene(rng)
    v = StateValidator(env, VBodyConfig(), L, BOUNDS)
    # a random walk through free space, made valid edge by edge
    states = [np.array([-2.5, 0, 2.5, 0, 1.0, 0])]
    while len(states) < 12:
        q = states[-1] + rng.normal(0, 0.15, 6) * (1, 1, 0.3, 0.3, 0.2, 0.2)
        q[4] = np.clip(q[4], 0.5, 1.5)
        q[5] = np.clip(q[5], -0.8, 0.8)
        if v.edge_valid(states[-1], q, 0.05, METRIC, check_start=False):
            states.append(q)
    path = FormationPath(np.array(states))
    out = simplify(path, v, seed)
    assert out.length(METRIC) <= path.length(METRIC) + 1e-12
    np.testing.assert_array_equal(out.states[[0, -1]], path.states[[0, -1]])
    assert not path_violations(out, v, 0.05)


@settings(max_examples=300)
@given(states6, states6, states6)
def test_metric_symmetry_and_triangle(a, b, c):
    assert METRIC.distance(a, b) == pytest.approx(METRIC.distance(b, a), abs=1e-12)
    assert METRIC.distance(a, c) <= METRIC.distance(a, b) + METRIC.distance(b, c) + 1e-9


def test_metric_on_many_triples(rng):
    n = 100_000
    lo = np.array([-3, -3, -3, -math.pi, 0.3, -1.04])
    hi = np.array([3, 3, 3, math.pi, 1.9, 1.04])
    a, b, c = (lo + rng.random((n, 6)) * (hi - lo) for _ in range(3))
    dab, dba = METRIC.distance(a, b), METRIC.distance(b, a)
    np.testing.assert_allclose(dab, dba, atol=1e-12)
    assert np.all(METRIC.distance(a, c) <= dab + METRIC.distance(b, c) + 1e-9)


def test_metric_wraps_yaw():
    a = np.array([0, 0, 0, math.pi - 0.1, 1, 0])
    b = np.array([0, 0, 0, -math.pi + 0.1, 1, 0])
    assert METRIC.distance(a, b) == pytest.approx(math.sqrt(0.5) * 0.2)


def test_decompose_trivial_state():
    wp1, wp2 = decompose_path(FormationPath(np.array([[0, 0, 0, 0, 2.0, 0]])))
    np.testing.assert_allclose(wp1, [[1, 0, 0]], atol=1e-15)
    np.testing.assert_allclose(wp2, [[-1, 0, 0]], atol=1e-15)


@given(st.lists(states6, min_size=1, max_size=10))
def test_decompose_recompose_round_trip(rows):
    states = np.array(rows)
    states[:, 4] = np.clip(states[:, 4], 0.3, 1.9)
    wp1, wp2 = decompose_path(FormationPath(states))
    assert len(wp1) == len(wp2) == len(states)
    back = recompose_waypoints(wp1, wp2)
    diff = back - states
    diff[:, 3] = (diff[:, 3] + math.pi) % (2 * math.pi) - math.pi
    np.testing.assert_allclose(diff, 0, atol=1e-12)


def _duct_slice_half_width(body) -> float:
    """Largest |y| of the body inside the slab |x| <= 0.3, by clipping every mesh edge to the slab."""
    v = body.vertices
    tris = body.mesh.triangles
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    best = 0.0
    for i, j in edges:
        p, q = v[i], v[j]
        lo, hi = 0.0, 1.0
        dx = q[0] - p[0]
        if abs(dx) < 1e-15:
            if abs(p[0]) > 0.3:
                continue
        else:
            t0, t1 = sorted(((-0.3 - p[0]) / dx, (0.3 - p[0]) / dx))
            lo, hi = max(lo, t0), min(hi, t1)
            if lo > hi:
                continue
        for t in (lo, hi):
            best = max(best, abs(p[1] + t * (q[1] - p[1])))
    return best


@pytest.mark.parametrize("seed", [0, 1])
def test_tunnel_path_valid_and_narrow_inside_duct(seed):
    cfg = bundled_scene("tunnel")
    env = [Obstacle.from_mesh(m) for m in cfg.load_environment()]
    vcfg = cfg.planning_vbody
    v = StateValidator(env, vcfg, cfg.rope_length, cfg.bounds)
    p = cfg.planner
    req = PlanRequest(cfg.start, cfg.goal, cfg.bounds, env, vcfg, cfg.rope_length, rng_seed=seed,
                      max_time=60, step_size=p.step_size, edge_resolution=p.edge_resolution)
    path = simplify(plan(req, v), v, seed)
    assert not path_violations(path, v, p.edge_resolution / 10)
    inside = 0
    for a, b in zip(path.states[:-1], path.states[1:]):
        for t in np.linspace(0, 1, 41):
            s = a + t * (b - a)
            s[3] = a[3] + t * ((b[3] - a[3] + math.pi) % (2 * math.pi) - math.pi)
            body = body_for_state(FormationState.from_array(s), cfg.rope_length, vcfg)
            if body.vertices[:, 0].min() < 0.3 and body.vertices[:, 0].max() > -0.3:
                inside += 1
                assert _duct_slice_half_width(body) < 0.5
            # yaw-aligned midpoint in the duct: d below duct width minus 2 safety_dx
            if abs(s[0]) <= 0.3 and abs(math.sin(s[3])) > 0.999:
                assert s[4] * math.cos(s[5]) < 1.0 - 2 * vcfg.safety_dx
    assert inside > 0


def test_path_endpoints_match_request():
    a = FormationState(-1, 0, 2, 0, 1.0, 0)
    b = FormationState(1, 0.5, 2.5, 0.4, 1.2, 0.2)
    path = plan(request(a, b, rng_seed=11))
    np.testing.assert_array_equal(path.states[0], a.as_array())
    np.testing.assert_array_equal(path.states[-1], b.as_array())
    wp1, wp2 = decompose_array(path.states)
    assert wp1.shape == wp2.shape == (len(path), 3)


class CoarseBlind:
    """Validator stub whose coarse check passes everything while its fine check only accepts short edges."""

    def edge_valid(self, a, b, resolution, metric, check_start=False):
        return resolution >= 0.05 or float(metric.distance(a, b)) <= 0.5 + 1e-12


def test_simplify_reverts_edges_failing_fine_check():
    states = np.array([[x, 0, 2, 0, 1, 0] for x in np.arange(0.0, 2.01, 0.5)])
    path = FormationPath(states)
    assert len(simplify(path, CoarseBlind(), 0)) == 2
    np.testing.assert_array_equal(simplify(path, CoarseBlind(), 0, verify_resolution=0.005).states, states)


def test_rrt_prunes_edges_failing_fine_check():
    a = FormationState(-1.5, 0, 2, 0, 0.8, 0)
    b = FormationState(1.5, 0, 2, 0, 0.8, 0)
    v = StateValidator([], VBodyConfig(), L, BOUNDS)
    thin = v.edge_valid

    def edge_valid(p, q, resolution, metric, check_start=False):
        # a sliver at x = 0.013 that only the fine spacing sees
        if resolution < 0.05 and min(p[0], q[0]) < 0.013 < max(p[0], q[0]):
            return abs(q[0] - p[0]) < 1e-3
        return thin(p, q, resolution, metric, check_start)

    v.edge_valid = edge_valid
    with pytest.raises(NoPathFound) as exc:
        plan(request(a, b, rng_seed=1, max_iterations=300, verify_resolution=0.005), v)
    assert exc.value.iterations == 300
    path = plan(request(a, b, rng_seed=1), v)
    assert path.stats["rejected_edges"] == 0
