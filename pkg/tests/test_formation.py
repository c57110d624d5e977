import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tetherplan.errors import AngleOutOfRange, DegenerateVertical
from tetherplan.formation import (THETA_MAX, FormationState, VehiclePair, compose, compose_array,
                                  decompose, decompose_array, interpolate, wrap_angle)

states = st.builds(
    FormationState,
    st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 5),
    st.floats(-math.pi, math.pi, exclude_max=True), st.floats(0.1, 3.0), st.floats(-THETA_MAX, THETA_MAX),
)


def test_compose_symmetric_pair():
    s = compose(VehiclePair((1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)))
    assert (s.x, s.y, s.z, s.phi_yaw, s.d, s.theta_form) == (0.0, 0.0, 0.0, 0.0, 2.0, 0.0)


def test_compose_diagonal_pair():
    s = compose(VehiclePair((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)))
    assert s.p == pytest.approx([0.5, 0.5, 0.5])
    assert s.phi_yaw == pytest.approx(math.pi / 4)
    assert s.d == pytest.approx(1.7320508, abs=1e-7)
    assert s.theta_form == pytest.approx(0.6154797, abs=1e-7)


def test_compose_vertical_rejected():
    with pytest.raises(DegenerateVertical):
        compose(VehiclePair((0.0, 0.0, 1.0), (0.0, 0.0, 0.0)))


def test_compose_steep_rejected():
    with pytest.raises(AngleOutOfRange):
        compose(VehiclePair((0.1, 0.0, 1.0), (0.0, 0.0, 0.0)))


def test_decompose_examples():
    pr = decompose(FormationState(0, 0, 0, 0, 2, 0))
    assert pr.p1 == pytest.approx((1, 0, 0)) and pr.p2 == pytest.approx((-1, 0, 0))
    pr = decompose(FormationState(0.5, 0.5, 0.5, math.pi / 4, math.sqrt(3), math.atan2(1, math.sqrt(2))))
    assert np.abs(np.array(pr.p1) - 1).max() < 1e-12 and np.abs(np.array(pr.p2)).max() < 1e-12
    pr = decompose(FormationState(0, 0, 0, 0, 1, math.radians(60)))
    assert pr.p1 == pytest.approx((0.25, 0, math.sqrt(3) / 4), abs=1e-12)
    assert pr.p2 == pytest.approx((-0.25, 0, -math.sqrt(3) / 4), abs=1e-12)


@given(states)
def test_round_trip_state(s):
    back = compose(decompose(s))
    assert np.abs(back.as_array() - s.as_array()).max() < 1e-12


@given(states)
def test_round_trip_pair(s):
    pr = decompose(s)
    again = decompose(compose(pr))
    assert np.abs(np.array(again.p1) - pr.p1).max() < 1e-12
    assert np.abs(np.array(again.p2) - pr.p2).max() < 1e-12


@given(states)
def test_swap_symmetry(s):
    pr = decompose(s)
    sw = compose(VehiclePair(pr.p2, pr.p1))
    assert sw.p == pytest.approx(s.p, abs=1e-12)
    assert abs(wrap_angle(sw.phi_yaw - s.phi_yaw - math.pi)) < 1e-12
    assert sw.d == pytest.approx(s.d, abs=1e-12)
    assert sw.theta_form == pytest.approx(-s.theta_form, abs=1e-12)


@given(states, st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)))
def test_translation_equivariance(s, v):
    pr = decompose(s)
    v = np.array(v)
    moved = compose(VehiclePair(tuple(np.array(pr.p1) + v), tuple(np.array(pr.p2) + v)))
    assert np.abs(moved.p - (s.p + v)).max() < 1e-9
    assert abs(wrap_angle(moved.phi_yaw - s.phi_yaw)) < 1e-9
    assert moved.d == pytest.approx(s.d, abs=1e-9)
    assert moved.theta_form == pytest.approx(s.theta_form, abs=1e-9)


def test_vectorised_matches_scalar(rng):
    arr = np.column_stack([rng.normal(size=(50, 3)), rng.uniform(-3, 3, 50), rng.uniform(0.2, 2, 50),
                           rng.uniform(-1, 1, 50)])
    p1, p2 = decompose_array(arr)
    back = compose_array(p1, p2)
    for k in range(50):
        pr = decompose(FormationState.from_array(arr[k]))
        assert np.allclose(pr.p1, p1[k], atol=1e-15) and np.allclose(pr.p2, p2[k], atol=1e-15)
    assert np.abs(back - arr).max() < 1e-12


def test_interpolate():
    a = FormationState(0, 0, 0, math.radians(170), 1.0, 0.0)
    b = FormationState(1, 2, 3, math.radians(-170), 2.0, 0.4)
    assert interpolate(a, b, 0.0) is a
    assert interpolate(a, b, 1.0) is b
    m = interpolate(a, b, 0.5)
    assert abs(wrap_angle(m.phi_yaw - math.pi)) < 1e-12
    assert m.d == 1.5
    assert m.p == pytest.approx([0.5, 1, 1.5])
