import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullsupport import minkowski as mk
from nullsupport.errors import DomainError, NotTimelikeSeparated, TimelikeSeparation

finite = st.floats(-3, 3, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def test_inner_examples():
    assert mk.inner([1, 0, 0], [1, 0, 0]) == 1
    assert mk.inner([0, 0, 1], [0, 0, 1]) == -1
    v = mk.null_vector(0.7)
    assert abs(mk.inner(v, v)) < 1e-15


def test_classify_examples():
    assert mk.classify([1, 1, 1]).kind is mk.CausalKind.SPACELIKE
    c = mk.classify([1, 0, 1])
    assert c.kind is mk.CausalKind.NULL and c.future
    c = mk.classify([0, 0, -2])
    assert c.kind is mk.CausalKind.TIMELIKE and not c.future
    assert mk.classify([0, 0, 0]).kind is mk.CausalKind.ZERO


def test_null_vectors_classify_as_null_everywhere():
    for th in np.linspace(-math.pi, math.pi, 1001):
        assert mk.classify(mk.null_vector(th)).kind is mk.CausalKind.NULL


def test_boost_examples():
    assert np.allclose(mk.boost(0).L, np.eye(3))
    d = 0.8
    assert np.allclose(mk.boost(d)([0, 0, 1]), [math.sinh(d), 0, math.cosh(d)])
    assert mk.boost(1.3).defect() < 1e-14


def test_parabolic_examples():
    assert np.allclose(mk.parabolic(0).L, np.eye(3))
    assert np.allclose(mk.parabolic(2)([1, 0, 1]), [-3, 4, 5])
    # fixes the null direction at pi
    assert np.allclose(mk.parabolic(1.7)([-1, 0, 1]), [-1, 0, 1])


def test_glide_examples():
    g = mk.glide(0.7, 0.0)
    assert np.allclose(g.L, np.eye(3)) and np.allclose(g.t, 0)
    assert np.allclose(mk.glide(0.0, 1.0)([0, 0, 1]), [0, math.sinh(1), math.cosh(1)])


def test_extrinsic_distance_examples():
    assert mk.extrinsic_distance([1, 2, 3], [1, 2, 3]) == 0
    assert mk.extrinsic_distance([0, 0, 0], [3, 0, 0]) == pytest.approx(3)
    assert mk.extrinsic_distance([0, 0, 0], [1, 0, 1]) == 0
    with pytest.raises(TimelikeSeparation):
        mk.extrinsic_distance([0, 0, 0], [0, 0, 1])


Y_AXIS = mk.SpacelikeLine(np.zeros(3), np.array([0.0, 1.0, 0.0]))


def test_timelike_distance_examples():
    assert mk.timelike_dist_to_line([0, 0, 2.5], Y_AXIS) == pytest.approx(2.5)
    r, a = 1.7, 0.9
    p = [r * math.sinh(a), 0, r * math.cosh(a)]
    assert mk.timelike_dist_to_line(p, Y_AXIS) == pytest.approx(r)
    assert mk.timelike_dist_to_line([0, 5, 2], Y_AXIS) == pytest.approx(2)
    with pytest.raises(NotTimelikeSeparated):
        mk.timelike_dist_to_line([3, 0, 1], Y_AXIS)


def test_spacelike_line_rejects_timelike_direction():
    with pytest.raises(DomainError):
        mk.SpacelikeLine(np.zeros(3), np.array([0.0, 0.0, 1.0]))


def test_normalize_angle_range():
    for a in (-math.pi, math.pi, 3 * math.pi, -7.0, 0.0):
        b = mk.normalize_angle(a)
        assert -math.pi < b <= math.pi
        assert math.isclose(math.cos(a), math.cos(b), abs_tol=1e-12)


isometries = st.one_of(
    finite.map(mk.boost), finite.map(mk.rotation), finite.map(mk.parabolic),
    st.tuples(finite, finite).map(lambda p: mk.glide(*p)), st.just(mk.reflection_y()),
)


@given(isometries, vec3, vec3)
@settings(max_examples=200, deadline=None)
def test_isometries_preserve_inner_product(g, v, w):
    lhs = mk.inner(g.L @ v, g.L @ w)
    scale = max(1.0, float(np.linalg.norm(g.L @ v) * np.linalg.norm(g.L @ w)))
    assert abs(lhs - mk.inner(v, w)) <= 1e-10 * scale


@given(isometries, vec3)
@settings(max_examples=200, deadline=None)
def test_classify_invariant(g, v):
    q = mk.inner(v, v)
    if abs(q) < 1e-6 * max(1.0, float(np.dot(v, v))):
        return  # too close to the light cone for a stable sign
    a, b = mk.classify(v), mk.classify(g.L @ v)
    assert a.kind == b.kind
    if g is not None and g.L[2, 2] > 0 and a.kind is mk.CausalKind.TIMELIKE:
        assert a.future == b.future


@given(finite, finite, finite)
@settings(max_examples=100, deadline=None)
def test_glide_group_law(lam, s1, s2):
    a = mk.glide(lam, s1) @ mk.glide(lam, s2)
    b = mk.glide(lam, s1 + s2)
    assert np.allclose(a.L, b.L, atol=1e-10 * max(1, np.abs(b.L).max()))
    assert np.allclose(a.t, b.t, atol=1e-10 * max(1, np.abs(b.t).max()))


@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(-5, 5), st.floats(-2, 2))
@settings(max_examples=100, deadline=None)
def test_timelike_distance_invariance(r, a, shift, boost):
    p = np.array([r * math.sinh(a), 0, r * math.cosh(a)])
    d0 = mk.timelike_dist_to_line(p, Y_AXIS)
    assert mk.timelike_dist_to_line(p + shift * Y_AXIS.dir, Y_AXIS) == pytest.approx(d0, rel=1e-10)
    # boosts in the (x, z) plane fix the y-axis
    assert mk.timelike_dist_to_line(mk.boost(boost)(p), Y_AXIS) == pytest.approx(d0, rel=1e-9)


def test_inverse_and_compose():
    g = mk.translation([1, 2, 3]) @ mk.boost(0.4) @ mk.rotation(1.1)
    v = np.array([0.3, -0.2, 2.0])
    assert np.allclose(g.inverse()(g(v)), v)
