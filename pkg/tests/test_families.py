import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullsupport import curvature as cv
from nullsupport import families as fm
from nullsupport import minkowski as mk
from nullsupport.errors import DerivativeUndefined, DomainError

# 1 - coth 1 and 1/sinh 1, evaluated once at high precision and frozen
SEMITROUGH_AT_1_0 = (-0.31303528549933130, 0.0, 0.85091812823932156)


def test_semitrough_frozen_point():
    assert np.allclose(fm.eval_semitrough(1.0, 0.0), SEMITROUGH_AT_1_0, atol=1e-15)
    # independent evaluation of the closed form
    assert SEMITROUGH_AT_1_0[0] == pytest.approx(1 - math.cosh(1) / math.sinh(1), abs=1e-15)
    assert SEMITROUGH_AT_1_0[2] == pytest.approx(1 / math.sinh(1), abs=1e-15)


def test_semitrough_profile_identity():
    x, y, z = fm.eval_semitrough(0.7, 1.2)
    assert z * z - y * y == pytest.approx(1 / math.sinh(0.7) ** 2, rel=1e-13)


def test_semitrough_is_glide_with_zero_lambda():
    t = np.geomspace(0.01, 5, 7)[:, None]
    s = np.linspace(-3, 3, 5)[None, :]
    assert np.allclose(fm.eval_semitrough(t, s), fm.eval_glide(0.0, t, s), atol=1e-12)


def test_glide_support_closed_form_examples():
    assert fm.glide_support_closed_form(1.3, 0.0).value == 0.0
    assert fm.glide_support_closed_form(1.3, -1.0).value == 0.0
    assert fm.glide_support_closed_form(1.3, 0.5).infinite
    for s in (-2.0, 0.4, 1.5):
        lam = 0.8
        v = fm.glide_support_closed_form(lam, -math.exp(s)).value
        assert v == pytest.approx(-2 * lam * s * math.exp(s), rel=1e-13, abs=1e-15)


def test_glide_support_sampled_converges_from_below():
    x = np.array([-1.0, -0.5, -0.2])
    exact = -2 * np.abs(x) * np.log(np.abs(x))
    errs = [np.max(np.abs(fm.glide_support_sampled(1.0, x, n, n) - exact)) for n in (400, 2000)]
    assert np.all(fm.glide_support_sampled(1.0, x, 400, 400) <= exact + 1e-12)
    assert errs[1] < errs[0] / 3 and errs[1] < 0.01


def test_parabolic_family_u_reduces_to_hyperboloid():
    x = np.linspace(-2, 2, 5)
    y = np.linspace(0, 3, 5)
    assert np.allclose(fm.parabolic_family_u(0.0, x, y), -2 * y)


def test_barrier_validation():
    with pytest.raises(DomainError):
        fm.BarrierParams(1.0, 0.5, 0.5, 0.6, 1.0)
    with pytest.raises(DomainError):
        fm.BarrierParams(1.0, 0.5, 1.5, 0.2, 1.0)


def test_barrier_axis_examples():
    bar = fm.HolderBarrier(fm.BarrierParams(1.0, 0.5, 0.5, 0.2, 4.0))
    y = 1.7
    _, uy = bar.gradient(0.0, y)
    assert uy == pytest.approx(-4.0 * 0.5 * y ** -0.5)
    with pytest.raises(DerivativeUndefined):
        bar.derivatives(0.0, y)
    A = cv.a_matrix(bar.parabolic_support(), 1e-9, y)
    assert np.allclose(np.linalg.inv(A), bar.axis_inverse_shape_limit(y), atol=1e-3)


def _fd_derivatives(u, x, y, h=1e-5):
    f = lambda a, b: float(u(a, b))  # noqa: E731
    c = f(x, y)
    return (c,
            (f(x + h, y) - f(x - h, y)) / (2 * h),
            (f(x, y + h) - f(x, y - h)) / (2 * h),
            (f(x + h, y) - 2 * c + f(x - h, y)) / h ** 2,
            (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h),
            (f(x, y + h) - 2 * c + f(x, y - h)) / h ** 2)


def test_barrier_gradient_check_at_reference_point():
    bar = fm.HolderBarrier(fm.BarrierParams(1.0, 0.5, 0.5, 0.2, 4.0))
    an = bar.derivatives(0.7, 1.3)
    fd = _fd_derivatives(bar.u, 0.7, 1.3)
    assert np.allclose(an[:3], fd[:3], atol=1e-6)


@pytest.mark.parametrize("family", [
    fm.ParabolicInvariant(0.5), fm.ParabolicInvariant(2.0),
    fm.HolderBarrier(fm.BarrierParams(1.0, 0.5, 0.5, 0.2, 4.0)),
])
def test_analytic_derivatives_match_finite_differences(family):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(0.2, 3.0) * rng.choice([-1, 1])
        y = rng.uniform(0.3, 3.0)
        an = np.array(family.derivatives(x, y))
        fd = np.array(_fd_derivatives(family.u, x, y, 1e-4))
        scale = np.maximum(1.0, np.abs(an))
        assert np.all(np.abs(an - fd) / scale < 1e-5), (x, y, an - fd)


def test_glide_jacobian_and_hessian_match_finite_differences():
    g = fm.Glide(1.7)
    rng = np.random.default_rng(12)
    h = 1e-5
    for _ in range(100):
        t, s = rng.uniform(0.2, 3), rng.uniform(-2, 2)
        Xt, Xs = g.jac(t, s)
        fdt = (g.eval(t + h, s) - g.eval(t - h, s)) / (2 * h)
        fds = (g.eval(t, s + h) - g.eval(t, s - h)) / (2 * h)
        assert np.allclose(Xt, fdt, atol=1e-5 * max(1, np.abs(Xt).max()))
        assert np.allclose(Xs, fds, atol=1e-5 * max(1, np.abs(Xs).max()))
        Xtt, Xts, Xss = g.hess(t, s)
        fdtt = (np.array(g.jac(t + h, s)[0]) - np.array(g.jac(t - h, s)[0])) / (2 * h)
        assert np.allclose(Xtt, fdtt, atol=1e-5 * max(1, np.abs(Xtt).max()))


def test_cusp_profile_examples():
    c = fm.CuspComparison(0.3)
    assert c.profile(0.0) == pytest.approx(0.3)
    assert c.speed_sq(0.0) == pytest.approx(0.09)
    a = np.linspace(2, 100, 200)
    assert np.all(c.speed_sq(a) > 0.09 / (2 * a * a))


def test_cusp_length_diverges_logarithmically():
    c = fm.CuspComparison(0.3)
    L3 = c.profile_length(1.0, 1e3)
    L4 = c.profile_length(1.0, 1e4)
    # increments per decade tend to eps * ln 10 (speed ~ eps / a)
    assert L4 - L3 == pytest.approx(0.3 * math.log(10), rel=1e-3)
    assert L4 - L3 > 0.3 / math.sqrt(2) * math.log(10)


def test_graph_height_examples():
    h = fm.Hyperboloid()
    assert h.graph_height(0, 0) == 1.0
    assert h.graph_height(3, 4) == pytest.approx(math.sqrt(26))
    t = 1.0
    assert fm.Semitrough().graph_height(t - 1 / math.tanh(t), 0.0) == pytest.approx(1 / math.sinh(t), rel=1e-10)


@pytest.mark.parametrize("family", [fm.Glide(0.7), fm.Semitrough(), fm.ParabolicInvariant(0.5)])
def test_graph_height_inverts_eval(family):
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, b = rng.uniform(0.3, 2.5), rng.uniform(-1.5, 1.5)
        if family.kind == "parabolic":
            b = abs(b) + 0.2
        p = np.asarray(family.eval(a, b), float).reshape(3)
        assert family.graph_height(p[0], p[1]) == pytest.approx(p[2], rel=1e-9, abs=1e-9)


def test_translated_graph_height():
    w = [0.2, -0.3, 1.5]
    t = fm.Translated(fm.Hyperboloid(), w)
    assert t.graph_height(1.2, 0.7) == pytest.approx(math.sqrt(1 + 1.0 ** 2 + 1.0 ** 2) + 1.5)


@given(st.floats(-2, 2), st.floats(0.05, 4), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=200, deadline=None)
def test_glide_invariance(lam, t, s, s0):
    lhs = mk.glide(lam, s0)(fm.eval_glide(lam, t, s))
    rhs = fm.eval_glide(lam, t, s + s0)
    assert np.allclose(lhs, rhs, atol=1e-10 * max(1.0, np.abs(rhs).max()))


@given(st.floats(-2, 2), st.floats(0.05, 4), st.floats(-3, 3))
@settings(max_examples=200, deadline=None)
def test_reflection_law(lam, t, s):
    lhs = fm.eval_glide(-lam, t, s)
    rhs = mk.reflection_y()(fm.eval_glide(lam, t, -s))
    assert np.allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(rhs).max()))


@given(st.floats(0.1, 3), st.floats(-3, 3), st.floats(0.01, 5))
@settings(max_examples=200, deadline=None)
def test_glide_support_equivariance(lam, s, ax):
    x = -ax
    lhs = fm.glide_support_closed_form(lam, math.exp(s) * x).value
    rhs = math.exp(s) * (fm.glide_support_closed_form(lam, x).value + 2 * lam * s * x)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_semitrough_sampled_support():
    t = np.geomspace(1e-4, 12, 400)[:, None]
    th_in = np.array([2.5, -2.8, math.pi])
    th_out = np.array([-1.2, 0.0, 0.9])
    vals = []
    for smax in (5.0, 20.0):
        s = np.linspace(-smax, smax, 400)[None, :]
        P = fm.eval_semitrough(t, s).reshape(-1, 3)
        vals.append([np.max(P @ (mk.ETA @ mk.null_vector(th))) for th in np.r_[th_in, th_out]])
    vals = np.array(vals)
    assert np.all(vals[:, :3] <= 1e-12) and np.all(vals[1, :3] > -0.1)
    assert np.all(vals[1, 3:] > 1.0)
    # agrees with the closed form of the support function
    v, inf = fm.Semitrough().support().eval_many(np.r_[th_in, th_out])
    assert np.all(v == 0) and np.array_equal(inf, [False] * 3 + [True] * 3)


def test_make_family_kinds():
    for kind in fm.FAMILY_KINDS:
        assert fm.make_family(kind).kind == kind
    assert fm.make_family("glide", **{"lambda": 2.0}).lam == 2.0
    with pytest.raises(DomainError):
        fm.make_family("torus")
