import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullsupport import families as fm
from nullsupport import geodesics as gd
from nullsupport import minkowski as mk
from nullsupport.errors import NotTangent, PreconditionFailed
from nullsupport.suite import glide_length_closed_form, incomplete_ray

X_AXIS = mk.SpacelikeLine(np.zeros(3), np.array([1.0, 0.0, 0.0]))


@pytest.fixture(scope="module")
def ray():
    return incomplete_ray(1.0)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2 * math.pi))
@settings(max_examples=10, deadline=None)
def test_hyperboloid_distance(r, s, a):
    tr = gd.integrate_geodesic(fm.Hyperboloid(), (r, s), (math.cos(a), math.sin(a)), max_length=2.0)
    p, q = tr.points[0], tr.points[-1]
    assert math.acosh(-mk.inner(p, q)) == pytest.approx(2.0, abs=1e-6)
    assert tr.termination is gd.Termination.BUDGET_EXHAUSTED


def test_semitrough_geodesic_exhausts_representable_budget():
    rng = np.random.default_rng(0)
    for _ in range(2):
        a = rng.uniform(0, 2 * math.pi)
        u0 = (rng.uniform(-1, 2), rng.uniform(-1, 1))
        tr = gd.integrate_geodesic(fm.Semitrough(), u0, (math.cos(a), math.sin(a)), max_length=300.0,
                                   step=0.05, max_halvings=1)
        assert tr.termination is gd.Termination.BUDGET_EXHAUSTED
        assert tr.length[-1] == pytest.approx(300.0)


def test_trough_chart_stops_at_float_range():
    tr = gd.integrate_geodesic(fm.Semitrough(), (0.0, 0.0), (-1.0, 0.0), max_length=1e3,
                               step=0.1, max_halvings=0)
    assert tr.termination is gd.Termination.CHART_BOUNDARY
    assert tr.length[-1] > 300


@given(st.floats(-2, 2).filter(lambda v: abs(v) > 0.05), st.floats(0.1, 3))
@settings(max_examples=50, deadline=None)
def test_glide_curve_speed(lam, tau):
    g = fm.Glide(lam)
    t, s = g.incomplete_curve(tau)
    dt, ds = lam, -g.k
    expected = (1 + lam * lam) / math.sinh(lam * tau) ** 2
    assert g.speed_sq(t, s, dt, ds) == pytest.approx(expected, rel=1e-10)


def test_glide_curve_length_matches_antiderivative():
    for b in (2.0, 10.0, 50.0):
        assert gd.glide_curve_length(1.0, 1.0, b) == pytest.approx(glide_length_closed_form(1.0, 1.0, b),
                                                                   abs=1e-9)
    total = gd.glide_curve_length(1.0, 1.0, math.inf)
    assert total == pytest.approx(math.sqrt(2) * math.log(1 / math.tanh(0.5)), abs=1e-8)


def test_curve_length_straight_segment_vs_polyline():
    chart = gd.HyperboloidChart()
    a, b = np.array([0.2, -0.3]), np.array([1.1, 0.8])
    L = gd.curve_length(chart, lambda tau: (*(a + tau * (b - a)), *(b - a)), 0.0, 1.0)
    lam = np.linspace(0, 1, 20001)
    P = np.array([chart.embed(*(a + t * (b - a))) for t in lam])
    dP = np.diff(P, axis=0)
    poly = np.sum(np.sqrt(np.maximum(np.einsum("ij,ij->i", dP @ mk.ETA, dP), 0)))
    assert L == pytest.approx(poly, abs=1e-8)


@pytest.mark.parametrize("lam", [0.0, 0.7, -1.3])
def test_trough_christoffel_symbols_match_generic_chart(lam):
    chart = gd.TroughChart(lam)
    generic = gd.ImmersionGeodesicChart(
        fm.ImmersionChart("trough", chart.embed, {"r": (-50, 50), "s": (-50, 50)}, chart.tangent), h=1e-5)
    for r, s in ((0.3, 0.1), (-1.0, 0.7), (2.0, -1.2)):
        assert np.allclose(chart.christoffel(r, s), generic.christoffel(r, s), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("eps", [0.5, 2.0])
def test_parabolic_christoffel_symbols_match_generic_chart(eps):
    from nullsupport import curvature as cv

    chart = gd.ParabolicGammaChart(eps)
    generic = gd.ImmersionGeodesicChart(cv.parabolic_family_immersion(eps))
    for x, y in ((0.3, 0.5), (-1.0, 2.0)):
        assert np.allclose(chart.christoffel(x, y), generic.christoffel(x, y), rtol=1e-6, atol=1e-6)


def test_trough_embedding_matches_family():
    chart = gd.TroughChart(0.8)
    g = fm.Glide(0.8)
    for t, s in ((0.4, 0.2), (2.0, -1.0)):
        r, s2, *_ = chart.from_ts(t, s)
        assert np.allclose(chart.embed(r, s2), g.eval(t, s))


def test_incomplete_ray_is_finite_and_asymptotic(ray):
    assert ray.termination is gd.Termination.LENGTH_CONVERGED
    assert math.isfinite(ray.total_length)
    # the last 1e-6 of length is dominated by cancellation in the speed formula
    assert ray.speed_drift(upto=ray.total_length - 1e-6) < 1e-8
    rep = gd.asymptotic_direction(ray)
    assert mk.angular_distance(rep.theta_plus.theta, -math.pi / 2) < 1e-2
    assert abs(rep.support_value) < 1e-3
    assert rep.nested


def test_reflected_ray_goes_to_plus_half_pi():
    rep = gd.asymptotic_direction(incomplete_ray(-1.0))
    assert mk.angular_distance(rep.theta_plus.theta, math.pi / 2) < 1e-2


def test_step_halving_changes_length_little(ray):
    assert ray.length_drift < 1e-7


def test_geodesic_residual(ray):
    assert gd.geodesic_residual(ray) < 1e-5
    for fam, u0, w0 in ((fm.ParabolicInvariant(0.5), (0.2, 1.0), (1.0, 0.3)),
                        (fm.Hyperboloid(), (0.1, 0.2), (0.3, 1.0)), (fm.Glide(1.0), (0.3, 0.0), (1.0, 0.4))):
        tr = gd.integrate_geodesic(fam, u0, w0, max_length=3.0)
        assert gd.geodesic_residual(tr) < 1e-5


def test_geodesic_residual_flags_a_horocycle():
    chart = gd.HyperboloidChart()
    ell = np.linspace(0, 2, 401)
    params = np.column_stack([np.zeros_like(ell), ell])  # r = 0, unit speed in s
    pts = np.array([chart.embed(*u) for u in params])
    vel = np.array([chart.tangent(*u)[1] for u in params])
    tr = gd.GeodesicTrace(chart, ell, params, np.tile([0.0, 1.0], (len(ell), 1)), pts, vel, ell,
                          gd.Termination.BUDGET_EXHAUSTED, 5e-3)
    assert gd.geodesic_residual(tr) > 0.1


def test_phi_concavity_examples(ray):
    tr = gd.integrate_geodesic(fm.Hyperboloid(), (0.1, 0.2), (0.3, 1.0), max_length=4.0)
    assert gd.phi_concavity_check(tr, mk.vec(0, 0, 1)).ok
    rep = gd.phi_concavity_check(ray, mk.null_vector(-math.pi / 2))
    assert rep.ok
    vals = ray.points @ (mk.ETA @ mk.null_vector(-math.pi / 2))
    fin = np.isfinite(vals)
    assert vals[fin][-1] > vals[fin][0] and vals[fin][-1] <= 1e-6
    with pytest.raises(PreconditionFailed):
        gd.phi_concavity_check(tr, mk.vec(1, 0, 0))


def test_dext_monotonicity_on_radial_hyperboloid_geodesic():
    tr = gd.integrate_geodesic(fm.Hyperboloid(), (0.0, 0.0), (1.0, 0.0), max_length=5.0)
    rep = gd.dext_monotonicity_check(tr)
    assert rep.ok and rep.worst >= 1 - 1e-9
    # d_ext = 2 sinh(l/2) along a radial geodesic
    d = math.sqrt(mk.inner(tr.points[-1] - tr.points[0], tr.points[-1] - tr.points[0]))
    assert d == pytest.approx(2 * math.sinh(2.5), rel=1e-8)


def test_dext_monotonicity_on_glide_ray(ray):
    assert gd.dext_monotonicity_check(ray).ok


def test_timelike_decay(ray):
    rep = gd.timelike_decay_check(ray, X_AXIS)
    assert rep.ok and math.isfinite(rep.worst)
    # independent oracle: the distance to the x-axis is sqrt(z^2 - y^2)
    p = ray.points[-1]
    assert rep.extra["final_distance"] == pytest.approx(math.sqrt(p[2] ** 2 - p[1] ** 2), rel=1e-6)
    reflected = incomplete_ray(-1.0)
    rep2 = gd.timelike_decay_check(reflected, X_AXIS)
    assert rep2.worst == pytest.approx(rep.worst, rel=1e-6)


def test_timelike_decay_rejects_complete_trace():
    tr = gd.integrate_geodesic(fm.Hyperboloid(), (0.0, 0.0), (1.0, 0.0), max_length=2.0)
    with pytest.raises(PreconditionFailed):
        gd.timelike_decay_check(tr, X_AXIS)
    with pytest.raises(PreconditionFailed):
        gd.asymptotic_direction(tr)


def test_initial_from_ambient_round_trip():
    g = fm.Glide(1.0)
    chart = gd.TroughChart(1.0)
    r, s = 0.4, -0.3
    p = chart.embed(r, s)
    X1, X2 = chart.tangent(r, s)
    u, w = gd.initial_from_ambient(g, p, 0.5 * X1 + 2.0 * X2)
    assert np.allclose(u, (r, s), atol=1e-8) and np.allclose(w, (0.5, 2.0), atol=1e-6)
    with pytest.raises(NotTangent):
        gd.initial_from_ambient(g, p, chart.normal(r, s))


def test_velocity_interval_contains_direction_of_null_limit():
    a, b = gd.velocity_interval(np.array([0.0, -1.0, 1.0 - 1e-9]))
    mid = 0.5 * (a + b)
    assert mk.angular_distance(mid, -math.pi / 2) < 1e-3


def test_tail_extrapolate_geometric_sequence():
    vals = 1.0 - 0.5 ** np.arange(30)
    assert gd.tail_extrapolate(vals) == pytest.approx(1.0, abs=1e-12)


def test_thin_indices_spacing():
    ell = np.cumsum(np.r_[0, np.full(100, 0.003)])
    idx = gd.thin_indices(ell, 0.01)
    assert idx[0] == 0 and idx[-1] == len(ell) - 1
    assert np.all(np.diff(ell[idx]) >= 0.01 - 1e-12)


def test_csv_rows(ray):
    rows = gd.trace_csv_rows(ray)
    assert len(rows) == len(ray.tau) and len(rows[0]) == len(gd.CSV_COLUMNS)
