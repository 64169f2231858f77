"""Geodesic integration on the explicit families and the diagnostics of finite-length rays."""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import curvature as cv
from . import families as fm
from . import minkowski as mk
from .errors import (ChartExhausted, NotContracting, NotTangent, PreconditionFailed,
                     TimelikeSeparation)


class Termination(enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    CHART_BOUNDARY = "chart_boundary"
    LENGTH_CONVERGED = "length_converged"


# ------------------------------------------------------------------ charts


class GeodesicChart:
    """Two-dimensional chart with metric, Christoffel symbols and an embedding.

    ``christoffel`` returns (G1_11, G1_12, G1_22, G2_11, G2_12, G2_22) with the upper
    index first.
    """

    name = "chart"

    def inside(self, u1: float, u2: float) -> bool:
        return math.isfinite(u1) and math.isfinite(u2)

    def metric(self, u1: float, u2: float) -> tuple[float, float, float]:
        X1, X2 = self.tangent(u1, u2)
        return float(mk.inner(X1, X1)), float(mk.inner(X1, X2)), float(mk.inner(X2, X2))

    def speed_sq(self, u1, u2, w1, w2) -> float:
        E, F, G = self.metric(u1, u2)
        return E * w1 * w1 + 2 * F * w1 * w2 + G * w2 * w2

    def embed(self, u1: float, u2: float) -> np.ndarray:
        raise NotImplementedError

    def tangent(self, u1: float, u2: float):
        raise NotImplementedError

    def christoffel(self, u1: float, u2: float):
        raise NotImplementedError

    def locate(self, p) -> tuple[float, float]:
        raise NotImplementedError

    def normal(self, u1: float, u2: float) -> np.ndarray:
        return cv.future_unit_normal(*self.tangent(u1, u2))

    def pair_sq(self, a, b) -> float:
        """<P(a) - P(b), P(a) - P(b)> for chart points a, b."""
        d = self.embed(*a) - self.embed(*b)
        return float(mk.inner(d, d))


class TroughChart(GeodesicChart):
    """Glide surface (semitrough for lam = 0) in coordinates r = log sinh t and s.

    In these coordinates all Christoffel symbols stay bounded toward both ends of the
    surface, unlike the (t, s) chart whose metric degenerates as t grows.
    """

    def __init__(self, lam: float):
        self.lam = float(lam)
        self.k = math.sqrt(1 + self.lam ** 2)
        self.name = f"trough({self.lam:g})"

    # exp(-2r) and the ambient coordinates overflow doubles below this
    R_MIN = -340.0

    def inside(self, r: float, s: float) -> bool:
        return r > self.R_MIN and abs(s) < 700.0

    @staticmethod
    def t_of_r(r: float) -> float:
        if r < 0:
            return math.asinh(math.exp(r))
        return r + math.log1p(math.sqrt(1.0 + math.exp(-2 * r)))

    def embed(self, r: float, s: float) -> np.ndarray:
        k, lam = self.k, self.lam
        c = math.sqrt(1.0 + math.exp(-2 * r)) if r > -350 else math.exp(-r)
        t = self.t_of_r(r)
        with np.errstate(over="ignore"):
            ep, em = np.exp(s - r), np.exp(-s - r)
        return np.array([k * (t - c) + lam * s, 0.5 * k * (ep - em), 0.5 * k * (ep + em)])

    def tangent(self, r: float, s: float):
        k, lam = self.k, self.lam
        E = math.exp(-r)
        c = math.sqrt(1.0 + E * E)
        ss, cs = math.sinh(s), math.cosh(s)
        return (np.array([k * c, -k * ss * E, -k * cs * E]),
                np.array([lam, k * cs * E, k * ss * E]))

    def metric(self, r, s):
        k, lam = self.k, self.lam
        E2 = math.exp(-2 * r)
        c = math.sqrt(1.0 + E2)
        return k * k, k * lam * c, lam * lam + k * k * E2

    def speed_sq(self, r, s, wr, ws):
        k, lam = self.k, self.lam
        E2 = math.exp(-2 * r)
        c = math.sqrt(1.0 + E2)
        a = k * wr + lam * c * ws
        return a * a + E2 * ws * ws

    def christoffel(self, r, s):
        k, lam = self.k, self.lam
        E2 = math.exp(-2 * r)
        c = math.sqrt(1.0 + E2)
        return (lam * lam, k * lam * c, lam * lam + k * k * E2,
                -k * lam / c, -k * k, -k * lam * c)

    def locate(self, p) -> tuple[float, float]:
        x, y = float(p[0]), float(p[1])
        k, lam = self.k, self.lam

        def xs(t):
            return k * (t - 1.0 / math.tanh(t)) + lam * math.asinh(y * math.sinh(t) / k) - x

        lo, hi = fm.T_WINDOW
        t = optimize.brentq(xs, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return math.log(math.sinh(t)), math.asinh(y * math.sinh(t) / k)

    def pair_sq(self, a, b) -> float:
        # y^2 - z^2 = -k^2 e^{-2r} on the surface; expanding avoids cancelling huge y, z
        k = self.k
        (r1, s1), (r2, s2) = a, b
        x1 = self.embed(r1, s1)[0]
        x2 = self.embed(r2, s2)[0]
        E1, E2 = math.exp(-r1), math.exp(-r2)
        return (x1 - x2) ** 2 - k * k * (E1 * E1 + E2 * E2) + 2 * k * k * math.cosh(s1 - s2) * E1 * E2

    def from_ts(self, t: float, s: float, dt: float = 0.0, ds: float = 0.0):
        """(r, s, dr, ds) from glide parameters and their velocities."""
        return math.log(math.sinh(t)), s, dt / math.tanh(t), ds


class HyperboloidChart(GeodesicChart):
    """Unit hyperboloid in half-plane coordinates: Y = e^r, metric dr^2 + e^{-2r} ds^2."""

    name = "hyperboloid"

    def embed(self, r, s):
        E = math.exp(-r)
        eR = math.exp(r)
        return np.array([s * E, 0.5 * ((s * s - 1) * E + eR), 0.5 * ((s * s + 1) * E + eR)])

    def tangent(self, r, s):
        E = math.exp(-r)
        eR = math.exp(r)
        return (np.array([-s * E, 0.5 * (-(s * s - 1) * E + eR), 0.5 * (-(s * s + 1) * E + eR)]),
                np.array([E, s * E, s * E]))

    def metric(self, r, s):
        return 1.0, 0.0, math.exp(-2 * r)

    def speed_sq(self, r, s, wr, ws):
        return wr * wr + math.exp(-2 * r) * ws * ws

    def christoffel(self, r, s):
        return (0.0, 0.0, math.exp(-2 * r), 0.0, -1.0, 0.0)

    def locate(self, p) -> tuple[float, float]:
        x, y = float(p[0]), float(p[1])
        z = math.sqrt(1.0 + x * x + y * y)
        r = -math.log(z - y)
        return r, x * math.exp(r)


class ParabolicGammaChart(GeodesicChart):
    """Parabolic-invariant surface through its inverse Gauss map (x, y), y > 0.

    The induced metric is (1/y^2 + eps^2) dx^2 + dy^2 / (y^2 (1 + eps^2 y^2)).
    """

    def __init__(self, eps: float):
        self.eps = float(eps)
        self.family = fm.ParabolicInvariant(eps)
        self.ps = self.family.parabolic_support()
        self.name = f"parabolic({self.eps:g})"

    def inside(self, x, y):
        return math.isfinite(x) and 1e-150 < y < 1e150

    def embed(self, x, y):
        return cv.inverse_gauss_map(self.ps, x, y)

    def tangent(self, x, y):
        return cv.inverse_gauss_map_jacobian(self.ps, x, y)

    def metric(self, x, y):
        e2 = self.eps ** 2
        return 1.0 / (y * y) + e2, 0.0, 1.0 / (y * y * (1 + e2 * y * y))

    def speed_sq(self, x, y, wx, wy):
        E, _, G = self.metric(x, y)
        return E * wx * wx + G * wy * wy

    def christoffel(self, x, y):
        e2 = self.eps ** 2
        A = 1.0 / (y * y) + e2
        B = 1.0 / (y * y * (1 + e2 * y * y))
        dA = -2.0 / y ** 3
        return (0.0, dA / (2 * A), 0.0,
                -dA / (2 * B), 0.0, -(1 + 2 * e2 * y * y) / (y * (1 + e2 * y * y)))

    def locate(self, p) -> tuple[float, float]:
        X, Y = float(p[0]), float(p[1])
        z0 = math.sqrt(1 + X * X + Y * Y)
        y0 = 1.0 / (z0 + X)

        def res(q):
            g = cv.inverse_gauss_map(self.ps, q[0], math.exp(q[1]))
            return [g[0] - X, g[1] - Y]

        sol = optimize.root(res, [Y * y0, math.log(y0)], method="hybr", tol=1e-13)
        return float(sol.x[0]), math.exp(float(sol.x[1]))


class ImmersionGeodesicChart(GeodesicChart):
    """Generic chart from an immersion; Christoffel symbols from g^{-1} <X_ij, X_l>."""

    def __init__(self, chart: fm.ImmersionChart, h: float = 1e-5):
        self.chart = chart
        self.h = h
        self.name = chart.name

    def inside(self, u1, u2):
        return self.chart.contains(u1, u2)

    def embed(self, u1, u2):
        return np.asarray(self.chart.eval(u1, u2), float)

    def tangent(self, u1, u2):
        return cv.chart_derivatives(self.chart, u1, u2, True, self.h)[0]

    def christoffel(self, u1, u2):
        (X1, X2), (X11, X12, X22) = cv.chart_derivatives(self.chart, u1, u2, True, self.h)
        g = np.array([[mk.inner(X1, X1), mk.inner(X1, X2)], [mk.inner(X1, X2), mk.inner(X2, X2)]])
        rhs = np.array([[mk.inner(X, X1) for X in (X11, X12, X22)],
                        [mk.inner(X, X2) for X in (X11, X12, X22)]])
        G = np.linalg.solve(g, rhs)
        return tuple(float(v) for v in G.reshape(-1))


def geodesic_chart(surface) -> GeodesicChart:
    if isinstance(surface, GeodesicChart):
        return surface
    if isinstance(surface, fm.Hyperboloid):
        return HyperboloidChart()
    if isinstance(surface, fm.Semitrough):
        return TroughChart(0.0)
    if isinstance(surface, fm.Glide):
        return TroughChart(surface.lam)
    if isinstance(surface, fm.ParabolicInvariant):
        return ParabolicGammaChart(surface.eps)
    if isinstance(surface, fm.HolderBarrier):
        im = cv.support_immersion(surface.parabolic_support())
        im.domain = {"x": (0.0, np.inf), "y": (0.0, np.inf)}
        return ImmersionGeodesicChart(im)
    if isinstance(surface, fm.ImmersionChart):
        return ImmersionGeodesicChart(surface)
    raise ChartExhausted(f"no geodesic chart for {type(surface).__name__}")


# ------------------------------------------------------------- integration


@dataclass
class GeodesicTrace:
    chart: GeodesicChart
    tau: np.ndarray
    params: np.ndarray
    chart_velocity: np.ndarray
    points: np.ndarray
    velocity: np.ndarray
    length: np.ndarray
    termination: Termination
    step: float
    remaining_length: float = math.inf
    length_drift: float = math.nan
    speed: float = 1.0

    @property
    def total_length(self) -> float:
        """Final length plus the geometric-series tail estimate when converged."""
        if self.termination is Termination.LENGTH_CONVERGED:
            return float(self.length[-1] + self.remaining_length)
        return float(self.length[-1])

    def speed_drift(self, upto: float = math.inf) -> float:
        """Max relative change of the squared speed over samples with length <= ``upto``."""
        keep = self.length <= upto
        sq = np.array([self.chart.speed_sq(u[0], u[1], w[0], w[1])
                       for u, w in zip(self.params[keep], self.chart_velocity[keep])])
        return float(np.max(np.abs(sq / sq[0] - 1.0)))

    def rows(self):
        for i in range(len(self.tau)):
            yield (self.tau[i], *self.points[i], *self.velocity[i], self.length[i])


CSV_COLUMNS = ("tau", "x", "y", "z", "vx", "vy", "vz", "len")


@dataclass
class _RunState:
    u1: float
    u2: float
    w1: float
    w2: float
    tau: float = 0.0
    ell: float = 0.0

    def vector(self):
        return (self.u1, self.u2, self.w1, self.w2, self.tau, self.ell)


def _rhs(chart: GeodesicChart, z):
    u1, u2, w1, w2 = z[0], z[1], z[2], z[3]
    a, b, c, d, e, f = chart.christoffel(u1, u2)
    acc1 = -(a * w1 * w1 + 2 * b * w1 * w2 + c * w2 * w2)
    acc2 = -(d * w1 * w1 + 2 * e * w1 * w2 + f * w2 * w2)
    inv = 1.0 / math.sqrt(1.0 + w1 * w1 + w2 * w2)
    sp = math.sqrt(max(chart.speed_sq(u1, u2, w1, w2), 0.0))
    return (w1 * inv, w2 * inv, acc1 * inv, acc2 * inv, inv, sp * inv)


def _rk4(chart, z, h):
    k1 = _rhs(chart, z)
    z2 = tuple(z[i] + 0.5 * h * k1[i] for i in range(6))
    k2 = _rhs(chart, z2)
    z3 = tuple(z[i] + 0.5 * h * k2[i] for i in range(6))
    k3 = _rhs(chart, z3)
    z4 = tuple(z[i] + h * k3[i] for i in range(6))
    k4 = _rhs(chart, z4)
    return tuple(z[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(6))


def _land(chart, z, h, index, target):
    """Partial step so that component ``index`` (tau or length) hits ``target``."""
    lo, hi = 0.0, h
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _rk4(chart, z, mid)[index] < target:
            lo = mid
        else:
            hi = mid
    return _rk4(chart, z, 0.5 * (lo + hi))


def _run(chart, u0, w0, h, max_length, max_param, max_steps, length_tol, window, sample_every):
    z = (float(u0[0]), float(u0[1]), float(w0[0]), float(w0[1]), 0.0, 0.0)
    samples = [z]
    incs: deque = deque(maxlen=window + 1)
    norms: deque = deque(maxlen=window + 1)
    term = Termination.BUDGET_EXHAUSTED
    remaining = math.inf
    for n in range(max_steps):
        try:
            zn = _rk4(chart, z, h)
        except (OverflowError, ValueError):
            term = Termination.CHART_BOUNDARY
            break
        if not all(map(math.isfinite, zn)) or not chart.inside(zn[0], zn[1]):
            term = Termination.CHART_BOUNDARY
            break
        if max_length is not None and zn[5] >= max_length:
            z = _land(chart, z, h, 5, max_length)
            samples.append(z)
            break
        if max_param is not None and zn[4] >= max_param:
            z = _land(chart, z, h, 4, max_param)
            samples.append(z)
            break
        incs.append(zn[5] - z[5])
        norms.append(math.hypot(zn[0], zn[1]))
        z = zn
        if n % sample_every == 0:
            samples.append(z)
        if len(incs) > window:
            ratios = [incs[i + 1] / incs[i] for i in range(window) if incs[i] > 0]
            if len(ratios) == window and all(r < 1.0 for r in ratios) and norms[-1] > norms[0]:
                q = max(ratios)
                if q < 1.0 - 1e-6:
                    remaining = incs[-1] * q / (1.0 - q)
                    if remaining < length_tol:
                        term = Termination.LENGTH_CONVERGED
                        break
    if samples[-1] is not z:
        samples.append(z)
    return np.array(samples), term, remaining


def _make_trace(chart, arr, term, remaining, h):
    u = arr[:, 0:2]
    w = arr[:, 2:4]
    with np.errstate(over="ignore", invalid="ignore"):
        pts = np.array([chart.embed(a, b) for a, b in u])
        vel = np.empty_like(pts)
        for i, ((a, b), (p, q)) in enumerate(zip(u, w)):
            X1, X2 = chart.tangent(a, b)
            sp = math.sqrt(max(chart.speed_sq(a, b, p, q), 1e-300))
            vel[i] = (X1 * p + X2 * q) / sp
    return GeodesicTrace(chart, arr[:, 4].copy(), u.copy(), w.copy(), pts, vel, arr[:, 5].copy(),
                         term, h, remaining)


def integrate_geodesic(surface, u0, w0, *, max_length: float | None = None,
                       max_param: float | None = None, step: float = 0.02, rtol: float = 1e-8,
                       max_halvings: int = 3, unit_speed: bool = True, length_tol: float = 1e-6,
                       max_steps: int = 2_000_000, window: int = 20,
                       sample_every: int = 1) -> GeodesicTrace:
    """Integrate the geodesic with chart position ``u0`` and chart velocity ``w0``.

    Fixed-step RK4 in a normalized parameter (chart speed capped at one); the step is
    halved until total length and endpoint agree with the previous run to ``rtol``.
    """
    chart = geodesic_chart(surface)
    if not chart.inside(*u0):
        raise ChartExhausted("initial point outside the chart")
    sq = chart.speed_sq(u0[0], u0[1], w0[0], w0[1])
    if sq <= 0:
        raise NotTangent("initial velocity must be spacelike and nonzero")
    if unit_speed:
        w0 = (w0[0] / math.sqrt(sq), w0[1] / math.sqrt(sq))
    if max_length is None and max_param is None and max_steps >= 2_000_000:
        max_length = 1e3
    args = (max_length, max_param, max_steps, length_tol, window, sample_every)
    h = step
    prev = _run(chart, u0, w0, h, *args)
    drift = math.nan
    for _ in range(max_halvings):
        h *= 0.5
        cur = _run(chart, u0, w0, h, *args)
        drift = _run_difference(chart, prev, cur)
        prev = cur
        if drift < rtol:
            break
    tr = _make_trace(chart, prev[0], prev[1], prev[2], h)
    tr.length_drift = drift
    tr.speed = math.sqrt(chart.speed_sq(u0[0], u0[1], w0[0], w0[1]))
    return tr


def _run_difference(chart, a, b) -> float:
    (za, ta, ra), (zb, tb, rb) = a, b
    la = za[-1, 5] + (ra if ta is Termination.LENGTH_CONVERGED else 0.0)
    lb = zb[-1, 5] + (rb if tb is Termination.LENGTH_CONVERGED else 0.0)
    dl = abs(la - lb) / max(abs(lb), 1e-300)
    if ta is Termination.LENGTH_CONVERGED or tb is Termination.LENGTH_CONVERGED:
        return dl
    du = float(np.max(np.abs(za[-1, :2] - zb[-1, :2]))) / max(1.0, float(np.max(np.abs(zb[-1, :2]))))
    return max(dl, du)


def initial_from_ambient(surface, p0, v0, tol: float = 1e-6):
    """Chart position and velocity for an ambient point (snapped vertically) and tangent vector."""
    chart = geodesic_chart(surface)
    u = chart.locate(p0)
    X1, X2 = chart.tangent(*u)
    B = np.stack([X1, X2], axis=1)
    v0 = np.asarray(v0, float)
    c, *_ = np.linalg.lstsq(B, v0, rcond=None)
    resid = float(np.linalg.norm(B @ c - v0))
    if resid > tol * max(1.0, float(np.linalg.norm(v0))):
        raise NotTangent(f"velocity leaves the tangent plane by {resid:.3e}")
    return u, (float(c[0]), float(c[1]))


def geodesic_residual(trace: GeodesicTrace, min_spacing: float = 1e-3,
                      resolution: float = 0.1) -> float:
    """Largest tangential part of the ambient acceleration, relative to max(1, |acc|).

    The acceleration comes from a degree-4 fit through five thinned samples. On a
    finite-length trace a stencil is used only while its width is below
    ``resolution`` times the remaining length; closer to the null limit the
    embedding derivatives outgrow any fixed stencil.
    """
    idx = thin_indices(trace.length, min_spacing)
    idx = idx[np.all(np.isfinite(trace.points[idx]), axis=1)]
    T = trace.total_length if trace.termination is Termination.LENGTH_CONVERGED else math.inf
    worst = 0.0
    for j in range(2, len(idx) - 2):
        st, i = idx[j - 2:j + 3], idx[j]
        ell = trace.length[st] - trace.length[i]
        if ell[-1] - ell[0] > resolution * (T - trace.length[st[-1]]):
            break
        acc = 2.0 * np.polyfit(ell, trace.points[st], 4)[2]
        X1, X2 = trace.chart.tangent(*trace.params[i])
        g = np.array([[mk.inner(X1, X1), mk.inner(X1, X2)], [mk.inner(X1, X2), mk.inner(X2, X2)]])
        c = np.linalg.solve(g, [mk.inner(acc, X1), mk.inner(acc, X2)])
        tang = c[0] * X1 + c[1] * X2
        res = math.sqrt(max(float(mk.inner(tang, tang)), 0.0)) / max(1.0, float(np.linalg.norm(acc)))
        worst = max(worst, res)
    return worst


def thin_indices(length: np.ndarray, min_spacing: float) -> np.ndarray:
    """Sample indices at least ``min_spacing`` apart in length (first and last kept)."""
    keep = [0]
    for i in range(1, len(length)):
        if length[i] - length[keep[-1]] >= min_spacing:
            keep.append(i)
    last = len(length) - 1
    if keep[-1] != last:
        if len(keep) > 1 and length[last] - length[keep[-1]] < 0.5 * min_spacing:
            keep[-1] = last
        else:
            keep.append(last)
    return np.array(keep)


def curve_length(surface, path, a: float, b: float, epsabs: float = 1e-13,
                 epsrel: float = 1e-12) -> float:
    """Length of a parameter path; ``path(tau)`` returns (u1, u2, du1, du2)."""
    if hasattr(surface, "speed_sq") and not isinstance(surface, GeodesicChart):
        def speed(tau):
            u1, u2, d1, d2 = path(tau)
            return math.sqrt(max(float(surface.speed_sq(u1, u2, d1, d2)), 0.0))
    else:
        chart = geodesic_chart(surface)

        def speed(tau):
            u1, u2, d1, d2 = path(tau)
            return math.sqrt(max(chart.speed_sq(u1, u2, d1, d2), 0.0))
    val, _ = integrate.quad(speed, a, b, limit=500, epsabs=epsabs, epsrel=epsrel)
    return val


def glide_curve_length(lam: float, a: float, b: float) -> float:
    g = fm.Glide(lam)
    with np.errstate(over="ignore"):
        return curve_length(g, lambda tau: (lam * tau, -g.k * tau, lam, -g.k), a, b)


# ----------------------------------------------------------- asymptotics


def velocity_interval(v) -> tuple[float, float]:
    """Arc {theta : <v, theta_vec> >= 0} as (center - half, center + half)."""
    vx, vy, vz = (float(c) for c in v)
    R = math.hypot(vx, vy)
    if R == 0.0 or abs(vz) > R * (1 + 1e-8):
        raise PreconditionFailed("velocity is not spacelike")
    center = math.atan2(vy, vx)
    # nearly null velocities round to |vz| ~ R at the end of a finite-length ray
    half = math.acos(max(-1.0, min(1.0, vz / R)))
    return center - half, center + half


@dataclass
class AsymptoticReport:
    theta_plus: mk.NullDirection
    interval_history: list
    limit_values: dict
    support_value: float
    divergence: dict = field(default_factory=dict)
    nested: bool = True
    final_width: float = math.nan


def _aitken(v0, v1, v2):
    d1, d2 = v1 - v0, v2 - v1
    den = d2 - d1
    if abs(den) < 1e-300 or abs(d2) > abs(d1):
        return v2
    return v2 - d2 * d2 / den


def tail_extrapolate(values: np.ndarray) -> float:
    """Aitken/Richardson extrapolation over the last decade of samples."""
    n = len(values)
    if n < 3:
        return float(values[-1])
    m = max(1, n // 10)
    i2 = n - 1
    i1 = max(0, i2 - m)
    i0 = max(0, i1 - m)
    return float(_aitken(values[i0], values[i1], values[i2]))


def asymptotic_direction(trace: GeodesicTrace, width_tol: float = 1e-2,
                         nest_tol: float = 1e-6, n_history: int = 200,
                         probe_offsets=(0.25, 0.5, 1.0)) -> AsymptoticReport:
    if trace.termination is not Termination.LENGTH_CONVERGED:
        raise PreconditionFailed("trace is not a finite-length candidate")
    finite = np.all(np.isfinite(trace.velocity), axis=1)
    idx = np.nonzero(finite)[0]
    picks = idx[np.unique(np.linspace(0, len(idx) - 1, min(n_history, len(idx))).astype(int))]
    hist = []
    ref = None
    nested = True
    prev = None
    for i in picks:
        lo, hi = velocity_interval(trace.velocity[i])
        mid = 0.5 * (lo + hi)
        if ref is None:
            ref = mid
        shift = round((ref - mid) / (2 * math.pi)) * 2 * math.pi
        lo, hi = lo + shift, hi + shift
        if prev is not None and (lo < prev[0] - nest_tol or hi > prev[1] + nest_tol):
            nested = False
        prev = (lo, hi)
        hist.append((float(trace.tau[i]), lo, hi))
    width = hist[-1][2] - hist[-1][1]
    widths = [h[2] - h[1] for h in hist]
    if width > width_tol or widths[-1] > widths[len(widths) // 2]:
        raise NotContracting(f"final interval width {width:.3e}")
    theta = mk.NullDirection(0.5 * (hist[-1][1] + hist[-1][2]))
    pts = trace.points[idx]
    vals = mk.inner(pts, theta.vector)
    limit = tail_extrapolate(vals)
    div = {}
    for off in probe_offsets:
        for sgn in (-1, 1):
            th = mk.normalize_angle(theta.theta + sgn * off)
            div[th] = float(mk.inner(pts[-1], mk.null_vector(th)))
    return AsymptoticReport(theta, hist, {theta.theta: limit}, limit, div, nested, width)


# ----------------------------------------------------------- diagnostics


@dataclass
class DiagnosticReport:
    name: str
    ok: bool
    worst: float
    threshold: float
    violations: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _finite_thinned(trace, min_spacing):
    idx = thin_indices(trace.length, min_spacing)
    return idx[np.all(np.isfinite(trace.points[idx]), axis=1)]


def phi_concavity_check(trace: GeodesicTrace, v, min_spacing: float = 1e-2,
                        rel_tol: float = 1e-6) -> DiagnosticReport:
    """Second divided differences of <gamma, v> in arc length must be <= tol * scale."""
    v = np.asarray(v, float)
    cc = mk.classify(v)
    if not (cc.causal and cc.future):
        raise PreconditionFailed("v must be future causal")
    idx = _finite_thinned(trace, min_spacing)
    ell = trace.length[idx]
    phi = mk.inner(trace.points[idx], v)
    scale = max(1.0, float(np.max(np.abs(phi))))
    d2 = 2.0 * (np.diff(phi[1:]) / np.diff(ell[1:]) - np.diff(phi[:-1]) / np.diff(ell[:-1])) / (ell[2:] - ell[:-2])
    thr = rel_tol * scale
    bad = [(float(ell[i + 1]), float(d2[i])) for i in np.nonzero(d2 > thr)[0]]
    worst = float(np.max(d2)) if len(d2) else -math.inf
    return DiagnosticReport("phi_concavity", not bad, worst, thr, bad, {"scale": scale})


def dext_monotonicity_check(trace: GeodesicTrace, min_spacing: float = 1e-2,
                            tol: float = 1e-4) -> DiagnosticReport:
    """Forward slopes of the extrinsic distance from the start point, per unit length."""
    if abs(trace.speed - 1.0) > 1e-9:
        raise PreconditionFailed("trace must be unit speed")
    idx = thin_indices(trace.length, min_spacing)
    u0 = tuple(trace.params[0])
    sq = np.array([trace.chart.pair_sq(tuple(trace.params[i]), u0) for i in idx])
    if np.any(sq < -1e-12 * np.maximum(1.0, np.abs(sq))):
        raise TimelikeSeparation("trace point is timelike separated from the start")
    d = np.sqrt(np.maximum(sq, 0.0))
    slope = np.diff(d) / np.diff(trace.length[idx])
    bad = [(float(trace.length[idx][i]), float(slope[i])) for i in np.nonzero(slope < 1 - tol)[0]]
    worst = float(np.min(slope)) if len(slope) else math.inf
    return DiagnosticReport("dext_slope", not bad, worst, 1 - tol, bad)


def timelike_decay_check(trace: GeodesicTrace, line: mk.SpacelikeLine,
                         tail_fraction: float = 0.5) -> DiagnosticReport:
    """Fit dist(gamma, L) <= C sqrt(T - ell) over the tail, T the total length."""
    if trace.termination is not Termination.LENGTH_CONVERGED:
        raise PreconditionFailed("trace has no finite-length tail")
    T = trace.total_length
    idx = np.nonzero(np.all(np.isfinite(trace.points), axis=1))[0]
    ell = trace.length[idx]
    tail = idx[ell >= ell[-1] * (1 - tail_fraction)]
    ratios = []
    dists = []
    for i in tail:
        d = mk.timelike_dist_to_line(trace.points[i], line)
        rem = T - trace.length[i]
        dists.append(d)
        if rem > 0:
            ratios.append(d / math.sqrt(rem))
    C = max(ratios) if ratios else math.inf
    ok = math.isfinite(C) and dists[-1] <= dists[0]
    return DiagnosticReport("timelike_decay", ok, C, math.inf, [],
                            {"final_distance": dists[-1], "C": C, "total_length": T})


def trace_csv_rows(trace: GeodesicTrace):
    return list(trace.rows())
