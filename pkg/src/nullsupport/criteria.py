"""Evaluators for the completeness and incompleteness conditions and the barrier constructions.

Every verdict is certified relative to a finite probe toward theta0: a geometric
sequence of offsets r0 * ratio^j, j = 0..depth, on both sides.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import minkowski as mk
from . import support as sp
from .errors import (BoundaryOrderViolated, DeltaTooLarge, DomainError, InfiniteBase,
                     NotInFuture, PreconditionFailed)


class Condition(enum.Enum):
    COMP = "Comp"
    COMP_PRIME = "CompPrime"
    INC = "Inc"
    INC_PRIME = "IncPrime"
    NULL_LINE_DISJOINT = "NullLineDisjoint"


@dataclass(frozen=True)
class Probe:
    r0: float = 0.1
    ratio: float = 0.5
    depth: int = 40
    tail: int = 10
    n_global: int = sp.DEFAULT_PROBE

    def offsets(self) -> np.ndarray:
        return self.r0 * self.ratio ** np.arange(self.depth + 1)


DEFAULT_PROBE = Probe()


@dataclass
class CriterionVerdict:
    condition: Condition
    theta0: float
    params: dict
    holds: bool
    witness: dict
    probe: dict

    def to_dict(self) -> dict:
        return {"condition": self.condition.value, "theta0": self.theta0, "params": self.params,
                "holds": self.holds, "witness": self.witness, "probe": self.probe}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _base(phi: sp.NullSupportFn, theta0: float) -> float:
    b = phi(theta0)
    if not b.finite:
        raise InfiniteBase(f"phi({theta0}) = +inf")
    return b.value


def _diffs(phi, theta0, base, d):
    """phi(theta0 + d) - phi(theta0) with +inf mapped to inf."""
    v, inf = phi.eval_many(theta0 + np.asarray(d, float))
    return np.where(inf, np.inf, v - base)


def _side_offsets(d, side):
    return {"right": [d], "left": [-d], "either": [d, -d], "both": [d, -d]}[side]


# -------------------------------------------------------------------- Comp


def check_comp(phi: sp.NullSupportFn, theta0: float, M: float = 1.0,
               probe: Probe = DEFAULT_PROBE) -> CriterionVerdict:
    """Look for theta_i -> theta0 with phi(theta_i) < phi(theta0) + M |theta_i - theta0|.

    Holds when some side has a hit among the deepest ``probe.tail`` levels.
    """
    if M <= 0:
        raise DomainError("M must be positive")
    base = _base(phi, theta0)
    d = probe.offsets()
    deep = len(d) - probe.tail
    hits = {}
    holds = False
    for name, sgn in (("right", 1.0), ("left", -1.0)):
        diff = _diffs(phi, theta0, base, sgn * d)
        ok = diff < M * d
        hits[name] = [mk.normalize_angle(theta0 + sgn * float(x)) for x in d[ok]]
        holds |= bool(np.any(ok[deep:]))
    return CriterionVerdict(Condition.COMP, float(theta0), {"M": M}, holds,
                            {"sequence": hits}, asdict(probe))


# ---------------------------------------------------------------- Comp'


def loglog_comparator(lam: float, d):
    d = np.asarray(d, float)
    return lam / 4.0 * d * np.log(-np.log(d))


def check_comp_prime(phi: sp.NullSupportFn, theta0: float, lam: float, side: str = "either",
                     r_max: float = 0.1, r_min: float = 1e-8, n: int = 60) -> CriterionVerdict:
    """phi <= phi(theta0) + (lam/4) d log(-log d) on a one-sided log probe; largest valid radius."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if r_max >= math.exp(-1):
        raise DomainError("probe radius must stay below 1/e")
    base = _base(phi, theta0)
    d = np.geomspace(r_max, r_min, n)
    bound = loglog_comparator(lam, d)
    radii = {}
    sides = ("right", "left") if side == "either" else (side,)
    for name in sides:
        sgn = 1.0 if name == "right" else -1.0
        ok = _diffs(phi, theta0, base, sgn * d) <= bound
        radii[name] = _valid_radius(d, ok)
    best = max(radii, key=lambda k: radii[k])
    holds = radii[best] > 0
    return CriterionVerdict(Condition.COMP_PRIME, float(theta0), {"lambda": lam, "side": side},
                            bool(holds), {"radius": radii, "side": best if holds else None},
                            {"r_max": r_max, "r_min": r_min, "n": n, "spacing": "log"})


def _valid_radius(d: np.ndarray, ok: np.ndarray) -> float:
    """Largest d_j (d decreasing) such that every probe at or below it passes."""
    radius = 0.0
    for j in range(len(d) - 1, -1, -1):
        if not ok[j]:
            break
        radius = float(d[j])
    return radius


# ------------------------------------------------------------------- Inc


def check_inc(phi: sp.NullSupportFn, theta0: float, eps: float, alpha: float,
              probe: Probe = DEFAULT_PROBE) -> CriterionVerdict:
    """phi(theta) - phi(theta0) > eps |theta - theta0|^alpha on both sides near theta0."""
    if not 0 < alpha < 1 or eps <= 0:
        raise DomainError("need 0 < alpha < 1 and eps > 0")
    base = _base(phi, theta0)
    d = probe.offsets()
    ok = np.ones(d.shape, bool)
    for sgn in (1.0, -1.0):
        ok &= _diffs(phi, theta0, base, sgn * d) > eps * d ** alpha
    radius = _valid_radius(d, ok)
    return CriterionVerdict(Condition.INC, float(theta0), {"eps": eps, "alpha": alpha},
                            radius > 0, {"radius": radius}, asdict(probe))


def check_inc_prime(phi: sp.NullSupportFn, theta0: float, eps: float,
                    probe: Probe = DEFAULT_PROBE) -> CriterionVerdict:
    """phi = +inf on one side; phi >= phi(theta0) + eps |d log d| on the other."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    base = _base(phi, theta0)
    d = probe.offsets()
    best = (0.0, None)
    for inf_side, sgn in (("right", 1.0), ("left", -1.0)):
        a = np.isinf(_diffs(phi, theta0, base, sgn * d))
        b = _diffs(phi, theta0, base, -sgn * d) >= eps * d * np.abs(np.log(d))
        r = _valid_radius(d, a & b)
        if r > best[0]:
            best = (r, inf_side)
    return CriterionVerdict(Condition.INC_PRIME, float(theta0), {"eps": eps}, best[0] > 0,
                            {"radius": best[0], "infinite_side": best[1]}, asdict(probe))


# ------------------------------------------------------------- null lines


def null_line_meets(phi: sp.NullSupportFn, theta0: float, slope: float,
                    probe: Probe = DEFAULT_PROBE, max_power: int = 40) -> int | None:
    """Smallest k <= max_power such that the point of the null line with slope ``slope`` and
    quadratic coefficient -2^(k+1) lies on the boundary of the domain of dependence, or None.

    In the parabolic chart centred at theta0 (psi(0) = 0) such a point has f_p(x) = m x - 2 a x^2
    with a = 2^k; f_p <= psi means (m/2) sin d - 2 a sin^2(d/2) <= phi(theta0 + d) - phi(theta0).
    """
    base = _base(phi, theta0)
    d_loc = probe.offsets()
    grid = np.asarray(phi.probe_grid(probe.n_global), float) - theta0
    grid = np.mod(grid + np.pi, 2 * np.pi) - np.pi
    d = np.unique(np.concatenate([d_loc, -d_loc, grid[np.abs(grid) > 0]]))
    diff = _diffs(phi, theta0, base, d)
    fin = np.isfinite(diff)
    d, diff = d[fin], diff[fin]
    lin = 0.5 * slope * np.sin(d)
    quad = 2.0 * np.sin(0.5 * d) ** 2
    for k in range(max_power + 1):
        if np.all(lin - 2.0 ** k * quad <= diff):
            return k
    return None


def null_line_disjoint(phi: sp.NullSupportFn, theta0: float, M: float = 1.0,
                       slope: float | None = None, probe: Probe = DEFAULT_PROBE,
                       max_power: int = 40) -> CriterionVerdict:
    """Is there a null line in the support plane at theta0 missing the domain-of-dependence boundary?

    Without an explicit slope, tests the slopes +-(2M + 1): near theta0 the parabolic
    coordinate is half the angle, so these are the lines used to refute the Comp
    condition with constant M.
    """
    slopes = [slope] if slope is not None else [2 * M + 1, -(2 * M + 1)]
    report = {}
    disjoint = None
    for m in slopes:
        k = null_line_meets(phi, theta0, m, probe, max_power)
        report[repr(float(m))] = k
        if k is None and disjoint is None:
            disjoint = float(m)
    return CriterionVerdict(Condition.NULL_LINE_DISJOINT, float(theta0),
                            {"M": M, "slope": slope, "max_power": max_power}, disjoint is not None,
                            {"disjoint_slope": disjoint, "meeting_power": report}, asdict(probe))


# --------------------------------------------------------------- replay


def replay(verdict: CriterionVerdict, phi: sp.NullSupportFn) -> CriterionVerdict:
    """Re-run the evaluator that produced ``verdict`` with its stored parameters."""
    p = verdict.params
    c = verdict.condition
    if c is Condition.COMP_PRIME:
        pr = verdict.probe
        return check_comp_prime(phi, verdict.theta0, p["lambda"], p["side"], pr["r_max"],
                                pr["r_min"], pr["n"])
    probe = Probe(**verdict.probe)
    if c is Condition.COMP:
        return check_comp(phi, verdict.theta0, p["M"], probe)
    if c is Condition.INC:
        return check_inc(phi, verdict.theta0, p["eps"], p["alpha"], probe)
    if c is Condition.INC_PRIME:
        return check_inc_prime(phi, verdict.theta0, p["eps"], probe)
    return null_line_disjoint(phi, verdict.theta0, p["M"], p["slope"], probe, p["max_power"])


# ----------------------------------------------------------- comparison


@dataclass
class ComparisonReport:
    holds: bool
    min_gap: float
    argmin: tuple
    boundary_min_gap: float


def comparison_check(upper, lower, boundary, grid) -> ComparisonReport:
    """Verify lower < upper on an interior grid given strict order on a boundary loop."""
    bgap = min(upper.graph_height(x, y) - lower.graph_height(x, y) for x, y in boundary)
    if not bgap > 0:
        raise BoundaryOrderViolated(f"boundary gap {bgap:.3e} is not positive")
    gaps = [(upper.graph_height(x, y) - lower.graph_height(x, y), (x, y)) for x, y in grid]
    g, arg = min(gaps, key=lambda t: t[0])
    return ComparisonReport(g > 0, float(g), tuple(map(float, arg)), float(bgap))


def rectangle_loop(x0, x1, y0, y1, n: int = 50):
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    return ([(x, y0) for x in xs] + [(x1, y) for y in ys] + [(x, y1) for x in xs[::-1]]
            + [(x0, y) for y in ys[::-1]])


# ----------------------------------------------------------------- strip


@dataclass
class StripBarrier:
    """Semitrough translated horizontally by 1 - d and vertically by -eps through (0, h, h)."""

    h: float
    r: float
    d: float
    eps: float
    t0: float
    t1: float
    z1: float

    def height(self, x: float, y: float) -> float:
        from .families import _trough_height
        return _trough_height(0.0, x + self.d - 1.0, y) - self.eps


def _t_of_profile(value: float) -> float:
    """t > 0 with t - coth t = value."""
    return optimize.brentq(lambda t: t - 1.0 / math.tanh(t) - value, 1e-12, abs(value) + 50.0,
                           xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def strip_barrier(h: float, r: float) -> StripBarrier:
    if h <= 0:
        raise DomainError("h must be positive")
    d = r - math.log(h / 2.0)
    t0 = _t_of_profile(d - 1.0)
    csch0 = 1.0 / math.sinh(t0)
    eps = csch0 * csch0 / (math.sqrt(h * h + csch0 * csch0) + h)
    t1 = _t_of_profile(r + d - 1.0)
    z1 = 1.0 / math.sinh(t1) - eps
    return StripBarrier(h, r, d, eps, t0, t1, z1)


@dataclass
class StripReport:
    holds: bool
    r: np.ndarray
    heights: np.ndarray
    lower_bound: np.ndarray
    boundary_min: float


def strip_bound_check(surface, h: float, r_values, x_max: float | None = None,
                      n_boundary: int = 200, tol: float = 1e-12) -> StripReport:
    """Given f >= h on the boundary of [0, inf) x (-h, h), check f(r, 0) >= h e^{-2r} / 4."""
    r_values = np.asarray(r_values, float)
    x_max = float(np.max(r_values)) * 2 + 1 if x_max is None else x_max
    f = surface.graph_height if hasattr(surface, "graph_height") else surface
    pts = [(0.0, y) for y in np.linspace(-h, h, n_boundary)]
    pts += [(x, s * h) for x in np.linspace(0, x_max, n_boundary) for s in (-1, 1)]
    bmin = min(f(x, y) for x, y in pts)
    if bmin < h - tol:
        raise PreconditionFailed(f"boundary height {bmin:.6g} < h = {h}")
    heights = np.array([f(r, 0.0) for r in r_values])
    lb = h * np.exp(-2 * r_values) / 4
    return StripReport(bool(np.all(heights >= lb)), r_values, heights, lb, float(bmin))


# ------------------------------------------------------------ long segment


@dataclass
class LongSegment:
    start: np.ndarray
    end: np.ndarray
    center: np.ndarray
    length: float
    contained: bool | None
    min_margin: float | None


def long_segment_length(h: float, delta: float) -> float:
    return 0.5 * math.log(h / (4.0 * delta))


def long_segment(p, q, line: mk.SpacelikeLine, h: float, delta: float, surface=None,
                 eps_threshold: float | None = None, r_min: float = 3.0,
                 n_samples: int = 1000) -> LongSegment:
    """Segment parallel to the line at timelike distance h, bisected by the ray p -> q."""
    eps_threshold = h * math.exp(-2 * r_min) / 4 if eps_threshold is None else eps_threshold
    if delta >= eps_threshold:
        raise DeltaTooLarge(f"delta {delta:.3e} >= threshold {eps_threshold:.3e}")
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    v = q - p
    nv = float(mk.inner(v, v))
    if nv >= 0 or v[2] <= 0:
        raise PreconditionFailed("q must lie in the timelike future of p")
    if math.sqrt(-nv) > delta * (1 + 1e-12):
        raise PreconditionFailed("dist(p, q) exceeds delta")
    d = line.dir
    vp = v - float(mk.inner(v, d)) * d
    s = h / math.sqrt(-float(mk.inner(vp, vp)))
    center = p + s * v
    length = long_segment_length(h, delta)
    a = center - 0.5 * length * d
    b = center + 0.5 * length * d
    contained = margin = None
    if surface is not None:
        lam = np.linspace(0.0, 1.0, n_samples)
        seg = a[None, :] + lam[:, None] * (b - a)[None, :]
        margins = np.array([z - surface.graph_height(x, y) for x, y, z in seg])
        margin = float(np.min(margins))
        contained = margin >= 0
    return LongSegment(a, b, center, length, contained, margin)


# -------------------------------------------------------- 1-Lipschitz projection


@dataclass
class ProjectionReport:
    projected: np.ndarray
    shifts: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    pairs: list = field(default_factory=list)


def _grad(f, x, y, h=1e-6):
    return ((f(x + h, y) - f(x - h, y)) / (2 * h), (f(x, y + h) - f(x, y - h)) / (2 * h))


def project_point(upper, lower, x: float, y: float, tol: float = 1e-12):
    """Follow the orthogonal trajectory of the vertical translates of ``upper`` down to ``lower``.

    Along the flow the horizontal position moves by -grad f / (1 - |grad f|^2) per unit of
    translation c, and the point sits at height f(x, y) - c.
    """
    fu, fl = upper.graph_height, lower.graph_height
    gap0 = fu(x, y) - fl(x, y)
    if gap0 < -tol:
        raise NotInFuture(f"point is {gap0:.3e} below the lower surface")
    if gap0 <= tol:
        return np.array([x, y, fu(x, y)]), 0.0

    def rhs(c, z):
        gx, gy = _grad(fu, z[0], z[1])
        den = 1.0 - gx * gx - gy * gy
        return [-gx / den, -gy / den]

    def hit(c, z):
        return fu(z[0], z[1]) - c - fl(z[0], z[1])
    hit.terminal = True
    hit.direction = -1

    sol = integrate.solve_ivp(rhs, (0.0, 50.0 * gap0 + 10.0), [x, y], events=hit,
                              rtol=1e-10, atol=1e-12, max_step=max(gap0, 1e-3))
    if not sol.t_events[0].size:
        raise NotInFuture("flow line never reached the lower surface")
    c = float(sol.t_events[0][0])
    px, py = sol.y_events[0][0]
    return np.array([px, py, fl(px, py)]), c


def polyline_length(f, a, b, n: int = 64) -> float:
    """Length on graph(f) of the straight parameter segment from a to b."""
    lam = np.linspace(0, 1, n + 1)
    xy = np.asarray(a)[None, :] + lam[:, None] * (np.asarray(b) - np.asarray(a))[None, :]
    z = np.array([f(x, y) for x, y in xy])
    dx = np.diff(xy, axis=0)
    dz = np.diff(z)
    sq = np.sum(dx * dx, axis=1) - dz * dz
    return float(np.sum(np.sqrt(np.maximum(sq, 0.0))))


def lipschitz_projection(upper, lower, points, pairs=None, n: int = 64) -> ProjectionReport:
    """Project points of ``upper`` to ``lower`` and report intrinsic distance ratios on pairs."""
    pts = np.asarray(points, float)
    proj = []
    shifts = []
    for x, y in pts[:, :2]:
        P, c = project_point(upper, lower, x, y)
        proj.append(P)
        shifts.append(c)
    proj = np.array(proj)
    if pairs is None:
        pairs = [(i, i + 1) for i in range(len(pts) - 1)]
    ratios = []
    for i, j in pairs:
        du = polyline_length(upper.graph_height, pts[i, :2], pts[j, :2], n)
        dl = polyline_length(lower.graph_height, proj[i, :2], proj[j, :2], n)
        ratios.append(dl / du if du > 0 else 1.0)
    ratios = np.array(ratios)
    return ProjectionReport(proj, np.array(shifts), ratios,
                            float(np.max(ratios)) if len(ratios) else 1.0, list(pairs))
