"""The acceptance suite: ten numerical checks with measured values, tolerances and runtimes."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import criteria as cr
from . import curvature as cv
from . import families as fm
from . import geodesics as gd
from . import minkowski as mk
from . import support as sp


@dataclass
class CriterionResult:
    id: int
    name: str
    group: str
    passed: bool
    measured: float
    tolerance: float
    runtime: float
    runtime_limit: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.id} {self.name}: measured={self.measured:.3e} "
                f"tol={self.tolerance:.1e} runtime={self.runtime:.2f}s (limit {self.runtime_limit:g}s)")

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "group": self.group, "passed": self.passed,
                "measured": self.measured, "tolerance": self.tolerance, "runtime": self.runtime,
                "runtime_limit": self.runtime_limit, "detail": self.detail}


REGISTRY: list[tuple[int, str, str, float, Callable]] = []


def criterion(cid: int, name: str, group: str, runtime_limit: float):
    def wrap(fn):
        REGISTRY.append((cid, name, group, runtime_limit, fn))
        return fn
    return wrap


# ------------------------------------------------------------------ 1


@criterion(1, "glide-curvature", "curvature", 2.0)
def glide_curvature():
    t = np.geomspace(0.2, 3.0, 50)
    s = np.linspace(-2.0, 2.0, 50)
    worst_a = worst_fd = 0.0
    for lam in (0.0, 0.5, 1.0, 2.0):
        chart = fm.Glide(lam).immersion()
        for a in t:
            for b in s:
                worst_a = max(worst_a, abs(cv.fundamental_forms(chart, a, b, True).K + 1))
        for a in t[::5]:
            for b in s[::5]:
                worst_fd = max(worst_fd, abs(cv.fundamental_forms(chart, a, b, False).K + 1))
    passed = worst_a <= 1e-6 and worst_fd <= 1e-3
    return passed, worst_a, 1e-6, {"max_abs_K_plus_1_fd": worst_fd, "fd_tolerance": 1e-3,
                                   "fd_grid": "every fifth node"}


# ------------------------------------------------------------------ 2


@criterion(2, "parabolic-family-identity", "curvature", 1.0)
def parabolic_identity():
    xs = np.linspace(-5.0, 5.0, 40)
    ys = np.linspace(0.1, 10.0, 40)
    wF = wK = wX = 0.0
    for eps in (0.0, 0.5, 2.0):
        ps = fm.ParabolicInvariant(eps).parabolic_support()
        for x in xs:
            for y in ys:
                F = cv.F_operator(ps, x, y)
                wF = max(wF, abs(F - 4))
                wK = max(wK, abs(-4 / F + 1))
        im = cv.parabolic_family_immersion(eps)
        for x in xs[::8]:
            for y in ys[::8]:
                wX = max(wX, abs(cv.fundamental_forms(im, x, y).K + 1))
    m = max(wF, wK)
    return m <= 1e-8 and wX <= 1e-8, m, 1e-8, {"max_abs_F_minus_4": wF, "max_abs_K_plus_1": wK,
                                               "reconstructed_chart_K_error": wX}


# ------------------------------------------------------------------ 3


def glide_length_closed_form(lam: float, a: float, b: float) -> float:
    k = math.sqrt(1 + lam * lam)
    F = lambda tau: k / lam * math.log(math.tanh(lam * tau / 2))  # noqa: E731
    return F(b) - F(a)


@criterion(3, "finite-geodesic-length", "geodesics", 1.0)
def finite_length():
    lam = 1.0
    checkpoints = [2.0, 5.0, 10.0, 20.0, 35.0, 50.0]
    errs = [abs(gd.glide_curve_length(lam, 1.0, b) - glide_length_closed_form(lam, 1.0, b))
            for b in checkpoints]
    total = gd.glide_curve_length(lam, 1.0, math.inf)
    exact = math.sqrt(2) * math.log(1 / math.tanh(0.5))
    terr = abs(total - exact)
    passed = max(errs) <= 1e-6 and terr <= 1e-3
    return passed, max(errs), 1e-6, {"total": total, "closed_form_total": exact,
                                     "total_error": terr, "total_tolerance": 1e-3}


# ------------------------------------------------------------------ 4


def incomplete_ray(lam: float, **kw) -> gd.GeodesicTrace:
    """Geodesic shot from the point tau = 1 of the finite-length curve, with its velocity."""
    chart = gd.TroughChart(lam)
    a = abs(lam)
    sgn = -1.0 if lam > 0 else 1.0
    u = chart.from_ts(a, sgn * chart.k, a, sgn * chart.k)
    kw.setdefault("max_length", 50.0)
    kw.setdefault("length_tol", 1e-9)
    return gd.integrate_geodesic(chart, u[:2], u[2:], **kw)


@criterion(4, "asymptotic-direction", "geodesics", 5.0)
def asymptotic():
    out = {}
    worst_dir = worst_val = 0.0
    for lam, target in ((1.0, -math.pi / 2), (-1.0, math.pi / 2)):
        tr = incomplete_ray(lam)
        rep = gd.asymptotic_direction(tr)
        dth = mk.angular_distance(rep.theta_plus.theta, target)
        worst_dir = max(worst_dir, float(dth))
        worst_val = max(worst_val, abs(rep.support_value))
        out[f"lambda={lam:g}"] = {"theta_plus": rep.theta_plus.theta, "support_value": rep.support_value,
                                  "total_length": tr.total_length, "nested": rep.nested,
                                  "termination": tr.termination.value}
    passed = worst_dir <= 1e-2 and worst_val <= 1e-3
    out["support_value_error"] = worst_val
    return passed, worst_dir, 1e-2, out


# ------------------------------------------------------------------ 5


@criterion(5, "glide-support-function", "support", 10.0)
def glide_support():
    lam = 1.0
    x = np.linspace(-1.0, -0.05, 20)
    exact = -2 * lam * np.abs(x) * np.log(np.abs(x))
    sampled = fm.glide_support_sampled(lam, x, 400, 400)
    # relative error is undefined where the exact value vanishes (x = -1); those points are
    # held to the same 2% measured against the largest |exact| instead
    nz = exact != 0
    rel_max = float(np.max(np.abs(sampled[nz] - exact[nz]) / np.abs(exact[nz])))
    zero_err = float(np.max(np.abs(sampled[~nz]), initial=0.0)) / float(np.max(np.abs(exact)))
    absmax = float(np.max(np.abs(sampled - exact)))
    refined = fm.glide_support_sampled(lam, x[nz], 400, 4000)
    rel_refined = float(np.max(np.abs(refined - exact[nz]) / np.abs(exact[nz])))
    rng = np.random.default_rng(5)
    eq = 0.0
    for _ in range(200):
        s = rng.uniform(-3, 3)
        xx = -rng.uniform(0.01, 5)
        lhs = fm.glide_support_closed_form(lam, math.exp(s) * xx).value
        rhs = math.exp(s) * (fm.glide_support_closed_form(lam, xx).value + 2 * lam * s * xx)
        eq = max(eq, abs(lhs - rhs))
    passed = rel_max <= 0.02 and zero_err <= 0.02 and eq <= 1e-10
    return passed, rel_max, 0.02, {"relative_error_at_zero_of_phi": zero_err, "max_abs_error": absmax,
                                   "equivariance_error": eq,
                                   "max_rel_error_with_4000_s_samples": rel_refined,
                                   "note": "grid bias is first order in the s spacing"}


# ------------------------------------------------------------------ 6


def barrier_grid():
    xs = np.geomspace(1e-3, 10.0, 40)
    return np.concatenate([-xs[::-1], xs]), np.geomspace(1e-3, 50.0, 40)


@criterion(6, "holder-barrier", "curvature", 5.0)
def holder_barrier():
    xs, ys = barrier_grid()
    M, fmin = cv.search_barrier_M(1.0, 0.5, 0.5, 0.25, C=1.0, xs=xs, ys=ys)
    fam = fm.HolderBarrier(fm.BarrierParams(1.0, 0.5, 0.5, 0.25, M))
    bx = np.linspace(-10, 10, 201)
    psi_err = float(np.max(np.abs(fam.u(bx, 0.0) - np.abs(bx) ** 1.5)))
    inf_est = sp.value_at_infinity(lambda x, y: fam.u(x, y))
    vinf = abs(inf_est.estimate.value)
    passed = fmin >= 4.0 and psi_err == 0.0 and vinf <= 1e-3
    return passed, vinf, 1e-3, {"M": M, "min_F": fmin, "psi_error": psi_err}


# ------------------------------------------------------------------ 7


@criterion(7, "criterion-classification", "criteria", 2.0)
def classification():
    semi = fm.Semitrough().support()
    zero = sp.NullSupportFn.constant(0.0)
    par = fm.ParabolicInvariant(0.5).support()
    glide = fm.Glide(1.0).support()
    t0 = -math.pi / 2
    table = {
        "comp semitrough +pi/2": cr.check_comp(semi, math.pi / 2, 1.0).holds,
        "comp semitrough -pi/2": cr.check_comp(semi, -math.pi / 2, 1.0).holds,
        "comp zero (all theta)": all(cr.check_comp(zero, th, 1.0).holds
                                     for th in np.linspace(-math.pi, math.pi, 13)[1:]),
        "inc parabolic at pi": cr.check_inc(par, math.pi, 0.25, 0.5).holds,
        "inc-prime glide at -pi/2": cr.check_inc_prime(glide, t0, 1.0).holds,
        "not comp glide at -pi/2": not cr.check_comp(glide, t0, 1.0).holds,
    }
    bad = sum(not v for v in table.values())
    return bad == 0, float(bad), 0.0, table


# ------------------------------------------------------------------ 8


def random_piecewise(rng: np.random.Generator):
    """Random arcs support function and a base direction where it is finite."""
    n = int(rng.integers(1, 4))
    pieces = [(rng.uniform(-math.pi, math.pi), rng.uniform(0.3, 1.5), rng.uniform(-1, 1),
               rng.uniform(-2, 2)) for _ in range(n)]
    mode = int(rng.integers(0, 3))
    atoms = []
    if mode == 2:
        a = (rng.uniform(-math.pi, math.pi), rng.uniform(-1, 1))
        atoms.append(a)
    phi = sp.NullSupportFn.arcs(pieces, atoms)
    start, length = pieces[0][0], pieces[0][1]
    if mode == 0:
        theta0 = start + rng.uniform(0.1, 0.9) * length
    elif mode == 1:
        theta0 = start + (length if rng.random() < 0.5 else 0.0)
    else:
        theta0 = atoms[0][0]
    return phi, mk.normalize_angle(theta0), {"pieces": pieces, "atoms": atoms, "mode": mode}


@criterion(8, "null-line-equivalence", "criteria", 10.0)
def null_line_equivalence():
    rng = np.random.default_rng(20240808)
    M = 3.0
    mismatches = []
    counts = {"comp": 0, "not_comp": 0}
    for i in range(20):
        phi, th, meta = random_piecewise(rng)
        comp = cr.check_comp(phi, th, M).holds
        line = cr.null_line_disjoint(phi, th, M).holds
        counts["comp" if comp else "not_comp"] += 1
        if (not comp) != (not line):
            mismatches.append({"index": i, "theta0": th, **meta})
    return not mismatches, float(len(mismatches)), 0.0, {"counts": counts, "mismatches": mismatches,
                                                         "M": M}


# ------------------------------------------------------------------ 9


def random_trace(rng: np.random.Generator, length: float = 3.0):
    kind = ["hyperboloid", "semitrough", "glide", "parabolic"][int(rng.integers(0, 4))]
    if kind == "hyperboloid":
        surf = fm.Hyperboloid()
        u = (rng.uniform(-1, 1), rng.uniform(-1, 1))
    elif kind == "semitrough":
        surf = fm.Semitrough()
        u = (rng.uniform(-1, 2), rng.uniform(-1, 1))
    elif kind == "glide":
        surf = fm.Glide(float(rng.choice([0.5, 1.0, 2.0])))
        u = (rng.uniform(-1, 2), rng.uniform(-1, 1))
    else:
        surf = fm.ParabolicInvariant(float(rng.choice([0.5, 2.0])))
        u = (rng.uniform(-1, 1), rng.uniform(0.3, 3.0))
    a = rng.uniform(0, 2 * math.pi)
    tr = gd.integrate_geodesic(surf, u, (math.cos(a), math.sin(a)), max_param=length)
    return kind, tr


@criterion(9, "geodesic-diagnostics", "geodesics", 30.0)
def geodesic_diagnostics():
    rng = np.random.default_rng(99)
    worst = {"speed": 0.0, "concavity_excess": -math.inf, "dext_slope": math.inf, "halving": 0.0}
    fails = []
    for i in range(50):
        kind, tr = random_trace(rng)
        sp_drift = tr.speed_drift()
        conc = [gd.phi_concavity_check(tr, v) for v in (mk.vec(0, 0, 1), mk.null_vector(rng.uniform(-3, 3)))]
        dext = gd.dext_monotonicity_check(tr)
        worst["speed"] = max(worst["speed"], sp_drift)
        worst["concavity_excess"] = max(worst["concavity_excess"], *(c.worst / c.extra["scale"] for c in conc))
        worst["dext_slope"] = min(worst["dext_slope"], dext.worst)
        worst["halving"] = max(worst["halving"], tr.length_drift)
        ok = sp_drift <= 1e-6 and all(c.ok for c in conc) and dext.ok and tr.length_drift < 1e-7
        if not ok:
            fails.append({"index": i, "kind": kind, "speed": sp_drift, "dext": dext.worst,
                          "halving": tr.length_drift})
    return not fails, float(len(fails)), 0.0, {"worst": worst, "failures": fails}


# ------------------------------------------------------------------ 10


@criterion(10, "strip-bound", "criteria", 2.0)
def strip_bound():
    h = 1.0
    rs = np.linspace(3.0, 8.0, 21)
    worst = math.inf
    rows = []
    ok = True
    for r in rs:
        b = cr.strip_barrier(h, r)
        z = b.height(r, 0.0)
        lo, hi = h * math.exp(-2 * r) / 4, h * math.exp(-2 * r)
        ok &= lo <= z <= hi
        ratio = z / (h * math.exp(-2 * r))
        worst = min(worst, ratio)
        rows.append((float(r), z, ratio))
    return bool(ok), worst, 0.25, {"rows": rows, "note": "measured = min f(r,0) / (h e^{-2r})"}


# ------------------------------------------------------------------ runner


GROUPS = ("curvature", "geodesics", "support", "criteria")


def run_suite(only: str | None = None, ids=None) -> list[CriterionResult]:
    results = []
    for cid, name, group, limit, fn in sorted(REGISTRY, key=lambda r: r[0]):
        if only and only not in (group, name, str(cid)):
            continue
        if ids is not None and cid not in ids:
            continue
        results.append(run_one(cid))
    return results


def run_one(cid: int) -> CriterionResult:
    for c, name, group, limit, fn in REGISTRY:
        if c == cid:
            t = time.perf_counter()
            passed, measured, tol, detail = fn()
            dt = time.perf_counter() - t
            detail = dict(detail)
            detail["runtime_ok"] = dt < limit
            return CriterionResult(cid, name, group, bool(passed) and dt < limit, float(measured),
                                   float(tol), dt, limit, detail)
    raise KeyError(cid)
