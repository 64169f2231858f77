"""Closed-form surfaces: hyperboloid, semitrough, glide surfaces, the parabolic-invariant
family, the Hölder barrier and the cusp comparison profile."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import minkowski as mk
from . import support as sp
from .errors import ChartExhausted, DerivativeUndefined, DomainError

# default truncation of the (t, s) parameter domain for sampled suprema
T_RANGE = (1e-4, 12.0)
S_RANGE = (-20.0, 20.0)
# search window for graph heights of the trough-like families
T_WINDOW = (1e-9, 300.0)


@dataclass
class ImmersionChart:
    """A parametrized surface piece with optional analytic derivatives.

    ``jac`` returns (X_1, X_2); ``hess`` returns (X_11, X_12, X_22).
    """

    name: str
    eval: Callable
    domain: dict
    jac: Callable | None = None
    hess: Callable | None = None

    def contains(self, u1: float, u2: float) -> bool:
        (a1, b1), (a2, b2) = self.domain.values()
        return a1 < u1 < b1 and a2 < u2 < b2


def _check_t(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")


# ---------------------------------------------------------------- hyperboloid


class Hyperboloid:
    kind = "hyperboloid"

    def params(self) -> dict:
        return {}

    @staticmethod
    def eval(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return np.stack([x, y, np.sqrt(1.0 + x * x + y * y)], axis=-1)

    def graph_height(self, x: float, y: float) -> float:
        return math.sqrt(1.0 + x * x + y * y)

    def immersion(self) -> ImmersionChart:
        def jac(x, y):
            z = math.sqrt(1 + x * x + y * y)
            return np.array([1.0, 0.0, x / z]), np.array([0.0, 1.0, y / z])

        def hess(x, y):
            z = math.sqrt(1 + x * x + y * y)
            z3 = z ** 3
            return (np.array([0.0, 0.0, (1 + y * y) / z3]),
                    np.array([0.0, 0.0, -x * y / z3]),
                    np.array([0.0, 0.0, (1 + x * x) / z3]))

        inf = (-np.inf, np.inf)
        return ImmersionChart("hyperboloid-graph", lambda a, b: self.eval(a, b),
                              {"x": inf, "y": inf}, jac, hess)

    def support(self) -> sp.NullSupportFn:
        f = sp.NullSupportFn.constant(0.0)
        f.tag = "hyperboloid"
        return f

    def parabolic_support(self) -> sp.ParabolicSupportFn:
        return ParabolicInvariant(0.0).parabolic_support()


# ------------------------------------------------------------------ semitrough


def eval_semitrough(t, s):
    _check_t(t)
    t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    sh = np.sinh(t)
    return np.stack([t - 1.0 / np.tanh(t), np.sinh(s) / sh, np.cosh(s) / sh], axis=-1)


def eval_glide(lam: float, t, s):
    _check_t(t)
    t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    k = math.sqrt(1.0 + lam * lam)
    sh = np.sinh(t)
    return np.stack([k * (t - 1.0 / np.tanh(t)) + lam * s, k * np.sinh(s) / sh, k * np.cosh(s) / sh],
                    axis=-1)


def _trough_height(lam: float, x: float, y: float, window=T_WINDOW) -> float:
    """Height of the glide surface (semitrough for lam=0) over (x, y).

    For fixed t the y-equation gives s(t) explicitly; the x-coordinate along that
    profile is strictly increasing in t, so a bracketed scalar root suffices.
    """
    k = math.sqrt(1.0 + lam * lam)

    def xs(t):
        return k * (t - 1.0 / math.tanh(t)) + lam * math.asinh(y * math.sinh(t) / k) - x

    lo, hi = window
    try:
        flo, fhi = xs(lo), xs(hi)
    except OverflowError as exc:
        raise ChartExhausted(str(exc)) from exc
    if not (flo < 0 < fhi):
        raise ChartExhausted(f"point ({x}, {y}) not bracketed in t-window {window}")
    t = optimize.brentq(xs, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    csch = 1.0 / math.sinh(t)
    return math.sqrt(k * k * csch * csch + y * y)


class Semitrough:
    kind = "semitrough"

    def params(self) -> dict:
        return {}

    eval = staticmethod(eval_semitrough)

    def graph_height(self, x: float, y: float, window=T_WINDOW) -> float:
        return _trough_height(0.0, x, y, window)

    def immersion(self) -> ImmersionChart:
        return Glide(0.0).immersion()

    def support(self) -> sp.NullSupportFn:
        # zero on the closed arc centred at pi: <X(t,s), theta> ~ (t - 1) cos(theta) as t -> inf
        def func(th):
            d = mk.angular_distance(th, np.pi)
            return np.zeros(th.shape), d > np.pi / 2 + sp.GRID_ROUNDING
        return sp.NullSupportFn(func, "semitrough", atoms=[-np.pi / 2, np.pi / 2])


class Glide:
    """The surface swept by the affine group A^lam from the semitrough profile."""

    kind = "glide"

    def __init__(self, lam: float):
        self.lam = float(lam)
        self.k = math.sqrt(1.0 + self.lam ** 2)

    def params(self) -> dict:
        return {"lambda": self.lam}

    def eval(self, t, s):
        return eval_glide(self.lam, t, s)

    def jac(self, t: float, s: float):
        k, lam = self.k, self.lam
        sh, ch = math.sinh(t), math.cosh(t)
        a = k * ch / (sh * sh)
        Xt = a * np.array([ch, -math.sinh(s), -math.cosh(s)])
        Xs = np.array([lam, k * math.cosh(s) / sh, k * math.sinh(s) / sh])
        return Xt, Xs

    def hess(self, t: float, s: float):
        k = self.k
        sh, ch = math.sinh(t), math.cosh(t)
        ss, cs = math.sinh(s), math.cosh(s)
        b = (1.0 + ch * ch) / sh ** 3
        Xtt = k * np.array([-2.0 * ch / sh ** 3, b * ss, b * cs])
        c = ch / (sh * sh)
        Xts = -k * np.array([0.0, c * cs, c * ss])
        Xss = k * np.array([0.0, ss / sh, cs / sh])
        return Xtt, Xts, Xss

    def first_form(self, t: float, s: float):
        lam, k = self.lam, self.k
        c2 = 1.0 / math.tanh(t) ** 2
        return k * k * c2, lam * k * c2, lam * lam * c2 + 1.0 / math.sinh(t) ** 2

    def speed_sq(self, t, s, dt, ds):
        """First fundamental form evaluated as coth^2 t (k dt + lam ds)^2 + ds^2 / sinh^2 t.

        Algebraically equal to E dt^2 + 2F dt ds + G ds^2 but free of cancellation
        near the degenerate direction k dt + lam ds = 0.
        """
        t = np.asarray(t, float)
        w = self.k * np.asarray(dt, float) + self.lam * np.asarray(ds, float)
        return (w / np.tanh(t)) ** 2 + (np.asarray(ds, float) / np.sinh(t)) ** 2

    def normal(self, t: float, s: float):
        k, lam = self.k, self.lam
        sh = math.sinh(t)
        cth = 1.0 / math.tanh(t)
        ss, cs = math.sinh(s), math.cosh(s)
        return np.array([-k / sh, k * cth * ss + lam * cs, k * cth * cs + lam * ss])

    def second_form(self, t: float, s: float):
        k, lam = self.k, self.lam
        q = (1.0 / math.tanh(t)) / math.sinh(t)
        return k * k * q, lam * k * q, k * k * q

    def immersion(self) -> ImmersionChart:
        return ImmersionChart(f"glide({self.lam:g})", self.eval,
                              {"t": (0.0, np.inf), "s": (-np.inf, np.inf)}, self.jac, self.hess)

    def graph_height(self, x: float, y: float, window=T_WINDOW) -> float:
        return _trough_height(self.lam, x, y, window)

    def incomplete_curve(self, tau):
        """Parameters (t, s) of the finite-length proper path tau -> X(lam tau, -k tau)."""
        tau = np.asarray(tau, float)
        return self.lam * tau, -self.k * tau

    def support_xi(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Parabolic null support in the xi chart (omitted direction pi/2)."""
        return glide_support_many(self.lam, x)

    def support(self) -> sp.NullSupportFn:
        ch = sp.chart(sp.ChartKind.XI)
        f = sp.phi_from_psi(lambda x: glide_support_many(self.lam, x), sp.ExtReal(0.0), ch,
                            tag="glide")
        f.params = {"lambda": self.lam}
        f.atoms = np.array([-np.pi / 2, np.pi / 2])
        return f


def glide_support_many(lam: float, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, float)
    ax = np.abs(x)
    neg = x < 0
    safe = np.where(neg, ax, 1.0)
    vals = np.where(neg, -2.0 * lam * safe * np.log(safe), 0.0)
    return vals, x > 0


def glide_support_closed_form(lam: float, x: float) -> sp.ExtReal:
    v, inf = glide_support_many(lam, np.array([x]))
    return sp.INF if inf[0] else sp.ExtReal(float(v[0]))


def glide_support_sampled(lam: float, x, n_t: int = 400, n_s: int = 400,
                          t_range=T_RANGE, s_range=S_RANGE) -> np.ndarray:
    """sup of <X(t_i, s_j), xi(x, 0)> over a (log t) x (s) sample grid: a lower bound."""
    t = np.geomspace(*t_range, n_t)[:, None]
    s = np.linspace(*s_range, n_s)[None, :]
    P = eval_glide(lam, t, s).reshape(-1, 3)
    xs = np.atleast_1d(np.asarray(x, float))
    nv = sp.xi(xs, np.zeros_like(xs))
    vals = (P @ (mk.ETA @ nv.T)).max(axis=0)
    return vals if np.ndim(x) else float(vals[0])


# ----------------------------------------------------- parabolic-invariant family


class ParabolicInvariant:
    """u(x, y) = f(y) with f' = -2 sqrt(1 + eps^2 y^2), f(0) = 0; curvature -1."""

    kind = "parabolic"

    def __init__(self, eps: float):
        if eps < 0:
            raise DomainError("eps must be non-negative")
        self.eps = float(eps)

    def params(self) -> dict:
        return {"eps": self.eps}

    def f(self, y):
        y = np.asarray(y, float)
        if np.any(y < 0):
            raise DomainError("y must be non-negative")
        e = self.eps
        if e == 0.0:
            return -2.0 * y
        return -y * np.sqrt(1.0 + e * e * y * y) - np.arcsinh(e * y) / e

    def g(self, y):
        y = np.asarray(y, float)
        return -2.0 * np.sqrt(1.0 + self.eps ** 2 * y * y)

    def u(self, x, y):
        x = np.asarray(x, float)
        return self.f(y) + 0.0 * x

    def derivatives(self, x: float, y: float):
        e = self.eps
        q = math.sqrt(1.0 + e * e * y * y)
        return (float(self.f(y)), 0.0, -2.0 * q, 0.0, 0.0, -2.0 * e * e * y / q)

    def third_derivative(self, y: float) -> float:
        e = self.eps
        return -2.0 * e * e / (1.0 + e * e * y * y) ** 1.5

    def parabolic_support(self) -> sp.ParabolicSupportFn:
        return sp.ParabolicSupportFn(self.u, sp.chart(sp.ChartKind.ZETA), self.derivatives,
                                     "parabolic", self.params())

    def support(self) -> sp.NullSupportFn:
        e = self.eps

        def func(th):
            at = mk.angular_distance(th, np.pi) <= sp.GRID_ROUNDING
            return np.where(at, -e, 0.0), np.zeros(th.shape, bool)
        return sp.NullSupportFn(func, "parabolic", {"eps": e}, atoms=[np.pi])

    def eval(self, x, y):
        from .curvature import inverse_gauss_map_many
        return inverse_gauss_map_many(self.parabolic_support(), x, y)

    def graph_height(self, X: float, Y: float) -> float:
        from .curvature import inverse_gauss_map
        ps = self.parabolic_support()
        z0 = math.sqrt(1 + X * X + Y * Y)
        # hyperboloid-like initial guess: Gamma ~ zeta/(2y)
        y0 = 1.0 / (z0 + X)
        x0 = Y * y0

        def res(p):
            g = inverse_gauss_map(ps, p[0], math.exp(p[1]))
            return [g[0] - X, g[1] - Y]

        sol = optimize.root(res, [x0, math.log(max(y0, 1e-12))], method="hybr", tol=1e-13)
        if np.max(np.abs(res(sol.x))) > 1e-9 * max(1.0, z0):
            raise ChartExhausted(sol.message)
        return float(inverse_gauss_map(ps, sol.x[0], math.exp(sol.x[1]))[2])


def parabolic_family_u(eps: float, x, y):
    return ParabolicInvariant(eps).u(x, y)


# ---------------------------------------------------------------- Hölder barrier


@dataclass(frozen=True)
class BarrierParams:
    eps: float
    alpha: float
    beta: float
    gamma: float
    M: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1)")
        if self.eps <= 0 or self.M <= 0:
            raise DomainError("eps and M must be positive")
        if not self.gamma < 1.0 - self.alpha:
            raise DomainError("need gamma < 1 - alpha")


class HolderBarrier:
    """u = -M y^beta + eps |x|^(2-alpha) (1+y)^(-gamma)."""

    kind = "barrier"

    def __init__(self, params: BarrierParams):
        self.p = params

    def params(self) -> dict:
        p = self.p
        return {"eps": p.eps, "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "M": p.M}

    def u(self, x, y):
        p = self.p
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return -p.M * y ** p.beta + p.eps * np.abs(x) ** (2 - p.alpha) * (1 + y) ** (-p.gamma)

    def gradient(self, x: float, y: float) -> tuple[float, float]:
        p = self.p
        ax = abs(x)
        ux = p.eps * (2 - p.alpha) * x * ax ** (-p.alpha) * (1 + y) ** (-p.gamma) if x != 0 else 0.0
        uy = -p.M * p.beta * y ** (p.beta - 1) - p.eps * p.gamma * ax ** (2 - p.alpha) * (1 + y) ** (-1 - p.gamma)
        return ux, uy

    def derivatives(self, x: float, y: float):
        if x == 0.0:
            raise DerivativeUndefined("u_xx is undefined on the y-axis")
        p = self.p
        ax = abs(x)
        e, a, b, g, M = p.eps, p.alpha, p.beta, p.gamma, p.M
        ux, uy = self.gradient(x, y)
        uxx = e * (2 - a) * (1 - a) * ax ** (-a) * (1 + y) ** (-g)
        uxy = -e * (2 - a) * g * x * ax ** (-a) * (1 + y) ** (-1 - g)
        uyy = M * b * (1 - b) * y ** (b - 2) + e * g * (1 + g) * ax ** (2 - a) * (1 + y) ** (-2 - g)
        return float(self.u(x, y)), ux, uy, uxx, uxy, uyy

    def boundary_support(self, x):
        """psi(x) = u(x, 0) = eps |x|^(2-alpha)."""
        return self.p.eps * np.abs(np.asarray(x, float)) ** (2 - self.p.alpha)

    def axis_inverse_shape_limit(self, y: float) -> np.ndarray:
        """Limit of A^{-1} as x -> 0 at height y."""
        p = self.p
        return np.array([[0.0, 0.0], [0.0, 2.0 / (p.M * p.beta * (2 - p.beta) * y ** (p.beta - 1))]])

    def axis_length_density(self, y: float) -> float:
        """1/2 (u_yy - u_y / y) on the y-axis."""
        p = self.p
        return 0.5 * p.M * p.beta * (2 - p.beta) * y ** (p.beta - 2)

    def parabolic_support(self) -> sp.ParabolicSupportFn:
        return sp.ParabolicSupportFn(self.u, sp.chart(sp.ChartKind.ZETA), self.derivatives,
                                     "barrier", self.params())

    def support(self) -> sp.NullSupportFn:
        return sp.phi_from_psi(self.boundary_support, sp.ExtReal(0.0), tag="barrier")

    def eval(self, x, y):
        from .curvature import inverse_gauss_map_many
        return inverse_gauss_map_many(self.parabolic_support(), x, y)


def holder_barrier_u(params: BarrierParams, x: float, y: float):
    """Value and analytic derivatives (u, u_x, u_y, u_xx, u_xy, u_yy)."""
    return HolderBarrier(params).derivatives(x, y)


# ------------------------------------------------------------ cusp comparison


class CuspComparison:
    """Profile rho(a) = eps (1+a^2)^(-1/2) in Lorentzian-cylindrical coordinates."""

    kind = "cusp"

    def __init__(self, eps: float):
        if eps <= 0:
            raise DomainError("eps must be positive")
        self.eps = float(eps)

    def params(self) -> dict:
        return {"eps": self.eps}

    def profile(self, a):
        a = np.asarray(a, float)
        return self.eps / np.sqrt(1.0 + a * a)

    def speed_sq(self, a):
        a = np.asarray(a, float)
        q = 1.0 + a * a
        return self.eps ** 2 * (1.0 / q - a * a / q ** 3)

    def eval(self, a, y):
        r = self.profile(a)
        a = np.asarray(a, float)
        y = np.asarray(y, float)
        return np.stack([r * np.sinh(a), y + 0.0 * a, r * np.cosh(a)], axis=-1)

    def profile_length(self, a0: float, a1: float) -> float:
        val, _ = integrate.quad(lambda a: math.sqrt(max(float(self.speed_sq(a)), 0.0)), a0, a1,
                                limit=400, epsabs=1e-13, epsrel=1e-12)
        return val


def cusp_comparison_profile(eps: float, a):
    return CuspComparison(eps).profile(a)


def cusp_speed_sq(eps: float, a):
    return CuspComparison(eps).speed_sq(a)


class Translated:
    """A family member translated by an ambient vector w."""

    def __init__(self, base, w):
        self.base = base
        self.w = np.asarray(w, float)
        self.kind = getattr(base, "kind", "surface")

    def params(self) -> dict:
        return {**self.base.params(), "w": self.w.tolist()}

    def graph_height(self, x: float, y: float, **kw) -> float:
        return self.base.graph_height(x - self.w[0], y - self.w[1], **kw) + self.w[2]


def graph_height(surface, x: float, y: float, **kw) -> float:
    return surface.graph_height(x, y, **kw)


FAMILY_KINDS = ("hyperboloid", "semitrough", "glide", "parabolic", "barrier", "cusp")


def make_family(kind: str, **params):
    kind = kind.lower()
    if kind == "hyperboloid":
        return Hyperboloid()
    if kind == "semitrough":
        return Semitrough()
    if kind == "glide":
        return Glide(params.get("lam", params.get("lambda", 1.0)))
    if kind == "parabolic":
        return ParabolicInvariant(params.get("eps", 0.5))
    if kind == "barrier":
        return HolderBarrier(BarrierParams(params.get("eps", 1.0), params.get("alpha", 0.5),
                                           params.get("beta", 0.5), params.get("gamma", 0.25),
                                           params.get("M", 1.0)))
    if kind == "cusp":
        return CuspComparison(params.get("eps", 1.0))
    raise DomainError(f"unknown family kind {kind!r}")
