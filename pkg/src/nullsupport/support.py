"""Null support functions, parabolic charts and domain-of-dependence envelopes.

Extended-real data is carried as an explicit ``+inf`` tag. Array kernels work
on pairs ``(values, infinite)`` where ``values`` holds 0.0 at infinite slots, so
no IEEE infinity ever enters arithmetic.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import minkowski as mk
from .errors import DomainError, EmptyInput, Unbounded

DEFAULT_PROBE = 4096
GRID_ROUNDING = 1e-14  # below the deepest criterion probe offset (~9e-14)


@dataclass(frozen=True, order=False)
class ExtReal:
    """A real number or +inf. -inf is not representable."""

    value: float = 0.0
    infinite: bool = False

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise DomainError("NaN is not an extended real")
        if math.isinf(v):
            if v < 0:
                raise DomainError("-inf is not representable")
            object.__setattr__(self, "infinite", True)
            v = 0.0
        if self.infinite:
            v = 0.0
        object.__setattr__(self, "value", v)

    @staticmethod
    def inf() -> "ExtReal":
        return ExtReal(0.0, True)

    @property
    def finite(self) -> bool:
        return not self.infinite

    def _key(self):
        return (1, 0.0) if self.infinite else (0, self.value)

    def __lt__(self, other):
        return self._key() < _ext(other)._key()

    def __le__(self, other):
        return self._key() <= _ext(other)._key()

    def __gt__(self, other):
        return self._key() > _ext(other)._key()

    def __ge__(self, other):
        return self._key() >= _ext(other)._key()

    def __eq__(self, other):
        try:
            return self._key() == _ext(other)._key()
        except (TypeError, DomainError):
            return NotImplemented

    def __hash__(self):
        return hash(self._key())

    def __add__(self, other):
        o = _ext(other)
        if self.infinite or o.infinite:
            return ExtReal.inf()
        return ExtReal(self.value + o.value)

    __radd__ = __add__

    def scale(self, c: float) -> "ExtReal":
        """Multiply by a positive real."""
        if c <= 0:
            raise DomainError("extended reals only scale by positive numbers")
        return self if self.infinite else ExtReal(self.value * c)

    def to_float(self) -> float:
        """Conversion for reporting only."""
        return math.inf if self.infinite else self.value

    def __repr__(self):
        return "ExtReal(+inf)" if self.infinite else f"ExtReal({self.value!r})"


def _ext(v) -> ExtReal:
    return v if isinstance(v, ExtReal) else ExtReal(float(v))


INF = ExtReal.inf()


def ext_min(*vals) -> ExtReal:
    return min(_ext(v) for v in vals)


def ext_max(*vals) -> ExtReal:
    return max(_ext(v) for v in vals)


# ---------------------------------------------------------------- charts


def zeta(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("zeta chart needs y >= 0")
    r2 = x * x + y * y
    return np.stack([1.0 - r2, 2.0 * x, 1.0 + r2], axis=-1)


def zeta_x(x, y):
    x = np.asarray(x, dtype=float)
    return np.stack([-2.0 * x, 2.0 * np.ones_like(x), 2.0 * x], axis=-1)


def zeta_y(x, y):
    y = np.asarray(y, dtype=float) + 0.0 * np.asarray(x, dtype=float)
    return np.stack([-2.0 * y, np.zeros_like(y), 2.0 * y], axis=-1)


class ChartKind(enum.Enum):
    ZETA = "zeta"
    XI = "xi"
    XI_HAT = "xi_hat"
    ROTATED = "rotated"


@dataclass(frozen=True)
class ParabolicChart:
    """Linear image of the zeta chart.

    ``point(x, y) = linear @ zeta(x, y)``. On the boundary y = 0 the null ray is
    the direction ``base + orientation * 2 arctan(x)``; the omitted direction is
    ``base + pi``.
    """

    kind: ChartKind
    base: float
    orientation: int
    linear: np.ndarray = field(repr=False)

    @property
    def at_infinity(self) -> float:
        return mk.normalize_angle(self.base + math.pi)

    def point(self, x, y):
        return zeta(x, y) @ self.linear.T

    def boundary_point(self, x):
        return self.point(x, np.zeros_like(np.asarray(x, dtype=float)))

    def theta_of_x(self, x):
        return self.base + self.orientation * 2.0 * np.arctan(np.asarray(x, dtype=float))

    def x_of_theta(self, theta):
        d = np.asarray(theta, dtype=float) - self.base
        d = np.mod(d + np.pi, 2 * np.pi) - np.pi  # (-pi, pi)
        if np.any(np.abs(np.abs(d) - np.pi) < 1e-15):
            raise DomainError("direction at infinity has no chart coordinate")
        return np.tan(self.orientation * d / 2.0)


def chart(kind: ChartKind | str, at_infinity: float | None = None) -> ParabolicChart:
    kind = ChartKind(kind)
    if kind is ChartKind.ZETA:
        return ParabolicChart(kind, 0.0, 1, np.eye(3))
    if kind is ChartKind.XI:
        return ParabolicChart(kind, -math.pi / 2, 1, mk.rotation(-math.pi / 2).L)
    if kind is ChartKind.XI_HAT:
        L = mk.reflection_y().L @ mk.rotation(-math.pi / 2).L
        return ParabolicChart(kind, math.pi / 2, -1, L)
    if at_infinity is None:
        raise DomainError("rotated chart needs the direction at infinity")
    base = mk.normalize_angle(at_infinity - math.pi)
    return ParabolicChart(kind, base, 1, mk.rotation(base).L)


def xi(x, y):
    return chart(ChartKind.XI).point(x, y)


def xi_hat(x, y):
    return chart(ChartKind.XI_HAT).point(x, y)


# ------------------------------------------------------- support functions

ThetaFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _as_pair(vals, inf):
    vals = np.asarray(vals, dtype=float)
    inf = np.asarray(inf, dtype=bool) | ~np.isfinite(vals)
    return np.where(inf, 0.0, vals), inf


class NullSupportFn:
    """Extended-real function on the circle of null directions.

    ``func`` maps an array of angles to ``(values, infinite)``. ``atoms`` lists
    angles where the function is finite but which a uniform grid may miss.
    """

    def __init__(self, func: ThetaFn, tag: str, params: dict | None = None,
                 atoms: Sequence[float] = (), samples: tuple | None = None,
                 min_finite: int = 3, probe: int = DEFAULT_PROBE):
        self._func = func
        self.tag = tag
        self.params = dict(params or {})
        self.atoms = np.array([mk.normalize_angle(a) for a in atoms], dtype=float)
        self.samples = samples
        self.probe = probe
        self.min_finite = min_finite
        self.validate()

    # provenance
    @property
    def provenance(self) -> str:
        return "sampled" if self.samples is not None else "closed_form"

    def eval_many(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        return _as_pair(*self._func(theta))

    def __call__(self, theta: float) -> ExtReal:
        v, inf = self.eval_many(np.array([theta]))
        return INF if inf[0] else ExtReal(float(v[0]))

    def probe_grid(self, n: int | None = None) -> np.ndarray:
        n = n or self.probe
        grid = -np.pi + 2 * np.pi * (np.arange(n) + 1) / n
        if self.samples is not None:
            grid = np.concatenate([grid, self.samples[0]])
        if self.atoms.size:
            grid = np.concatenate([grid, self.atoms])
        return np.unique(grid)

    def finite_count(self, n: int | None = None) -> int:
        _, inf = self.eval_many(self.probe_grid(n))
        return int(np.count_nonzero(~inf))

    def validate(self):
        k = self.finite_count()
        if k < self.min_finite:
            raise DomainError(f"support function finite at {k} probe directions, need {self.min_finite}")

    def with_func(self, func: ThetaFn, tag: str, **params) -> "NullSupportFn":
        return NullSupportFn(func, tag, {**self.params, **params}, atoms=self.atoms,
                             samples=self.samples, min_finite=self.min_finite, probe=self.probe)

    # ---------------------------------------------------------- constructors

    @classmethod
    def constant(cls, c: float = 0.0) -> "NullSupportFn":
        return cls(lambda th: (np.full(th.shape, float(c)), np.zeros(th.shape, bool)),
                   "constant", {"c": c})

    @classmethod
    def arcs(cls, pieces: Sequence[tuple[float, float, float, float]],
             atoms: Sequence[tuple[float, float]] = (), min_finite: int = 3) -> "NullSupportFn":
        """Finite on closed arcs, +inf elsewhere.

        Each piece ``(start, length, value, slope)`` is the arc from ``start``
        counter-clockwise of the given length where phi = value + slope*(theta-start).
        ``atoms`` are isolated ``(theta, value)`` points. Overlaps take the minimum,
        which keeps the function lower semicontinuous.
        """
        pieces = [tuple(map(float, p)) for p in pieces]
        pts = [(mk.normalize_angle(a), float(v)) for a, v in atoms]

        def func(th):
            vals = np.zeros(th.shape)
            inf = np.ones(th.shape, bool)
            for start, length, value, slope in pieces:
                d = np.mod(th - start, 2 * np.pi)
                d = np.where(np.abs(d - 2 * np.pi) < GRID_ROUNDING, 0.0, d)
                on = d <= length + GRID_ROUNDING
                cand = value + slope * np.minimum(d, length)
                vals = np.where(on & (inf | (cand < vals)), cand, vals)
                inf &= ~on
            for a, v in pts:
                on = mk.angular_distance(th, a) <= GRID_ROUNDING
                vals = np.where(on & (inf | (v < vals)), v, vals)
                inf &= ~on
            return vals, inf

        ends = []
        for start, length, value, slope in pieces:
            ends += [start, start + length]
        return cls(func, "arcs", {"pieces": pieces, "atoms": pts},
                   atoms=ends + [a for a, _ in pts], min_finite=min_finite)

    @classmethod
    def sampled(cls, theta, values, infinite=None, regularize: bool = True) -> "NullSupportFn":
        """Support data known on a grid; linear in between finite neighbours, +inf otherwise."""
        theta = np.array([mk.normalize_angle(t) for t in np.asarray(theta, float)])
        values = np.asarray(values, dtype=float)
        if infinite is None:
            infinite = ~np.isfinite(values)
        values, infinite = _as_pair(values, infinite)
        order = np.argsort(theta)
        theta, values, infinite = theta[order], values[order], infinite[order]
        if theta.size == 0:
            raise EmptyInput("no samples")
        if regularize:
            values = lsc_regularize(values, infinite)

        def func(th):
            th = np.array([mk.normalize_angle(t) for t in np.atleast_1d(th)]).reshape(np.shape(th))
            n = theta.size
            j = np.searchsorted(theta, th, side="right")
            lo = (j - 1) % n
            hi = j % n
            tlo = theta[lo]
            thi = theta[hi]
            span = np.mod(thi - tlo, 2 * np.pi)
            span = np.where(span == 0, 2 * np.pi, span)
            w = np.mod(th - tlo, 2 * np.pi) / span
            at_lo = np.mod(th - tlo, 2 * np.pi) <= GRID_ROUNDING
            at_hi = np.mod(thi - th, 2 * np.pi) <= GRID_ROUNDING
            both = ~infinite[lo] & ~infinite[hi]
            vals = np.where(both, (1 - w) * values[lo] + w * values[hi], 0.0)
            inf = ~both
            vals = np.where(at_lo, values[lo], vals)
            inf = np.where(at_lo, infinite[lo], inf)
            vals = np.where(at_hi & ~at_lo, values[hi], vals)
            inf = np.where(at_hi & ~at_lo, infinite[hi], inf)
            return vals, inf

        return cls(func, "sampled", samples=(theta, values, infinite), min_finite=1)


def lsc_regularize(values: np.ndarray, infinite: np.ndarray) -> np.ndarray:
    """Pull isolated upward spikes down to the neighbouring liminf.

    A sample exceeding both (finite) neighbours by more than the local variation
    violates lower semicontinuity in the continuum limit and is lowered to
    ``min(neighbours) + |variation|``. Samples next to +inf data are left alone.
    """
    v = values.copy()
    n = v.size
    if n < 3:
        return v
    left = np.roll(np.arange(n), 1)
    right = np.roll(np.arange(n), -1)
    ok = ~infinite & ~infinite[left] & ~infinite[right]
    cap = np.minimum(values[left], values[right]) + np.abs(values[right] - values[left])
    return np.where(ok, np.minimum(v, cap), v)


@dataclass
class ParabolicSupportFn:
    """Parabolic support function u on the closed upper half-plane.

    ``u(x, y)`` is vectorized; ``derivatives(x, y)`` (optional) returns the tuple
    ``(u, u_x, u_y, u_xx, u_xy, u_yy)`` at scalar points.
    """

    u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    chart: ParabolicChart = field(default_factory=lambda: chart(ChartKind.ZETA))
    derivatives: Callable[[float, float], tuple] | None = None
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def at_infinity(self) -> mk.NullDirection:
        return mk.NullDirection(self.chart.at_infinity)

    def __call__(self, x, y):
        return self.u(np.asarray(x, float), np.asarray(y, float))

    def boundary(self, x):
        x = np.asarray(x, float)
        return self.u(x, np.zeros_like(x))


# ------------------------------------------------------------- operations


def null_support_from_points(points, theta) -> np.ndarray | float:
    """max_i <p_i, theta_vec>: a lower bound for the support of any surface containing the points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyInput("no points")
    th = np.asarray(theta, dtype=float)
    nv = mk.null_vector(th.reshape(-1))
    vals = (pts[:, 0:1] * nv[:, 0] + pts[:, 1:2] * nv[:, 1] - pts[:, 2:3]).max(axis=0)
    return float(vals[0]) if th.ndim == 0 else vals.reshape(th.shape)


def disc_point(x, y):
    """Point of the unit disc matching the half-plane point (x, y) under zeta."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(y < 0):
        raise DomainError("need y >= 0")
    d = 1.0 + x * x + y * y
    return (2.0 - d) / d, 2.0 * x / d


def halfplane_point(X, Y):
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if np.any(X * X + Y * Y > 1.0 + 1e-15) or np.any(X <= -1.0):
        raise DomainError("disc point outside the chart")
    r2 = (1.0 - X) / (1.0 + X)
    x = Y / (1.0 + X)
    y = np.sqrt(np.maximum(r2 - x * x, 0.0))
    return x, y


def parabolic_from_elliptic(s_ell, x, y):
    """s_par(x, y) from the elliptic value at the matching disc point."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return (1.0 + x * x + y * y) * np.asarray(s_ell, float)


def elliptic_from_parabolic(s_par, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return np.asarray(s_par, float) / (1.0 + x * x + y * y)


def psi_from_phi(phi: NullSupportFn, ch: ParabolicChart | None = None):
    """Boundary parabolic support function x -> (1+x^2) phi(theta(x)) as (values, infinite)."""
    ch = ch or chart(ChartKind.ZETA)

    def psi(x):
        x = np.asarray(x, float)
        v, inf = phi.eval_many(ch.theta_of_x(x))
        return np.where(inf, 0.0, (1.0 + x * x) * v), inf

    return psi


def phi_from_psi(psi: Callable, at_inf: ExtReal, ch: ParabolicChart | None = None,
                 tag: str = "from_parabolic", min_finite: int = 3) -> NullSupportFn:
    """Elliptic null support function from a boundary parabolic one and its value at infinity.

    ``psi`` maps x-arrays to values or to ``(values, infinite)`` pairs.
    """
    ch = ch or chart(ChartKind.ZETA)
    omitted = ch.at_infinity

    def func(th):
        th = np.asarray(th, float)
        at = mk.angular_distance(th, omitted) <= GRID_ROUNDING
        safe = np.where(at, ch.base, th)
        x = ch.x_of_theta(safe)
        out = psi(x)
        vals, inf = out if isinstance(out, tuple) else _as_pair(out, np.zeros(np.shape(out), bool))
        vals = vals / (1.0 + x * x)
        vals = np.where(at, at_inf.value, vals)
        inf = np.where(at, at_inf.infinite, inf)
        return vals, inf

    return NullSupportFn(func, tag, atoms=[omitted], min_finite=min_finite)


@dataclass
class InfinityEstimate:
    estimate: ExtReal
    radii: np.ndarray
    shell_minima: list[ExtReal]
    tail_infima: list[ExtReal]
    bias: str = "upper estimate of a liminf (finite angular sampling)"


def value_at_infinity(u: Callable, radii=None, n_angles: int = 721) -> InfinityEstimate:
    """liminf of u/(1+x^2+y^2) at infinity, estimated on expanding half-circles.

    ``u`` is vectorized in (x, y) and may return (values, infinite) pairs.
    ``tail_infima[j]`` is the infimum over shells j, j+1, ...; it is
    non-decreasing in j and its last entry is the estimate.
    """
    radii = np.geomspace(10.0, 1e10, 17) if radii is None else np.asarray(radii, float)
    a = np.linspace(0.0, np.pi, n_angles)
    minima: list[ExtReal] = []
    for R in radii:
        x, y = R * np.cos(a), R * np.sin(a)
        out = u(x, y)
        vals, inf = out if isinstance(out, tuple) else _as_pair(out, np.zeros(a.shape, bool))
        if np.all(inf):
            minima.append(INF)
        else:
            minima.append(ExtReal(float(np.min(vals[~inf]) / (1.0 + R * R))))
    tails = []
    cur = INF
    for m in reversed(minima):
        cur = ext_min(cur, m)
        tails.append(cur)
    tails.reverse()
    return InfinityEstimate(tails[-1], radii, minima, tails)


def point_support_poly(p) -> tuple[float, float, float]:
    """Coefficients of <p, zeta(x,0)> = c0 + c1 x + c2 x^2."""
    a, b, c = (float(t) for t in np.asarray(p, dtype=float))
    return a - c, 2.0 * b, -(a + c)


def eval_poly(coeffs, x):
    c0, c1, c2 = coeffs
    x = np.asarray(x, float)
    return c0 + c1 * x + c2 * x * x


@dataclass
class EnvelopeResult:
    heights: np.ndarray
    n_directions: int
    bias: str = "lower bound (supremum over a finite direction set)"


def dod_boundary_height(phi: NullSupportFn, x, y, n_probe: int | None = None) -> EnvelopeResult:
    """Height of the domain-of-dependence boundary over (x, y): sup_theta x cos + y sin - phi."""
    grid = phi.probe_grid(n_probe)
    vals, inf = phi.eval_many(grid)
    keep = ~inf
    if np.count_nonzero(keep) < 2:
        raise Unbounded("support function finite at fewer than two probe directions")
    th = grid[keep]
    v = vals[keep]
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xb, yb = np.broadcast_arrays(x, y)
    flat = np.stack([xb.ravel(), yb.ravel()], axis=1)
    h = (flat @ np.stack([np.cos(th), np.sin(th)]) - v).max(axis=1)
    return EnvelopeResult(h.reshape(xb.shape), int(th.size))


def translate_support(fn, w):
    """Support data of the surface translated by w."""
    w = np.asarray(w, dtype=float)
    if isinstance(fn, NullSupportFn):
        def func(th, _f=fn):
            v, inf = _f.eval_many(th)
            return np.where(inf, 0.0, v + mk.inner(mk.null_vector(th), w)), inf
        return fn.with_func(func, fn.tag + "+translate", translate=w.tolist())
    if isinstance(fn, ParabolicSupportFn):
        ch = fn.chart

        def u(x, y, _u=fn.u):
            out = _u(x, y)
            shift = mk.inner(ch.point(x, y), w)
            if isinstance(out, tuple):
                return np.where(out[1], 0.0, out[0] + shift), out[1]
            return out + shift

        return ParabolicSupportFn(u, ch, None, fn.tag + "+translate", {**fn.params, "translate": w.tolist()})
    raise TypeError("unsupported support representation")


def scale_support(fn, lam: float):
    """Support data of the surface scaled by lam > 0 (values divide by lam)."""
    if lam <= 0:
        raise DomainError("scale factor must be positive")
    if isinstance(fn, NullSupportFn):
        def func(th, _f=fn):
            v, inf = _f.eval_many(th)
            return v / lam, inf
        return fn.with_func(func, fn.tag + "/scale", scale=lam)
    if isinstance(fn, ParabolicSupportFn):
        def u(x, y, _u=fn.u):
            out = _u(x, y)
            if isinstance(out, tuple):
                return out[0] / lam, out[1]
            return out / lam
        return ParabolicSupportFn(u, fn.chart, None, fn.tag + "/scale", {**fn.params, "scale": lam})
    raise TypeError("unsupported support representation")


def sample_table(phi: NullSupportFn, theta) -> list[tuple[float, float, int]]:
    """Rows (theta, value, is_infinite) for CSV export."""
    v, inf = phi.eval_many(np.asarray(theta, float))
    return [(float(t), float(a), int(b)) for t, a, b in zip(theta, v, inf)]
