"""Curvature from parabolic support functions and from immersions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from . import support as sp
from .errors import DegenerateMetric, FlatOrDegenerate, SingularSystem

FD_STEP = 1e-5
DEGENERATE_TOL = 1e-14


def fd_step(y: float) -> float:
    return FD_STEP * max(1.0, abs(y))


def support_derivatives(u: sp.ParabolicSupportFn, x: float, y: float, analytic: bool = True):
    """(u, u_x, u_y, u_xx, u_xy, u_yy); analytic when available, else central differences."""
    if analytic and u.derivatives is not None:
        return tuple(float(v) for v in u.derivatives(x, y))
    h = fd_step(y)
    # keep the stencil inside y > 0
    h = min(h, 0.5 * y) if y > 0 else h

    def f(a, b):
        return float(u(a, b))

    c = f(x, y)
    ux = (f(x + h, y) - f(x - h, y)) / (2 * h)
    uy = (f(x, y + h) - f(x, y - h)) / (2 * h)
    uxx = (f(x + h, y) - 2 * c + f(x - h, y)) / (h * h)
    uyy = (f(x, y + h) - 2 * c + f(x, y - h)) / (h * h)
    uxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
    return c, ux, uy, uxx, uxy, uyy


def F_operator(u: sp.ParabolicSupportFn, x: float, y: float, analytic: bool = True) -> float:
    """(y u_xx - u_y)(y u_yy - u_y) - y^2 u_xy^2."""
    _, _, uy, uxx, uxy, uyy = support_derivatives(u, x, y, analytic)
    return (y * uxx - uy) * (y * uyy - uy) - y * y * uxy * uxy


def a_matrix(u: sp.ParabolicSupportFn, x: float, y: float, analytic: bool = True) -> np.ndarray:
    _, _, uy, uxx, uxy, uyy = support_derivatives(u, x, y, analytic)
    return 0.5 * np.array([[y * uxx - uy, y * uxy], [y * uxy, y * uyy - uy]])


def zeta_frame(x: float, y: float) -> np.ndarray:
    """Columns zeta, zeta_x, zeta_y."""
    return np.stack([sp.zeta(x, y), sp.zeta_x(x, y), sp.zeta_y(x, y)], axis=1)


def inverse_gauss_map(u: sp.ParabolicSupportFn, x: float, y: float, analytic: bool = True) -> np.ndarray:
    """Point G with <G,zeta> = u, <G,zeta_x> = u_x, <G,zeta_y> = u_y."""
    if y <= 0:
        raise SingularSystem("the zeta frame degenerates for y <= 0")
    val, ux, uy, *_ = support_derivatives(u, x, y, analytic) if analytic and u.derivatives else \
        _first_order(u, x, y)
    B = zeta_frame(x, y)
    gram = B.T @ mk.ETA @ B
    coeffs = np.linalg.solve(gram, np.array([val, ux, uy]))
    return B @ coeffs


def _first_order(u, x, y):
    h = fd_step(y)
    h = min(h, 0.5 * y)
    val = float(u(x, y))
    ux = (float(u(x + h, y)) - float(u(x - h, y))) / (2 * h)
    uy = (float(u(x, y + h)) - float(u(x, y - h))) / (2 * h)
    return val, ux, uy


def inverse_gauss_map_many(u: sp.ParabolicSupportFn, x, y) -> np.ndarray:
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.empty(x.shape + (3,))
    for idx in np.ndindex(x.shape):
        out[idx] = inverse_gauss_map(u, float(x[idx]), float(y[idx]))
    return out


def inverse_gauss_map_jacobian(u: sp.ParabolicSupportFn, x: float, y: float,
                               analytic: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """(G_x, G_y) = sum_j A_ij e_j with e_x = zeta_x/(2y), e_y = (zeta_y - zeta/y)/(2y)."""
    A = a_matrix(u, x, y, analytic)
    z, zx, zy = sp.zeta(x, y), sp.zeta_x(x, y), sp.zeta_y(x, y)
    ex = zx / (2 * y)
    ey = (zy - z / y) / (2 * y)
    return A[0, 0] * ex + A[0, 1] * ey, A[1, 0] * ex + A[1, 1] * ey


@dataclass
class CurvatureReport:
    point: np.ndarray
    A: np.ndarray
    F_value: float
    K: float
    shape_operator: np.ndarray


def curvature_from_support(u: sp.ParabolicSupportFn, x: float, y: float, analytic: bool = True,
                           tol: float = 1e-12) -> CurvatureReport:
    A = a_matrix(u, x, y, analytic)
    F = 4.0 * float(np.linalg.det(A))
    F_direct = F_operator(u, x, y, analytic)
    if F_direct <= tol:
        raise FlatOrDegenerate(f"F = {F_direct:.3e} at ({x}, {y})")
    return CurvatureReport(inverse_gauss_map(u, x, y, analytic), A, F_direct, -4.0 / F_direct,
                           np.linalg.inv(A))


# ------------------------------------------------------------- immersions


@dataclass
class FundamentalForms:
    E: float
    F: float
    G: float
    e: float
    f: float
    g: float
    K: float
    normal: np.ndarray

    @property
    def first(self) -> np.ndarray:
        return np.array([[self.E, self.F], [self.F, self.G]])

    @property
    def second(self) -> np.ndarray:
        return np.array([[self.e, self.f], [self.f, self.g]])


def future_unit_normal(X1, X2) -> np.ndarray:
    n = mk.ETA @ np.cross(X1, X2)
    q = float(mk.inner(n, n))
    if q >= 0:
        raise DegenerateMetric("tangent plane is not spacelike")
    n = n / math.sqrt(-q)
    return n if n[2] > 0 else -n


def chart_derivatives(chart, u1: float, u2: float, analytic: bool = True, h: float = 1e-4):
    """First and second parameter derivatives of an immersion chart."""
    if analytic and chart.jac is not None:
        X1, X2 = chart.jac(u1, u2)
    else:
        def P(a, b):
            return np.asarray(chart.eval(a, b), float)
        X1 = (P(u1 + h, u2) - P(u1 - h, u2)) / (2 * h)
        X2 = (P(u1, u2 + h) - P(u1, u2 - h)) / (2 * h)
    if analytic and chart.hess is not None:
        X11, X12, X22 = chart.hess(u1, u2)
    elif analytic and chart.jac is not None:
        X11 = (np.asarray(chart.jac(u1 + h, u2)[0]) - np.asarray(chart.jac(u1 - h, u2)[0])) / (2 * h)
        X22 = (np.asarray(chart.jac(u1, u2 + h)[1]) - np.asarray(chart.jac(u1, u2 - h)[1])) / (2 * h)
        X12 = (np.asarray(chart.jac(u1, u2 + h)[0]) - np.asarray(chart.jac(u1, u2 - h)[0])) / (2 * h)
    else:
        def P(a, b):
            return np.asarray(chart.eval(a, b), float)
        c = P(u1, u2)
        X11 = (P(u1 + h, u2) - 2 * c + P(u1 - h, u2)) / (h * h)
        X22 = (P(u1, u2 + h) - 2 * c + P(u1, u2 - h)) / (h * h)
        X12 = (P(u1 + h, u2 + h) - P(u1 + h, u2 - h) - P(u1 - h, u2 + h) + P(u1 - h, u2 - h)) / (4 * h * h)
    return (np.asarray(X1, float), np.asarray(X2, float)), tuple(np.asarray(v, float) for v in (X11, X12, X22))


def fundamental_forms(chart, u1: float, u2: float, analytic: bool = True, h: float = 1e-4) -> FundamentalForms:
    """First and second fundamental forms with the future unit normal; II = -<D^2 X, N>."""
    (X1, X2), (X11, X12, X22) = chart_derivatives(chart, u1, u2, analytic, h)
    E, F, G = (float(mk.inner(a, b)) for a, b in ((X1, X1), (X1, X2), (X2, X2)))
    det = E * G - F * F
    if det <= DEGENERATE_TOL * max(1.0, E * E + G * G):
        raise DegenerateMetric(f"EG - F^2 = {det:.3e}")
    N = future_unit_normal(X1, X2)
    e, f, g = (-float(mk.inner(v, N)) for v in (X11, X12, X22))
    K = -(e * g - f * f) / det
    return FundamentalForms(E, F, G, e, f, g, K, N)


def support_immersion(u: sp.ParabolicSupportFn, analytic: bool = True, hess=None):
    """Immersion (x, y) -> inverse Gauss map, with analytic first derivatives."""
    from .families import ImmersionChart

    return ImmersionChart(
        f"gamma[{u.tag}]",
        lambda x, y: inverse_gauss_map(u, float(x), float(y), analytic),
        {"x": (-np.inf, np.inf), "y": (0.0, np.inf)},
        lambda x, y: inverse_gauss_map_jacobian(u, float(x), float(y), analytic),
        hess,
    )


def parabolic_family_immersion(eps: float):
    """Inverse-Gauss-map chart of the parabolic-invariant family with closed-form Hessian."""
    from .families import ParabolicInvariant

    fam = ParabolicInvariant(eps)
    u = fam.parabolic_support()

    def hess(x, y):
        q = math.sqrt(1 + eps * eps * y * y)
        dq = eps * eps * y / q
        z, zx, zy = sp.zeta(x, y), sp.zeta_x(x, y), sp.zeta_y(x, y)
        Gxx = q / (2 * y * y) * zy
        Gxy = (dq / (2 * y) - q / (2 * y * y)) * zx
        Gyy = (dq / (2 * q * q * y * y) + 1 / (q * y ** 3)) * z - (1 / (2 * q * y * y) + dq / (2 * q * q * y)) * zy
        return Gxx, Gxy, Gyy

    return support_immersion(u, True, hess)


def curvature_grid(surface, u1s, u2s, analytic: bool = True) -> list[tuple]:
    """Rows (x, y, K, F, detA, gx, gy, gz) over a parameter grid.

    For support-defined surfaces (x, y) are half-plane coordinates and F, detA come
    from the support function; for parametrized surfaces F = -4/K and detA = F/4.
    """
    rows = []
    ps = surface.parabolic_support() if hasattr(surface, "parabolic_support") and \
        surface.kind in ("parabolic", "barrier", "hyperboloid") else None
    chart = None if ps is not None else surface.immersion()
    for a in u1s:
        for b in u2s:
            if ps is not None:
                rep = curvature_from_support(ps, float(a), float(b), analytic)
                g = rep.point
                rows.append((a, b, rep.K, rep.F_value, float(np.linalg.det(rep.A)), *g))
            else:
                ff = fundamental_forms(chart, float(a), float(b), analytic)
                g = np.asarray(chart.eval(float(a), float(b)), float)
                F = -4.0 / ff.K
                rows.append((a, b, ff.K, F, F / 4.0, *g))
    return rows


def barrier_F_min(eps, alpha, beta, gamma, M, xs, ys) -> float:
    from .families import BarrierParams, HolderBarrier

    ps = HolderBarrier(BarrierParams(eps, alpha, beta, gamma, M)).parabolic_support()
    return min(F_operator(ps, float(x), float(y)) for x in xs if x != 0 for y in ys)


def search_barrier_M(eps, alpha, beta, gamma, C: float = 1.0, xs=None, ys=None,
                     M0: float = 1.0, max_doublings: int = 60) -> tuple[float, float]:
    """Smallest M = M0 * 2^j with F(u) >= 4/C on the grid (x != 0); returns (M, min F)."""
    if xs is None:
        x = np.geomspace(1e-3, 10.0, 40)
        xs = np.concatenate([-x[::-1], x])
    ys = np.geomspace(1e-3, 50.0, 40) if ys is None else ys
    M = M0
    for _ in range(max_doublings):
        fmin = barrier_F_min(eps, alpha, beta, gamma, M, xs, ys)
        if fmin >= 4.0 / C:
            return M, fmin
        M *= 2
    raise FlatOrDegenerate("no M found within the doubling budget")
