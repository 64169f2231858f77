"""Linear algebra of Minkowski 3-space R^{2,1}.

Vectors are plain numpy arrays of shape (3,) (or (..., 3) where noted); the
last coordinate is time. The bilinear form is x x' + y y' - z z'.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotTimelikeSeparated, TimelikeSeparation

ETA = np.diag([1.0, 1.0, -1.0])
NULL_TOLERANCE = 1e-14
ISOMETRY_TOLERANCE = 1e-12

MinkVec = np.ndarray


def vec(x: float, y: float, z: float) -> MinkVec:
    return np.array([x, y, z], dtype=float)


def inner(u, v):
    """Minkowski product; broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]


def norm_sq(v):
    return inner(v, v)


class CausalKind(enum.Enum):
    SPACELIKE = "spacelike"
    NULL = "null"
    TIMELIKE = "timelike"
    ZERO = "zero"


@dataclass(frozen=True)
class CausalClass:
    kind: CausalKind
    future: bool

    @property
    def causal(self) -> bool:
        return self.kind in (CausalKind.NULL, CausalKind.TIMELIKE)


def classify(v) -> CausalClass:
    v = np.asarray(v, dtype=float)
    e2 = float(np.dot(v, v))
    if e2 == 0.0:
        return CausalClass(CausalKind.ZERO, False)
    q = float(inner(v, v))
    if abs(q) <= NULL_TOLERANCE * e2:
        kind = CausalKind.NULL
    elif q > 0:
        kind = CausalKind.SPACELIKE
    else:
        kind = CausalKind.TIMELIKE
    return CausalClass(kind, bool(v[2] >= 0))


def normalize_angle(theta: float) -> float:
    """Representative of theta in (-pi, pi]."""
    a = math.fmod(theta, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


def angular_distance(a, b):
    """Distance in R/2piZ; vectorized."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def null_vector(theta):
    """The null vector (cos t, sin t, 1); vectorized over theta."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta), np.ones_like(theta)], axis=-1)


@dataclass(frozen=True)
class NullDirection:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def vector(self) -> MinkVec:
        return null_vector(self.theta)

    def distance(self, other: "NullDirection | float") -> float:
        o = other.theta if isinstance(other, NullDirection) else other
        return float(angular_distance(self.theta, o))


@dataclass(frozen=True)
class NullPlane:
    """The plane {p : <p, theta_vec> = level}."""

    direction: NullDirection
    level: float

    def evaluate(self, p) -> float:
        return float(inner(p, self.direction.vector)) - self.level


@dataclass(frozen=True)
class SpacelikeLine:
    base: MinkVec
    dir: MinkVec

    def __post_init__(self):
        d = np.asarray(self.dir, dtype=float)
        q = float(inner(d, d))
        if q <= 0:
            raise DomainError("line direction must be spacelike")
        object.__setattr__(self, "dir", d / math.sqrt(q))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))

    def point(self, s: float) -> MinkVec:
        return self.base + s * self.dir


@dataclass(frozen=True)
class Isometry:
    """Affine map v -> L v + t with L in O(2,1)."""

    L: np.ndarray
    t: MinkVec = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return v @ self.L.T + self.t

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other."""
        return Isometry(self.L @ other.L, self.L @ other.t + self.t)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return self.compose(other)

    def inverse(self) -> "Isometry":
        Linv = ETA @ self.L.T @ ETA
        return Isometry(Linv, -Linv @ self.t)

    def defect(self) -> float:
        return float(np.max(np.abs(self.L.T @ ETA @ self.L - ETA)))

    def is_isometry(self, tol: float = ISOMETRY_TOLERANCE) -> bool:
        return self.defect() <= tol


def identity() -> Isometry:
    return Isometry(np.eye(3))


def translation(w) -> Isometry:
    return Isometry(np.eye(3), np.asarray(w, dtype=float))


def boost(delta: float) -> Isometry:
    c, s = math.cosh(delta), math.sinh(delta)
    return Isometry(np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]]))


def rotation(angle: float) -> Isometry:
    """Rotation about the time axis; sends the null direction theta to theta + angle."""
    c, s = math.cos(angle), math.sin(angle)
    return Isometry(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))


def reflection_y() -> Isometry:
    return Isometry(np.diag([1.0, -1.0, 1.0]))


def parabolic(t: float) -> Isometry:
    """Parabolic linear isometry fixing (-1,0,1), shifting the zeta chart by t in x."""
    h = 0.5 * t * t
    return Isometry(np.array([[1.0 - h, -t, -h], [t, 1.0, t], [h, t, 1.0 + h]]))


def glide(lam: float, s: float) -> Isometry:
    """Hyperbolic rotation by s in the (y,z) plane followed by translation (lam s,0,0)."""
    c, sh = math.cosh(s), math.sinh(s)
    L = np.array([[1.0, 0.0, 0.0], [0.0, c, sh], [0.0, sh, c]])
    return Isometry(L, np.array([lam * s, 0.0, 0.0]))


def extrinsic_distance(p, q, tol: float = 1e-12) -> float:
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    n2 = float(inner(d, d))
    scale = float(np.dot(d, d))
    if n2 < -tol * max(scale, 1.0):
        raise TimelikeSeparation(f"<q-p,q-p> = {n2:.3e} < 0")
    return math.sqrt(max(n2, 0.0))


def null_frame(line: SpacelikeLine) -> tuple[MinkVec, MinkVec, MinkVec]:
    """Future null vectors e_minus, e_plus spanning dir-perp, with <e+,e-> = -1/2.

    Returns (e_minus, e0, e_plus) with e0 the unit line direction.
    """
    d = line.dir
    ez = vec(0.0, 0.0, 1.0)
    T = ez - float(inner(ez, d)) * d
    T = T / math.sqrt(-float(inner(T, T)))
    S = ETA @ np.cross(d, T)
    S = S / math.sqrt(float(inner(S, S)))
    e_plus = 0.5 * (T + S)
    e_minus = 0.5 * (T - S)
    return e_minus, d, e_plus


def timelike_dist_to_line(p, line: SpacelikeLine, tol: float = 1e-12) -> float:
    """Timelike distance from p to a spacelike line, sqrt(a c) in the adapted null frame."""
    e_minus, d, e_plus = null_frame(line)
    q = np.asarray(p, dtype=float) - line.base
    q = q - float(inner(q, d)) * d
    a = -2.0 * float(inner(q, e_minus))
    c = -2.0 * float(inner(q, e_plus))
    ac = a * c
    if ac < -tol * max(1.0, float(np.dot(q, q))):
        raise NotTimelikeSeparated("point is spacelike separated from the line")
    return math.sqrt(max(ac, 0.0))
