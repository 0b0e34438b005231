"""Periodic Jacobi operators, transfer matrices and the monodromy.

Index conventions follow the three-term recurrence

    a_{n-1} u_{n-1} + b_n u_n + a_n u_{n+1} = lambda u_n

with a_n = a[(n - 1) % T] and a_0 = a_T.  All 2x2 matrices are plain
numpy arrays of shape (2, 2); real lambda keeps real arithmetic.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ValidationError

IDENTITY = np.eye(2)
E22 = np.array([[0.0, 0.0], [0.0, 1.0]])


def mat_norm(m) -> float:
    """Max absolute entry of a matrix."""
    return float(np.max(np.abs(m)))


@dataclass(frozen=True, eq=False)
class PeriodicOperator:
    """Period-T Jacobi operator with off-diagonal ``a`` and diagonal ``b``.

    Parameters
    ----------
    a : sequence of float
        Off-diagonal entries a_1..a_T, all strictly positive.
    b : sequence of float, optional
        Diagonal entries b_1..b_T.  Defaults to zeros.
    """

    a: np.ndarray
    b: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.zeros_like(a) if self.b is None else np.array(self.b, dtype=float).ravel()
        if a.size == 0:
            raise ValidationError("a: period must be at least 1")
        if b.size != a.size:
            raise ValidationError(f"b: expected {a.size} entries, got {b.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("a, b: entries must be finite")
        bad = np.nonzero(a <= 0)[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"a[{i}]: off-diagonal entries must be > 0, got {a[i]!r}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def period(self) -> int:
        return int(self.a.size)

    def a_at(self, n: int) -> float:
        """a_n with periodic lookup (so a_0 = a_T)."""
        return float(self.a[(n - 1) % self.period])

    def b_at(self, n: int) -> float:
        return float(self.b[(n - 1) % self.period])

    def to_dict(self) -> dict:
        return {"period": self.period, "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicOperator":
        if not isinstance(d, dict):
            raise ValidationError("operator: expected an object with keys period, a, b")
        if "a" not in d:
            raise ValidationError("operator.a: missing")
        a = d["a"]
        b = d.get("b", [0.0] * len(a))
        try:
            a = [float(x) for x in a]
            b = [float(x) for x in b]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"operator.a/b: non-numeric entry ({exc})") from None
        period = d.get("period", len(a))
        if not isinstance(period, int) or period < 1:
            raise ValidationError(f"operator.period: must be a positive integer, got {period!r}")
        if len(a) != period:
            raise ValidationError(f"operator.a: expected {period} entries, got {len(a)}")
        if len(b) != period:
            raise ValidationError(f"operator.b: expected {period} entries, got {len(b)}")
        for i, x in enumerate(a):
            if not x > 0:
                raise ValidationError(f"operator.a[{i}]: must be > 0, got {x!r}")
        return cls(a, b)

    def __repr__(self):
        return f"PeriodicOperator(a={self.a.tolist()}, b={self.b.tolist()})"


def free_operator() -> PeriodicOperator:
    """The T=1 operator with a=[1], b=[0]."""
    return PeriodicOperator([1.0], [0.0])


def _is_real(lam) -> bool:
    return not (isinstance(lam, complex) or np.iscomplexobj(lam))


def transfer_matrix(op: PeriodicOperator, i: int, lam) -> np.ndarray:
    """One-step transfer matrix B_i(lam) mapping (u_{i-1}, u_i) to (u_i, u_{i+1})."""
    T = op.period
    if not 1 <= i <= T:
        raise ValidationError(f"i: index must be in 1..{T}, got {i}")
    ai = op.a_at(i)
    aim1 = op.a_at(i - 1)
    dtype = float if _is_real(lam) else complex
    return np.array([[0.0, 1.0], [-aim1 / ai, (lam - op.b_at(i)) / ai]], dtype=dtype)


@dataclass(frozen=True, eq=False)
class Monodromy:
    matrix: np.ndarray
    lam: float
    trace: float

    @property
    def det(self):
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    @property
    def p(self):
        """Entries (p1, p2, p3, p4) in row-major order."""
        m = self.matrix
        return m[0, 0], m[0, 1], m[1, 0], m[1, 1]


def monodromy(op: PeriodicOperator, lam) -> Monodromy:
    """Ordered product B_T ... B_1 over one period."""
    M = np.eye(2, dtype=float if _is_real(lam) else complex)
    for i in range(1, op.period + 1):
        M = transfer_matrix(op, i, lam) @ M
    return Monodromy(M, lam, M[0, 0] + M[1, 1])


def monodromy_trace(op: PeriodicOperator, lams) -> np.ndarray:
    """Vectorised Tr M(lam) over an array of real lam."""
    lams = np.asarray(lams, dtype=float)
    # columns of M: images of e1 and e2 under the recurrence
    x0, x1 = np.ones_like(lams), np.zeros_like(lams)
    y0, y1 = np.zeros_like(lams), np.ones_like(lams)
    for i in range(1, op.period + 1):
        ai, aim1, bi = op.a_at(i), op.a_at(i - 1), op.b_at(i)
        x0, x1 = x1, (-aim1 * x0 + (lams - bi) * x1) / ai
        y0, y1 = y1, (-aim1 * y0 + (lams - bi) * y1) / ai
    return x0 + y1


def monodromy_batch(op: PeriodicOperator, lams) -> np.ndarray:
    """M(lam) for an array of real lam, shape (len(lams), 2, 2)."""
    lams = np.asarray(lams, dtype=float)
    x0, x1 = np.ones_like(lams), np.zeros_like(lams)
    y0, y1 = np.zeros_like(lams), np.ones_like(lams)
    for i in range(1, op.period + 1):
        ai, aim1, bi = op.a_at(i), op.a_at(i - 1), op.b_at(i)
        x0, x1 = x1, (-aim1 * x0 + (lams - bi) * x1) / ai
        y0, y1 = y1, (-aim1 * y0 + (lams - bi) * y1) / ai
    return np.stack([np.stack([x0, y0], -1), np.stack([x1, y1], -1)], -2)


def det_relative_error(M) -> np.ndarray:
    """|det M - 1| relative to the size of the two products that cancel."""
    M = np.asarray(M)
    d1 = M[..., 0, 0] * M[..., 1, 1]
    d2 = M[..., 0, 1] * M[..., 1, 0]
    return np.abs(d1 - d2 - 1) / np.maximum(1.0, np.abs(d1) + np.abs(d2))


def trace_polynomial(op: PeriodicOperator) -> np.polynomial.Polynomial:
    """Tr M(lam) as a degree-T polynomial in lam."""
    P = np.polynomial.Polynomial
    x0, x1, y0, y1 = P([1.0]), P([0.0]), P([0.0]), P([1.0])
    for i in range(1, op.period + 1):
        ai, aim1, bi = op.a_at(i), op.a_at(i - 1), op.b_at(i)
        lin = P([-bi, 1.0])
        x0, x1 = x1, (-aim1 * x0 + lin * x1) / ai
        y0, y1 = y1, (-aim1 * y0 + lin * y1) / ai
    return x0 + y1


class PointClass(str, enum.Enum):
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"


@dataclass(frozen=True, eq=False)
class SpectralPoint:
    lam: float
    kind: PointClass
    trace: float
    theta: float | None = None
    mu: complex | None = None
    monodromy: Monodromy | None = None

    @property
    def is_elliptic(self) -> bool:
        return self.kind is PointClass.ELLIPTIC

    def edge_distance(self) -> float:
        """min(theta, pi - theta); zero for non-elliptic points."""
        if self.theta is None:
            return 0.0
        return min(self.theta, math.pi - self.theta)


def classify(op: PeriodicOperator, lam: float, tol: float = 1e-10) -> SpectralPoint:
    """Classify a real lam by |Tr M(lam)| against 2.

    ``tol`` is the absolute width of the parabolic boundary on ||Tr| - 2|.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    lam = float(lam)
    M = monodromy(op, lam)
    tr = float(M.trace)
    gap = abs(tr) - 2.0
    if abs(gap) <= tol:
        return SpectralPoint(lam, PointClass.PARABOLIC, tr, monodromy=M)
    if gap > 0:
        return SpectralPoint(lam, PointClass.HYPERBOLIC, tr, monodromy=M)
    theta = math.acos(min(1.0, max(-1.0, tr / 2.0)))
    return SpectralPoint(lam, PointClass.ELLIPTIC, tr, theta, cmath.exp(1j * theta), M)


def require_elliptic(pt: SpectralPoint, edge_guard: float = 0.0) -> None:
    if not pt.is_elliptic:
        raise DomainError(f"lambda={pt.lam!r} is {pt.kind.value}, not elliptic")
    if pt.edge_distance() < edge_guard:
        raise DomainError(
            f"lambda={pt.lam!r} is within {edge_guard:g} of a band edge "
            f"(theta={pt.theta!r})"
        )


@dataclass(frozen=True, eq=False)
class PartialProducts:
    """Split products of the monodromy around each transfer matrix.

    ``left[j] = B_T ... B_{T-j+1}`` and ``right[j] = B_{T-j-1} ... B_1`` so
    that ``left[j] @ B_{T-j} @ right[j]`` is the full monodromy.
    """

    lam: float
    left: tuple
    right: tuple

    def residual(self, op: PeriodicOperator) -> float:
        M = monodromy(op, self.lam).matrix
        T = op.period
        return max(
            mat_norm(self.left[j] @ transfer_matrix(op, T - j, self.lam) @ self.right[j] - M)
            for j in range(T)
        )


def partial_products(op: PeriodicOperator, lam) -> PartialProducts:
    T = op.period
    B = [None] + [transfer_matrix(op, i, lam) for i in range(1, T + 1)]
    eye = np.eye(2, dtype=B[1].dtype)
    left = [eye]
    for j in range(1, T):
        left.append(left[-1] @ B[T - j + 1])
    # prefix[m] = B_m ... B_1
    prefix = [eye]
    for i in range(1, T + 1):
        prefix.append(B[i] @ prefix[-1])
    right = [prefix[T - j - 1] for j in range(T)]
    return PartialProducts(lam, tuple(left), tuple(right))


def sigma_k(op: PeriodicOperator, lam, q: Callable[[int], float], k: int,
            parts: PartialProducts | None = None) -> np.ndarray:
    """First-order perturbation of the k-th period block.

    Sum over j of left[j] @ diag(0, q_{T(k+1)-j} / a_{T-j}) @ right[j].
    ``q`` maps an index n to q_n (a :class:`WvnPotential` works).
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    T = op.period
    if parts is None:
        parts = partial_products(op, lam)
    out = np.zeros((2, 2), dtype=parts.left[0].dtype)
    for j in range(T):
        s = q(T * (k + 1) - j) / op.a_at(T - j)
        if s != 0:
            out = out + s * (parts.left[j] @ E22 @ parts.right[j])
    return out


def sigma_bound_constant(op: PeriodicOperator, lam, parts: PartialProducts | None = None) -> float:
    """C with max|Sigma_k| <= C * max|q_n| over the block, by the triangle inequality."""
    if parts is None:
        parts = partial_products(op, lam)
    T = op.period
    return float(sum(
        mat_norm(parts.left[j][:, 1]) * mat_norm(parts.right[j][1, :]) / op.a_at(T - j)
        for j in range(T)
    ))


def diagonalizer(op: PeriodicOperator, pt: SpectralPoint):
    """Return (V, V^{-1}) with V^{-1} M V = diag(mu, conj(mu)).

    The second row of V is (1, 1).
    """
    require_elliptic(pt)
    M = pt.monodromy if pt.monodromy is not None else monodromy(op, pt.lam)
    p1, p2 = M.matrix[0, 0], M.matrix[0, 1]
    mu = pt.mu
    v1 = p2 / (mu - p1)
    v2 = p2 / (mu.conjugate() - p1)
    V = np.array([[v1, v2], [1.0, 1.0]], dtype=complex)
    Vinv = np.array([[1.0, -v2], [-1.0, v1]], dtype=complex) / (v1 - v2)
    return V, Vinv


def random_operator(rng: np.random.Generator, T: int | None = None, max_period: int = 8,
                    a_range: Sequence[float] = (0.5, 2.0), b_range: Sequence[float] = (-1.0, 1.0)):
    """Random operator for property sweeps."""
    if T is None:
        T = int(rng.integers(1, max_period + 1))
    return PeriodicOperator(rng.uniform(*a_range, size=T), rng.uniform(*b_range, size=T))
