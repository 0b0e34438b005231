"""Resonance functions, quantised frequencies and predicted decay exponents.

For an elliptic lam with quasi-momentum theta, a potential
c sin(n omega + phi)/n resonates when omega T +- 2 theta lies in 2 pi Z.
The subordinate solution then decays like n^{-gamma} with gamma = c |E| / sin theta,
where E is a finite sum over one period of the coefficients E_j below.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (E22, PeriodicOperator, SpectralPoint, classify, diagonalizer,
                   partial_products, require_elliptic)
from .errors import DegeneracyError, DomainError, JacobiError, ValidationError

TWO_PI = 2.0 * math.pi
EDGE_GUARD = 1e-4
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ResonanceData:
    lam: float
    theta: float
    mu: complex
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray


def resonance_data(op: PeriodicOperator, pt: SpectralPoint, edge_guard: float = EDGE_GUARD):
    """Coefficients C_j, D_j and E_j = D_j / (2T a_{T-j}) at an elliptic point.

    Closed forms in the monodromy entries p1, p2 and the entries of the
    partial products on either side of the j-th transfer matrix.
    """
    require_elliptic(pt, edge_guard)
    T = op.period
    mu = pt.mu
    p1, p2 = pt.monodromy.matrix[0, 0], pt.monodromy.matrix[0, 1]
    v1 = p2 / (mu - p1)
    v2 = p2 / (mu.conjugate() - p1)
    pref = abs(mu - p1) ** 2 * mu / (2.0 * p2)
    parts = partial_products(op, pt.lam)
    C = np.empty(T, dtype=complex)
    D = np.empty(T, dtype=complex)
    for j in range(T):
        al, ar = parts.left[j], parts.right[j]
        lrow = -al[0, 1] + al[1, 1] * v1
        D[j] = pref * (ar[1, 0] * v1 + ar[1, 1]) * lrow
        C[j] = pref * (ar[1, 0] * v2 + ar[1, 1]) * lrow
    a_rev = np.array([op.a_at(T - j) for j in range(T)])
    E = D / (2.0 * T * a_rev)
    scale = max(1.0, float(np.max(np.abs(D))), float(np.max(np.abs(C))))
    if np.any(np.abs(C) <= 1e-14 * scale) or np.any(np.abs(D) <= 1e-14 * scale):
        raise JacobiError(f"vanishing C_j or D_j at elliptic lambda={pt.lam!r}")
    return ResonanceData(pt.lam, pt.theta, mu, C, D, E)


def resonance_data_bruteforce(op: PeriodicOperator, pt: SpectralPoint):
    """(C, D) from the explicit product V^{-1} left[j] E22 right[j] V.

    Independent of the closed forms used by :func:`resonance_data`.
    """
    require_elliptic(pt)
    T = op.period
    V, Vinv = diagonalizer(op, pt)
    parts = partial_products(op, pt.lam)
    s = -1j * math.sin(pt.theta) * pt.mu
    C = np.empty(T, dtype=complex)
    D = np.empty(T, dtype=complex)
    for j in range(T):
        X = Vinv @ parts.left[j] @ E22 @ parts.right[j] @ V
        D[j] = s * X[1, 0]
        C[j] = s * np.conj(X[0, 0])
    return C, D


class ResonanceCase(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"


def _reduce_angle(x: float) -> float:
    """Reduce into (0, 2 pi); exact multiples map to 2 pi."""
    r = math.fmod(x, TWO_PI)
    if r <= 0.0:
        r += TWO_PI
    return r


def residue_2pi(x: float) -> float:
    """Distance from x to the lattice 2 pi Z."""
    r = math.fmod(x, TWO_PI)
    r = abs(r)
    return min(r, TWO_PI - r)


def quantised_omega(case, theta: float, k: int, T: int) -> float:
    case = ResonanceCase(case)
    if case is ResonanceCase.CASE1:
        w = (TWO_PI * k - 2.0 * theta) / T
    elif case is ResonanceCase.CASE2:
        w = (2.0 * theta + TWO_PI * k) / T
    else:
        w = (2 * k - 1) * math.pi / T
    return _reduce_angle(w)


def admissible_k(case, T: int):
    case = ResonanceCase(case)
    return range(0, T) if case is ResonanceCase.CASE2 else range(1, T + 1)


def resonance_value(data: ResonanceData, T: int, case, omega: float, phi: float) -> complex:
    """The finite sum over j giving the resonance function for one case.

    Case 1: sum E_j exp(+i((T-j) omega + phi)); Case 2 uses the conjugate phase;
    Case 3 (theta = pi/2) combines both resonances into
    sum E_j (exp(i(j omega - phi)) - exp(i(phi - j omega))).
    """
    case = ResonanceCase(case)
    j = np.arange(T)
    if case is ResonanceCase.CASE1:
        ph = np.exp(1j * ((T - j) * omega + phi))
    elif case is ResonanceCase.CASE2:
        ph = np.exp(-1j * ((T - j) * omega + phi))
    else:
        ph = np.exp(1j * (j * omega - phi)) - np.exp(1j * (phi - j * omega))
    return complex(np.sum(data.E * ph))


@dataclass(frozen=True, eq=False)
class ResonancePlan:
    lam: float
    theta: float
    case: ResonanceCase
    k: int
    omega: float
    phi: float
    E_value: complex
    exponent_per_c: float
    c_threshold: float
    E_coeffs: np.ndarray = field(default=None, repr=False)

    @property
    def k_plus(self):
        return None if self.case is ResonanceCase.CASE2 else self.k

    @property
    def k_minus(self):
        return self.k if self.case is ResonanceCase.CASE2 else None

    def exponent(self, c: float) -> float:
        return c * self.exponent_per_c

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "theta": self.theta, "case": self.case.value, "k": self.k,
            "omega": self.omega, "phi": self.phi,
            "E_re": self.E_value.real, "E_im": self.E_value.imag,
            "exponent_per_c": self.exponent_per_c, "c_threshold": self.c_threshold,
        }


def plan_resonance(op: PeriodicOperator, pt: SpectralPoint | float, case="case1",
                   k: int | None = None, phi: float = 0.0, edge_guard: float = EDGE_GUARD,
                   vanish_tol: float = 1e-12) -> ResonancePlan:
    """Quantised frequency and predicted decay exponent for one target.

    Parameters
    ----------
    pt : SpectralPoint or float
        Target point (a float is classified first).
    case : {"case1", "case2", "case3"}
    k : int, optional
        k_+ in 1..T (cases 1 and 3) or k_- in 0..T-1 (case 2).  When None all
        admissible values are scanned and the largest |E| wins.
    """
    if not isinstance(pt, SpectralPoint):
        pt = classify(op, pt)
    case = ResonanceCase(case)
    T = op.period
    require_elliptic(pt, edge_guard)
    half_pi_gap = abs(pt.theta - math.pi / 2)
    if case is ResonanceCase.CASE3:
        if half_pi_gap >= 1e-10:
            raise DomainError(f"case3 needs theta = pi/2, got theta={pt.theta!r} at lambda={pt.lam!r}")
        if abs(math.sin(phi)) < 1e-12:
            raise DomainError("case3 needs phi not in pi Z (the potential vanishes identically)")
    elif half_pi_gap < 1e-10:
        raise DomainError(f"lambda={pt.lam!r} has theta = pi/2 and resonates doubly; use case3")
    data = resonance_data(op, pt, edge_guard)
    ks = list(admissible_k(case, T))
    if k is not None:
        if k not in ks:
            raise ValidationError(f"k={k} not admissible for {case.value} with T={T}")
        ks = [k]
    best = None
    for kk in ks:
        w = quantised_omega(case, pt.theta, kk, T)
        val = resonance_value(data, T, case, w, phi)
        if best is None or abs(val) > abs(best[2]):
            best = (kk, w, val)
    kk, w, val = best
    if abs(val) < vanish_tol:
        raise DomainError(f"resonance function vanishes at lambda={pt.lam!r}")
    per_c = abs(val) if case is ResonanceCase.CASE3 else abs(val) / math.sin(pt.theta)
    return ResonancePlan(pt.lam, pt.theta, case, kk, w, float(phi), val, per_c,
                         0.5 / per_c, data.E)


def matched_k_minus(k_plus: int, T: int) -> int:
    """k_- whose case-2 frequency is the negative of the case-1 frequency for k_+."""
    return (-k_plus) % T


# closed forms -------------------------------------------------------------

def t2_A(a1, a2, lam, mu):
    """A(lam) for T=2 with zero diagonal, so that E(lam; 2) = e^{i phi} A."""
    pre = (a1 + a2 * mu) / (8 * a1 ** 2 * a2 * lam * (a1 * mu + a2))
    return pre * ((lam ** 2 * (a1 + a2) - a2 ** 3) / mu - mu * a1 ** 2 * a2
                  - 2 * a2 ** 2 * a1 + lam ** 2 * a1)


def t2_B(a1, a2, lam, mu):
    """B(lam) for T=2 with zero diagonal, so that E(lam; 1) = e^{i phi} B."""
    pre = (a1 + a2 * mu) / (8 * a1 ** 2 * a2 * lam * (a1 * mu + a2))
    return pre * ((lam ** 2 * (a1 - a2) + a2 ** 3) / mu + mu * a1 ** 2 * a2
                  + 2 * a2 ** 2 * a1 - lam ** 2 * a1)


def t2_bracket(a1, a2, lam, mu, omega):
    """E(lam; k)/e^{i phi} for T=2, zero diagonal, as a function of omega."""
    w = cmath.exp(1j * omega)
    return (a1 + a2 * mu) / (8 * lam * (a1 * mu + a2)) * (
        mu * lam ** 2 * w ** 2 / (a1 * a2)
        + ((lam ** 2 - a2 ** 2) / (a1 * a2) - mu) * (a2 / a1 + mu) * w)


def closed_form_E_oracle(op: PeriodicOperator, pt: SpectralPoint, which: str, phi: float) -> complex:
    """Closed-form case-1 resonance values for T=1 and T=2 (zero diagonal).

    ``which`` is "T1" (E for k_+ = 1), "T2_A" (k_+ = 2) or "T2_B" (k_+ = 1).
    """
    require_elliptic(pt)
    e = cmath.exp(1j * phi)
    if which == "T1":
        if op.period != 1:
            raise DomainError("T1 oracle needs period 1")
        return e / (4 * op.a[0] * pt.mu ** 2)
    if which in ("T2_A", "T2_B"):
        if op.period != 2 or np.any(op.b != 0):
            raise DomainError(f"{which} oracle needs period 2 and zero diagonal")
        f = t2_A if which == "T2_A" else t2_B
        return e * f(op.a[0], op.a[1], pt.lam, pt.mu)
    raise ValidationError(f"unknown oracle {which!r}")


# resonance classes -------------------------------------------------------

@dataclass(frozen=True)
class ResonanceClasses:
    members: list
    classes: list

    def class_of(self, index: int) -> list:
        for cl in self.classes:
            if index in cl:
                return cl
        raise KeyError(index)


def _related(th1, th2, tol):
    return abs(th1 - th2) < tol or abs(th1 + th2 - math.pi) < tol


def partition_resonance_classes(op: PeriodicOperator, lambdas, tol: float = MEMBERSHIP_TOL,
                                thetas=None) -> ResonanceClasses:
    """Group targets whose quasi-momenta agree or sum to pi.

    Classes are the connected components of the relation, so a chain of
    near-matches within ``tol`` lands in one class.
    """
    lambdas = [float(x) for x in lambdas]
    if thetas is None:
        thetas = []
        for lam in lambdas:
            pt = classify(op, lam)
            if not pt.is_elliptic:
                raise DomainError(f"lambda={lam!r} is {pt.kind.value}, not elliptic")
            thetas.append(pt.theta)
    if len(set(lambdas)) != len(lambdas):
        raise ValidationError("duplicate target in lambda list")
    n = len(lambdas)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _related(thetas[i], thetas[j], tol):
                parent[find(j)] = find(i)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    classes = sorted(groups.values(), key=lambda g: g[0])
    T = op.period
    for cl in classes:
        if len(cl) > 2 * T:
            raise JacobiError(f"resonance class of size {len(cl)} exceeds 2T={2 * T}")
    members = [(i, lambdas[i], thetas[i]) for i in range(n)]
    return ResonanceClasses(members, classes)


def perturb_coefficients(A, f, eps_budget: float, rel_tol: float = 1e-14):
    """Nudge a positive vector so that no entry of A f vanishes.

    Sweeps the entries of A f in order; at the first (near) zero entry j,
    f_j is raised by the largest eps in {eps_budget, eps_budget/2, ...} that
    makes entries 0..j all nonzero.  Entries before j stay nonzero for small
    eps, and entry j becomes A_jj eps, so one sweep suffices.

    An entry counts as zero when |(A f)_t| <= rel_tol * sum_l |A_tl| f_l.
    """
    A = np.asarray(A, dtype=complex)
    f = np.array(f, dtype=float)
    n = f.size
    if A.shape != (n, n):
        raise ValidationError(f"A must be {n}x{n}, got {A.shape}")
    if np.any(f <= 0):
        raise ValidationError("f must be strictly positive")
    if not eps_budget > 0:
        raise ValidationError("eps_budget must be positive")
    if np.any(np.abs(np.diag(A)) == 0):
        raise ValidationError("A must have a nonzero diagonal")

    def zero_mask(g):
        return np.abs(A @ g) <= rel_tol * (np.abs(A) @ g)

    g = f.copy()
    for j in range(n):
        if not zero_mask(g)[j]:
            continue
        eps = eps_budget
        for _ in range(60):
            trial = g.copy()
            trial[j] += eps
            # rounding in the addition may overshoot the budget by an ulp
            if abs(trial[j] - f[j]) <= eps_budget and not np.any(zero_mask(trial)[: j + 1]):
                g = trial
                break
            eps *= 0.5
        else:
            raise JacobiError(f"coefficient perturbation failed at entry {j}")
    if np.any(zero_mask(g)):
        raise JacobiError("coefficient perturbation left a vanishing entry")
    return g


# multi-target schemes ----------------------------------------------------

def resonant_sets(target: ResonancePlan, plans, T: int, tol: float = MEMBERSHIP_TOL):
    """Indices l with 2 theta_t + T omega_l (plus set) or 2 theta_t - T omega_l
    (minus set) in 2 pi Z."""
    plus = [l for l, p in enumerate(plans) if residue_2pi(2 * target.theta + T * p.omega) < tol]
    minus = [l for l, p in enumerate(plans) if residue_2pi(2 * target.theta - T * p.omega) < tol]
    return plus, minus


def _coupling(E_t: np.ndarray, T: int, plan_l: ResonancePlan, sign: int) -> complex:
    j = np.arange(T)
    return complex(np.sum(E_t * np.exp(sign * 1j * ((T - j) * plan_l.omega + plan_l.phi))))


def coupling_row(target: ResonancePlan, plans, T: int, tol: float = MEMBERSHIP_TOL):
    """Row of coefficients with Y(lam_t) = row @ c.

    sin x = (e^{ix} - e^{-ix}) / 2i, so frequencies resonating through the
    conjugate exponential (minus set) enter with the opposite sign.
    """
    plus, minus = resonant_sets(target, plans, T, tol)
    row = np.zeros(len(plans), dtype=complex)
    for l in plus:
        row[l] += _coupling(target.E_coeffs, T, plans[l], +1)
    for l in minus:
        row[l] -= _coupling(target.E_coeffs, T, plans[l], -1)
    return row


def resonance_sum_Y(op: PeriodicOperator, target: ResonancePlan, all_plans, c,
                    tol: float = MEMBERSHIP_TOL) -> complex:
    """Combined resonance coefficient at a target for a multi-frequency potential.

    Returns 0 when no frequency resonates with the target.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValidationError("c must be positive")
    row = coupling_row(target, all_plans, op.period, tol)
    Y = complex(row @ c)
    scale = float(np.abs(row) @ c)
    if scale > 0 and abs(Y) <= 1e-12 * scale:
        raise DegeneracyError(
            f"resonant cancellation at lambda={target.lam!r}; re-run coefficient perturbation")
    return Y


@dataclass(frozen=True, eq=False)
class CoefficientScheme:
    c: np.ndarray
    b: dict
    classes: list
    Y: np.ndarray
    exponents: np.ndarray
    sum_c: float
    sum_c_over_b: float
    sum_c_over_sin: float

    def to_dict(self) -> dict:
        return {
            "c": self.c.tolist(), "b": {str(k): v for k, v in self.b.items()},
            "classes": self.classes,
            "Y_re": self.Y.real.tolist(), "Y_im": self.Y.imag.tolist(),
            "exponents": self.exponents.tolist(), "sum_c": self.sum_c,
            "sum_c_over_b": self.sum_c_over_b, "sum_c_over_sin_half_Tomega": self.sum_c_over_sin,
        }


def separation_b(plans, T: int, classes) -> dict:
    """Frequency separations b_l for l >= 2 (1-based), skipping same-class pairs.

    An empty minimum (every earlier target in the same class) gives 1.
    """
    cls = {}
    for ci, cl in enumerate(classes):
        for i in cl:
            cls[i] = ci
    b = {}
    for l in range(1, len(plans)):
        vals = []
        for j in range(l):
            if cls[j] == cls[l]:
                continue
            vals.append(abs(math.sin(T * (plans[l].omega - plans[j].omega) / 2)))
            vals.append(abs(math.sin(T * (plans[l].omega + plans[j].omega) / 2)))
        bl = min(vals) if vals else 1.0
        if bl <= 1e-12:
            raise ValidationError(f"duplicate target: frequency of target {l + 1} coincides "
                                  "with an unrelated one")
        b[l + 1] = bl
    return b


def coefficient_scheme(op: PeriodicOperator, plans, base: float = 1.0,
                       target_exponent: float | None = None, eps_fraction: float = 0.05,
                       cancel_tol: float = 1e-3) -> CoefficientScheme:
    """Coupling constants for a potential that resonates at every target.

    Starts from c_l = base / (l^2 max(1, 1/b_l)), perturbs within each
    resonance class so that no combined coefficient Y(lam_t) cancels
    (relative size ``cancel_tol``), then optionally rescales so the smallest
    predicted exponent |Y_t| / sin theta_t equals ``target_exponent``.
    """
    plans = list(plans)
    if not plans:
        raise ValidationError("empty plan list")
    T = op.period
    for p in plans:
        if p.case is ResonanceCase.CASE3:
            raise ValidationError("coefficient_scheme handles case1/case2 plans only")
    classes = partition_resonance_classes(op, [p.lam for p in plans],
                                          thetas=[p.theta for p in plans]).classes
    b = separation_b(plans, T, classes)
    n = len(plans)
    c = np.array([base / ((l + 1) ** 2 * max(1.0, 1.0 / b.get(l + 1, 1.0))) for l in range(n)])
    if n == 1:
        c[0] = base
    A = np.array([coupling_row(p, plans, T) for p in plans])
    for cl in classes:
        sub = A[np.ix_(cl, cl)]
        c[cl] = perturb_coefficients(sub, c[cl], eps_fraction * float(c[cl].min()), cancel_tol)
    Y = A @ c
    sins = np.array([math.sin(p.theta) for p in plans])
    expo = np.abs(Y) / sins
    if target_exponent is not None:
        s = target_exponent / float(expo.min())
        c, Y, expo = c * s, Y * s, expo * s
    sum_c_over_b = float(sum(c[l] / b.get(l + 1, 1.0) for l in range(n)))
    sum_c_over_sin = float(sum(c[l] / abs(math.sin(T * plans[l].omega / 2)) for l in range(n)))
    return CoefficientScheme(c, b, classes, Y, expo, float(c.sum()), sum_c_over_b, sum_c_over_sin)
