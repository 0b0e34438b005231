"""Wigner-von Neumann potentials and boundary corrections for embedded eigenvalues.

A potential is a finite sum q_n = sum_l c_l sin(n omega_l + phi_l) / n with an
optional explicit head q_1..q_m and a shift r of the 1-2 off-diagonal link.
The embedding routines take subordinate tails (solutions of every row past a
few leading ones) and choose the leading q's, r and head values so that the
spliced vector solves every row, including the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import PeriodicOperator
from .errors import DegeneracyError, DomainError, ValidationError


@dataclass(frozen=True, eq=False)
class WvnPotential:
    """Finite-frequency Wigner-von Neumann potential.

    Parameters
    ----------
    terms : sequence of (c, omega, phi)
    overrides : dict, optional
        Explicit values {n: q_n}; keys must form an initial segment 1..m.
    r : float
        Shift of the off-diagonal entry linking sites 1 and 2.
    """

    terms: tuple = ()
    overrides: dict = field(default_factory=dict)
    r: float = 0.0

    def __post_init__(self):
        terms = tuple((float(c), float(w), float(p)) for c, w, p in self.terms)
        for c, w, p in terms:
            if not c > 0:
                raise ValidationError(f"terms: coupling c must be > 0, got {c!r}")
            if not (math.isfinite(w) and math.isfinite(p)):
                raise ValidationError("terms: omega and phi must be finite")
        ov = {int(k): float(v) for k, v in dict(self.overrides).items()}
        if ov and sorted(ov) != list(range(1, len(ov) + 1)):
            raise ValidationError(f"overrides: keys must be 1..m, got {sorted(ov)}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "overrides", ov)
        object.__setattr__(self, "r", float(self.r))

    @classmethod
    def single(cls, c: float, omega: float, phi: float = 0.0) -> "WvnPotential":
        return cls(((c, omega, phi),))

    @classmethod
    def from_plans(cls, plans, c) -> "WvnPotential":
        c = np.broadcast_to(np.asarray(c, dtype=float), (len(plans),))
        return cls(tuple((float(ci), p.omega, p.phi) for ci, p in zip(c, plans)))

    @property
    def head_length(self) -> int:
        return len(self.overrides)

    @property
    def coupling_sum(self) -> float:
        return float(sum(c for c, _, _ in self.terms))

    def tail_value(self, n: int) -> float:
        """The sinusoidal sum at n, ignoring overrides."""
        return sum(c * math.sin(n * w + p) for c, w, p in self.terms) / n

    def __call__(self, n: int) -> float:
        if n in self.overrides:
            return self.overrides[n]
        return self.tail_value(n)

    def values(self, n) -> np.ndarray:
        """Vectorised q_n for an integer array n >= 1."""
        n = np.asarray(n, dtype=np.int64)
        q = np.zeros(n.shape)
        nf = n.astype(float)
        for c, w, p in self.terms:
            q += c * np.sin(nf * w + p)
        q = q / nf
        for k, v in self.overrides.items():
            q[n == k] = v
        return q

    def kernel_args(self):
        """(cs, ws, ps, qhead) arrays for the recurrence kernels."""
        if self.terms:
            cs, ws, ps = (np.ascontiguousarray(x, dtype=float) for x in zip(*self.terms))
        else:
            cs = ws = ps = np.zeros(0)
        qhead = np.array([self.overrides[k] for k in range(1, self.head_length + 1)], dtype=float)
        return cs, ws, ps, qhead

    def with_overrides(self, overrides: dict, r: float | None = None) -> "WvnPotential":
        return WvnPotential(self.terms, overrides, self.r if r is None else r)

    def to_dict(self) -> dict:
        return {
            "terms": [{"c": c, "omega": w, "phi": p} for c, w, p in self.terms],
            "overrides": {str(k): v for k, v in sorted(self.overrides.items())},
            "r": self.r,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WvnPotential":
        if not isinstance(d, dict):
            raise ValidationError("potential: expected an object")
        try:
            terms = [(t["c"], t["omega"], t.get("phi", 0.0)) for t in d.get("terms", [])]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"potential.terms: missing field {exc}") from None
        return cls(tuple(terms), {int(k): v for k, v in d.get("overrides", {}).items()},
                   d.get("r", 0.0))


ZERO_POTENTIAL = WvnPotential()


def evaluate_q(p: WvnPotential, n: int) -> float:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return p(n)


# embedding ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenHead:
    lam: float
    u: tuple  # u_1, u_2, ... as far as the construction fixes them


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    potential: WvnPotential
    heads: tuple
    free_parameters: dict
    branch: tuple

    def vector(self, i: int, tail) -> np.ndarray:
        """Head i spliced onto a tail trace, as u_1..u_end."""
        head = np.asarray(self.heads[i].u, dtype=float)
        vals = np.asarray(tail.values(), dtype=float)
        offset = len(head) + 1 - tail.start  # tail entries already covered by the head
        return np.concatenate([head, vals[offset:]])

    def to_dict(self) -> dict:
        return {
            "potential": self.potential.to_dict(),
            "heads": [{"lambda": h.lam, "u": list(h.u)} for h in self.heads],
            "free_parameters": self.free_parameters,
            "branch": list(self.branch),
        }


def _tail_values(trace, indices):
    if trace.start > indices[0] or trace.end < indices[-1]:
        raise ValidationError(
            f"trace must cover n={indices[0]}..{indices[-1]}, covers {trace.start}..{trace.end}")
    return [trace.value(n) for n in indices]


def embed_single(op: PeriodicOperator, plan, c: float, trace, q1: float | None = None,
                 q2: float | None = None, check_threshold: bool = True) -> EmbeddingResult:
    """Turn a subordinate tail into an l^2 eigenvector by fixing q_1 and q_2.

    ``trace`` must solve rows n >= 3 of the eigen-equation and cover n = 2..4.
    The head keeps u_1..u_4 so rows 1-3 can be checked.
    When u_2 != 0, q_1 is free (default lam - b_1 + 1) and fixes u_1; q_2 then
    solves row 2.  When u_2 = 0, row 2 fixes u_1, q_1 = lam - b_1 and q_2 is
    free (default 0).
    """
    if check_threshold and not c > plan.c_threshold:
        raise DomainError(f"c={c!r} does not exceed the l2 threshold {plan.c_threshold!r}")
    lam = plan.lam
    a1, a2 = op.a_at(1), op.a_at(2)
    b1, b2 = op.b_at(1), op.b_at(2)
    u2, u3, u4 = _tail_values(trace, [2, 3, 4])
    scale = max(abs(u2), abs(u3))
    base = WvnPotential.single(c, plan.omega, plan.phi)
    if abs(u2) > 1e-10 * scale:
        free = {"q1": "free"}
        if q1 is None:
            q1 = lam - b1 + 1.0
            free = {"q1": "default lam - b1 + 1"}
        if q1 + b1 - lam == 0:
            raise ValidationError("q1 must differ from lam - b1 when u2 != 0")
        u1 = -a1 * u2 / (q1 + b1 - lam)
        q2v = ((lam - b2) * u2 - a2 * u3 - a1 * u1) / u2
        free["q2"] = "solved from row 2"
        branch = ("u2_nonzero",)
    else:
        u2 = 0.0
        u1 = -a2 * u3 / a1
        q1 = lam - b1
        free = {"q1": "forced lam - b1"}
        if q2 is None:
            q2v = 0.0
            free["q2"] = "default 0"
        else:
            q2v = float(q2)
            free["q2"] = "free"
        branch = ("u2_zero",)
    pot = base.with_overrides({1: float(q1), 2: float(q2v)})
    head = EigenHead(lam, (float(u1), float(u2), float(u3), float(u4)))
    return EmbeddingResult(pot, (head,), free, branch)


def _third_from_row4(op, lam, q4, u4, u5):
    # row 4 solved for u_3
    return ((lam - op.b_at(4) - q4) * u4 - op.a_at(4) * u5) / op.a_at(3)


def embed_pair(op: PeriodicOperator, plans: Sequence, c, traces: Sequence,
               tol: float = 1e-10, max_retries: int = 5, delta: float | None = None,
               eps_seq=None) -> EmbeddingResult:
    """One potential with eigenvalues at both plan targets.

    ``traces`` are tails solving rows n >= 4 for each target and covering
    n = 3..5.  The leading q'_1..q'_4 and the link shift r are chosen so rows
    1-3 hold for both targets:

    (i)   u_3 of one target nonzero and the system non-degenerate: r = 0,
          q'_1 = lam_1 - b_1 and the rest solved row by row;
    (ii)  degenerate system with a_1 <= |lam_2 - lam_1|/2: r = 0 and a
          one-parameter family indexed by eps;
    (iii) degenerate with a_1 > |lam_2 - lam_1|/2: shrink the link with
          r = |lam_2 - lam_1|/2 - a_1 (< 0), then (ii);
    (iv)  both u_3 vanish: shift q'_4 by delta, recompute u_3 from row 4, retry.

    ``c`` is either a :class:`WvnPotential` or couplings for the two plans.
    """
    if len(plans) != 2 or len(traces) != 2:
        raise ValidationError("embed_pair needs exactly two plans and two traces")
    lam = [float(plans[0].lam), float(plans[1].lam)]
    if lam[0] == lam[1]:
        raise ValidationError("embed_pair needs two distinct targets")
    base = c if isinstance(c, WvnPotential) else WvnPotential.from_plans(plans, c)
    base = WvnPotential(base.terms, {}, 0.0)
    a1, a2, a3 = op.a_at(1), op.a_at(2), op.a_at(3)
    b1, b2, b3 = op.b_at(1), op.b_at(2), op.b_at(3)
    tails = [_tail_values(t, [3, 4, 5]) for t in traces]
    u3 = [t[0] for t in tails]
    u4 = [t[1] for t in tails]
    u5 = [t[2] for t in tails]
    q4 = base.tail_value(4)
    branch = []
    free = {}

    def is_zero(x, ref):
        return abs(x) <= tol * ref

    for attempt in range(max_retries + 1):
        ref = [max(abs(u3[i]), abs(u4[i]), 1e-300) for i in range(2)]
        z = [is_zero(u3[i], ref[i]) for i in range(2)]
        if not (z[0] and z[1]):
            break
        if attempt == max_retries:
            raise DegeneracyError(
                f"u3 stayed zero for both targets after {max_retries} shifts of q4")
        d = delta if delta is not None else 1e-3 * abs(q4) + 1e-6
        q4 += d
        u3 = [_third_from_row4(op, lam[i], q4, u4[i], u5[i]) for i in range(2)]
        branch.append("iv")
        free["q4"] = f"shifted by {len(branch)} x {d!r}"

    # order so that index 0 has u3 != 0
    order = [0, 1] if not z[0] else [1, 0]
    L1, L2 = lam[order[0]], lam[order[1]]
    s1, s2 = order
    w1, w2 = u3[s1], u3[s2]
    v1, v2 = u4[s1], u4[s2]
    D = L2 - L1
    degen = (D + a3 * v1 / w1) * w2 - a3 * v2
    degen_ref = abs(D * w2) + abs(a3 * v1 * w2 / w1) + abs(a3 * v2)
    r = 0.0
    if not is_zero(degen, degen_ref):
        branch.append("i")
        ap = a1
        q1 = L1 - b1
        q3 = ((L1 - b3) * w1 - a3 * v1) / w1
        x2_1 = 0.0
        x1_1 = -a2 * w1 / ap
        x2_2 = (L2 * w2 - a3 * v2 - (q3 + b3) * w2) / a2
        x1_2 = ap * x2_2 / (L2 - L1)
        q2 = ((L2 - b2) * x2_2 - a2 * w2 - ap * x1_2) / x2_2
        free.update({"q1": "lam_1 - b_1", "r": "0"})
    else:
        if a1 > abs(D) / 2:
            branch.append("iii")
            r = abs(D) / 2 - a1
        branch.append("ii")
        ap = a1 + r
        x = (D + math.sqrt(max(D * D - 4 * ap * ap, 0.0))) / 2
        eps_values = eps_seq if eps_seq is not None else [0.5 ** m for m in range(40)]
        for eps in eps_values:
            x1_1 = ap * eps * w1 / (a2 * x)
            x1_2 = ap * eps * w2 / (a2 * (x - D))
            if abs(x1_1) > 1e-8 and abs(x1_2) > 1e-8:
                break
        else:
            raise DegeneracyError("no eps in the sequence gives nonzero u_1 heads")
        q1 = L1 - b1 + x
        q3 = (L1 - b3) - a3 * v1 / w1 + eps
        x2_1 = -eps * w1 / a2
        x2_2 = -eps * w2 / a2
        q2 = L1 - b2 + a2 * a2 / eps + ap * ap / x
        free.update({"eps": eps, "x": x, "r": r})
    heads = [None, None]
    heads[s1] = EigenHead(L1, (float(x1_1), float(x2_1), float(w1), float(v1)))
    heads[s2] = EigenHead(L2, (float(x1_2), float(x2_2), float(w2), float(v2)))
    pot = base.with_overrides({1: float(q1), 2: float(q2), 3: float(q3), 4: float(q4)}, r)
    if "q4" not in free:
        free["q4"] = "tail formula"
    return EmbeddingResult(pot, tuple(heads), free, tuple(branch))


def _link(op, p, m):
    return op.a_at(m) + (p.r if m == 1 else 0.0)


def boundary_residuals(op: PeriodicOperator, result: EmbeddingResult, rows: int | None = None):
    """Relative residuals of the leading rows of the eigen-equation at each head.

    Each row is divided by the sum of its term magnitudes, with the diagonal
    taken as (|b_n| + |q_n| + |lam|) |u_n|.

    By default every row fully determined by the stored head is checked
    (rows 1..len(u)-1).
    """
    p = result.potential
    out = []
    for h in result.heads:
        u = (0.0,) + tuple(h.u)  # u[n] for n >= 1
        nrows = len(h.u) - 1 if rows is None else rows
        for n in range(1, nrows + 1):
            terms = [(op.b_at(n) + p(n) - h.lam) * u[n], _link(op, p, n) * u[n + 1]]
            # backward-error scale: the diagonal is measured before cancellation
            scale = (abs(op.b_at(n)) + abs(p(n)) + abs(h.lam)) * abs(u[n]) + abs(terms[1])
            if n > 1:
                terms.append(_link(op, p, n - 1) * u[n - 1])
                scale += abs(terms[2])
            out.append(abs(sum(terms)) / (scale or 1.0))
    return np.array(out)
