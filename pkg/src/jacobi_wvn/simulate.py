"""Solutions of the perturbed recurrence and their asymptotics.

Forward iteration follows a solution from its head; the decaying
(subordinate) solution is obtained by stable backward iteration from far
out, where any terminal data is attracted to it.  Decay exponents are fitted
on the amplitude ||V^{-1} (u_{kT}, u_{kT+1})||, which is exactly constant for
the unperturbed elliptic recurrence and so isolates the power law.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.optimize import minimize_scalar

from . import kernels
from .core import PeriodicOperator, classify, diagonalizer, require_elliptic
from .errors import DomainError, NumericalError, ValidationError
from .potential import ZERO_POTENTIAL, WvnPotential
from .resonance import resonance_data

LOG10_RESCALE = 150.0


class Verdict(str, enum.Enum):
    DECAYING = "Decaying"
    BOUNDED = "Bounded"
    GROWING = "Growing"
    UNDETERMINED = "Undetermined"
    NO_SUBORDINATE = "NoSubordinate"


@dataclass(frozen=True)
class FitResult:
    gamma: float
    stderr: float
    window: tuple
    method: str = "invariant"
    points: int = 0

    def to_dict(self, verdict=None) -> dict:
        d = {"gamma": self.gamma, "stderr": self.stderr, "window": list(self.window)}
        if verdict is not None:
            d["verdict"] = Verdict(verdict).value
        return d


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Values u_start..u_end of one solution.

    ``u`` holds stored values; when rescaling happened ``log10_scale`` gives
    per-entry decimal exponents so the solution is u * 10**log10_scale up to
    one overall constant.
    """

    lam: float
    start: int
    u: np.ndarray
    log10_scale: np.ndarray | None = None
    op: PeriodicOperator | None = None
    potential: WvnPotential | None = None
    fit: FitResult | None = None
    verdict: Verdict = Verdict.UNDETERMINED

    @classmethod
    def from_values(cls, values, start: int = 1, lam: float = float("nan"), op=None,
                    potential=None):
        return cls(float(lam), int(start), np.asarray(values, dtype=float), None, op, potential)

    @property
    def end(self) -> int:
        return self.start + len(self.u) - 1

    def __len__(self):
        return len(self.u)

    @property
    def rescaled(self) -> bool:
        return self.log10_scale is not None

    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1)

    def values(self) -> np.ndarray:
        if self.log10_scale is None:
            return self.u
        with np.errstate(over="ignore", under="ignore"):
            return self.u * 10.0 ** self.log10_scale

    def value(self, n: int) -> float:
        i = n - self.start
        if not 0 <= i < len(self.u):
            raise IndexError(f"n={n} outside {self.start}..{self.end}")
        v = float(self.u[i])
        if self.log10_scale is not None:
            v *= 10.0 ** float(self.log10_scale[i])
        return v

    def log_abs(self, n) -> np.ndarray:
        """Natural log of |u_n| including rescaling."""
        i = np.asarray(n) - self.start
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(self.u[i]))
        if self.log10_scale is not None:
            out = out + self.log10_scale[i] * math.log(10.0)
        return out

    def samples(self, stride: int = 1, split: bool = False) -> np.ndarray:
        """Rows (n, u_n) for every n <= 8 and every multiple of ``stride``.

        With ``split`` rows are (n, m_n, s_n) with u_n = m_n 10^s_n, which
        stays finite for rescaled traces.
        """
        n = self.indices()
        keep = (n <= 8) | (n % max(1, stride) == 0)
        if split:
            s = self.log10_scale[keep] if self.log10_scale is not None else np.zeros(keep.sum())
            return np.column_stack([n[keep], self.u[keep], s])
        return np.column_stack([n[keep], self.values()[keep]])

    def window_norms(self, log10: bool = False) -> np.ndarray:
        """Rows (N, ||u||_N) at dyadic N up to the trace end, plus the end.

        Accumulated chunk by chunk relative to the running maximum, so
        neither tiny nor rescaled values over- or underflow.
        """
        Ns = [2 ** m for m in range(1, 64) if self.start <= 2 ** m <= self.end]
        if not Ns or Ns[-1] != self.end:
            Ns.append(self.end)
        with np.errstate(divide="ignore"):
            L = np.log10(np.abs(self.u))
        if self.log10_scale is not None:
            L = L + self.log10_scale
        out = []
        m, w, lo = -math.inf, 0.0, 0
        for N in Ns:
            hi = N - self.start + 1
            chunk = L[lo:hi]
            mc = float(chunk.max()) if chunk.size else -math.inf
            if mc > m:
                w *= 10.0 ** (2 * (m - mc)) if m > -math.inf else 0.0
                m = mc
            if m > -math.inf:
                w += float(np.sum(10.0 ** (2 * (chunk - m))))
            out.append(m + 0.5 * math.log10(w) if w > 0 else -math.inf)
            lo = hi
        out = np.array(out)
        if not log10:
            with np.errstate(over="ignore"):
                out = 10.0 ** out
        return np.column_stack([Ns, out])

    def with_fit(self, fit: FitResult | None, verdict) -> "SolutionTrace":
        verdict = Verdict(verdict)
        if verdict not in (Verdict.DECAYING, Verdict.GROWING):
            fit = None
        return replace(self, fit=fit, verdict=verdict)


def _check_kernel_status(bad, what):
    if bad >= 0:
        raise NumericalError(f"non-finite value in {what} at n={bad}", position=int(bad))


def _op_arrays(op):
    return np.ascontiguousarray(op.a), np.ascontiguousarray(op.b)


def _scale_forward(events, start, length):
    if len(events) == 0:
        return None
    n = np.arange(start, start + length)
    return LOG10_RESCALE * np.searchsorted(np.sort(events), n, side="right").astype(float)


def _scale_backward(events, start, length):
    if len(events) == 0:
        return None
    n = np.arange(start, start + length)
    ev = np.sort(events)
    # entries at index <= p were divided at event p
    cnt = len(ev) - np.searchsorted(ev, n, side="left")
    return LOG10_RESCALE * (cnt - cnt[0]).astype(float)


def iterate(op: PeriodicOperator, p: WvnPotential | None, lam: float, head: Sequence[float],
            N: int, start: int = 1, rescale: bool = True) -> SolutionTrace:
    """Forward recursion from (u_start, u_{start+1}) up to u_N.

    Row n gives u_{n+1} = ((lam - b_n - q_n) u_n - a_{n-1} u_{n-1}) / a_n for
    n > start.  Without ``rescale`` an overflow raises NumericalError.
    """
    if p is None:
        p = ZERO_POTENTIAL
    if N < start + 1:
        raise ValidationError(f"N={N} must exceed start={start}")
    x0, x1 = float(head[0]), float(head[1])
    if x0 == 0 and x1 == 0:
        raise ValidationError("head must not be zero")
    a, b = _op_arrays(op)
    cs, ws, ps, qh = p.kernel_args()
    u, events, bad = kernels.forward(a, b, float(lam), cs, ws, ps, qh, p.r, int(start), x0, x1,
                                     int(N), bool(rescale))
    _check_kernel_status(bad, "forward iteration")
    return SolutionTrace(float(lam), int(start), u, _scale_forward(events, start, len(u)), op, p)


def basis_pair(op, p, lam, N, start=1, rescale=True):
    """Solutions with heads (1, 0) and (0, 1), as a (2, N-start+1) array and a shared scale."""
    if p is None:
        p = ZERO_POTENTIAL
    a, b = _op_arrays(op)
    cs, ws, ps, qh = p.kernel_args()
    U, events, bad = kernels.forward_pair(a, b, float(lam), cs, ws, ps, qh, p.r, int(start),
                                          int(N), bool(rescale))
    _check_kernel_status(bad, "forward iteration")
    return U, _scale_forward(events, start, U.shape[1])


def subordinate_solution(op: PeriodicOperator, p: WvnPotential | None, lam: float, N: int,
                         start: int = 1, extend: int = 8, terminal=None) -> SolutionTrace:
    """Decaying solution on start..N by backward recursion from n = extend * N.

    Backward iteration magnifies the subordinate component, so the error at
    n relative to the true subordinate solution is roughly
    (n / (extend N))^(2 gamma).  A fixed terminal can miss the subordinate
    component when the solutions are phase locked, so by default both unit
    terminals are run and the one amplified more is kept.  The result solves
    every row n > start and is normalised so (u_start, u_{start+1}) has unit
    length.
    """
    if p is None:
        p = ZERO_POTENTIAL
    top = int(extend * N)
    if top <= N + 1:
        raise ValidationError("extend must be > 1")
    a, b = _op_arrays(op)
    cs, ws, ps, qh = p.kernel_args()
    best = None
    for term in ([terminal] if terminal is not None else [(1.0, 0.0), (0.0, 1.0)]):
        u, events, bad = kernels.backward(a, b, float(lam), cs, ws, ps, qh, p.r, int(start), top,
                                          float(term[0]), float(term[1]), int(N))
        _check_kernel_status(bad, "backward iteration")
        nrm = math.hypot(u[0], u[1])
        gain = LOG10_RESCALE * len(events) + (math.log10(nrm) if nrm > 0 else -math.inf)
        if best is None or gain > best[0]:
            best = (gain, u, events, nrm)
    _, u, events, nrm = best
    if nrm == 0:
        raise NumericalError("backward solution vanished at the head", position=start)
    scale = _scale_backward(events, start, len(u))
    sign = 1.0 if (u[0] if u[0] != 0 else u[1]) > 0 else -1.0
    return SolutionTrace(float(lam), int(start), u * (sign / nrm), scale, op, p)


# amplitudes and fits ----------------------------------------------------------

def _invariant_log_amplitude(trace: SolutionTrace, n: np.ndarray) -> np.ndarray:
    """log ||V^{-1} (u_n, u_{n+1})|| at n = kT."""
    pt = classify(trace.op, trace.lam)
    require_elliptic(pt)
    _, Vinv = diagonalizer(trace.op, pt)
    i = n - trace.start
    x0, x1 = trace.u[i], trace.u[i + 1]
    if trace.log10_scale is not None:
        # both entries of a pair share a scale except right at an event
        s0, s1 = trace.log10_scale[i], trace.log10_scale[i + 1]
        x1 = x1 * 10.0 ** (s1 - s0)
    y = Vinv @ np.vstack([x0, x1]).astype(complex)
    with np.errstate(divide="ignore"):
        out = np.log(np.linalg.norm(y, axis=0))
    if trace.log10_scale is not None:
        out = out + trace.log10_scale[i] * math.log(10.0)
    return out


def _window_log_amplitude(trace: SolutionTrace, n: np.ndarray, width: int) -> np.ndarray:
    i = n - trace.start
    cols = np.arange(width)
    la = trace.log_abs(trace.start + i[:, None] + cols[None, :])
    return la.max(axis=1)


def amplitude_method(trace: SolutionTrace) -> str:
    if trace.op is None or not np.isfinite(trace.lam):
        return "window"
    return "invariant" if classify(trace.op, trace.lam).is_elliptic else "window"


def log_amplitude(trace: SolutionTrace, n, method: str | None = None, width: int | None = None):
    """Natural log of the local amplitude at each n.

    "invariant" uses n rounded down to a multiple of T; "window" takes the
    max of |u_m| over m in [n, n + width), width defaulting to the period.
    """
    n = np.asarray(n, dtype=np.int64)
    method = method or amplitude_method(trace)
    if method == "invariant":
        T = trace.op.period
        n = (n // T) * T
        n = np.where(n < trace.start, n + T, n)
        return n, _invariant_log_amplitude(trace, n)
    if method == "window":
        w = width or (trace.op.period if trace.op is not None else 1)
        return n, _window_log_amplitude(trace, n, w)
    raise ValidationError(f"unknown amplitude method {method!r}")


def fit_decay_exponent(trace: SolutionTrace, n_lo: int, n_hi: int, method: str | None = None,
                       points: int = 400, width: int | None = None) -> FitResult:
    """Least-squares power law on the local amplitude over [n_lo, n_hi].

    Returns gamma with amplitude ~ n^(-gamma) and the slope's standard error.
    """
    if n_hi < 4 * n_lo:
        raise ValidationError(f"fit window needs n_hi >= 4 n_lo, got [{n_lo}, {n_hi}]")
    method = method or amplitude_method(trace)
    T = trace.op.period if trace.op is not None else 1
    pad = (width or T) if method == "window" else 1
    if n_lo < trace.start or n_hi + pad > trace.end:
        raise ValidationError(
            f"trace covers {trace.start}..{trace.end}, fit window [{n_lo}, {n_hi}] does not fit")
    n = np.unique(np.geomspace(n_lo, n_hi, points).astype(np.int64))
    n, la = log_amplitude(trace, n, method, width)
    if not np.all(np.isfinite(la)):
        bad = int(n[~np.isfinite(la)][0])
        raise NumericalError(f"amplitude hits zero at n={bad}", position=bad)
    res = stats.linregress(np.log(n.astype(float)), la)
    return FitResult(float(-res.slope), float(res.stderr), (int(n_lo), int(n_hi)), method, len(n))


def classify_fit(fit: FitResult, tol: float = 0.02) -> Verdict:
    if fit.gamma > tol:
        return Verdict.DECAYING
    if fit.gamma < -tol:
        return Verdict.GROWING
    return Verdict.BOUNDED


# subordination ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubordinationResult:
    head_sub: tuple
    psi: float
    trace_sub: SolutionTrace
    trace_generic: SolutionTrace
    ratios: np.ndarray  # rows (N, min-norm ratio)
    slope: float
    verdict: Verdict
    fit: FitResult | None = None
    psi_eigh_gap: float = 0.0

    def to_dict(self) -> dict:
        d = {
            "head_sub": list(self.head_sub), "psi": self.psi,
            "ratios": self.ratios.tolist(), "ratio_slope": self.slope,
            "verdict": self.verdict.value,
        }
        if self.fit is not None:
            d["fit"] = self.fit.to_dict()
        return d


def _gram_series(X, Y, sx, sy, Ns, start):
    """Gram matrices of two traces summed over n <= N, for N in Ns.

    Returned with a common log10 factor dropped, which the ratios ignore.
    """
    out = []
    if sx is None:
        sx = np.zeros(X.shape)
    if sy is None:
        sy = np.zeros(Y.shape)
    for N in Ns:
        i = N - start
        top = max(sx[i], sy[i], sx[: i + 1].max(), sy[: i + 1].max())
        A = X[: i + 1] * 10.0 ** (sx[: i + 1] - top)
        B = Y[: i + 1] * 10.0 ** (sy[: i + 1] - top)
        out.append(np.array([[A @ A, A @ B], [A @ B, B @ B]]))
    return out


def _ratio(G):
    """sqrt(lambda_min / lambda_max) without cancellation in lambda_min."""
    tr = G[0, 0] + G[1, 1]
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    disc = math.sqrt(max(tr * tr - 4 * det, 0.0))
    lmax = 0.5 * (tr + disc)
    lmin = max(det, 0.0) / lmax
    return math.sqrt(lmin / lmax)


def subordination_search(op: PeriodicOperator, p: WvnPotential | None, lam: float, N: int,
                         grid: int = 720, threshold: float = 0.05, flat_slope: float = 0.02,
                         decay_slope: float = 0.1, fit_window=None, extend: int = 8,
                         n_min: int = 1024) -> SubordinationResult:
    """Look for a subordinate solution by minimising ||u||_N over unit heads.

    Norms are evaluated in an orthonormal head basis made of the head of a
    backward-recursed candidate and its orthogonal complement, so a strongly
    decaying direction is resolved far below the forward round-off level.
    The minimising head is found on a ``grid``-point psi grid refined by
    golden-section search and cross-checked against the Gram eigenvector.
    With r(N) = sqrt(lambda_min / lambda_max) of the Gram matrix at dyadic N:

    * Decaying (subordinate found): r(N) < threshold, r non-increasing and
      its log-log slope below -decay_slope;
    * NoSubordinate: r > 0.5 throughout, or r stationary (slope above
      -flat_slope) as for bounded oscillating solutions;
    * Undetermined otherwise.

    For a subordinate solution the exponent is fitted over ``fit_window``
    (default [N/100, N]).
    """
    if N < 10 ** 4:
        raise ValidationError(f"N={N} must be at least 1e4")
    if p is None:
        p = ZERO_POTENTIAL
    start = 1
    cand = subordinate_solution(op, p, lam, N, start, extend)
    hb = (float(cand.u[0]), float(cand.u[1]))  # unit length
    hg = (-hb[1], hb[0])
    gen = iterate(op, p, lam, hg, N, start)
    Ns = [2 ** m for m in range(10, 64) if n_min <= 2 ** m <= N]
    if not Ns or Ns[-1] != N:
        Ns.append(N)
    grams = _gram_series(cand.u, gen.u, cand.log10_scale, gen.log10_scale, Ns, start)
    ratios = np.array([_ratio(G) for G in grams])

    G = grams[-1] / np.trace(grams[-1])
    P = np.array([hb, hg]).T  # head = P @ coords

    def form(t):
        c = P.T @ np.array([math.cos(t), math.sin(t)])
        return float(c @ G @ c)

    psis = np.arange(grid) * (math.pi / grid)
    H = P @ G @ P.T
    vals = np.cos(psis) ** 2 * H[0, 0] + np.sin(2 * psis) * H[0, 1] + np.sin(psis) ** 2 * H[1, 1]
    i = int(np.argmin(vals))
    h = math.pi / grid
    res = minimize_scalar(form, bracket=(psis[i] - h, psis[i], psis[i] + h), method="golden",
                          tol=1e-12)
    psi = float(res.x) % math.pi
    _, v = np.linalg.eigh(H)
    psi_e = math.atan2(v[1, 0], v[0, 0]) % math.pi
    gap = abs(psi - psi_e)
    gap = min(gap, math.pi - gap)

    # log-log slope of the ratio over the last two decades of N
    with np.errstate(divide="ignore"):
        lr = np.log(ratios)
    sel = (np.array(Ns) >= Ns[-1] / 128) & np.isfinite(lr)
    if sel.sum() >= 2:
        slope = float(np.polyfit(np.log(np.array(Ns, dtype=float)[sel]), lr[sel], 1)[0])
    else:
        slope = 0.0
    big = np.array(Ns) >= 2 ** 12
    rr = ratios[big] if big.sum() >= 2 else ratios
    monotone = bool(np.all(rr[1:] <= rr[:-1] * 1.01))
    if ratios[-1] < threshold and monotone and slope < -decay_slope:
        verdict = Verdict.DECAYING
    elif np.all(ratios > 0.5) or slope > -flat_slope:
        verdict = Verdict.NO_SUBORDINATE
    else:
        verdict = Verdict.UNDETERMINED

    head = (math.cos(psi), math.sin(psi))
    gen_head = (-math.sin(psi), math.cos(psi))
    trace_gen = iterate(op, p, lam, gen_head, N, start)
    fit = None
    if verdict is Verdict.DECAYING:
        trace_sub = cand
        if cand.u[0] * head[0] + cand.u[1] * head[1] < 0:
            trace_sub = replace(cand, u=-cand.u)
        lo, hi = fit_window or (max(start, N // 100), N - 2 * op.period)
        fit = fit_decay_exponent(trace_sub, lo, hi)
        trace_sub = trace_sub.with_fit(fit, Verdict.DECAYING)
    else:
        trace_sub = iterate(op, p, lam, head, N, start)
    return SubordinationResult(head, psi, trace_sub, trace_gen, np.column_stack([Ns, ratios]),
                               slope, verdict, fit, gap)


@dataclass(frozen=True)
class BoundednessResult:
    verdict: Verdict
    sup_ratio: float
    end_ratio: float
    n0: int

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "sup_ratio": self.sup_ratio,
                "end_ratio": self.end_ratio, "n0": self.n0}


def boundedness_check(trace: SolutionTrace, n0: int = 1000, band: float = 3.0,
                      method: str | None = None) -> BoundednessResult:
    """Compare the local amplitude on [n0, N] with its value at n0.

    Bounded iff the sup ratio is at most ``band`` and the final ratio at
    least 1/band; a final ratio below 1/band means Decaying, a sup ratio
    above ``band`` means Growing.
    """
    if len(trace) < 10 ** 5:
        raise ValidationError(f"boundedness check needs >= 1e5 samples, got {len(trace)}")
    method = method or amplitude_method(trace)
    T = trace.op.period if trace.op is not None else 1
    pad = T + 1
    n = np.arange(max(n0, trace.start), trace.end - pad, T)
    n, la = log_amplitude(trace, n, method)
    ref = la[0]
    sup = float(np.exp(min(np.max(la) - ref, 700.0)))
    end = float(np.exp(max(min(la[-1] - ref, 700.0), -700.0)))
    if end < 1.0 / band:
        verdict = Verdict.DECAYING
    elif sup > band:
        verdict = Verdict.GROWING
    else:
        verdict = Verdict.BOUNDED
    return BoundednessResult(verdict, sup, end, int(n[0]))


# residuals --------------------------------------------------------------------

def truncated_matrix(op: PeriodicOperator, p: WvnPotential | None, N: int):
    """Sparse N x N truncation of J + Q (+ the 1-2 link shift r)."""
    if p is None:
        p = ZERO_POTENTIAL
    n = np.arange(1, N + 1)
    T = op.period
    diag = op.b[(n - 1) % T] + p.values(n)
    off = op.a[(n[:-1] - 1) % T].copy()
    off[0] += p.r
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def eigen_residual(op: PeriodicOperator, p: WvnPotential | None, lam: float, u, N: int | None = None):
    """||(J + Q) u - lam u|| / ||u|| over rows 1..N-1 of the N x N truncation.

    ``u`` is a head (u_1, u_2), extended by forward recursion to N, a
    :class:`SolutionTrace` starting at 1, or a full vector u_1..u_M.
    """
    if isinstance(u, SolutionTrace):
        if u.start != 1:
            raise ValidationError("trace must start at n=1")
        vec = u.values()
    else:
        vec = np.asarray(u, dtype=float)
        if vec.size == 2:
            if N is None:
                raise ValidationError("N required when passing a head")
            vec = iterate(op, p, lam, vec, N).values()
    if N is None:
        N = vec.size
    vec = vec[:N]
    if vec.size < N:
        raise ValidationError(f"vector has {vec.size} entries, N={N}")
    H = truncated_matrix(op, p, N)
    res = H @ vec - lam * vec
    return float(np.linalg.norm(res[:-1]) / np.linalg.norm(vec))


# diagnostics --------------------------------------------------------------------

def _falling(x, count):
    """prod_{r=0}^{count-1} (x - r)."""
    out = 1.0
    for r in range(count):
        out *= x - r
    return out


def lerch_tail(z: complex, beta: float, k0: int, tol: float = 1e-15, chunk: int = 1 << 20):
    """sum_{m >= k0} z^m / (m + beta) for |z| = 1, z != 1, with a certified bound.

    Sums directly up to L and then applies p rounds of summation by parts,
    using the exact backward differences of 1/(m + beta).  The remainder is
    bounded by (p-1)! / (prod_{s=L}^{L+p-1} (s + beta) |1 - z|^p).

    Returns
    -------
    value : complex
    bound : float
        Bound on the neglected remainder.
    """
    d = abs(1 - z)
    if d < 1e-12:
        raise DomainError("z too close to 1")
    best = None
    for p in range(2, 17):
        L = ((math.factorial(p - 1) / tol) ** (1.0 / p)) / d
        L = max(k0, int(math.ceil(L - beta)) + p)
        if best is None or L < best[1]:
            best = (p, L)
    p, L = best
    val = 0j
    m0 = k0
    logz = cmath.phase(z)
    while m0 < L:
        m1 = min(L, m0 + chunk)
        m = np.arange(m0, m1, dtype=float)
        val += complex(np.sum(np.exp(1j * logz * m) / (m + beta)))
        m0 = m1
    w = 1.0 / (1 - z)
    for i in range(p):
        x = L + i + beta
        g = (-1) ** i * math.factorial(i) / _falling(x, i + 1)
        val += cmath.exp(1j * logz * (L + i)) * g * w ** (i + 1)
    bound = math.factorial(p - 1) / (_falling(L + p - 1 + beta, p) * d ** p)
    return val, bound


@dataclass(frozen=True, eq=False)
class Diagnostics:
    k: np.ndarray
    f: np.ndarray        # (K, 2) real
    g: np.ndarray        # (K, 2) complex
    G: np.ndarray        # (K, 2) complex diagonal entries of G_k
    kG_max: float
    bound: float
    bound_loose: float
    remainder_bound: float
    g_sup: float
    f_drift: float

    def to_dict(self) -> dict:
        return {"K": int(self.k[-1]), "kG_max": self.kG_max, "bound": self.bound,
                "bound_loose": self.bound_loose, "remainder_bound": self.remainder_bound,
                "g_sup": self.g_sup, "f_drift": self.f_drift}


def diagnostic_transforms(op: PeriodicOperator, p: WvnPotential | None, lam: float,
                          trace: SolutionTrace, K: int) -> Diagnostics:
    """Free-motion coordinates f_k, g_k and the Harris-Lutz tails G_k.

    f_k = M^{-k} (u_{kT}, u_{kT+1}), g_k = V^{-1} f_k, and G_k is minus the
    tail sum from k on of the diagonal first-order terms

        T_1(k) = (-i / sin theta) sum_j q_{(k+1)T-j} / a_{T-j} diag(-conj(C_j), C_j).

    The single tail at K is evaluated by :func:`lerch_tail`; the others follow
    from G_k = G_{k+1} - T_1(k).
    """
    if p is None:
        p = ZERO_POTENTIAL
    pt = classify(op, lam)
    require_elliptic(pt)
    T = op.period
    if trace.start > T or trace.end < K * T + 1:
        raise ValidationError(f"trace must cover n={T}..{K * T + 1}")
    V, Vinv = diagonalizer(op, pt)
    k = np.arange(1, K + 1)
    n = k * T
    i = n - trace.start
    x = np.vstack([trace.u[i], trace.u[i + 1]]).astype(complex)
    if trace.log10_scale is not None:
        raise ValidationError("diagnostics need an unrescaled trace")
    y = Vinv @ x
    ph = np.exp(-1j * pt.theta * k)
    g = np.vstack([y[0] * ph, y[1] * np.conj(ph)]).T
    f = (V @ g.T).real.T
    f_drift = float(np.max(np.abs(f - f[0])))

    data = resonance_data(op, pt, edge_guard=0.0)
    s = math.sin(pt.theta)
    a_rev = np.array([op.a_at(T - j) for j in range(T)])
    coef = np.vstack([-np.conj(data.C), data.C]).T / a_rev[:, None]  # (T, 2)
    kappa = -1j / s
    # tail sums S_j(K) = sum_{m >= K} q_{(m+1)T-j}
    S_K = np.zeros(T, dtype=complex)
    rem = 0.0
    for j in range(T):
        beta = (T - j) / T
        tot = 0.0
        for c, w, phi in p.terms:
            z = cmath.exp(1j * T * w)
            val, bd = lerch_tail(z, beta, K)
            tot += c * (cmath.exp(1j * (phi + (T - j) * w)) * val / T).imag
            rem += c * bd / T
        # overrides beyond K*T would differ from the sinusoid
        for nn, qv in p.overrides.items():
            if nn >= (K + 1) * T - j and (nn + j) % T == 0:
                tot += qv - p.tail_value(nn)
        S_K[j] = tot
    G = np.zeros((K, 2), dtype=complex)
    G[K - 1] = -kappa * (S_K @ coef)
    mm = np.arange(1, K + 1)
    j = np.arange(T)
    qblock = p.values(((mm[:, None] + 1) * T - j[None, :]).ravel()).reshape(K, T)
    T1 = kappa * (qblock @ coef)  # (K, 2)
    for kk in range(K - 1, 0, -1):
        G[kk - 1] = G[kk] - T1[kk - 1]
    kG = float(np.max(k[:, None] * np.abs(G)))
    bound = 0.0
    loose = 0.0
    for c, w, _ in p.terms:
        sh = abs(math.sin(T * w / 2))
        cj = np.abs(data.C) / a_rev
        bound += c * float(np.sum(cj)) / (s * T * sh)
        loose += 2 * c * float(np.sum(cj)) / (s * sh)
    g_sup = float(np.max(np.abs(g)))
    return Diagnostics(k, f, g, G, kG, bound, loose, rem, g_sup, f_drift)


@dataclass(frozen=True)
class ZygmundRow:
    n: int
    tail: float
    bound: float
    tail_alt: float

    @property
    def ok(self) -> bool:
        return self.tail <= self.bound


def zygmund_tail(alpha: float, n: int, direct_limit: int = 10 ** 7) -> complex:
    """sum_{k >= n} e^{i k alpha} / k from the closed form of the full series.

    Uses sum_{k >= 1} z^k / k = -log(1 - z) minus the first n-1 terms.
    """
    z = cmath.exp(1j * alpha)
    full = -cmath.log(1 - z)
    if n - 1 > direct_limit:
        return lerch_tail(z, 0.0, n)[0]
    k = np.arange(1, n, dtype=float)
    return full - complex(np.sum(np.exp(1j * alpha * k) / k)) if n > 1 else full


def zygmund_tail_bound_check(alpha: float, n_list) -> list:
    """|sum_{k>=n} e^{ik alpha}/k| against 1 / (n |sin(alpha/2)|) for each n.

    The tail is computed from the closed form and, independently, by
    direct summation plus certified summation by parts.
    """
    red = math.remainder(alpha, 2 * math.pi)
    if abs(red) <= 1e-6:
        raise DomainError(f"alpha={alpha!r} is within 1e-6 of 2 pi Z")
    z = cmath.exp(1j * alpha)
    out = []
    for n in n_list:
        n = int(n)
        if n < 1:
            raise ValidationError("n must be >= 1")
        t1 = abs(zygmund_tail(alpha, n))
        t2 = abs(lerch_tail(z, 0.0, n)[0])
        out.append(ZygmundRow(n, t1, 1.0 / (n * abs(math.sin(alpha / 2))), t2))
    return out
