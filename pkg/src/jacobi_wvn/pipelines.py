"""End-to-end runs shared by the command line and the acceptance tests."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import simulate as sim
from .bands import find_bands, invert_theta
from .core import PeriodicOperator, classify
from .errors import ValidationError
from .potential import (WvnPotential, boundary_residuals, embed_pair, embed_single)
from .resonance import coefficient_scheme, plan_resonance, residue_2pi


def thread_count(default: int | None = None) -> int:
    """Worker cap from JACOBI_WVN_THREADS, else ``default`` or the CPU count."""
    env = os.environ.get("JACOBI_WVN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"JACOBI_WVN_THREADS={env!r} is not an integer") from None
        return max(1, n)
    return default or os.cpu_count() or 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map over independent runs.

    The compiled kernels release the GIL, so threads overlap the iterations.
    """
    items = list(items)
    n = min(thread_count(threads), len(items)) if items else 1
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def interior_lambdas(op: PeriodicOperator, thetas=(math.pi / 4, 0.4 * math.pi, 0.75 * math.pi)):
    """One lambda per (band, theta) pair, in band order."""
    out = []
    for band in find_bands(op):
        for th in thetas:
            out.append(invert_theta(op, band, th))
    return out


@dataclass(frozen=True, eq=False)
class ExponentRun:
    plan: object
    c: float
    potential: WvnPotential
    trace: sim.SolutionTrace
    fit: sim.FitResult
    predicted: float

    @property
    def rel_error(self) -> float:
        return abs(self.fit.gamma - self.predicted) / self.predicted

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(), "c": self.c, "predicted_gamma": self.predicted,
                "fit": self.fit.to_dict(self.trace.verdict), "rel_error": self.rel_error}


def exponent_run(op, lam, c_factor: float = 2.0, case: str = "case1", phi: float = 0.0,
                 k=None, N: int = 10 ** 6, fit_window=None, c: float | None = None,
                 method: str | None = None) -> ExponentRun:
    """Resonant potential at lam, its subordinate solution and fitted exponent.

    ``c`` defaults to ``c_factor`` times the l^2 threshold.
    """
    plan = plan_resonance(op, lam, case=case, k=k, phi=phi)
    if c is None:
        c = c_factor * plan.c_threshold
    p = WvnPotential.from_plans([plan], c)
    tr = sim.subordinate_solution(op, p, plan.lam, N)
    lo, hi = fit_window or (N // 100, N - 2 * op.period)
    fit = sim.fit_decay_exponent(tr, lo, hi, method=method)
    tr = tr.with_fit(fit, sim.classify_fit(fit))
    return ExponentRun(plan, float(c), p, tr, fit, plan.exponent(c))


@dataclass(frozen=True, eq=False)
class SingleEmbedding:
    run: ExponentRun
    result: object
    residual: float
    boundary: np.ndarray

    def to_dict(self) -> dict:
        return {"embedding": self.result.to_dict(), "eigen_residual": self.residual,
                "boundary_residuals": self.boundary.tolist(),
                "tail_fit": self.run.fit.to_dict(), "predicted_gamma": self.run.predicted}


def single_embedding(op, lam, c_factor: float = 2.0, N: int = 10 ** 5, residual_N: int = 10 ** 4,
                     **kw) -> SingleEmbedding:
    """Embed lam as an eigenvalue by fixing q_1, q_2 against the subordinate tail."""
    run = exponent_run(op, lam, c_factor=c_factor, N=N, **kw)
    res = embed_single(op, run.plan, run.c, run.trace)
    vec = res.vector(0, run.trace)
    r = sim.eigen_residual(op, res.potential, run.plan.lam, vec, residual_N)
    return SingleEmbedding(run, res, r, boundary_residuals(op, res))


@dataclass(frozen=True, eq=False)
class PairEmbedding:
    plans: tuple
    result: object
    traces: tuple
    residuals: tuple
    boundary: np.ndarray

    def to_dict(self) -> dict:
        return {"plans": [p.to_dict() for p in self.plans], "embedding": self.result.to_dict(),
                "eigen_residuals": list(self.residuals),
                "boundary_residuals": self.boundary.tolist()}


def pair_embedding(op, lams, c_factor: float = 2.0, N: int = 10 ** 5, residual_N: int = 10 ** 4,
                   **kw) -> PairEmbedding:
    """One potential carrying eigenvalues at both targets."""
    if len(lams) != 2:
        raise ValidationError("pair mode needs exactly two lambda targets")
    if lams[0] == lams[1]:
        raise ValidationError("pair mode needs two distinct lambda targets")
    plans = [plan_resonance(op, l) for l in lams]
    cs = [c_factor * p.c_threshold for p in plans]
    base = WvnPotential.from_plans(plans, cs)
    traces = [sim.subordinate_solution(op, base, p.lam, N) for p in plans]
    res = embed_pair(op, plans, base, traces, **kw)
    # a shifted q4 only moves u_3 (row 4); rows >= 5 of the tails are untouched
    p = res.potential
    out = []
    for i, pl in enumerate(plans):
        vec = res.vector(i, traces[i])
        out.append(sim.eigen_residual(op, p, pl.lam, vec, residual_N))
    return PairEmbedding(tuple(plans), res, tuple(traces), tuple(out), boundary_residuals(op, res))


@dataclass(frozen=True, eq=False)
class MultiRun:
    plans: tuple
    scheme: object
    potential: WvnPotential
    fits: tuple

    def to_dict(self) -> dict:
        return {"plans": [p.to_dict() for p in self.plans], "scheme": self.scheme.to_dict(),
                "fits": [f.to_dict() for f in self.fits]}


def multi_singularity(op, lams, target_exponent: float = 1.0, N: int = 10 ** 6,
                      fit_window=None, threads=None) -> MultiRun:
    """Coefficient scheme for several targets and the fitted exponent at each."""
    plans = [plan_resonance(op, l) for l in lams]
    sch = coefficient_scheme(op, plans, target_exponent=target_exponent)
    p = WvnPotential.from_plans(plans, sch.c)
    lo, hi = fit_window or (N // 100, N - 2 * op.period)

    def one(pl):
        tr = sim.subordinate_solution(op, p, pl.lam, N)
        return sim.fit_decay_exponent(tr, lo, hi)

    fits = parallel_map(one, plans, threads)
    return MultiRun(tuple(plans), sch, p, tuple(fits))


def random_nonresonant_omegas(op, lam, count: int, rng, min_detuning: float = 0.2):
    """Frequencies whose quantisation residue T omega +- 2 theta stays >= min_detuning.

    Also keeps T omega away from 2 pi Z so the potential itself is not
    degenerate.
    """
    pt = classify(op, lam)
    T = op.period
    out = []
    while len(out) < count:
        w = float(rng.uniform(0.05, 2 * math.pi - 0.05))
        if (residue_2pi(T * w + 2 * pt.theta) >= min_detuning
                and residue_2pi(T * w - 2 * pt.theta) >= min_detuning
                and residue_2pi(T * w) >= min_detuning):
            out.append(w)
    return out


@dataclass(frozen=True, eq=False)
class NonresonantRun:
    omega: float
    boundedness: tuple
    subordination: sim.SubordinationResult

    def to_dict(self) -> dict:
        return {"omega": self.omega, "boundedness": [b.to_dict() for b in self.boundedness],
                "subordination": self.subordination.to_dict()}


def nonresonant_run(op, lam, omega, c: float = 1.0, phi: float = 0.0, N: int = 2 ** 17):
    p = WvnPotential.single(c, omega, phi)
    sr = sim.subordination_search(op, p, lam, N)
    bd = (sim.boundedness_check(sr.trace_sub), sim.boundedness_check(sr.trace_generic))
    return NonresonantRun(float(omega), bd, sr)
