"""Cross-module invariant suites, run by ``jacobi-wvn verify`` and the tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import pipelines
from .bands import default_search_interval, find_bands, invert_theta
from .core import PeriodicOperator, classify, det_relative_error, monodromy_batch, random_operator
from .resonance import (closed_form_E_oracle, partition_resonance_classes, plan_resonance,
                        resonance_data, resonance_value, ResonanceCase, matched_k_minus,
                        quantised_omega)
from .simulate import zygmund_tail_bound_check


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    total: int = 0
    worst: float = 0.0
    seconds: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total and self.total > 0

    def record(self, ok: bool, value: float = 0.0, info=None):
        self.total += 1
        self.passed += bool(ok)
        if math.isfinite(value):
            self.worst = max(self.worst, float(value))
        if not ok and len(self.failures) < 10:
            self.failures.append(info)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "total": self.total, "ok": self.ok,
                "worst": self.worst, "failures": self.failures}


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def det_suite(rng, n_ops: int = 200, n_lam: int = 1000, tol: float = 1e-12,
              operators=None) -> SuiteResult:
    """det M(lam) = 1 for random operators (T <= 8) and lam across the search interval."""
    res = SuiteResult("det_monodromy")
    ops = list(operators or []) + [random_operator(rng) for _ in range(n_ops)]
    for op in ops:
        lo, hi = default_search_interval(op)
        err = float(det_relative_error(monodromy_batch(op, rng.uniform(lo, hi, n_lam))).max())
        res.record(err <= tol, err, {"a": op.a.tolist(), "b": op.b.tolist(), "err": err})
    return res


def band_interior(op, n_per_band: int, rng, margin: float = 0.02):
    """Random lam strictly inside each band, theta kept ``margin`` pi from the ends."""
    out = []
    for band in find_bands(op):
        for th in rng.uniform(margin * math.pi, (1 - margin) * math.pi, n_per_band):
            out.append(invert_theta(op, band, th))
    return out


@_timed
def oracle_suite(rng, n_lam: int = 200, tol: float = 1e-10) -> SuiteResult:
    """Pipeline resonance values against the closed forms for T=1 and T=2."""
    res = SuiteResult("oracle_equivalence")
    cases = [(PeriodicOperator([1.0]), [("T1", 1)]),
             (PeriodicOperator([1.0, 2.0]), [("T2_A", 2), ("T2_B", 1)])]
    for op, which in cases:
        lams = band_interior(op, max(1, n_lam // len(find_bands(op))), rng)
        for lam in lams:
            pt = classify(op, lam)
            if abs(pt.theta - math.pi / 2) < 1e-6:
                continue
            phi = float(rng.uniform(0, 2 * math.pi))
            for name, k in which:
                got = plan_resonance(op, pt, k=k, phi=phi).E_value
                want = closed_form_E_oracle(op, pt, name, phi)
                err = abs(got - want) / abs(want)
                res.record(err <= tol, err, {"lambda": lam, "oracle": name, "err": err})
    return res


@_timed
def matched_pair_suite(rng, n: int = 100, tol: float = 1e-10) -> SuiteResult:
    """Conjugate-branch value equals e^{-2 i phi} times the first-branch value."""
    res = SuiteResult("matched_pair")
    for op in (PeriodicOperator([1.0]), PeriodicOperator([1.0, 2.0])):
        T = op.period
        count = 0
        while count < n:
            lam = band_interior(op, 1, rng)[int(rng.integers(0, len(find_bands(op))))]
            pt = classify(op, lam)
            if abs(pt.theta - math.pi / 2) < 1e-6:
                continue
            data = resonance_data(op, pt)
            phi = float(rng.uniform(0, 2 * math.pi))
            kp = int(rng.integers(1, T + 1))
            km = matched_k_minus(kp, T)
            E = resonance_value(data, T, ResonanceCase.CASE1,
                                quantised_omega(ResonanceCase.CASE1, pt.theta, kp, T), phi)
            Et = resonance_value(data, T, ResonanceCase.CASE2,
                                 quantised_omega(ResonanceCase.CASE2, pt.theta, km, T), phi)
            err = abs(Et - np.exp(-2j * phi) * E) / max(abs(E), 1e-300)
            res.record(err <= tol, err, {"lambda": lam, "T": T, "phi": phi, "err": err})
            count += 1
    return res


@_timed
def zygmund_suite(rng, n: int = 100) -> SuiteResult:
    """|sum_{k>=n} e^{ik alpha}/k| <= 1/(n |sin(alpha/2)|) at random (alpha, n)."""
    res = SuiteResult("zygmund")
    for _ in range(n):
        alpha = float(rng.uniform(1e-3, 2 * math.pi - 1e-3))
        m = int(10 ** rng.uniform(0, 6))
        row = zygmund_tail_bound_check(alpha, [m])[0]
        res.record(row.ok, row.tail / row.bound, {"alpha": alpha, "n": m})
    return res


@_timed
def partition_suite(rng, n_sets: int = 50, set_size=(3, 12), tol: float = 1e-9) -> SuiteResult:
    """Resonance classes: related pairs share a class, class sizes <= 2T."""
    res = SuiteResult("partition")
    for _ in range(n_sets):
        op = random_operator(rng, max_period=4)
        bands = find_bands(op)
        size = int(rng.integers(*set_size))
        lams, thetas = [], []
        for _ in range(size):
            band = bands[int(rng.integers(0, len(bands)))]
            if lams and rng.random() < 0.4:
                # force a relation: reuse theta or pi - theta of an earlier target
                th = thetas[int(rng.integers(0, len(thetas)))]
                th = th if rng.random() < 0.5 else math.pi - th
            else:
                th = float(rng.uniform(0.05, 0.95) * math.pi)
            lam = invert_theta(op, band, th)
            if any(abs(lam - x) < 1e-9 for x in lams):
                continue
            lams.append(lam)
            thetas.append(classify(op, lam).theta)
        part = partition_resonance_classes(op, lams, tol=tol)
        ok = all(len(cl) <= 2 * op.period for cl in part.classes)
        cls = {i: ci for ci, cl in enumerate(part.classes) for i in cl}
        for i in range(len(lams)):
            for j in range(i + 1, len(lams)):
                rel = (abs(thetas[i] - thetas[j]) < tol
                       or abs(thetas[i] + thetas[j] - math.pi) < tol)
                if rel and cls[i] != cls[j]:
                    ok = False
        cover = sorted(i for cl in part.classes for i in cl) == list(range(len(lams)))
        res.record(ok and cover, 0.0, {"lambdas": lams})
    return res


@_timed
def exponent_suite(N: int = 10 ** 6, tol: float = 0.05, operators=None, threads=None,
                   fit_window=None) -> SuiteResult:
    """Fitted decay exponents of resonant runs against c |E| / sin theta."""
    res = SuiteResult("exponent_regression")
    ops = operators or [PeriodicOperator([1.0]), PeriodicOperator([1.0, 2.0]),
                        PeriodicOperator([1.0, 1.5, 0.8], [0.2, -0.3, 0.1])]
    jobs = [(op, lam) for op in ops for lam in pipelines.interior_lambdas(op)]
    window = fit_window or (max(10 ** 3, N // 100), N - 8)

    def one(job):
        op, lam = job
        return pipelines.exponent_run(op, lam, N=N, fit_window=window)

    for (op, lam), run in zip(jobs, pipelines.parallel_map(one, jobs, threads)):
        res.record(run.rel_error <= tol, run.rel_error,
                   {"T": op.period, "lambda": lam, "gamma": run.fit.gamma,
                    "predicted": run.predicted})
    return res


def run_all(seed: int = 0, quick: bool = False, operators=None, threads=None) -> list:
    rng = np.random.default_rng(seed)
    N = 10 ** 5 if quick else 10 ** 6
    tol = 0.08 if quick else 0.05
    return [
        det_suite(rng, operators=operators),
        oracle_suite(rng),
        matched_pair_suite(rng),
        zygmund_suite(rng),
        partition_suite(rng),
        exponent_suite(N=N, tol=tol, threads=threads),
    ]
