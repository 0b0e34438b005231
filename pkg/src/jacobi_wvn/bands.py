"""Band edges and quasi-momentum of a periodic Jacobi operator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import (PeriodicOperator, classify, monodromy_trace, require_elliptic,
                   trace_polynomial)
from .errors import DomainError, NumericalError

# closed gaps: a local extremum of Tr within this distance of +-2 is a touching point
TOUCH_TOL = 1e-10


@dataclass(frozen=True)
class Band:
    index: int
    lo: float
    hi: float
    theta_direction: str  # "inc" or "dec"

    def contains(self, lam: float) -> bool:
        return self.lo <= lam <= self.hi

    def to_dict(self) -> dict:
        return {"index": self.index, "lo": self.lo, "hi": self.hi,
                "theta_direction": self.theta_direction}


def default_search_interval(op: PeriodicOperator):
    amax = float(op.a.max())
    return float(op.b.min()) - 1.0 - 2.0 * amax, float(op.b.max()) + 1.0 + 2.0 * amax


def _clamped_theta(op, lam):
    tr = float(monodromy_trace(op, [lam])[0])
    return math.acos(min(1.0, max(-1.0, tr / 2.0)))


def _roots_and_touches(op, x, tr, level):
    """Roots of Tr - level on the grid, as (simple_roots, touching_points)."""
    f = lambda t: float(monodromy_trace(op, [t])[0]) - level
    g = tr - level
    roots, touches = [], []
    s = np.sign(g)
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        roots.append(brentq(f, x[i], x[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
    for i in np.nonzero(g == 0)[0]:
        if 0 < i < len(x) - 1 and s[i - 1] * s[i + 1] >= 0:
            touches.append(float(x[i]))
        else:
            roots.append(float(x[i]))
    # extrema of Tr pointing towards the level with no sign change around them
    sgn = 1.0 if level > 0 else -1.0
    h = sgn * g  # negative away from the level
    dpoly = trace_polynomial(op).deriv()
    is_peak = (h[1:-1] >= h[:-2]) & (h[1:-1] >= h[2:])
    below = np.maximum(np.maximum(h[:-2], h[1:-1]), h[2:]) < 0
    for i in np.nonzero(is_peak & below)[0] + 1:
        res = minimize_scalar(lambda t: -sgn * f(t), bounds=(x[i - 1], x[i + 1]),
                              method="bounded", options={"xatol": 1e-14})
        peak = -res.fun
        if abs(peak) <= TOUCH_TOL:
            xt = float(res.x)
            d0, d1 = dpoly(x[i - 1]), dpoly(x[i + 1])
            if d0 * d1 < 0:
                xt = brentq(dpoly, x[i - 1], x[i + 1], xtol=1e-16, rtol=1e-15)
            if not touches or xt - touches[-1] > 2.0 * (x[1] - x[0]):
                touches.append(xt)
        elif peak > 0 and not any(x[i - 1] <= r <= x[i + 1] for r in roots):
            # narrow gap that fell between grid points
            roots.append(brentq(f, x[i - 1], res.x, xtol=1e-15, rtol=1e-15))
            roots.append(brentq(f, res.x, x[i + 1], xtol=1e-15, rtol=1e-15))
    return roots, touches


def find_bands(op: PeriodicOperator, search_lo: float | None = None,
               search_hi: float | None = None, grid: int = 4096, retries: int = 3):
    """Bands of a.c. spectrum, i.e. the closed intervals where |Tr M| <= 2.

    Edges are bracketed by sign changes of Tr M -+ 2 on a uniform grid and
    refined by Brent's method.  Interior touching points (closed gaps) split
    a band into two records sharing an endpoint.

    Returns
    -------
    list of Band
    """
    lo0, hi0 = default_search_interval(op)
    lo = lo0 if search_lo is None else search_lo
    hi = hi0 if search_hi is None else search_hi
    T = op.period
    n = grid
    for _attempt in range(retries + 1):
        x = np.linspace(lo, hi, n)
        tr = monodromy_trace(op, x)
        edges, count = [], 0
        for level in (2.0, -2.0):
            roots, touches = _roots_and_touches(op, x, tr, level)
            edges.extend(roots)
            edges.extend(touches)
            count += len(roots) + 2 * len(touches)
        # Tr M -+ 2 are degree-T polynomials with real roots only
        if count == 2 * T:
            break
        n *= 4
    else:
        raise NumericalError(f"bands unresolved at grid {n // 4}")

    edges = sorted(edges)
    bands = []
    for e0, e1 in zip(edges[:-1], edges[1:]):
        if e1 - e0 <= 1e-14 * max(1.0, abs(e0)):
            continue
        mid = 0.5 * (e0 + e1)
        if abs(monodromy_trace(op, [mid])[0]) >= 2.0:
            continue
        q1, q3 = e0 + 0.25 * (e1 - e0), e0 + 0.75 * (e1 - e0)
        direction = "inc" if _clamped_theta(op, q3) > _clamped_theta(op, q1) else "dec"
        bands.append(Band(len(bands), float(e0), float(e1), direction))
    return bands


def quasi_momentum(op: PeriodicOperator, lam: float) -> float:
    """theta(lam) = arccos(Tr M / 2) in (0, pi); requires an elliptic lam."""
    pt = classify(op, lam)
    require_elliptic(pt)
    return pt.theta


def invert_theta(op: PeriodicOperator, band: Band, theta_target: float) -> float:
    """The unique lam in ``band`` with theta(lam) = theta_target."""
    if not 0.0 < theta_target < math.pi:
        raise DomainError(f"theta_target={theta_target!r} outside (0, pi)")
    f = lambda t: _clamped_theta(op, t) - theta_target
    flo, fhi = f(band.lo), f(band.hi)
    if flo * fhi > 0:
        raise DomainError(f"theta_target={theta_target!r} not attained in band {band.index}")
    lam = brentq(f, band.lo, band.hi, xtol=1e-16, rtol=1e-15, maxiter=500)
    return float(lam)


def theta_table(op: PeriodicOperator, band: Band, n: int = 201, margin: float = 0.0):
    """(lam, theta) samples across a band for plotting."""
    w = band.hi - band.lo
    lams = np.linspace(band.lo + margin * w, band.hi - margin * w, n)
    tr = monodromy_trace(op, lams)
    return lams, np.arccos(np.clip(tr / 2.0, -1.0, 1.0))
