# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled three-term recurrence kernels.

All kernels share one calling convention with the pure-Python versions in
``_pykernels``.  The potential is passed as term arrays (cs, ws, ps) plus an
explicit head ``qhead`` holding q_1..q_m; ``r`` shifts the 1-2 link.
Rescaling divides the running pair by RESCALE whenever it exceeds that
magnitude and records the index where this happened.
"""

import numpy as np

from libc.math cimport sin, fabs, isfinite

cdef double RESCALE = 1e150


cdef inline double q_at(long n, const double[::1] cs, const double[::1] ws,
                        const double[::1] ps, const double[::1] qhead) noexcept nogil:
    cdef Py_ssize_t t
    cdef double s = 0.0
    if n <= qhead.shape[0]:
        return qhead[n - 1]
    for t in range(cs.shape[0]):
        s += cs[t] * sin(n * ws[t] + ps[t])
    return s / n


cdef inline double link(long m, const double[::1] a, long T, double r) noexcept nogil:
    # a_m with a_0 = a_T; r only touches the 1-2 link
    cdef double v = a[(m - 1 + T) % T]
    if m == 1:
        v += r
    return v


def forward(const double[::1] a, const double[::1] b, double lam,
            const double[::1] cs, const double[::1] ws, const double[::1] ps,
            const double[::1] qhead, double r, long start, double x0, double x1,
            long N, bint rescale=True):
    """u_start..u_N from (u_start, u_{start+1}) by forward recursion."""
    cdef long T = a.shape[0]
    cdef long n
    cdef double um, uc, up
    cdef long bad = -1
    out_arr = np.empty(N - start + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    events = []
    out[0] = x0
    out[1] = x1
    um = x0
    uc = x1
    n = start + 1
    while n < N:
        with nogil:
            while n < N:
                up = ((lam - b[(n - 1) % T] - q_at(n, cs, ws, ps, qhead)) * uc
                      - link(n - 1, a, T, r) * um) / link(n, a, T, r)
                out[n + 1 - start] = up
                um = uc
                uc = up
                n += 1
                if not isfinite(up):
                    bad = n
                    break
                if rescale and fabs(up) > RESCALE:
                    break
        if bad >= 0:
            break
        if rescale and fabs(uc) > RESCALE:
            um /= RESCALE
            uc /= RESCALE
            out[n - 1 - start] = um
            out[n - start] = uc
            events.append(n - 1)
    return out_arr, np.array(events, dtype=np.int64), bad


def forward_pair(const double[::1] a, const double[::1] b, double lam,
                 const double[::1] cs, const double[::1] ws, const double[::1] ps,
                 const double[::1] qhead, double r, long start, long N, bint rescale=True):
    """Two basis solutions with heads (1, 0) and (0, 1), sharing rescale events."""
    cdef long T = a.shape[0]
    cdef long n
    cdef double am, ac, ap, bm, bc, bp, m, coef, l0, l1
    cdef long bad = -1
    out_arr = np.empty((2, N - start + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    events = []
    out[0, 0] = 1.0
    out[0, 1] = 0.0
    out[1, 0] = 0.0
    out[1, 1] = 1.0
    am, ac, bm, bc = 1.0, 0.0, 0.0, 1.0
    n = start + 1
    while n < N:
        with nogil:
            while n < N:
                coef = lam - b[(n - 1) % T] - q_at(n, cs, ws, ps, qhead)
                l0 = link(n - 1, a, T, r)
                l1 = link(n, a, T, r)
                ap = (coef * ac - l0 * am) / l1
                bp = (coef * bc - l0 * bm) / l1
                out[0, n + 1 - start] = ap
                out[1, n + 1 - start] = bp
                am, ac, bm, bc = ac, ap, bc, bp
                n += 1
                if not (isfinite(ap) and isfinite(bp)):
                    bad = n
                    break
                if rescale and (fabs(ap) > RESCALE or fabs(bp) > RESCALE):
                    break
        if bad >= 0:
            break
        if rescale and (fabs(ac) > RESCALE or fabs(bc) > RESCALE):
            am /= RESCALE
            ac /= RESCALE
            bm /= RESCALE
            bc /= RESCALE
            out[0, n - 1 - start] = am
            out[0, n - start] = ac
            out[1, n - 1 - start] = bm
            out[1, n - start] = bc
            events.append(n - 1)
    return out_arr, np.array(events, dtype=np.int64), bad


def backward(const double[::1] a, const double[::1] b, double lam,
             const double[::1] cs, const double[::1] ws, const double[::1] ps,
             const double[::1] qhead, double r, long stop, long top,
             double y_top, double y_above, long n_store):
    """u_stop..u_{n_store} by backward recursion from (u_top, u_{top+1}).

    Runs the recurrence rows top, top-1, ..., stop+1 solved for the lower
    neighbour.  Only indices up to ``n_store`` are kept.
    """
    cdef long T = a.shape[0]
    cdef long n
    cdef double up, uc, um
    cdef long bad = -1
    out_arr = np.zeros(n_store - stop + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    events = []
    up = y_above
    uc = y_top
    if top <= n_store:
        out[top - stop] = uc
        if top + 1 <= n_store:
            out[top + 1 - stop] = up
    n = top
    while n > stop:
        with nogil:
            while n > stop:
                um = ((lam - b[(n - 1) % T] - q_at(n, cs, ws, ps, qhead)) * uc
                      - link(n, a, T, r) * up) / link(n - 1, a, T, r)
                up = uc
                uc = um
                n -= 1
                if n <= n_store:
                    out[n - stop] = um
                if not isfinite(um):
                    bad = n
                    break
                if fabs(um) > RESCALE:
                    break
        if bad >= 0:
            break
        if fabs(uc) > RESCALE:
            uc /= RESCALE
            up /= RESCALE
            if n <= n_store:
                out[n - stop] = uc
            if n + 1 <= n_store:
                out[n + 1 - stop] = up
            events.append(n + 1)
    return out_arr, np.array(events, dtype=np.int64), bad
