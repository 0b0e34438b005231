"""Pure-Python recurrence kernels, used when the compiled module is missing.

Same signatures and return values as ``_ckernels``.
"""

import math

import numpy as np

RESCALE = 1e150


def _q_func(cs, ws, ps, qhead):
    cs = [float(x) for x in cs]
    ws = [float(x) for x in ws]
    ps = [float(x) for x in ps]
    qhead = [float(x) for x in qhead]
    m = len(qhead)
    terms = list(zip(cs, ws, ps))
    sin = math.sin

    def q(n):
        if n <= m:
            return qhead[n - 1]
        s = 0.0
        for c, w, p in terms:
            s += c * sin(n * w + p)
        return s / n

    return q


def _link_func(a, r):
    a = [float(x) for x in a]
    T = len(a)

    def link(m):
        v = a[(m - 1) % T]
        return v + r if m == 1 else v

    return link


def forward(a, b, lam, cs, ws, ps, qhead, r, start, x0, x1, N, rescale=True):
    T = len(a)
    b = [float(x) for x in b]
    q = _q_func(cs, ws, ps, qhead)
    link = _link_func(a, r)
    out = [0.0] * (N - start + 1)
    events = []
    out[0], out[1] = x0, x1
    um, uc = x0, x1
    bad = -1
    for n in range(start + 1, N):
        up = ((lam - b[(n - 1) % T] - q(n)) * uc - link(n - 1) * um) / link(n)
        out[n + 1 - start] = up
        um, uc = uc, up
        if not math.isfinite(up):
            bad = n + 1
            break
        if rescale and abs(up) > RESCALE:
            um /= RESCALE
            uc /= RESCALE
            out[n - start] = um
            out[n + 1 - start] = uc
            events.append(n)
    return np.array(out), np.array(events, dtype=np.int64), bad


def forward_pair(a, b, lam, cs, ws, ps, qhead, r, start, N, rescale=True):
    T = len(a)
    b = [float(x) for x in b]
    q = _q_func(cs, ws, ps, qhead)
    link = _link_func(a, r)
    size = N - start + 1
    oa = [0.0] * size
    ob = [0.0] * size
    events = []
    oa[0], oa[1], ob[0], ob[1] = 1.0, 0.0, 0.0, 1.0
    am, ac, bm, bc = 1.0, 0.0, 0.0, 1.0
    bad = -1
    for n in range(start + 1, N):
        coef = lam - b[(n - 1) % T] - q(n)
        l0, l1 = link(n - 1), link(n)
        ap = (coef * ac - l0 * am) / l1
        bp = (coef * bc - l0 * bm) / l1
        i = n + 1 - start
        oa[i], ob[i] = ap, bp
        am, ac, bm, bc = ac, ap, bc, bp
        if not (math.isfinite(ap) and math.isfinite(bp)):
            bad = n + 1
            break
        if rescale and (abs(ap) > RESCALE or abs(bp) > RESCALE):
            am, ac, bm, bc = am / RESCALE, ac / RESCALE, bm / RESCALE, bc / RESCALE
            oa[i - 1], oa[i], ob[i - 1], ob[i] = am, ac, bm, bc
            events.append(n)
    return np.array([oa, ob]), np.array(events, dtype=np.int64), bad


def backward(a, b, lam, cs, ws, ps, qhead, r, stop, top, y_top, y_above, n_store):
    T = len(a)
    b = [float(x) for x in b]
    q = _q_func(cs, ws, ps, qhead)
    link = _link_func(a, r)
    out = [0.0] * (n_store - stop + 1)
    events = []
    up, uc = y_above, y_top
    if top <= n_store:
        out[top - stop] = uc
        if top + 1 <= n_store:
            out[top + 1 - stop] = up
    bad = -1
    for n in range(top, stop, -1):
        um = ((lam - b[(n - 1) % T] - q(n)) * uc - link(n) * up) / link(n - 1)
        up, uc = uc, um
        if n - 1 <= n_store:
            out[n - 1 - stop] = um
        if not math.isfinite(um):
            bad = n - 1
            break
        if abs(um) > RESCALE:
            uc /= RESCALE
            up /= RESCALE
            if n - 1 <= n_store:
                out[n - 1 - stop] = uc
            if n <= n_store:
                out[n - stop] = up
            events.append(n)
    return np.array(out), np.array(events, dtype=np.int64), bad
