"""Pure-Python reference kernels.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is not built or ``FLOQUET_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

RESCALE_HI = 2.0 ** 512
_LN2 = math.log(2.0)


def _vnorm(v, code):
    if code == 0:
        return float(np.abs(v).sum())
    if code == 1:
        return float(math.sqrt(np.dot(v, v)))
    return float(np.abs(v).max())


def normalized_orbit(mats, v0, norm_code, store):
    """Push ``v0`` through ``mats[0], mats[1], ...`` renormalizing each step.

    Returns ``(log_growth, final, vecs)`` where ``log_growth[k]`` is the log
    norm of ``mats[k] @ v_k`` and ``vecs`` holds every normalized iterate
    (``None`` unless ``store``).  A zero image stops the sweep; the remaining
    log entries are ``-inf``.
    """
    N = mats.shape[0]
    n = mats.shape[1]
    logs = np.full(N, -np.inf)
    vecs = np.empty((N + 1, n)) if store else None
    v = np.array(v0, dtype=float)
    if store:
        vecs[0] = v
    for k in range(N):
        x = mats[k] @ v
        r = _vnorm(x, norm_code)
        if r == 0.0:
            if store:
                vecs[k + 1:] = np.nan
            break
        v = x / r
        logs[k] = math.log(r)
        if store:
            vecs[k + 1] = v
    return logs, v, vecs


def qr_log_diagonals(mats, q0):
    """Discrete QR sweep: log |R_ii| per step for a k-column frame.

    A step whose R has a zero diagonal leaves the frame unchanged and
    records ``nan`` for that row.
    """
    N = mats.shape[0]
    kk = q0.shape[1]
    out = np.empty((N, kk))
    q = np.array(q0, dtype=float)
    for step in range(N):
        y = mats[step] @ q
        ok = True
        diag = np.empty(kk)
        for j in range(kk):
            for i in range(j):
                y[:, j] -= np.dot(y[:, i], y[:, j]) * y[:, i]
            r = math.sqrt(np.dot(y[:, j], y[:, j]))
            if r == 0.0:
                ok = False
                break
            y[:, j] /= r
            diag[j] = r
        if ok:
            q = y
            out[step] = np.log(diag)
        else:
            out[step] = np.nan
    return out, q


def tau_kappa(mats, e):
    """Projective diameter and focusing constant of each matrix.

    ``tau`` is the largest Hilbert distance between two columns (``inf``
    unless every entry is positive); ``kappa`` is the largest
    ``M(a_j/e) / m(a_j/e)`` over the columns ``a_j``.
    """
    N, n, _ = mats.shape
    tau = np.empty(N)
    kappa = np.empty(N)
    for k in range(N):
        a = mats[k]
        if np.all(a > 0):
            t = 0.0
            for j in range(n):
                for l in range(j + 1, n):
                    r = a[:, j] / a[:, l]
                    t = max(t, math.log(r.max() / r.min()))
            tau[k] = t
        else:
            tau[k] = math.inf
        c = a / e[:, None]
        lo = c.min(axis=0)
        hi = c.max(axis=0)
        if np.any(lo <= 0):
            kappa[k] = math.inf
        else:
            kappa[k] = float((hi / lo).max())
    return tau, kappa


def _rescale(m):
    mx = float(np.abs(m).max())
    if mx == 0.0 or (1.0 <= mx <= RESCALE_HI):
        return m, 0.0
    _, ex = math.frexp(mx)
    ex -= 1  # mx = f * 2**ex with f in [1, 2)
    return np.ldexp(m, -ex), ex * _LN2


def log_scaled_product(mats):
    """``mats[N-1] @ ... @ mats[0]`` as ``(value, log_scale)``."""
    n = mats.shape[1]
    value = np.eye(n)
    log_scale = 0.0
    for k in range(mats.shape[0]):
        value = mats[k] @ value
        value, ds = _rescale(value)
        log_scale += ds
    return value, log_scale


def projected_products(mats, w, ws, checkpoints):
    """Log-scaled ``P_n A_{n-1} P_{n-1} ... A_0 P_0`` at the given n.

    ``P_k u = u - <u, ws[k]> / <w[k], ws[k]> w[k]``.  Applying the
    projection at every step keeps round-off from leaking back into the
    principal direction.
    """
    n = mats.shape[1]
    C = len(checkpoints)
    vals = np.empty((C, n, n))
    logs = np.empty(C)
    m = np.eye(n)
    m = m - np.outer(w[0], ws[0] @ m) / np.dot(w[0], ws[0])
    log_scale = 0.0
    c = 0
    while c < C and checkpoints[c] == 0:
        vals[c] = m
        logs[c] = 0.0
        c += 1
    for k in range(mats.shape[0]):
        if c >= C:
            break
        m = mats[k] @ m
        m = m - np.outer(w[k + 1], ws[k + 1] @ m) / np.dot(w[k + 1], ws[k + 1])
        m, ds = _rescale(m)
        log_scale += ds
        while c < C and checkpoints[c] == k + 1:
            vals[c] = m
            logs[c] = log_scale
            c += 1
    return vals, logs
