# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  Signatures mirror ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, INFINITY, NAN, frexp, ldexp

cnp.import_array()

cdef double RESCALE_HI = 2.0 ** 512
cdef double LN2 = log(2.0)


cdef inline double _vnorm(double* v, Py_ssize_t n, int code) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, a
    if code == 0:
        for i in range(n):
            s += fabs(v[i])
        return s
    if code == 1:
        for i in range(n):
            s += v[i] * v[i]
        return sqrt(s)
    for i in range(n):
        a = fabs(v[i])
        if a > s:
            s = a
    return s


def normalized_orbit(const double[:, :, ::1] mats, v0, int norm_code, bint store):
    cdef Py_ssize_t N = mats.shape[0], n = mats.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double r, s
    logs_a = np.full(N, -np.inf)
    cdef double[::1] logs = logs_a
    v_a = np.array(v0, dtype=np.float64)
    x_a = np.empty(n)
    cdef double[::1] v = v_a
    cdef double[::1] x = x_a
    cdef double[:, ::1] vecs
    vecs_a = None
    if store:
        vecs_a = np.empty((N + 1, n))
        vecs = vecs_a
        for i in range(n):
            vecs[0, i] = v[i]
    with nogil:
        for k in range(N):
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s = s + mats[k, i, j] * v[j]
                x[i] = s
            r = _vnorm(&x[0], n, norm_code)
            if r == 0.0:
                if store:
                    for j in range(k + 1, N + 1):
                        for i in range(n):
                            vecs[j, i] = NAN
                break
            for i in range(n):
                v[i] = x[i] / r
            logs[k] = log(r)
            if store:
                for i in range(n):
                    vecs[k + 1, i] = v[i]
    return logs_a, v_a, vecs_a


def qr_log_diagonals(const double[:, :, ::1] mats, q0):
    cdef Py_ssize_t N = mats.shape[0], n = mats.shape[1]
    q_a = np.array(q0, dtype=np.float64, order="C")
    cdef double[:, ::1] q = q_a
    cdef Py_ssize_t kk = q.shape[1]
    out_a = np.empty((N, kk))
    cdef double[:, ::1] out = out_a
    y_a = np.empty((n, kk))
    cdef double[:, ::1] y = y_a
    diag_a = np.empty(kk)
    cdef double[::1] diag = diag_a
    cdef Py_ssize_t step, i, j, l, c
    cdef double s, r
    cdef bint ok
    with nogil:
        for step in range(N):
            for i in range(n):
                for c in range(kk):
                    s = 0.0
                    for l in range(n):
                        s = s + mats[step, i, l] * q[l, c]
                    y[i, c] = s
            ok = True
            for j in range(kk):
                for l in range(j):
                    s = 0.0
                    for i in range(n):
                        s = s + y[i, l] * y[i, j]
                    for i in range(n):
                        y[i, j] = y[i, j] - s * y[i, l]
                s = 0.0
                for i in range(n):
                    s = s + y[i, j] * y[i, j]
                r = sqrt(s)
                if r == 0.0:
                    ok = False
                    break
                for i in range(n):
                    y[i, j] = y[i, j] / r
                diag[j] = r
            if ok:
                for i in range(n):
                    for c in range(kk):
                        q[i, c] = y[i, c]
                for c in range(kk):
                    out[step, c] = log(diag[c])
            else:
                for c in range(kk):
                    out[step, c] = NAN
    return out_a, q_a


def tau_kappa(const double[:, :, ::1] mats, e):
    cdef Py_ssize_t N = mats.shape[0], n = mats.shape[1]
    e_a = np.ascontiguousarray(e, dtype=np.float64)
    cdef const double[::1] ev = e_a
    tau_a = np.empty(N)
    kappa_a = np.empty(N)
    cdef double[::1] tau = tau_a
    cdef double[::1] kappa = kappa_a
    cdef Py_ssize_t k, i, j, l
    cdef double t, hi, lo, r, kap
    cdef bint positive, zero_seen
    with nogil:
        for k in range(N):
            positive = True
            for i in range(n):
                for j in range(n):
                    if not (mats[k, i, j] > 0.0):
                        positive = False
            if positive:
                t = 0.0
                for j in range(n):
                    for l in range(j + 1, n):
                        hi = -INFINITY
                        lo = INFINITY
                        for i in range(n):
                            r = mats[k, i, j] / mats[k, i, l]
                            if r > hi:
                                hi = r
                            if r < lo:
                                lo = r
                        r = log(hi / lo)
                        if r > t:
                            t = r
                tau[k] = t
            else:
                tau[k] = INFINITY
            kap = 0.0
            zero_seen = False
            for j in range(n):
                hi = -INFINITY
                lo = INFINITY
                for i in range(n):
                    r = mats[k, i, j] / ev[i]
                    if r > hi:
                        hi = r
                    if r < lo:
                        lo = r
                if lo <= 0.0:
                    zero_seen = True
                elif hi / lo > kap:
                    kap = hi / lo
            kappa[k] = INFINITY if zero_seen else kap
    return tau_a, kappa_a


cdef inline double _rescale(double[:, ::1] m, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double mx = 0.0, a
    cdef int ex
    for i in range(n):
        for j in range(n):
            a = fabs(m[i, j])
            if a > mx:
                mx = a
    if mx == 0.0 or (mx >= 1.0 and mx <= RESCALE_HI):
        return 0.0
    frexp(mx, &ex)
    ex = ex - 1
    for i in range(n):
        for j in range(n):
            m[i, j] = ldexp(m[i, j], -ex)
    return ex * LN2


def log_scaled_product(const double[:, :, ::1] mats):
    cdef Py_ssize_t N = mats.shape[0], n = mats.shape[1]
    val_a = np.eye(n)
    tmp_a = np.empty((n, n))
    cdef double[:, ::1] val = val_a
    cdef double[:, ::1] tmp = tmp_a
    cdef double log_scale = 0.0, s
    cdef Py_ssize_t k, i, j, l
    with nogil:
        for k in range(N):
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s = s + mats[k, i, l] * val[l, j]
                    tmp[i, j] = s
            for i in range(n):
                for j in range(n):
                    val[i, j] = tmp[i, j]
            log_scale += _rescale(val, n)
    return val_a, log_scale


cdef inline void _project(double[:, ::1] m, const double[:, ::1] w, const double[:, ::1] ws,
                          Py_ssize_t k, Py_ssize_t n, double[::1] row) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double p = 0.0, s
    for i in range(n):
        p = p + w[k, i] * ws[k, i]
    for j in range(n):
        s = 0.0
        for i in range(n):
            s = s + ws[k, i] * m[i, j]
        row[j] = s / p
    for i in range(n):
        for j in range(n):
            m[i, j] = m[i, j] - w[k, i] * row[j]


def projected_products(const double[:, :, ::1] mats, w, ws, checkpoints):
    cdef Py_ssize_t N = mats.shape[0], n = mats.shape[1]
    w_a = np.ascontiguousarray(w, dtype=np.float64)
    ws_a = np.ascontiguousarray(ws, dtype=np.float64)
    cp_a = np.ascontiguousarray(checkpoints, dtype=np.int64)
    cdef const double[:, ::1] wv = w_a
    cdef const double[:, ::1] wsv = ws_a
    cdef const long long[::1] cp = cp_a
    cdef Py_ssize_t C = cp.shape[0]
    vals_a = np.empty((C, n, n))
    logs_a = np.empty(C)
    cdef double[:, :, ::1] vals = vals_a
    cdef double[::1] logs = logs_a
    m_a = np.eye(n)
    tmp_a = np.empty((n, n))
    row_a = np.empty(n)
    cdef double[:, ::1] m = m_a
    cdef double[:, ::1] tmp = tmp_a
    cdef double[::1] row = row_a
    cdef double log_scale = 0.0, s
    cdef Py_ssize_t c = 0, k, i, j, l
    with nogil:
        _project(m, wv, wsv, 0, n, row)
        while c < C and cp[c] == 0:
            for i in range(n):
                for j in range(n):
                    vals[c, i, j] = m[i, j]
            logs[c] = 0.0
            c += 1
        for k in range(N):
            if c >= C:
                break
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s = s + mats[k, i, l] * m[l, j]
                    tmp[i, j] = s
            for i in range(n):
                for j in range(n):
                    m[i, j] = tmp[i, j]
            _project(m, wv, wsv, k + 1, n, row)
            log_scale += _rescale(m, n)
            while c < C and cp[c] == k + 1:
                for i in range(n):
                    for j in range(n):
                        vals[c, i, j] = m[i, j]
                logs[c] = log_scale
                c += 1
    return vals_a, logs_a
