# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; contracts mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma, fabs, isfinite, INFINITY

cnp.import_array()

cdef double EPS = 1e-16
cdef double FPMIN = 1e-300


def _flat(*arrays):
    out = np.broadcast_arrays(*[np.asarray(v, dtype=np.float64) for v in arrays])
    return [np.ascontiguousarray(v).ravel() for v in out], out[0].shape


def sell_forward(avail, d, p, b, h):
    (av, dv, pv, bv, hv), shape = _flat(avail, d, p, b, h)
    cdef Py_ssize_t n = av.shape[0], i
    left = np.empty(n)
    reward = np.empty(n)
    cdef const double[::1] A = av, D = dv, P = pv, Bc = bv, Hc = hv
    cdef double[::1] L = left, R = reward
    cdef double a_, d_, diff
    with nogil:
        for i in range(n):
            a_ = A[i]
            d_ = D[i]
            diff = a_ - d_
            if diff >= 0:
                L[i] = diff
                R[i] = P[i] * d_ - Hc[i] * diff
            else:
                L[i] = 0.0
                R[i] = P[i] * a_ + Bc[i] * diff
    return left.reshape(shape), reward.reshape(shape)


def sell_backward(g_left, g_reward, avail, d, p, b, h):
    (gl, gr, av, dv, pv, bv, hv), shape = _flat(g_left, g_reward, avail, d, p, b, h)
    cdef Py_ssize_t n = av.shape[0], i
    grad = np.empty(n)
    cdef const double[::1] GL = gl, GR = gr, A = av, D = dv, P = pv, Bc = bv, Hc = hv
    cdef double[::1] G = grad
    cdef double g
    with nogil:
        for i in range(n):
            g = 0.0
            if A[i] >= D[i]:
                g = GL[i] - Hc[i] * GR[i]
            if A[i] < D[i]:
                g = g + GR[i] * P[i]
            if A[i] <= D[i]:
                g = g + GR[i] * Bc[i]
            G[i] = g
    return grad.reshape(shape)


def sell_backlog_forward(avail, d, p, b, h):
    (av, dv, pv, bv, hv), shape = _flat(avail, d, p, b, h)
    cdef Py_ssize_t n = av.shape[0], i
    net = np.empty(n)
    reward = np.empty(n)
    cdef const double[::1] A = av, D = dv, P = pv, Bc = bv, Hc = hv
    cdef double[::1] N = net, R = reward
    cdef double diff
    with nogil:
        for i in range(n):
            diff = A[i] - D[i]
            N[i] = diff
            if diff >= 0:
                R[i] = P[i] * D[i] - Hc[i] * diff
            else:
                R[i] = P[i] * D[i] + Bc[i] * diff
    return net.reshape(shape), reward.reshape(shape)


def sell_backlog_backward(g_left, g_reward, avail, d, p, b, h):
    (gl, gr, av, dv, pv, bv, hv), shape = _flat(g_left, g_reward, avail, d, p, b, h)
    cdef Py_ssize_t n = av.shape[0], i
    grad = np.empty(n)
    cdef const double[::1] GL = gl, GR = gr, A = av, D = dv, Bc = bv, Hc = hv
    cdef double[::1] G = grad
    cdef double g
    with nogil:
        for i in range(n):
            g = GL[i]
            if A[i] <= D[i]:
                g = g + GR[i] * Bc[i]
            if A[i] >= D[i]:
                g = g - GR[i] * Hc[i]
            G[i] = g
    return grad.reshape(shape)


cdef double _gammainc_p(double a, double x) noexcept nogil:
    cdef double ap, term, total, bb, c, dd, hh, an, delta, logpre
    cdef long i
    if x <= 0:
        return 0.0
    logpre = a * log(x) - x - lgamma(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        while True:
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * EPS:
                break
        return total * exp(logpre)
    bb = x + 1.0 - a
    c = 1.0 / FPMIN
    dd = 1.0 / bb
    hh = dd
    i = 0
    while True:
        i += 1
        an = -i * (i - a)
        bb += 2.0
        dd = an * dd + bb
        if fabs(dd) < FPMIN:
            dd = FPMIN
        c = bb + an / c
        if fabs(c) < FPMIN:
            c = FPMIN
        dd = 1.0 / dd
        delta = dd * c
        hh *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return 1.0 - exp(logpre) * hh


def gammainc_p(a, x):
    (av, xv), shape = _flat(a, x)
    cdef Py_ssize_t n = av.shape[0], i
    out = np.empty(n)
    cdef const double[::1] A = av, X = xv
    cdef double[::1] O = out
    with nogil:
        for i in range(n):
            O[i] = _gammainc_p(A[i], X[i])
    return out.reshape(shape)


def gamma_ppf(a, u, seed):
    (av, uv, sv), shape = _flat(a, u, seed)
    cdef Py_ssize_t n = av.shape[0], i
    cdef int it
    out = np.empty(n)
    cdef const double[::1] A = av, U = uv, S = sv
    cdef double[::1] O = out
    cdef double x, f, lo, hi, nxt, lga
    with nogil:
        for i in range(n):
            x = S[i]
            lo = 0.0
            hi = INFINITY
            lga = lgamma(A[i])
            for it in range(200):
                f = _gammainc_p(A[i], x) - U[i]
                if f == 0:
                    break
                if f < 0:
                    lo = x
                else:
                    hi = x
                nxt = x - f / exp((A[i] - 1.0) * log(x) - x - lga)
                if not isfinite(nxt) or nxt <= lo or nxt >= hi:
                    if isfinite(hi):
                        nxt = 0.5 * (lo + hi)
                    else:
                        nxt = 2.0 * x
                if fabs(nxt - x) <= 1e-15 * (nxt if nxt > 1e-300 else 1e-300):
                    x = nxt
                    break
                x = nxt
            O[i] = x
    return out.reshape(shape)
