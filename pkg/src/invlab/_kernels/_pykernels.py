"""Pure numpy implementations of the hot kernels.

Same contracts as the compiled ``_ckernels`` module; used when the extension
is not built or when ``INVLAB_PURE_PYTHON=1``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_EPS = 1e-16
_FPMIN = 1e-300


def sell_forward(avail, d, p, b, h):
    left = np.maximum(avail - d, 0.0)
    short = np.maximum(d - avail, 0.0)
    sales = np.minimum(d, avail)
    reward = p * sales - b * short - h * left
    return left, reward


def sell_backward(g_left, g_reward, avail, d, p, b, h):
    over = avail >= d
    g = np.where(over, g_left - h * g_reward, 0.0)
    g += g_reward * (p * (avail < d) + b * (avail <= d))
    return g


def sell_backlog_forward(avail, d, p, b, h):
    net = avail - d
    reward = p * d - b * np.maximum(-net, 0.0) - h * np.maximum(net, 0.0)
    return net, reward


def sell_backlog_backward(g_left, g_reward, avail, d, p, b, h):
    # same summation order as the compiled loop
    g = g_left + np.where(avail <= d, g_reward * b, 0.0)
    return g - np.where(avail >= d, g_reward * h, 0.0)


def _log_prefactor(a, x):
    return a * np.log(x) - x - gammaln(a)


def gammainc_p(a, x):
    """Regularized lower incomplete gamma P(a, x), elementwise."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    a = a.ravel()
    x = x.ravel()
    out = np.zeros_like(x)
    pos = x > 0
    series = pos & (x < a + 1.0)
    frac = pos & ~series

    idx = np.flatnonzero(series)
    if idx.size:
        aa, xx = a[idx], x[idx]
        ap = aa.copy()
        term = 1.0 / aa
        total = term.copy()
        active = np.arange(idx.size)
        while active.size:
            ap[active] += 1.0
            term[active] *= xx[active] / ap[active]
            total[active] += term[active]
            active = active[np.abs(term[active]) >= np.abs(total[active]) * _EPS]
        out[idx] = total * np.exp(_log_prefactor(aa, xx))

    idx = np.flatnonzero(frac)
    if idx.size:
        aa, xx = a[idx], x[idx]
        bb = xx + 1.0 - aa
        c = np.full_like(xx, 1.0 / _FPMIN)
        dd = 1.0 / bb
        hh = dd.copy()
        active = np.arange(idx.size)
        i = 0
        while active.size:
            i += 1
            an = -i * (i - aa[active])
            bb[active] += 2.0
            dn = an * dd[active] + bb[active]
            dn = np.where(np.abs(dn) < _FPMIN, _FPMIN, dn)
            cn = bb[active] + an / c[active]
            cn = np.where(np.abs(cn) < _FPMIN, _FPMIN, cn)
            dn = 1.0 / dn
            delta = dn * cn
            dd[active] = dn
            c[active] = cn
            hh[active] *= delta
            active = active[np.abs(delta - 1.0) >= _EPS]
        out[idx] = 1.0 - np.exp(_log_prefactor(aa, xx)) * hh
    return out


def gamma_ppf(a, u, seed):
    """Unit-scale Gamma quantile by safeguarded Newton from ``seed``."""
    a, u, x = (np.array(v, dtype=np.float64).ravel() for v in np.broadcast_arrays(a, u, seed))
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    active = np.arange(x.size)
    for _ in range(200):
        if not active.size:
            break
        aa, uu, xx = a[active], u[active], x[active]
        f = gammainc_p(aa, xx) - uu
        hit = f == 0
        below = f < 0
        lo[active] = np.where(below, xx, lo[active])
        hi[active] = np.where(below, hi[active], xx)
        logpdf = (aa - 1.0) * np.log(xx) - xx - gammaln(aa)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            step = f / np.exp(logpdf)
            nxt = xx - step
        l, h = lo[active], hi[active]
        bad = ~np.isfinite(nxt) | (nxt <= l) | (nxt >= h)
        fallback = np.where(np.isfinite(h), 0.5 * (l + h), 2.0 * xx)
        nxt = np.where(bad, fallback, nxt)
        nxt = np.where(hit, xx, nxt)
        x[active] = nxt
        done = (np.abs(nxt - xx) <= 1e-15 * np.maximum(nxt, 1e-300)) | hit
        active = active[~done]
    return x
