"""Shared test oracles."""
import mpmath
import numpy as np
from scipy import integrate

from invlab import autodiff as ad


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f(x)
        x[i] = old - h
        down = f(x)
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def tape_grad(f, *xs):
    """Gradients of scalar ``f(*traced)`` by the engine under test."""
    leaves = [ad.Array(x, requires_grad=True) for x in xs]
    with ad.Tape() as tape:
        out = f(*leaves)
    return ad.value(out), tape.backward(out, leaves)


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def quad_bisect_quantile(a, scale, u):
    """Gamma quantile by adaptive quadrature of the density and bisection."""
    logc = -mpmath.loggamma(a) - a * mpmath.log(scale)
    pdf = lambda x: float(mpmath.exp(logc + (a - 1) * mpmath.log(x) - x / scale)) if x > 0 else 0.0  # noqa: E731
    lo, hi = 0.0, a * scale + 40 * np.sqrt(a) * scale + 40 * scale
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        cdf = integrate.quad(pdf, 0.0, mid, limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        lo, hi = (mid, hi) if cdf < u else (lo, mid)
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    """Record one acceptance line (shown in the terminal summary), then assert."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
