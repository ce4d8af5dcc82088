"""Classical benchmark policies and the predict-then-optimize rule.

Every policy here is an actor with ``reset(ctx)`` / ``act(t, state)`` so it
runs through the same rollout code as the neural policy.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .envs import EconStatics, EnvSpec, init_endogenous
from .gammadist import GammaDist, fit_gamma_moments, gamma_quantile
from .rollout import RolloutContext, rollout

INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
FORECAST_QUANTILES = (0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99)


def critical_ratio(econ: EconStatics, mode: str = "standard"):
    if mode == "standard":
        c_u = econ.p - econ.c + econ.b
    elif mode == "dual_lost_sales":
        c_u = econ.p - econ.c_e + econ.b - (econ.c_e - econ.c_r)
    elif mode == "dual_backlog":
        c_u = econ.b - (econ.c_e - econ.c_r)
    else:
        raise ValueError(f"unknown critical-ratio mode {mode!r}")
    c_o = econ.h
    c_u = np.asarray(c_u, dtype=np.float64)
    if np.any(c_u <= 0):
        raise ValueError("underage cost must be positive")
    if np.any(c_o <= 0):
        raise ValueError("overage cost must be positive")
    return c_u / (c_u + c_o)


def newsvendor_level(econ: EconStatics, dist: GammaDist, mode: str = "standard"):
    return gamma_quantile(critical_ratio(econ, mode), dist)


def leadtime_levels(econ: EconStatics, dist: GammaDist, L: int) -> np.ndarray:
    """Levels ``s[l]`` for the demand over periods ``t+l .. t+L``; shape (L+1, ...)."""
    if L < 1:
        raise ValueError("lead time must be >= 1")
    ratio = critical_ratio(econ)
    return np.stack([gamma_quantile(ratio, dist.sum_of(L - l + 1)) for l in range(L + 1)])


def leadtime_base_stock(econ: EconStatics, dist: GammaDist, L: int):
    """Order-up-to level for the inventory position (covers ``L+1`` periods)."""
    return gamma_quantile(critical_ratio(econ), dist.sum_of(L + 1))


def cumulative_pipeline(state: list) -> list:
    """``u[l] = sum_{k >= l} y[k]`` for l = 0..L-1."""
    out = [None] * len(state)
    acc = 0.0
    for k in range(len(state) - 1, -1, -1):
        acc = acc + np.asarray(state[k])
        out[k] = acc
    return out


def vector_base_stock_order(levels: np.ndarray, state: list):
    u = cumulative_pipeline(state)
    slack = levels[-1] * np.ones_like(np.asarray(u[0], dtype=np.float64))
    for l, ul in enumerate(u):
        slack = np.minimum(slack, levels[l] - ul)
    return np.maximum(slack, 0.0)


def single_index_dual(s_e, s_r, state: list):
    position = state[0]
    for s in state[1:]:
        position = position + s
    q_e = np.maximum(s_e - position, 0.0)
    q_r = np.maximum(s_r - (position + q_e), 0.0)
    return q_e, q_r


def fukuda_expedited_level(econ: EconStatics, dist: GammaDist, L_e: int, demand_mode: str = "backlog"):
    mode = "dual_backlog" if demand_mode == "backlog" else "dual_lost_sales"
    return gamma_quantile(critical_ratio(econ, mode), dist.sum_of(L_e + 1))


def golden_section_max(
    f: Callable[[np.ndarray], np.ndarray],
    lower,
    upper,
    rel_tol: float = 1e-5,
    max_iter: int = 100,
) -> np.ndarray:
    """Vectorized golden-section maximization; one call to ``f`` per iteration.

    Stops once every bracket is narrower than ``rel_tol * upper`` and returns
    the bracket midpoints.
    """
    a = np.array(lower, dtype=np.float64, copy=True)
    b = np.array(upper, dtype=np.float64, copy=True)
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    if np.any(b < a):
        raise ValueError("upper bound below lower bound")
    tol = rel_tol * np.maximum(np.abs(b), 1e-12)
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1 = np.asarray(f(x1), dtype=np.float64)
    f2 = np.asarray(f(x2), dtype=np.float64)
    for _ in range(max_iter):
        if np.all(b - a < tol):
            break
        left = f1 >= f2  # maximum lies in [a, x2]
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        new_x = np.where(left, b - INVPHI * (b - a), a + INVPHI * (b - a))
        x2, x1 = np.where(left, x1, new_x), np.where(left, new_x, x2)
        f2_keep, f1_keep = np.where(left, f1, 0.0), np.where(left, 0.0, f2)
        fn = np.asarray(f(new_x), dtype=np.float64)
        f1 = np.where(left, fn, f1_keep)
        f2 = np.where(left, f2_keep, fn)
    return 0.5 * (a + b)


def best_base_stock(eval_closure: Callable[[np.ndarray], np.ndarray], upper, lower=0.0, **kw) -> np.ndarray:
    return golden_section_max(eval_closure, lower, upper, **kw)


def pto_decide(quantile_preds, Q, ratio, y):
    """Order up to the forecast quantile at the critical ratio.

    Predictions are sorted per row; the ratio is interpolated linearly between
    bracketing levels and clamped to the end quantiles.
    """
    preds = np.sort(np.atleast_2d(np.asarray(quantile_preds, dtype=np.float64)), axis=1)
    Q = np.asarray(Q, dtype=np.float64)
    if preds.shape[1] != Q.size:
        raise ValueError("one prediction per quantile level is required")
    ratio = np.broadcast_to(np.asarray(ratio, dtype=np.float64), preds.shape[:1])
    j = np.clip(np.searchsorted(Q, ratio, side="right") - 1, 0, Q.size - 2)
    w = np.clip((ratio - Q[j]) / (Q[j + 1] - Q[j]), 0.0, 1.0)
    rows = np.arange(preds.shape[0])
    s = preds[rows, j] + w * (preds[rows, j + 1] - preds[rows, j])
    return np.maximum(s - np.asarray(y, dtype=np.float64), 0.0)


# ---------------------------------------------------------------- actors


def _true_dist(ctx: RolloutContext) -> GammaDist:
    if ctx.shape is None or ctx.scale is None:
        raise ValueError("omniscient policies need the true demand distribution")
    return GammaDist(ctx.shape, ctx.scale)


class BaseStockActor:
    """Order up to a fixed per-product level: ``q = max(s - position, 0)``.

    ``position`` is the on-hand for lost sales, the total units for the
    multi-slot environments.
    """

    def __init__(self, levels=None, level_fn: Callable[[RolloutContext], np.ndarray] | None = None,
                 position: str = "total"):
        self.fixed = None if levels is None else np.asarray(levels, dtype=np.float64)
        self.level_fn = level_fn
        self.position = position
        self.levels = self.fixed

    def take(self, idx) -> "BaseStockActor":
        levels = None if self.fixed is None or self.fixed.ndim == 0 else self.fixed[idx]
        return BaseStockActor(self.fixed if levels is None else levels, self.level_fn, self.position)

    def reset(self, ctx: RolloutContext) -> None:
        if self.level_fn is not None:
            self.levels = np.asarray(self.level_fn(ctx), dtype=np.float64)
        elif self.fixed is None:
            raise ValueError("base-stock actor has no levels")

    def act(self, t: int, state: list) -> list:
        if self.position == "last":
            pos = state[-1]
        else:
            pos = state[0]
            for s in state[1:]:
                pos = pos + s
        return [np.maximum(self.levels - pos, 0.0)]


def omniscient_newsvendor() -> BaseStockActor:
    return BaseStockActor(level_fn=lambda ctx: newsvendor_level(ctx.econ, _true_dist(ctx)))


class NonOmniscientNewsvendor:
    """Refits a Gamma to the trailing window every period."""

    def __init__(self, mode: str = "standard"):
        self.mode = mode

    def reset(self, ctx: RolloutContext) -> None:
        self.ctx = ctx
        self.ratio = critical_ratio(ctx.econ, self.mode)

    def level(self, t: int) -> np.ndarray:
        return gamma_quantile(self.ratio, fit_gamma_moments(self.ctx.window(t)))

    def act(self, t: int, state: list) -> list:
        return [np.maximum(self.level(t) - state[0], 0.0)]


def leadtime_base_stock_actor(L: int) -> BaseStockActor:
    return BaseStockActor(level_fn=lambda ctx: leadtime_base_stock(ctx.econ, _true_dist(ctx), L))


class VectorBaseStockActor:
    def __init__(self, L: int, levels: np.ndarray | None = None):
        self.L = L
        self.fixed = levels

    def take(self, idx) -> "VectorBaseStockActor":
        levels = self.fixed
        if levels is not None and np.ndim(levels) == 2:
            levels = np.asarray(levels)[:, idx]
        return VectorBaseStockActor(self.L, levels)

    def reset(self, ctx: RolloutContext) -> None:
        if self.fixed is not None:
            self.levels = np.asarray(self.fixed, dtype=np.float64)
        else:
            self.levels = leadtime_levels(ctx.econ, _true_dist(ctx), self.L)

    def act(self, t: int, state: list) -> list:
        return [vector_base_stock_order(self.levels, state)]


def perishable_standard_actor() -> BaseStockActor:
    return BaseStockActor(
        level_fn=lambda ctx: newsvendor_level(ctx.econ, _true_dist(ctx)), position="last"
    )


class SingleIndexDualActor:
    def __init__(self, s_e=None, s_r=None, demand_mode: str = "backlog", L_e: int = 0):
        self.s_e_fixed, self.s_r_fixed = s_e, s_r
        self.demand_mode = demand_mode
        self.L_e = L_e

    def take(self, idx) -> "SingleIndexDualActor":
        cut = lambda v: v if v is None or np.ndim(v) == 0 else np.asarray(v)[idx]  # noqa: E731
        return SingleIndexDualActor(cut(self.s_e_fixed), cut(self.s_r_fixed), self.demand_mode, self.L_e)

    def reset(self, ctx: RolloutContext) -> None:
        self.s_e = (
            fukuda_expedited_level(ctx.econ, _true_dist(ctx), self.L_e, self.demand_mode)
            if self.s_e_fixed is None
            else np.asarray(self.s_e_fixed, dtype=np.float64)
        )
        if self.s_r_fixed is None:
            raise ValueError("regular level must be set (see optimize_regular_level)")
        self.s_r = np.maximum(np.asarray(self.s_r_fixed, dtype=np.float64), self.s_e)

    def act(self, t: int, state: list) -> list:
        q_e, q_r = single_index_dual(self.s_e, self.s_r, state)
        return [q_e, q_r]


class IntervalStockActor:
    """Order up to ``s_low``, return down to ``s_high``."""

    def __init__(self, s_low=None, s_high=None):
        self.fixed = (s_low, s_high)

    def take(self, idx) -> "IntervalStockActor":
        cut = lambda v: v if v is None or np.ndim(v) == 0 else np.asarray(v)[idx]  # noqa: E731
        return IntervalStockActor(cut(self.fixed[0]), cut(self.fixed[1]))

    def reset(self, ctx: RolloutContext) -> None:
        if self.fixed[0] is not None:
            self.s_low = np.asarray(self.fixed[0], dtype=np.float64)
            self.s_high = np.asarray(self.fixed[1], dtype=np.float64)
            return
        dist = _true_dist(ctx)
        econ = ctx.econ
        self.s_low = newsvendor_level(econ, dist)
        c_u = econ.p - econ.r + econ.b
        self.s_high = np.maximum(gamma_quantile(c_u / (c_u + econ.h), dist), self.s_low)

    def act(self, t: int, state: list) -> list:
        y = state[0]
        return [np.maximum(self.s_low - y, 0.0), np.maximum(y - self.s_high, 0.0)]


# ---------------------------------------------------------------- searches


def average_reward_closure(spec: EnvSpec, ctx: RolloutContext, make_actor: Callable[[np.ndarray], object],
                           burn_in: int = 20, T: int | None = None):
    """Map a vector of per-product levels to per-product average evaluation reward."""
    T = ctx.T if T is None else T

    def f(levels: np.ndarray) -> np.ndarray:
        state = init_endogenous(spec, ctx.window(0), None, "zero")
        res = rollout(spec, make_actor(levels), ctx, state, T, terminal=False, record=True)
        return res.rewards[burn_in:].mean(axis=0)

    return f


def perishable_best_levels(spec: EnvSpec, ctx: RolloutContext, burn_in: int = 20, **kw) -> np.ndarray:
    upper = newsvendor_level(ctx.econ, _true_dist(ctx))
    f = average_reward_closure(spec, ctx, lambda s: BaseStockActor(s, position="last"), burn_in)
    return best_base_stock(f, upper, 0.0, **kw)


def optimize_regular_level(spec: EnvSpec, ctx: RolloutContext, burn_in: int = 20, **kw):
    """Expedited level in closed form, regular level by golden section."""
    dist = _true_dist(ctx)
    s_e = fukuda_expedited_level(ctx.econ, dist, spec.L_e, spec.demand_mode)
    hi_ratio = np.maximum(critical_ratio(ctx.econ, "standard") if spec.demand_mode == "lost_sales"
                          else 0.0, 0.999)
    hi_ratio = 1.0 - 0.1 * (1.0 - hi_ratio)
    upper = np.maximum(gamma_quantile(hi_ratio, dist.sum_of(spec.L_r + 1)), s_e)
    f = average_reward_closure(
        spec, ctx, lambda s_r: SingleIndexDualActor(s_e, s_r, spec.demand_mode, spec.L_e), burn_in
    )
    s_r = golden_section_max(f, s_e, upper, **kw)
    return s_e, s_r
