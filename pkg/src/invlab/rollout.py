"""One rollout loop shared by training (traced) and evaluation (plain numpy)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import autodiff as ad
from .envs import EconStatics, EnvSpec, step, terminal_reward

STATIC_FIELDS = {
    "lost_sales": ("p", "c", "h", "b"),
    "lead_time": ("p", "c", "h", "b"),
    "perishable": ("p", "c", "h", "b"),
    "dual_sourcing": ("p", "c_e", "c_r", "h", "b"),
    "returns": ("p", "c", "h", "b", "r"),
}


@dataclass
class RolloutContext:
    """Exogenous data for a batch of products.

    ``demand[:, H + t]`` is the demand of period ``t``; columns ``0..H-1`` are
    the history preceding period 0.
    """

    demand: np.ndarray
    econ: EconStatics
    H: int
    static: np.ndarray | None = None
    features: np.ndarray | None = None
    shape: np.ndarray | None = None
    scale: np.ndarray | None = None
    product_ids: np.ndarray | None = None

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=np.float64)
        if self.demand.ndim != 2:
            raise ValueError("demand must be a (products, periods) matrix")
        if self.demand.shape[1] <= self.H:
            raise ValueError("trace must be longer than the history window")

    @property
    def B(self) -> int:
        return self.demand.shape[0]

    @property
    def T(self) -> int:
        return self.demand.shape[1] - self.H

    def window(self, t: int) -> np.ndarray:
        """The ``H`` demands preceding period ``t``."""
        return self.demand[:, t : t + self.H]

    def demand_at(self, t: int) -> np.ndarray:
        return self.demand[:, self.H + t]


def static_matrix(spec: EnvSpec, econ: EconStatics) -> np.ndarray:
    return econ.as_matrix(STATIC_FIELDS[spec.kind])


class Actor(Protocol):
    def reset(self, ctx: RolloutContext) -> None: ...

    def act(self, t: int, state: list) -> list: ...


@dataclass
class RolloutResult:
    returns: object
    penalty: object = 0.0
    rewards: np.ndarray | None = None
    actions: np.ndarray | None = None
    states: np.ndarray | None = None
    available: np.ndarray | None = None
    demand: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def rollout(
    spec: EnvSpec,
    actor: Actor,
    ctx: RolloutContext,
    state: list,
    T: int | None = None,
    *,
    terminal: bool = True,
    penalty: Callable[[int, list], object] | None = None,
    record: bool = False,
    check: bool = False,
) -> RolloutResult:
    """Roll ``actor`` through ``T`` periods.

    ``returns`` is the per-product discounted sum of rewards plus the terminal
    salvage (a traced vector when the actor is traced). With ``record`` the
    plain per-period rewards, actions, pre-step states and pre-demand
    available stock are kept as (T, B, ...) arrays.
    """
    T = ctx.T if T is None else T
    if T > ctx.T:
        raise ValueError(f"trace covers {ctx.T} periods, {T} requested")
    actor.reset(ctx)
    total = 0.0
    plain = 0.0
    pen = 0.0
    weight = 1.0
    if record:
        B = ctx.B
        rewards = np.empty((T, B))
        actions = np.empty((T, B, spec.action_dim))
        states = np.empty((T, B, spec.endo_dim))
        available = np.empty((T, B))
    for t in range(T):
        action = actor.act(t, state)
        if penalty is not None:
            pen = ad.add(pen, penalty(t, state))
        d = ctx.demand_at(t)
        if record:
            for k, s in enumerate(state):
                states[t, :, k] = ad.value(s)
            for k, a in enumerate(action):
                actions[t, :, k] = ad.value(a)
        state, reward, info = step(spec, state, action, d, ctx.econ, check)
        if record:
            rewards[t] = ad.value(reward)
            available[t] = info.available
        plain = plain + ad.value(reward)
        total = ad.add(total, reward if weight == 1.0 else ad.mul(weight, reward))
        weight *= spec.gamma
    if terminal:
        total = ad.add(total, ad.mul(weight, terminal_reward(spec, state, ctx.econ)))
    result = RolloutResult(total, pen)
    result.extra["reward_sum"] = plain
    if record:
        result.rewards = rewards
        result.actions = actions
        result.states = states
        result.available = available
        result.demand = ctx.demand[:, ctx.H : ctx.H + T].T.copy()
        result.extra["final_state"] = [np.asarray(ad.value(s)) for s in state]
    return result
