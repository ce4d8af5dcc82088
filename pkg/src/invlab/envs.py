"""The five differentiable inventory simulators.

Endogenous state is carried as a list of per-slot batch vectors so that every
transition is a handful of elementwise autodiff ops. All functions accept
plain numpy arrays (fast evaluation) or traced :class:`~invlab.autodiff.Array`
values (training) interchangeably.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import _kernels
from . import autodiff as ad

KINDS = ("lost_sales", "lead_time", "perishable", "dual_sourcing", "returns")
INIT_RULES = ("zero", "uniform_demand_scaled", "returns_overstock")


@dataclass(frozen=True)
class EnvSpec:
    kind: str = "lost_sales"
    L: int = 1
    m: int = 2
    L_e: int = 0
    L_r: int = 1
    demand_mode: str = "lost_sales"
    gamma: float = 1.0
    terminal: str = "salvage"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        if self.L < 1:
            raise ValueError("lead time L must be >= 1")
        if self.m < 2:
            raise ValueError("shelf life m must be >= 2")
        if not 0 <= self.L_e < self.L_r:
            raise ValueError("need 0 <= L_e < L_r")
        if self.demand_mode not in ("lost_sales", "backlog"):
            raise ValueError(f"unknown demand mode {self.demand_mode!r}")
        if self.demand_mode == "backlog" and self.kind != "dual_sourcing":
            raise ValueError("backlog mode is only defined for dual sourcing")
        if self.terminal not in ("salvage", "none"):
            raise ValueError(f"unknown terminal rule {self.terminal!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("discount must lie in (0, 1]")

    @property
    def endo_dim(self) -> int:
        return {
            "lost_sales": 1,
            "lead_time": self.L,
            "perishable": self.m - 1,
            "dual_sourcing": self.L_r,
            "returns": 1,
        }[self.kind]

    @property
    def action_dim(self) -> int:
        return 2 if self.kind in ("dual_sourcing", "returns") else 1

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class EconStatics:
    """Per-product economics; each field is a scalar or a batch vector."""

    p: np.ndarray | float
    c: np.ndarray | float
    h: np.ndarray | float
    b: np.ndarray | float
    c_e: np.ndarray | float = 0.0
    c_r: np.ndarray | float = 0.0
    r: np.ndarray | float = 0.0

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))

    def take(self, idx) -> "EconStatics":
        return EconStatics(**{f.name: _take(getattr(self, f.name), idx) for f in fields(self)})

    def as_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack the named fields as columns of a (B, len(names)) matrix."""
        cols = [np.atleast_1d(getattr(self, n)) for n in names]
        return np.stack(np.broadcast_arrays(*cols), axis=1)


def _take(v: np.ndarray, idx):
    return v if v.ndim == 0 else v[idx]


@dataclass
class StepInfo:
    """Plain-valued by-products of a step used for service metrics."""

    available: np.ndarray
    sales: np.ndarray
    shortage: np.ndarray
    perished: np.ndarray | float = 0.0
    extra: dict = field(default_factory=dict)


def _check_nonneg(*actions) -> None:
    for a in actions:
        if np.any(np.asarray(ad.value(a)) < 0):
            raise ValueError("order quantities must be nonnegative")


# ---------------------------------------------------------------- fused sell


def sell(avail, d, p, b, h):
    """Leftover ``max(a-d, 0)`` and reward ``p*min(d,a) - b*max(d-a,0) - h*max(a-d,0)``."""
    av = ad.value(avail)
    left, reward = _kernels.sell_forward(av, d, p, b, h)
    if not ad.is_traced(avail):
        return left, reward
    zero = np.zeros_like(left)
    left = ad.custom(left, (avail,), lambda g: (_kernels.sell_backward(g, zero, av, d, p, b, h),))
    reward = ad.custom(reward, (avail,), lambda g: (_kernels.sell_backward(zero, g, av, d, p, b, h),))
    return left, reward


def sell_backlog(avail, d, p, b, h):
    """Net stock ``a-d`` and reward ``p*d - b*max(d-a,0) - h*max(a-d,0)``."""
    av = ad.value(avail)
    net, reward = _kernels.sell_backlog_forward(av, d, p, b, h)
    if not ad.is_traced(avail):
        return net, reward
    zero = np.zeros_like(net)
    net = ad.custom(net, (avail,), lambda g: (_kernels.sell_backlog_backward(g, zero, av, d, p, b, h),))
    reward = ad.custom(reward, (avail,), lambda g: (_kernels.sell_backlog_backward(zero, g, av, d, p, b, h),))
    return net, reward


def _info(avail, d, perished=0.0) -> StepInfo:
    a = np.asarray(ad.value(avail), dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    return StepInfo(
        available=a,
        sales=np.clip(np.minimum(d, a), 0.0, None),
        shortage=np.maximum(d - a, 0.0),
        perished=np.asarray(ad.value(perished)),
    )


# ---------------------------------------------------------------- transitions


def step_lost_sales(y, q, d, econ: EconStatics, check: bool = True):
    if check:
        _check_nonneg(q)
    avail = ad.add(y, q)
    left, reward = sell(avail, d, econ.p, econ.b, econ.h)
    reward = ad.sub(reward, ad.mul(econ.c, q))
    return left, reward, _info(avail, d)


def step_lead_time(y: Sequence, q, d, econ: EconStatics, check: bool = True):
    if check:
        _check_nonneg(q)
    ext = list(y) + [q]
    left, reward = sell(ext[0], d, econ.p, econ.b, econ.h)
    reward = ad.sub(reward, ad.mul(econ.c, q))
    # with L = 1 the order itself is ext[1]
    new = [ad.add(left, ext[1])] + ext[2:]
    return new, reward, _info(ext[0], d)


def step_perishable(w: Sequence, q, d, econ: EconStatics, check: bool = True):
    """``w[k]`` holds units expiring within ``k+1`` periods (cumulative)."""
    if check:
        _check_nonneg(q)
        wv = np.stack(np.broadcast_arrays(*[ad.value(x) for x in w], d)[:-1])
        if np.any(np.diff(wv, axis=0) < -1e-9 * (1.0 + np.abs(wv[1:]))):
            raise ValueError("perishable state must be nondecreasing across shelf-life slots")
    ext = list(w) + [ad.add(w[-1], q)]
    avail = ext[-1]
    _, reward = sell(avail, d, econ.p, econ.b, econ.h)
    reward = ad.sub(reward, ad.mul(econ.c, q))
    sold = ad.minimum(avail, d)
    perished = ad.maximum(ad.sub(w[0], d), 0.0)
    gone = ad.add(sold, perished)
    new = [ad.maximum(ad.sub(ext[k + 1], gone), 0.0) for k in range(len(w))]
    return new, reward, _info(avail, d, perished)


def step_dual(y: Sequence, q_e, q_r, d, econ: EconStatics, L_e: int, demand_mode: str = "lost_sales",
              check: bool = True):
    if check:
        _check_nonneg(q_e, q_r)
    tilde = list(y)
    tilde[L_e] = ad.add(tilde[L_e], q_e)
    ext = tilde + [q_r]
    if demand_mode == "backlog":
        left, reward = sell_backlog(ext[0], d, econ.p, econ.b, econ.h)
    else:
        left, reward = sell(ext[0], d, econ.p, econ.b, econ.h)
    cost = ad.add(ad.mul(econ.c_r, q_r), ad.mul(econ.c_e, q_e))
    reward = ad.sub(reward, cost)
    new = [ad.add(left, ext[1])] + ext[2:]
    return new, reward, _info(ext[0], d)


def step_returns(y, q, q_r, d, econ: EconStatics, check: bool = True):
    if check:
        _check_nonneg(q, q_r)
    q_r = ad.minimum(q_r, y)
    stock = ad.add(y, q)
    avail = ad.sub(stock, q_r)
    zero = np.zeros_like(np.asarray(econ.b))
    left, reward = sell(avail, d, econ.p, zero, econ.h)
    lost = ad.maximum(ad.sub(d, stock), 0.0)
    reward = ad.sub(reward, ad.mul(econ.b, lost))
    reward = ad.add(reward, ad.mul(econ.r, q_r))
    reward = ad.sub(reward, ad.mul(econ.c, q))
    info = _info(avail, d)
    info.extra["returned"] = np.asarray(ad.value(q_r))
    return left, reward, info


def step(spec: EnvSpec, state: list, action: list, d, econ: EconStatics, check: bool = True):
    """Dispatch one period. ``state`` is a list of slot vectors, ``action`` a list of action vectors."""
    kind = spec.kind
    if kind == "lost_sales":
        y, reward, info = step_lost_sales(state[0], action[0], d, econ, check)
        return [y], reward, info
    if kind == "lead_time":
        return step_lead_time(state, action[0], d, econ, check)
    if kind == "perishable":
        return step_perishable(state, action[0], d, econ, check)
    if kind == "dual_sourcing":
        return step_dual(state, action[0], action[1], d, econ, spec.L_e, spec.demand_mode, check)
    y, reward, info = step_returns(state[0], action[0], action[1], d, econ, check)
    return [y], reward, info


# ---------------------------------------------------------------- boundary conditions


def total_units(spec: EnvSpec, state: list):
    if spec.kind == "perishable":
        return state[-1]
    total = state[0]
    for s in state[1:]:
        total = ad.add(total, s)
    return total


def terminal_reward(spec: EnvSpec, state: list, econ: EconStatics):
    """Salvage every unit on hand or in the pipeline at cost, unless disabled."""
    if spec.terminal == "none":
        return np.zeros(np.shape(ad.value(state[0])))
    return ad.mul(econ.c, total_units(spec, state))


def init_endogenous(spec: EnvSpec, window: np.ndarray, rng: np.random.Generator | None, rule: str) -> list:
    """Initial slot vectors from the demand ``window`` (B, H) preceding period 0."""
    window = np.atleast_2d(np.asarray(window, dtype=np.float64))
    B = window.shape[0]
    E = spec.endo_dim
    if rule == "zero":
        return [np.zeros(B) for _ in range(E)]
    if rng is None:
        raise ValueError(f"rule {rule!r} needs a random generator")
    if rule == "uniform_demand_scaled":
        slots = rng.uniform(0.0, 1.0, size=(E, B)) * (2.0 * window[:, -1])
        if spec.kind == "perishable":
            slots = np.cumsum(slots, axis=0)
        return list(slots)
    if rule == "returns_overstock":
        mu = window.mean(axis=1)
        y = rng.uniform(0.0, 1.0, size=B) * (20.0 * mu)
        return [y] + [np.zeros(B) for _ in range(E - 1)]
    raise ValueError(f"unknown initialization rule {rule!r}")


def default_init_rule(spec: EnvSpec) -> str:
    return "returns_overstock" if spec.kind == "returns" else "uniform_demand_scaled"
