"""Policy evaluation, service levels, probing and calibration metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import Dataset
from .envs import EnvSpec, init_endogenous
from .rollout import RolloutContext, rollout
from .trainer import StructuralConstraints


@dataclass
class EvalProtocol:
    T_eval: int = 520
    burn_in: int = 20
    n_products: int = 100_000

    def __post_init__(self):
        if not 0 <= self.burn_in < self.T_eval:
            raise ValueError("burn-in must be shorter than the evaluation horizon")


@dataclass
class EvalResult:
    mean_reward: float
    per_product: np.ndarray
    service: dict
    extra: dict = field(default_factory=dict)


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def evaluate(actor, spec: EnvSpec, data: Dataset | RolloutContext, protocol: EvalProtocol = EvalProtocol(),
             chunk: int = 1000, keep_rollout: bool = False) -> EvalResult:
    """Average reward after burn-in from a zero state, no terminal salvage.

    Actors holding fixed per-product levels expose ``take(idx)`` and are
    sliced to each chunk.
    """
    n = data.B if isinstance(data, RolloutContext) else len(data)
    T = protocol.T_eval
    per_product = np.empty(n)
    demand_parts, avail_parts, rollouts = [], [], []
    for idx in _chunks(n, chunk):
        ctx = _subset(data, spec, idx)
        if ctx.T < T:
            raise ValueError(f"evaluation traces cover {ctx.T} periods, {T} needed")
        state = init_endogenous(spec, ctx.window(0), None, "zero")
        part = actor.take(idx) if hasattr(actor, "take") and len(idx) < n else actor
        res = rollout(spec, part, ctx, state, T, terminal=False, record=True)
        per_product[idx] = res.rewards[protocol.burn_in :].mean(axis=0)
        demand_parts.append(res.demand[protocol.burn_in :])
        avail_parts.append(res.available[protocol.burn_in :])
        if keep_rollout:
            rollouts.append(res)
    service = service_levels(np.concatenate(demand_parts, axis=1), np.concatenate(avail_parts, axis=1))
    result = EvalResult(float(per_product.mean()), per_product, service)
    if keep_rollout:
        result.extra["rollouts"] = rollouts
    return result


def _subset(data, spec: EnvSpec, idx) -> RolloutContext:
    if isinstance(data, Dataset):
        return data.context(spec, idx)
    take = lambda v: None if v is None else v[idx]  # noqa: E731
    return replace(
        data,
        demand=data.demand[idx],
        econ=data.econ.take(idx),
        static=take(data.static),
        features=take(data.features),
        shape=take(data.shape),
        scale=take(data.scale),
        product_ids=take(data.product_ids),
    )


def service_levels(demand: np.ndarray, available: np.ndarray) -> dict:
    """Type 1 (alpha) and type 2 (beta) service levels over all product-periods.

    ``alpha_d`` weights each product-period by its demand. The fill rate
    ``beta`` pools unmet over total demand and therefore already weights by
    demand, so ``beta_d`` equals ``beta``.
    """
    d = np.asarray(demand, dtype=np.float64)
    a = np.asarray(available, dtype=np.float64)
    covered = d <= a
    short = np.maximum(d - a, 0.0)
    total = d.sum()
    alpha = float(covered.mean()) if covered.size else 1.0
    if total > 0:
        alpha_d = float((d * covered).sum() / total)
        beta = float(1.0 - short.sum() / total)
        undefined = False
    else:
        alpha_d, beta, undefined = 1.0, 1.0, True
    return {"alpha": alpha, "alpha_d": alpha_d, "beta": beta, "beta_d": beta, "beta_undefined": undefined}


def gap(a: float, b: float) -> float:
    """Relative difference ``(a - b) / b``."""
    return (a - b) / b


def paired_difference(a: np.ndarray, b: np.ndarray) -> dict:
    """Mean and standard error of per-product reward differences ``a - b``."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    n = diff.size
    se = float(diff.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    mean = float(diff.mean())
    return {"mean": mean, "stderr": se, "t": mean / se if se and se > 0 else float("nan"), "n": n}


def write_eval_csv(path, policy_name: str, product_ids, per_product: np.ndarray, service: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "product_id", "avg_reward", "alpha", "alpha_d", "beta", "beta_d"])
        for pid, r in zip(product_ids, per_product):
            w.writerow([policy_name, pid, repr(float(r)), service["alpha"], service["alpha_d"],
                        service["beta"], service["beta_d"]])


# ---------------------------------------------------------------- probing


@dataclass
class ProbeGrid:
    """Grid over one or two state slots for a single product at period ``t``.

    ``axes`` pairs a slot index with the values it takes; other slots keep
    their value from ``fixed`` (zeros by default).
    """

    product: int
    t: int
    axes: list[tuple[int, np.ndarray]]
    fixed: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("probe grids vary one or two state slots")
        self.axes = [(int(k), np.asarray(v, dtype=np.float64)) for k, v in self.axes]
        for _, v in self.axes:
            if v.ndim != 1 or v.size == 0:
                raise ValueError("each probe axis needs a nonempty 1-d value list")
            if v.size > 1 and np.any(np.diff(v) <= 0):
                raise ValueError("probe steps must be positive")


def _replicate(ctx: RolloutContext, product: int, n: int) -> RolloutContext:
    return _subset(ctx, None, np.full(n, product))


def probe_grid(actor, spec: EnvSpec, ctx: RolloutContext, grid: ProbeGrid) -> np.ndarray:
    """Actions over the grid; shape (n1[, n2], A)."""
    E = spec.endo_dim
    for k, _ in grid.axes:
        if not 0 <= k < E:
            raise IndexError(f"state slot {k} out of range for {E}-slot state")
    mesh = np.meshgrid(*[v for _, v in grid.axes], indexing="ij")
    shape = mesh[0].shape
    G = mesh[0].size
    fixed = np.zeros(E) if grid.fixed is None else np.asarray(grid.fixed, dtype=np.float64)
    state = [np.full(G, fixed[k]) for k in range(E)]
    for (k, _), m in zip(grid.axes, mesh):
        state[k] = m.ravel().copy()
    sub = _replicate(ctx, grid.product, G)
    if hasattr(actor, "take"):
        actor = actor.take(np.full(G, grid.product))
    actor.reset(sub)
    actions = actor.act(grid.t, state)
    out = np.stack([np.broadcast_to(np.asarray(getattr(a, "value", a)), (G,)) for a in actions], axis=-1)
    return out.reshape(shape + (len(actions),))


def probe_order_up_to(actor, spec: EnvSpec, ctx: RolloutContext, t: int) -> np.ndarray:
    """Order quantity at zero inventory for every product in ``ctx`` at period ``t``."""
    actor.reset(ctx)
    state = [np.zeros(ctx.B) for _ in range(spec.endo_dim)]
    a = actor.act(t, state)[0]
    return np.asarray(getattr(a, "value", a), dtype=np.float64).copy()


def grid_slope_violations(actions: np.ndarray, step: float, lo: float = -1.05, hi: float = 0.05) -> np.ndarray:
    """Boolean mask of grid segments whose slope falls outside ``[lo, hi]`` (1-d grids)."""
    slopes = np.diff(actions, axis=0) / step
    return (slopes < lo) | (slopes > hi)


def calibration_report(actor, spec: EnvSpec, ctx: RolloutContext, t: int, states: list,
                       constraints: StructuralConstraints, delta: float = 1.0, mode: str = "finite_diff") -> dict:
    """Mean squared violation per constraint at the given states.

    ``states`` is a list of slot vectors of length ``ctx.B`` (one state per
    product row). Slopes use the same estimator as the training penalty.
    """
    actor.reset(ctx)
    base = [np.asarray(s, dtype=np.float64) for s in states]
    slopes = []
    if mode == "exact":
        for v in constraints.directions:
            g = actor.directional_derivative(t, base, v)
            slopes.append(np.asarray(getattr(g, "value", g))[:, 0])
    else:
        q0 = np.asarray(getattr(a := actor.act(t, base)[0], "value", a))
        for v in constraints.directions:
            moved = [s + delta * v[k] for k, s in enumerate(base)]
            q1 = actor.act(t, moved)[0]
            slopes.append((np.asarray(getattr(q1, "value", q1)) - q0) / delta)
    report = {
        "upper": np.array([np.mean(np.maximum(slopes[k], 0.0) ** 2) for k in constraints.upper]),
        "lower": np.array([np.mean(np.maximum(-slopes[k] - 1.0, 0.0) ** 2) for k in constraints.lower]),
        "ordering": np.array([np.mean(np.maximum(slopes[i] - slopes[j], 0.0) ** 2) for i, j in constraints.ordering]),
    }
    return report
