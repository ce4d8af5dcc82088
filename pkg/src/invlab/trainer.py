"""End-to-end policy training by backpropagating through the simulator."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .datagen import Dataset
from .envs import EnvSpec, default_init_rule, init_endogenous
from .optim import AdamState, adam_step
from .policy import NeuralActor, PolicyConfig, QuantileForecaster, init_params, save_checkpoint
from .rollout import rollout


@dataclass
class PenaltyConfig:
    lam: float = 0.0
    mode: str = "finite_diff"
    delta: float = 1.0
    families: tuple[str, ...] = ("upper", "lower", "ordering")

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty weight must be nonnegative")
        if self.delta <= 0:
            raise ValueError("finite-difference step must be positive")
        if self.mode not in ("finite_diff", "exact"):
            raise ValueError(f"unknown penalty mode {self.mode!r}")
        self.families = tuple(self.families)
        unknown = set(self.families) - {"upper", "lower", "ordering"}
        if unknown:
            raise ValueError(f"unknown constraint families {sorted(unknown)}")

    @property
    def active(self) -> bool:
        return self.lam > 0


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 2500
    lr: float = 1e-3
    T: int = 100
    init_rule: str | None = None
    terminal: bool = True
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    lam_schedule: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.penalty is None:
            self.penalty = PenaltyConfig()
        elif isinstance(self.penalty, dict):
            self.penalty = PenaltyConfig(**self.penalty)
        if self.epochs < 0 or self.batch_size < 1 or self.T < 1:
            raise ValueError("epochs must be >= 0, batch size and T >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("lam_schedule")
        return d


@dataclass
class TrainingCurve:
    epoch: list[int] = field(default_factory=list)
    mean_reward: list[float] = field(default_factory=list)
    mean_penalty: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epoch)

    def append(self, epoch, reward, penalty, seconds) -> None:
        self.epoch.append(epoch)
        self.mean_reward.append(float(reward))
        self.mean_penalty.append(float(penalty))
        self.seconds.append(float(seconds))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mean_reward", "mean_penalty", "seconds"])
            for row in zip(self.epoch, self.mean_reward, self.mean_penalty, self.seconds):
                w.writerow([row[0]] + [repr(v) for v in row[1:]])


# ---------------------------------------------------------------- structure


@dataclass
class StructuralConstraints:
    """Directional-derivative inequalities on the order quantity.

    ``directions[k]`` is a perturbation of the state slots; ``g_k`` denotes the
    derivative of the order along it. ``upper`` lists k with ``g_k <= 0``,
    ``lower`` lists k with ``g_k >= -1`` and ``ordering`` pairs (i, j) with
    ``g_i <= g_j``.
    """

    directions: np.ndarray
    upper: list[int]
    lower: list[int]
    ordering: list[tuple[int, int]]

    def __post_init__(self):
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        n = self.directions.shape[0]
        idx = list(self.upper) + list(self.lower) + [k for pair in self.ordering for k in pair]
        if any(not 0 <= k < n for k in idx):
            raise IndexError("constraint references a direction that does not exist")


def structural_constraints(spec: EnvSpec) -> StructuralConstraints:
    E = spec.endo_dim
    if spec.kind in ("lost_sales", "lead_time"):
        directions = np.eye(E)
    elif spec.kind == "perishable":
        # one unit of inventory with k+1 periods of life left raises every
        # cumulative slot from k upward
        directions = np.triu(np.ones((E, E)))
    else:
        raise ValueError(f"no structural constraint set for {spec.kind!r}")
    # later slots hold newer inventory, which the order must react to at least as strongly
    ordering = [(i, j) for i in range(E) for j in range(i)]
    return StructuralConstraints(directions, list(range(E)), list(range(E)), ordering)


def constraint_slopes(actor: NeuralActor, t: int, state: list, constraints: StructuralConstraints,
                      mode: str = "finite_diff", delta: float = 1.0) -> list:
    """Estimated slopes ``g_k`` (B,) at the (detached) visited state."""
    base = [np.asarray(ad.value(s)) for s in state]
    slopes = []
    if mode == "exact":
        for v in constraints.directions:
            g = actor.directional_derivative(t, base, v)
            slopes.append(ad.reshape(g, (actor.B,)))
        return slopes
    q0 = actor.act(t, base)[0]
    for v in constraints.directions:
        moved = [s + delta * v[k] for k, s in enumerate(base)]
        q1 = actor.act(t, moved)[0]
        slopes.append(ad.mul(ad.sub(q1, q0), 1.0 / delta))
    return slopes


def violation_terms(slopes: list, constraints: StructuralConstraints, families=("upper", "lower", "ordering")) -> dict:
    """Squared hinge violations per family, each summed over constraints as (B,)."""
    out = {}
    if "upper" in families:
        out["upper"] = _sum_terms(ad.relu(slopes[k]) for k in constraints.upper)
    if "lower" in families:
        out["lower"] = _sum_terms(ad.relu(ad.sub(-1.0, slopes[k])) for k in constraints.lower)
    if "ordering" in families and constraints.ordering:
        out["ordering"] = _sum_terms(ad.relu(ad.sub(slopes[i], slopes[j])) for i, j in constraints.ordering)
    return out


def _sum_terms(hinges) -> object:
    total = 0.0
    for h in hinges:
        total = ad.add(total, ad.mul(h, h))
    return total


def structural_penalty(actor: NeuralActor, t: int, state: list, constraints: StructuralConstraints,
                       cfg: PenaltyConfig):
    """Sum over the batch and all active constraints of the squared violations (unweighted)."""
    slopes = constraint_slopes(actor, t, state, constraints, cfg.mode, cfg.delta)
    terms = violation_terms(slopes, constraints, cfg.families)
    total = 0.0
    for v in terms.values():
        total = ad.add(total, ad.sum(v) if np.ndim(ad.value(v)) else v)
    return total


# ---------------------------------------------------------------- training


def _traced(params: dict) -> dict:
    return {k: ad.Array(v, requires_grad=True, name=k) for k, v in params.items()}


def batch_objective(spec: EnvSpec, data: Dataset, idx, params: dict, policy_cfg: PolicyConfig,
                    cfg: TrainConfig, rng: np.random.Generator, lam: float | None = None):
    """Traced objective ``sum_i J_i - lam * penalty`` on one mini-batch.

    Returns (objective, plain reward sum per product, plain penalty).
    """
    ctx = data.context(spec, idx)
    rule = cfg.init_rule or default_init_rule(spec)
    state = init_endogenous(spec, ctx.window(0), rng, rule)
    actor = NeuralActor(params, policy_cfg, spec)
    lam = cfg.penalty.lam if lam is None else lam
    pen_fn = None
    if lam > 0:
        constraints = structural_constraints(spec)
        pen_fn = lambda t, s: structural_penalty(actor, t, s, constraints, cfg.penalty)  # noqa: E731
    res = rollout(spec, actor, ctx, state, cfg.T, terminal=cfg.terminal, penalty=pen_fn)
    obj = ad.sum(res.returns)
    if lam > 0:
        obj = ad.sub(obj, ad.mul(lam, res.penalty))
    return obj, res.extra["reward_sum"], float(np.asarray(ad.value(res.penalty)))


def train(spec: EnvSpec, data: Dataset, policy_cfg: PolicyConfig, cfg: TrainConfig,
          params: dict | None = None, log: Callable[[str], None] | None = None):
    """Train a control policy; returns (params, curve)."""
    if data.T < cfg.T:
        raise ValueError(f"training traces cover {data.T} periods, {cfg.T} needed")
    if data.H != policy_cfg.H:
        raise ValueError("dataset window differs from the policy window")
    n = len(data)
    bs = min(cfg.batch_size, n)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(policy_cfg, cfg.seed) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState.for_params(params, lr=cfg.lr)
    curve = TrainingCurve()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lam = cfg.lam_schedule(epoch) if cfg.lam_schedule is not None else cfg.penalty.lam
        perm = rng.permutation(n)
        reward_total = 0.0
        pen_total = 0.0
        for bi, start in enumerate(range(0, n, bs)):
            idx = perm[start : start + bs]
            leaves = _traced(params)
            with ad.Tape() as tape:
                obj, reward_sum, pen = batch_objective(spec, data, idx, leaves, policy_cfg, cfg, rng, lam)
                loss = ad.neg(obj)
            if not np.isfinite(ad.value(loss)):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = tape.backward(loss, list(leaves.values()))
            params, state = adam_step(params, dict(zip(leaves, grads)), state)
            reward_total += float(np.sum(reward_sum))
            pen_total += pen
        seconds = time.perf_counter() - t0
        curve.append(epoch, reward_total / (n * cfg.T), pen_total / (n * cfg.T), seconds)
        if log is not None:
            log(f"epoch {epoch}: reward {curve.mean_reward[-1]:.3f} penalty {curve.mean_penalty[-1]:.4g} "
                f"({seconds:.2f}s)")
        if cfg.checkpoint_every and cfg.checkpoint_path and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(cfg.checkpoint_path, params, policy_cfg, {"epoch": epoch + 1})
    return params, curve


# ---------------------------------------------------------------- forecaster


def quantile_loss(d, d_hat, q):
    """Pinball loss ``q (d - d_hat)^+ + (1 - q) (d_hat - d)^+``."""
    diff = ad.sub(d, d_hat)
    return ad.add(ad.mul(q, ad.relu(diff)), ad.mul(ad.sub(1.0, q), ad.relu(ad.neg(diff))))


def train_forecaster(data: Dataset, policy_cfg: PolicyConfig, cfg: TrainConfig, params: dict | None = None,
                     T: int | None = None, log: Callable[[str], None] | None = None):
    """Fit the quantile head by minimizing the total pinball loss over ``T`` periods."""
    if policy_cfg.head_mode != "quantiles":
        raise ValueError("forecaster training needs a quantile head")
    T = data.T if T is None else T
    if T > data.T:
        raise ValueError(f"training traces cover {data.T} periods, {T} needed")
    n = len(data)
    bs = min(cfg.batch_size, n)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(policy_cfg, cfg.seed) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState.for_params(params, lr=cfg.lr)
    Q = np.asarray(policy_cfg.quantile_levels)
    spec = EnvSpec("lost_sales")
    curve = TrainingCurve()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = perm[start : start + bs]
            ctx = data.context(spec, idx)
            target = ctx.demand[:, ctx.H : ctx.H + T, None]  # (B, T, 1)
            leaves = _traced(params)
            with ad.Tape() as tape:
                preds = QuantileForecaster(leaves, policy_cfg).predict_periods(ctx, T)
                loss = ad.sum(quantile_loss(target, preds, Q))
            if not np.isfinite(ad.value(loss)):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            grads = tape.backward(loss, list(leaves.values()))
            params, state = adam_step(params, dict(zip(leaves, grads)), state)
            total += float(ad.value(loss))
        curve.append(epoch, -total / (n * T), 0.0, time.perf_counter() - t0)
        if log is not None:
            log(f"epoch {epoch}: pinball {total / (n * T):.4f}")
    return params, curve
