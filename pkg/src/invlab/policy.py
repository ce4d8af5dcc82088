"""Policy network: causal dilated CNN encoder feeding an MLP head."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .rollout import RolloutContext, static_matrix

Params = dict[str, np.ndarray]


@dataclass
class PolicyConfig:
    H: int = 32
    ts_features: int = 1
    static_features: int = 4
    endo_dim: int = 1
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16)
    kernel_size: int = 2
    cnn_channels: int = 8
    mlp_layers: int = 2
    mlp_width: int = 32
    action_dim: int = 1
    head_mode: str = "control"
    quantile_levels: tuple[float, ...] | None = None
    head_bias: float = 1.0

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.quantile_levels is not None:
            self.quantile_levels = tuple(float(q) for q in self.quantile_levels)
        self.validate()

    def validate(self) -> None:
        if self.H < 1 or self.ts_features < 1 or self.cnn_channels < 1:
            raise ValueError("H, ts_features and cnn_channels must be positive")
        if self.mlp_layers < 1 or self.mlp_width < 1:
            raise ValueError("the MLP needs at least one layer of positive width")
        if self.kernel_size < 1 or not self.dilations or min(self.dilations) < 1:
            raise ValueError("kernel width and dilations must be >= 1")
        if max(self.dilations) * (self.kernel_size - 1) >= self.H:
            raise ValueError("largest dilated kernel span must be shorter than the window")
        if self.head_mode not in ("control", "quantiles"):
            raise ValueError(f"unknown head mode {self.head_mode!r}")
        if self.head_mode == "quantiles":
            q = self.quantile_levels
            if not q or any(not 0 < v < 1 for v in q) or any(b <= a for a, b in zip(q, q[1:])):
                raise ValueError("quantile levels must be strictly increasing inside (0, 1)")
        elif self.action_dim < 1:
            raise ValueError("action_dim must be positive")

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)

    @property
    def out_dim(self) -> int:
        return len(self.quantile_levels) if self.head_mode == "quantiles" else self.action_dim

    @property
    def mlp_in(self) -> int:
        return self.cnn_channels + self.static_features + self.endo_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        return cls(**d)


def param_shapes(config: PolicyConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    cin = config.ts_features
    for i in range(len(config.dilations)):
        shapes[f"conv{i}.w"] = (config.cnn_channels, cin, config.kernel_size)
        shapes[f"conv{i}.b"] = (config.cnn_channels,)
        cin = config.cnn_channels
    fan = config.mlp_in
    for j in range(config.mlp_layers):
        shapes[f"mlp{j}.w"] = (fan, config.mlp_width)
        shapes[f"mlp{j}.b"] = (config.mlp_width,)
        fan = config.mlp_width
    shapes["head.w"] = (fan, config.out_dim)
    shapes["head.b"] = (config.out_dim,)
    return shapes


def _fan_in(name: str, shape: tuple[int, ...], shapes: dict) -> int:
    w = shapes[name[:-1] + "w"]
    return int(np.prod(w[1:])) if name.startswith("conv") else w[0]


def init_params(config: PolicyConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    shapes = param_shapes(config)
    params = {}
    for name, shape in shapes.items():
        a = 1.0 / np.sqrt(_fan_in(name, shape, shapes))
        params[name] = rng.uniform(-a, a, size=shape)
    if config.head_mode == "control":
        params["head.b"] = np.full(shapes["head.b"], config.head_bias)
    return params


def param_count(config: PolicyConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


# ---------------------------------------------------------------- network pieces


def encode(params, config: PolicyConfig, x):
    """Run the conv stack over channels-last ``x`` (B, N, F); returns (B, N, C)."""
    h = x
    for i, dil in enumerate(config.dilations):
        h = ad.causal_conv_channels_last(h, params[f"conv{i}.w"], params[f"conv{i}.b"], dil)
        h = ad.elu(h)
    return h


def _split_first_layer(params, config: PolicyConfig):
    w = params["mlp0.w"]
    c, s = config.cnn_channels, config.static_features
    return ad.getitem(w, slice(0, c)), ad.getitem(w, slice(c, c + s)), ad.getitem(w, slice(c + s, None))


def _mlp_tail(params, config: PolicyConfig, h):
    for j in range(1, config.mlp_layers):
        h = ad.dense(h, params[f"mlp{j}.w"], params[f"mlp{j}.b"], "elu")
    return ad.dense(h, params["head.w"], params["head.b"])


def forward(params, config: PolicyConfig, x_ts, s, y):
    """Actions (B, A) from windows ``x_ts`` (B, F, H), statics (B, S) and state (B, E)."""
    if config.head_mode != "control":
        raise ValueError("forward is for control heads; use forward_quantiles")
    return ad.relu(_forward_raw(params, config, x_ts, s, y))


def forward_quantiles(params, config: PolicyConfig, x_ts):
    if config.head_mode != "quantiles":
        raise ValueError("forward_quantiles needs a quantile head")
    return _forward_raw(params, config, x_ts, None, None)


def _forward_raw(params, config, x_ts, s, y):
    xv = ad.value(x_ts)
    if xv.ndim != 3 or xv.shape[1] != config.ts_features:
        raise ad.ShapeError(f"expected x_ts of shape (B, {config.ts_features}, H), got {xv.shape}")
    B = xv.shape[0]
    e = ad.getitem(encode(params, config, ad.transpose(x_ts, (0, 2, 1))), (slice(None), -1))
    parts = [e]
    for arr, n in ((s, config.static_features), (y, config.endo_dim)):
        if n:
            if arr is None or ad.value(arr).shape != (B, n):
                raise ad.ShapeError(f"expected an input of shape ({B}, {n})")
            parts.append(arr)
    z = ad.concat(parts, axis=1) if len(parts) > 1 else e
    h = ad.dense(z, params["mlp0.w"], params["mlp0.b"], "elu")
    return _mlp_tail(params, config, h)


def trace_inputs(ctx: RolloutContext, config: PolicyConfig) -> np.ndarray:
    """Time-series channels-last (B, H+T, F): demand first, then any extra features."""
    chans = [ctx.demand[:, :, None]]
    if ctx.features is not None:
        chans.append(np.asarray(ctx.features, dtype=np.float64).transpose(0, 2, 1))
    x = np.ascontiguousarray(np.concatenate(chans, axis=2))
    if x.shape[2] != config.ts_features:
        raise ValueError(f"context provides {x.shape[2]} series channels, policy expects {config.ts_features}")
    return x


def encode_periods(params, config: PolicyConfig, x_full, T: int):
    """Encoder output for periods 0..T-1 as (B, T, C).

    When the receptive field fits inside the window a single pass over the
    whole trace gives the same values as encoding each window separately.
    """
    H = config.H
    if config.receptive_field <= H:
        enc = encode(params, config, x_full)
        return ad.getitem(enc, (slice(None), slice(H - 1, H - 1 + T)))
    xv = np.asarray(x_full)
    B, _, F = xv.shape
    windows = np.stack([xv[:, t : t + H] for t in range(T)], axis=1)  # (B, T, H, F)
    enc = encode(params, config, windows.reshape(B * T, H, F))
    last = ad.getitem(enc, (slice(None), -1))
    return ad.reshape(last, (B, T, config.cnn_channels))


class NeuralActor:
    """Control policy as an actor; traced when ``params`` hold traced arrays."""

    def __init__(self, params, config: PolicyConfig, spec):
        if config.head_mode != "control":
            raise ValueError("NeuralActor needs a control head")
        if config.endo_dim != spec.endo_dim or config.action_dim != spec.action_dim:
            raise ValueError("policy dimensions do not match the environment")
        self.params = params
        self.config = config
        self.spec = spec
        self.w_e, self.w_s, self.w_y = _split_first_layer(params, config)

    def reset(self, ctx: RolloutContext) -> None:
        if ctx.H != self.config.H:
            raise ValueError(f"context window {ctx.H} != policy window {self.config.H}")
        x = trace_inputs(ctx, self.config)
        enc = encode_periods(self.params, self.config, x, ctx.T)
        static = ctx.static if ctx.static is not None else static_matrix(self.spec, ctx.econ)
        if static.shape[1] != self.config.static_features:
            raise ValueError("static feature count does not match the policy")
        fixed = ad.add(ad.matmul(static, self.w_s), self.params["mlp0.b"])
        self.base = ad.add(ad.matmul(enc, self.w_e), ad.reshape(fixed, (ctx.B, 1, -1)))  # (B, T, W)
        self.B = ctx.B

    def _state_matrix(self, state: list):
        cols = [ad.reshape(s, (self.B, 1)) if ad.is_traced(s) else np.reshape(np.broadcast_to(s, (self.B,)), (self.B, 1))
                for s in state]
        return ad.concat(cols, axis=1)

    def pre_activation(self, t: int, state: list):
        return ad.add(ad.getitem(self.base, (slice(None), t)), ad.matmul(self._state_matrix(state), self.w_y))

    def raw(self, t: int, state: list):
        h = ad.elu(self.pre_activation(t, state))
        return _mlp_tail(self.params, self.config, h)

    def act(self, t: int, state: list) -> list:
        out = ad.relu(self.raw(t, state))
        if self.config.action_dim == 1:
            return [ad.reshape(out, (self.B,))]
        return [ad.getitem(out, (slice(None), k)) for k in range(self.config.action_dim)]

    def directional_derivative(self, t: int, state: list, direction: np.ndarray):
        """Exact d(action)/d(state) along ``direction`` (E,), by forward-mode through the MLP.

        Returns (B, A); differentiable with respect to the parameters.
        """
        p = self.params
        z = self.pre_activation(t, state)
        dz = ad.matmul(np.asarray(direction, dtype=np.float64)[None, :], self.w_y)  # (1, W)
        h = ad.elu(z)
        dh = ad.mul(ad.elu_grad(z), dz)
        for j in range(1, self.config.mlp_layers):
            z = ad.dense(h, p[f"mlp{j}.w"], p[f"mlp{j}.b"])
            dz = ad.matmul(dh, p[f"mlp{j}.w"])
            h = ad.elu(z)
            dh = ad.mul(ad.elu_grad(z), dz)
        out = ad.dense(h, p["head.w"], p["head.b"])
        dout = ad.matmul(dh, p["head.w"])
        return ad.mul(dout, np.asarray(ad.value(out)) > 0)


class QuantileForecaster:
    """Quantile head over the demand window; no static or state inputs."""

    def __init__(self, params, config: PolicyConfig):
        if config.head_mode != "quantiles":
            raise ValueError("QuantileForecaster needs a quantile head")
        self.params = params
        self.config = config

    def predict_periods(self, ctx: RolloutContext, T: int | None = None):
        """Predictions for periods 0..T-1 as (B, T, |Q|)."""
        T = ctx.T if T is None else T
        x = trace_inputs(ctx, self.config)
        enc = encode_periods(self.params, self.config, x, T)
        h = ad.elu(ad.add(ad.matmul(enc, self.params["mlp0.w"]), self.params["mlp0.b"]))
        p = self.params
        for j in range(1, self.config.mlp_layers):
            h = ad.elu(ad.add(ad.matmul(h, p[f"mlp{j}.w"]), p[f"mlp{j}.b"]))
        return ad.add(ad.matmul(h, p["head.w"]), p["head.b"])


# ---------------------------------------------------------------- checkpoints


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: Params, config: PolicyConfig, meta: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "meta": meta or {},
        "params": {
            name: {"dims": list(np.shape(v)), "values": [float(x).hex() for x in np.ravel(ad.value(v))]}
            for name, v in params.items()
        },
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[Params, PolicyConfig, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    config = PolicyConfig.from_dict(doc["config"])
    params = {
        name: np.array([float.fromhex(x) for x in entry["values"]], dtype=np.float64).reshape(entry["dims"])
        for name, entry in doc["params"].items()
    }
    expected = param_shapes(config)
    for name, shape in expected.items():
        if name not in params or params[name].shape != shape:
            raise ValueError(f"checkpoint parameter {name!r} missing or misshapen")
    return params, config, doc.get("meta", {})
