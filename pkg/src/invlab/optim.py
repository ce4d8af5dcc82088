"""Adam optimizer over dicts of numpy parameter arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], **hyper) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            **hyper,
        )


def adam_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    if set(params) != set(grads):
        raise ValueError("params and grads must have the same keys")
    step = state.step + 1
    c1 = 1.0 - state.beta1**step
    c2 = 1.0 - state.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = np.zeros_like(p) if m is None else m
        v = np.zeros_like(p) if v is None else v
        if m.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"moment shape mismatch for {name!r}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_params[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[name] = m
        new_v[name] = v
    new_state = AdamState(new_m, new_v, step, state.lr, state.beta1, state.beta2, state.eps)
    return new_params, new_state
