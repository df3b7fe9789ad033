"""First-order adaptive optimizer (Adam) over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the shared step counter."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, np.ndarray], lr: float = 3e-4) -> AdamState:
    return AdamState(
        lr=lr,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float | None = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One update; returns fresh params and state, inputs untouched.

    ``lr`` overrides the stored learning rate for this step (warmup)."""
    step = state.step + 1
    rate = state.lr if lr is None else lr
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
        new_params[key] = p - rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[key], new_v[key] = m, v
    return new_params, AdamState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
        step=step, m=new_m, v=new_v,
    )
