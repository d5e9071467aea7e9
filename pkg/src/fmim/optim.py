"""AdamW with decoupled weight decay and a fixed learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGradientError


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if not self.weight_decay >= 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class OptimState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def init_state(params) -> OptimState:
    return OptimState(
        m={k: np.zeros_like(a) for k, a in params.items()},
        v={k: np.zeros_like(a) for k, a in params.items()},
        t=0,
    )


def decays(name: str) -> bool:
    # biases are exempt from weight decay
    return not name.startswith("b")


def step(params, grads, state: OptimState, cfg: OptimConfig) -> None:
    """One AdamW update, in place on ``params`` and ``state``.

    Raises before touching anything if a gradient is NaN or infinite.
    """
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {params[k].shape} for {k}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {k}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for k, g in grads.items():
        theta = params[k]
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        if cfg.weight_decay and decays(k):
            update += cfg.lr * cfg.weight_decay * theta
        theta -= update
    if hasattr(params, "version"):
        params.version += 1
