from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Mapping[str, Tensor]) -> "AdamState":
        return cls(
            0,
            {k: np.zeros_like(p.data) for k, p in params.items()},
            {k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray | None],
              state: AdamState, lr: float = 2e-4, beta1: float = 0.5,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place. Missing grads count as zero."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        if m.shape != p.shape:
            raise ShapeMismatch(f"{name}: optimizer state {m.shape} vs param {p.shape}")
        dtype = p.data.dtype
        m *= dtype.type(beta1)
        m += dtype.type(1.0 - beta1) * g
        v *= dtype.type(beta2)
        v += dtype.type(1.0 - beta2) * g * g
        m_hat = m / dtype.type(c1)
        v_hat = v / dtype.type(c2)
        p.data -= dtype.type(lr) * m_hat / (np.sqrt(v_hat) + dtype.type(eps))


class Adam:
    """Thin wrapper that pulls ``.grad`` from the parameters it owns."""

    def __init__(self, params: Mapping[str, Tensor], lr=2e-4, betas=(0.5, 0.999), eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        adam_step(self.params, {k: p.grad for k, p in self.params.items()}, self.state,
                  self.lr, self.beta1, self.beta2, self.eps)
