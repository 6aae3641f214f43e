"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        shapes = [np.shape(p.data if isinstance(p, Tensor) else p) for p in params]
        return cls([np.zeros(s) for s in shapes], [np.zeros(s) for s in shapes], **kw)


def adam_step(params, grads, state: AdamState, lr: float) -> None:
    """Update ``params`` in place.  ``params`` are Tensors or arrays; a ``None``
    gradient counts as zero."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and optimizer state differ in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        data = p.data if isinstance(p, Tensor) else p
        if g is None:
            g = 0.0
        elif np.shape(g) != data.shape:
            raise ShapeError(f"gradient {np.shape(g)} does not match parameter {data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class Adam:
    """Convenience wrapper pairing a parameter list with its :class:`AdamState`."""

    params: list[Tensor]
    lr: float = 1e-4
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState.for_params(self.params)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr)
