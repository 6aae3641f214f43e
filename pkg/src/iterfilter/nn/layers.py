"""MLP, EdgeConv and decoder layers built on :mod:`iterfilter.nn.tensor`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..graph import DirectedGraph
from . import tensor as T
from .tensor import Tensor

RELU = "relu"
NONE = "none"


@dataclass
class MLPParams:
    """Stack of affine layers.  Hidden layers always use ReLU; ``activation``
    is applied to the last layer's output."""

    weights: list[Tensor]
    biases: list[Tensor]
    activation: str = NONE

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("MLP needs matching non-empty weight and bias lists")
        for w, b in zip(self.weights, self.biases):
            if w.data.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"bad layer shapes {w.shape} / {b.shape}")
        for w0, w1 in zip(self.weights[:-1], self.weights[1:]):
            if w1.shape[1] != w0.shape[0]:
                raise ShapeError(f"layer dims do not chain: {w0.shape} -> {w1.shape}")
        if self.activation not in (RELU, NONE):
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class EdgeConvParams:
    phi: MLPParams
    theta: MLPParams

    def __post_init__(self):
        if self.phi.out_dim != self.theta.out_dim:
            raise ShapeError("phi and theta must produce the same feature width")
        if self.theta.in_dim != 2 * self.phi.in_dim:
            raise ShapeError("theta must consume twice phi's input width")

    @property
    def in_dim(self) -> int:
        return self.phi.in_dim

    @property
    def out_dim(self) -> int:
        return self.phi.out_dim

    def parameters(self) -> list[Tensor]:
        return self.phi.parameters() + self.theta.parameters()


def kaiming_uniform(rng: np.random.Generator, out_dim: int, in_dim: int, fan_in: int | None = None) -> np.ndarray:
    fan_in = in_dim if fan_in is None else fan_in
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def init_mlp(rng, dims, activation=NONE, fan_in_scale: float = 1.0, last_gain: float = 1.0) -> MLPParams:
    """``dims = [in, h1, ..., out]``.  ``fan_in_scale`` multiplies the fan-in of
    the first layer; ``last_gain`` scales the last layer's weights."""
    ws, bs = [], []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        fan = int(round(a * fan_in_scale)) if i == 0 else a
        w = kaiming_uniform(rng, b, a, fan_in=max(fan, 1))
        if i == len(dims) - 2:
            w = w * last_gain
        ws.append(Tensor(w, requires_grad=True))
        bs.append(Tensor(np.zeros(b), requires_grad=True))
    return MLPParams(ws, bs, activation)


def init_edgeconv(rng, in_dim: int, out_dim: int, theta_layers: int = 1, k: int = 32) -> EdgeConvParams:
    phi = init_mlp(rng, [in_dim, out_dim], activation=NONE)
    # the k edge messages share their h_i half and add up coherently, so the
    # fan-in is counted as 2*in*k**2 to keep feature scale flat across layers
    theta = init_mlp(rng, [2 * in_dim] + [out_dim] * theta_layers, activation=RELU,
                     fan_in_scale=float(max(k, 1)) ** 2)
    return EdgeConvParams(phi, theta)


def mlp_forward(x: Tensor, params: MLPParams) -> Tensor:
    if x.shape[-1] != params.in_dim:
        raise ShapeError(f"MLP expects width {params.in_dim}, got {x.shape}")
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        x = T.linear(x, w, b)
        if i < last or params.activation == RELU:
            x = T.relu(x)
    return x


def _check_edgeconv(h: Tensor, graph: DirectedGraph, params: EdgeConvParams):
    if h.data.ndim != 2 or h.shape[1] != params.in_dim:
        raise ShapeError(f"EdgeConv expects (n, {params.in_dim}) features, got {h.shape}")
    if graph.vertex_count != h.shape[0]:
        raise ShapeError(f"graph has {graph.vertex_count} vertices, features have {h.shape[0]} rows")


def edgeconv_forward(h: Tensor, graph: DirectedGraph, params: EdgeConvParams) -> Tensor:
    """``f(h_i) + sum_{j:(i,j) in E} g(h_i || h_j - h_i)``.

    The first theta layer ``W [h_i; h_j - h_i] + b`` is split as
    ``(W_a - W_b) h_i + b`` plus ``W_b h_j`` so it is evaluated per vertex and
    only combined per edge.
    """
    _check_edgeconv(h, graph, params)
    self_term = mlp_forward(h, params.phi)
    n, k = graph.neighbors.shape
    if k == 0:
        return self_term
    f = params.in_dim
    th = params.theta
    w0, b0 = th.weights[0], th.biases[0]
    w_self = T.take_columns(w0, 0, f)
    w_diff = T.take_columns(w0, f, 2 * f)
    per_src = T.linear(h, w_self - w_diff, b0)
    per_dst = T.linear(h, w_diff)
    e = T.edge_sum_pairs(per_src, per_dst, graph.neighbors)
    last = len(th.weights) - 1
    if last > 0 or th.activation == RELU:
        e = T.relu(e)
    for i in range(1, last + 1):
        e = T.linear(e, th.weights[i], th.biases[i])
        if i < last or th.activation == RELU:
            e = T.relu(e)
    return self_term + T.segment_sum(e, n, k)


def edgeconv_forward_reference(h: Tensor, graph: DirectedGraph, params: EdgeConvParams) -> Tensor:
    """Literal per-edge concat / MLP / scatter-sum form; slower, used for cross-checks."""
    _check_edgeconv(h, graph, params)
    self_term = mlp_forward(h, params.phi)
    if graph.k == 0:
        return self_term
    src, dst = graph.src, graph.dst
    hi = T.gather(h, src)
    hj = T.gather(h, dst)
    msg = mlp_forward(T.concat([hi, hj - hi], axis=1), params.theta)
    return self_term + T.scatter_sum(msg, src, graph.vertex_count)


def decoder_forward(h: Tensor, params: MLPParams) -> Tensor:
    if len(params.weights) != 4:
        raise ShapeError(f"decoder needs exactly 4 layers, got {len(params.weights)}")
    if params.out_dim != 3 or params.activation != NONE:
        raise ShapeError("decoder must end in an unactivated 3-wide layer")
    return mlp_forward(h, params)

