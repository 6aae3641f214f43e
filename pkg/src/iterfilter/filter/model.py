"""Stacked IterationModules: parameters, initialization and forward passes."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInput, ShapeError
from ..graph import GRAPH_K, Patch, knn_graph
from ..nn import tensor as T
from ..nn.layers import (EdgeConvParams, MLPParams, decoder_forward, edgeconv_forward,
                         init_edgeconv, init_mlp)
from ..nn.tensor import Tensor

MIN_ITERATIONS = 1
MAX_ITERATIONS = 12
RADIUS_GUARD = 1e-12
# initial displacements start small so stacked modules do not compound a random offset
DECODER_OUTPUT_GAIN = 0.01


@dataclass(frozen=True)
class ModelConfig:
    iterations: int = 4
    encoder_dims: tuple[int, ...] = (3, 32, 64, 128, 256)
    decoder_dims: tuple[int, ...] = (256, 128, 64, 32, 3)
    theta_layers: int = 1
    k: int = GRAPH_K

    def __post_init__(self):
        object.__setattr__(self, "encoder_dims", tuple(int(d) for d in self.encoder_dims))
        object.__setattr__(self, "decoder_dims", tuple(int(d) for d in self.decoder_dims))
        if not MIN_ITERATIONS <= self.iterations <= MAX_ITERATIONS:
            raise InvalidInput(f"iterations must lie in [{MIN_ITERATIONS}, {MAX_ITERATIONS}]")
        if self.encoder_dims[0] != 3 or len(self.encoder_dims) < 2:
            raise InvalidInput("encoder must start at width 3 and have at least one layer")
        if len(self.decoder_dims) != 5 or self.decoder_dims[-1] != 3:
            raise InvalidInput("decoder needs 4 layers ending at width 3")
        if self.decoder_dims[0] != self.encoder_dims[-1]:
            raise InvalidInput("decoder input width must equal the encoder output width")
        if self.theta_layers < 1 or self.k < 1:
            raise InvalidInput("theta_layers and k must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_dims"] = list(self.encoder_dims)
        d["decoder_dims"] = list(self.decoder_dims)
        return d


@dataclass
class IterationModuleParams:
    encoder: list[EdgeConvParams]
    decoder: MLPParams

    def __post_init__(self):
        if self.encoder[0].in_dim != 3:
            raise ShapeError("encoder input width must be 3")
        if self.decoder.out_dim != 3:
            raise ShapeError("decoder output width must be 3")

    def named_parameters(self, prefix=""):
        for l, ec in enumerate(self.encoder):
            for part_name, mlp in (("phi", ec.phi), ("theta", ec.theta)):
                for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
                    yield f"{prefix}encoder.{l}.{part_name}.{i}.weight", w
                    yield f"{prefix}encoder.{l}.{part_name}.{i}.bias", b
        for i, (w, b) in enumerate(zip(self.decoder.weights, self.decoder.biases)):
            yield f"{prefix}decoder.{i}.weight", w
            yield f"{prefix}decoder.{i}.bias", b


@dataclass
class IterativePFNParams:
    modules: list[IterationModuleParams]
    config: ModelConfig = field(default_factory=ModelConfig)

    @property
    def T(self) -> int:
        return len(self.modules)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for t, m in enumerate(self.modules):
            out += list(m.named_parameters(prefix=f"module.{t}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def init_model(config: ModelConfig, seed: int = 0) -> IterativePFNParams:
    """Kaiming-uniform weights, zero biases; modules get independent parameters."""
    rng = np.random.default_rng(seed)
    modules = []
    for _ in range(config.iterations):
        enc = [init_edgeconv(rng, a, b, config.theta_layers, config.k)
               for a, b in zip(config.encoder_dims[:-1], config.encoder_dims[1:])]
        dec = init_mlp(rng, list(config.decoder_dims), last_gain=DECODER_OUTPUT_GAIN)
        modules.append(IterationModuleParams(enc, dec))
    return IterativePFNParams(modules, config)


def zero_model(config: ModelConfig) -> IterativePFNParams:
    model = init_model(config, seed=0)
    for p in model.parameters():
        p.data[...] = 0.0
    return model


def iteration_module_forward(positions, params: IterationModuleParams, k: int = GRAPH_K) -> Tensor:
    """Per-point displacement predicted by one module.

    ``positions`` are the module's input coordinates (centered and scaled,
    possibly a Tensor carrying gradient); the kNN graph is rebuilt from their
    current values.
    """
    x = positions if isinstance(positions, Tensor) else Tensor(positions)
    if x.data.ndim != 2 or x.shape[1] != 3:
        raise ShapeError(f"positions must be (n, 3), got {x.shape}")
    if x.shape[0] < 2:
        raise ShapeError("an IterationModule needs at least 2 points")
    graph = knn_graph(x.data, k)
    h = x
    for layer in params.encoder:
        h = edgeconv_forward(h, graph, layer)
    return decoder_forward(h, params.decoder)


def run_modules(positions, model: IterativePFNParams, modules=None):
    """Apply modules in sequence; returns ``(displacements, inputs)`` where
    ``inputs[t]`` is the position fed to module ``t`` (``inputs[0]`` is the start)."""
    x = positions if isinstance(positions, Tensor) else Tensor(positions)
    mods = model.modules if modules is None else modules
    disps, inputs = [], [x]
    for m in mods:
        d = iteration_module_forward(x, m, model.config.k)
        disps.append(d)
        x = T.add(x, d)
        inputs.append(x)
    return disps, inputs


def patch_scale(coords: np.ndarray) -> float:
    r = float(np.sqrt((np.asarray(coords) ** 2).sum(axis=1).max())) if len(coords) else 0.0
    return max(r, RADIUS_GUARD)


def patch_displacements(coords, model: IterativePFNParams) -> np.ndarray:
    """Total displacement of each point of a centered patch, in the patch's own units."""
    c = np.asarray(coords, dtype=np.float64)
    r = patch_scale(c)
    _, inputs = run_modules(c / r, model)
    # differencing keeps a zero model an exact identity (no c / r * r rounding)
    return (inputs[-1].data - inputs[0].data) * r


def filter_coords(coords, model: IterativePFNParams) -> np.ndarray:
    """Filter centered patch coordinates; returns centered output coordinates."""
    c = np.asarray(coords, dtype=np.float64)
    return c + patch_displacements(c, model)


def filter_patch(patch: Patch, model: IterativePFNParams) -> np.ndarray:
    """Filtered patch positions in the parent frame."""
    return (patch.coords + patch.reference) + patch_displacements(patch.coords, model)
