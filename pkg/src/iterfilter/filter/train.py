"""Training loop for the stacked-module filter."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInput
from ..geometry import KDTree, as_cloud
from ..graph import CLEAN_PATCH_SIZE, NOISY_PATCH_SIZE, Patch, extract_training_pair
from ..noise import NoiseKind, NoiseSpec, add_noise
from ..nn.optim import AdamState, adam_step
from ..stitch import stitch_weights
from .losses import loss_adaptive, loss_fixed, make_adaptive_target, noise_schedule
from .model import IterativePFNParams, ModelConfig, init_model, patch_scale, run_modules

log = logging.getLogger(__name__)

ADAPTIVE = "adaptive"
FIXED = "fixed"


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 100
    steps_per_epoch: int = 0  # 0 means one step per dataset cloud
    learning_rate: float = 1e-4
    batch_size: int = 1
    seed: int = 0
    noisy_patch_size: int = NOISY_PATCH_SIZE
    clean_patch_size: int = CLEAN_PATCH_SIZE
    loss: str = ADAPTIVE
    sigma_min: float = 0.005
    sigma_max: float = 0.02
    noise_kind: str = NoiseKind.ISOTROPIC_GAUSSIAN.value
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            object.__setattr__(self, "model", ModelConfig(**self.model))
        for name in ("epochs", "batch_size", "noisy_patch_size", "clean_patch_size"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"{name} must be positive")
        if self.steps_per_epoch < 0:
            raise InvalidInput("steps_per_epoch must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")
        if self.loss not in (ADAPTIVE, FIXED):
            raise InvalidInput(f"loss must be {ADAPTIVE!r} or {FIXED!r}")
        if not 0 < self.sigma_min <= self.sigma_max:
            raise InvalidInput("need 0 < sigma_min <= sigma_max")
        NoiseKind(self.noise_kind)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d


@dataclass
class LogRow:
    epoch: int
    step: int
    loss: float
    sigma0: float
    wall_ms: float


@dataclass
class TrainingLog:
    rows: list[LogRow] = field(default_factory=list)
    epoch_means: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,step,loss,sigma0,wall_ms"]
        lines += [f"{r.epoch},{r.step},{r.loss!r},{r.sigma0!r},{r.wall_ms:.3f}" for r in self.rows]
        return "\n".join(lines) + "\n"


def _scaled(patch: Patch, r: float) -> np.ndarray:
    return patch.coords / r


def training_step_loss(model: IterativePFNParams, noisy_patch: Patch, clean_patch: Patch,
                       sigma0: float, loss_kind: str, rng: np.random.Generator):
    """Forward pass and loss for one training pair, in patch-radius units."""
    r = patch_scale(noisy_patch.coords)
    w = stitch_weights(noisy_patch)
    disps, inputs = run_modules(_scaled(noisy_patch, r), model)
    if loss_kind == ADAPTIVE:
        sched = noise_schedule(sigma0, model.T)
        targets = [_scaled(make_adaptive_target(clean_patch, s, rng=rng), r) for s in sched.sigmas]
        return loss_adaptive(disps, inputs[:-1], targets, w)
    return loss_fixed(disps, inputs[:-1], _scaled(clean_patch, r), w)


def _check_finite(model):
    for name, p in model.named_parameters():
        if not np.isfinite(p.data).all():
            raise FloatingPointError(f"parameter {name} became non-finite")
        if p.grad is not None and not np.isfinite(p.grad).all():
            raise FloatingPointError(f"gradient of {name} is non-finite")


def train(dataset, config: TrainingConfig, model: IterativePFNParams | None = None,
          callback=None) -> tuple[IterativePFNParams, TrainingLog]:
    """Train on a list of normalized clean clouds.

    Each step draws, from one master generator seeded by ``config.seed``: a
    cloud, ``sigma0 ~ U[sigma_min, sigma_max]``, the corruption noise, and a
    reference point.  ``callback(row)`` is invoked after every step.
    """
    clouds = [as_cloud(c) for c in dataset]
    if not clouds:
        raise InvalidInput("empty training set")
    for i, c in enumerate(clouds):
        if len(c) < max(config.clean_patch_size, config.noisy_patch_size):
            raise InvalidInput(f"cloud {i} has {len(c)} points; need {config.clean_patch_size}")
    trees = [KDTree(c) for c in clouds]
    if model is None:
        model = init_model(config.model, seed=config.seed)
    params = model.parameters()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(config.seed)
    steps = config.steps_per_epoch or len(clouds)
    tlog = TrainingLog()
    step_no = 0
    for epoch in range(config.epochs):
        losses = []
        for _ in range(steps):
            t0 = time.perf_counter()
            model.zero_grad()
            total = None
            sig = 0.0
            for _b in range(config.batch_size):
                ci = int(rng.integers(len(clouds)))
                sigma0 = float(rng.uniform(config.sigma_min, config.sigma_max))
                noise_seed = int(rng.integers(2 ** 63))
                noisy = add_noise(clouds[ci], NoiseSpec(config.noise_kind, sigma0, noise_seed))
                ref = int(rng.integers(len(noisy)))
                xp, yp = extract_training_pair(noisy, clouds[ci], ref, config.noisy_patch_size,
                                               config.clean_patch_size, clean_tree=trees[ci])
                loss = training_step_loss(model, xp, yp, sigma0, config.loss, rng)
                total = loss if total is None else total + loss
                sig += sigma0
            total.backward()
            _check_finite(model)
            adam_step(params, [p.grad for p in params], state, config.learning_rate)
            value = float(total.data)
            losses.append(value)
            row = LogRow(epoch, step_no, value, sig / config.batch_size,
                         (time.perf_counter() - t0) * 1e3)
            tlog.rows.append(row)
            if callback is not None:
                callback(row)
            step_no += 1
        tlog.epoch_means.append(float(np.mean(losses)))
        log.info("epoch %d mean loss %.6g", epoch, tlog.epoch_means[-1])
    model.zero_grad()
    return model, tlog
