from .model import (IterationModuleParams, IterativePFNParams, ModelConfig, filter_coords,
                    filter_patch, init_model, iteration_module_forward, patch_displacements,
                    run_modules, zero_model)
from .losses import NoiseSchedule, loss_adaptive, loss_fixed, make_adaptive_target, noise_schedule

__all__ = [
    "IterationModuleParams", "IterativePFNParams", "ModelConfig", "filter_coords", "filter_patch",
    "init_model", "iteration_module_forward", "patch_displacements", "run_modules", "zero_model",
    "NoiseSchedule", "loss_adaptive", "loss_fixed", "make_adaptive_target", "noise_schedule",
]
