"""Canonical configurations.

``full_scale_model`` is the finalized stress-task architecture (the
ModelConfig defaults).  ``benchmark_*`` are the desk-scale settings used
by the synthetic end-to-end benchmarks and the README walkthrough: the
smallest architecture the configuration ranges admit, trained with the
largest permitted learning rate.
"""

from __future__ import annotations

from .nets.model import AblationFlags, ModelConfig
from .synth import SynthSpec
from .training import TrainConfig


def full_scale_model() -> ModelConfig:
    """The finalized stress-task architecture.

    Reference clinical-data targets for this configuration (documented
    for comparison only; not reproducible from synthetic cohorts):
    sensitivity 0.8742, specificity 0.7526, accuracy 81.73%, F1 0.8358.
    """
    return ModelConfig()


def benchmark_model(flags: AblationFlags | None = None) -> ModelConfig:
    return ModelConfig(
        embedding_dim=200, channels=8, conv_layers=5, nonlocal_blocks=1,
        ref_dim=200, n_aux=32, n_h=64, n_z=16, head_hidden=64,
        dropout=0.15, flags=flags or AblationFlags())


def benchmark_train(seed: int = 0, flags: AblationFlags | None = None,
                    epochs: int = 30) -> TrainConfig:
    return TrainConfig(
        learning_rate=1e-4, dropout=0.15, batch_size=5, epochs=epochs,
        seed=seed, patience=10, min_epochs=8, flags=flags or AblationFlags())


def benchmark_cohort(seed: int = 7) -> SynthSpec:
    return SynthSpec(subjects_per_class=10, windows_per_subject=4, seed=seed)
