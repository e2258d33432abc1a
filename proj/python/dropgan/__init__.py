# SPDX-License-Identifier: Apache-2.0

from ._core import (
    ConfigError,
    Error,
    IoError,
    NonFiniteError,
    ShapeError,
    Trainer,
    config_warnings,
    emit_plots,
    frechet_2d,
    gradcheck,
    intra_diversity,
    min_cost_assignment,
    mode_stats,
    normalize_config,
    read_metrics,
    resume,
    sample_mixture,
    spd2_sqrt,
    sweep,
    symmetric_kl,
    train,
    wasserstein,
)

__all__ = [name for name in dir() if not name.startswith("_")]
