"""Continuous-time multi-robot motion forecasting.

Thin Python surface over the C++ core: dataset generation, the two training
stages, evaluation, and numpy-based inference. The command-line tool of the
same name exposes identical functionality for shell pipelines.
"""

from ._fleetcast import (
    DivergenceError,
    __version__,
    checkpoint_info,
    cluster_robots,
    evaluate_checkpoint,
    forecast,
    gen_dataset,
    load_config,
    pretrain_autoencoder,
    train_model,
    unicycle_baseline,
)

__all__ = [
    "DivergenceError",
    "__version__",
    "checkpoint_info",
    "cluster_robots",
    "evaluate_checkpoint",
    "forecast",
    "gen_dataset",
    "load_config",
    "pretrain_autoencoder",
    "train_model",
    "unicycle_baseline",
]
