"""Parametric system identification from return-map images."""

from ._core import (
    Error,
    FormatError,
    InvalidArgument,
    Predictor,
    TrainingDiverged,
    augment,
    count_grid,
    dataset_thetas,
    estimate_baseline,
    evaluate,
    generate,
    henon_trajectory,
    load_sample,
    nn_state_space_loss,
    rasterize,
    sam_energy,
    sam_section_crossings,
    split,
    temporal_mse,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
