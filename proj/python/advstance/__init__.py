"""Adversarial cross-target stance detection.

Thin wrapper over the C++ core. Labels are the strings "favor", "against"
and "none"; configurations use the same ``section.key = value`` format as
the ``advstance`` command-line tool.
"""

from ._core import (
    Checkpoint,
    ConfigError,
    DataError,
    Error,
    LeakageError,
    RunConfig,
    ShapeError,
    TrainingError,
    accept,
    config_keys,
    encoder_cls,
    evaluate,
    f1_per_class,
    f_avg,
    f_m,
    fit_logistic,
    linear_probe,
    load_config,
    parse_config,
    separate,
    snap_to_feature_grid,
    suite,
    synth,
    synth_oracle_label,
    train,
    validate,
    wordpiece_encode,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "DataError",
    "Error",
    "LeakageError",
    "RunConfig",
    "ShapeError",
    "TrainingError",
    "accept",
    "config_keys",
    "encoder_cls",
    "evaluate",
    "f1_per_class",
    "f_avg",
    "f_m",
    "fit_logistic",
    "linear_probe",
    "load_config",
    "parse_config",
    "separate",
    "snap_to_feature_grid",
    "suite",
    "synth",
    "synth_oracle_label",
    "train",
    "validate",
    "wordpiece_encode",
]
