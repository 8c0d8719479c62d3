"""Incipient-slip detection for a 3x3 pillar tactile array.

Subpackage map: ``simgen`` makes stick-slip data with exact ground truth,
``core``/``annotation``/``augment`` form the data pipeline, ``neural`` is the
from-scratch network engine, ``ensemble`` the bagged classifier, ``runtime``
the streaming detector, ``evaluation`` the offline metrics, ``cli`` the
operator entry points.
"""

__version__ = "0.1.0"

from .annotation import SlipAnnotation, incipient_interval, window_labels
from .core import (
    PillarFrame,
    TactileSequence,
    WindowedSample,
    median_filter,
    segment_windows,
    select_xy_features,
)
from .dataio import load_dataset, save_dataset
from .ensemble import EnsembleModel, load_ensemble, save_ensemble, train_ensemble
from .neural import ModelState, NetworkConfig, TrainConfig
from .simgen import DatasetSpec, RigScenario, generate_dataset

__all__ = [
    "__version__",
    "PillarFrame",
    "TactileSequence",
    "WindowedSample",
    "SlipAnnotation",
    "median_filter",
    "segment_windows",
    "select_xy_features",
    "incipient_interval",
    "window_labels",
    "load_dataset",
    "save_dataset",
    "EnsembleModel",
    "train_ensemble",
    "save_ensemble",
    "load_ensemble",
    "ModelState",
    "NetworkConfig",
    "TrainConfig",
    "DatasetSpec",
    "RigScenario",
    "generate_dataset",
]
