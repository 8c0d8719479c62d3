"""Offline preprocessing: raw sequence -> labeled window features.

This is the single definition of the batch pipeline (median filter, fixed
windowing, label projection); streaming inference reproduces it frame by
frame and is tested to be bit-identical against it.
"""

from __future__ import annotations

import numpy as np

from .annotation import window_labels
from .core import (
    FEATURES_PER_FRAME,
    LABEL_INCIPIENT,
    WINDOW_LEN,
    TactileSequence,
    median_filter,
    segment_windows,
)

FILTER_WINDOW = 21


def prepare_windows(seq: TactileSequence, filter_w: int = FILTER_WINDOW):
    """Filter, window, and label one sequence.

    Returns (features, labels, end_times): features is (W, 720) with windows
    flattened row-major, labels is (W,) int (1 = incipient), end_times is the
    timestamp of each window's final sample. Unannotated sequences get
    all-zero labels.
    """
    filtered = median_filter(seq, filter_w)
    windows = segment_windows(filtered)
    if seq.annotation is not None:
        window_labels(seq.annotation, windows)
    if not windows:
        d = WINDOW_LEN * FEATURES_PER_FRAME
        return np.zeros((0, d)), np.zeros(0, dtype=np.int64), np.zeros(0)
    feats = np.stack([w.flat() for w in windows])
    labels = np.array([1 if w.label == LABEL_INCIPIENT else 0 for w in windows], dtype=np.int64)
    ends = np.array([w.window_end_t for w in windows])
    return feats, labels, ends


def prepare_dataset(sequences: list[TactileSequence], filter_w: int = FILTER_WINDOW):
    """Per-sequence (features, labels, end_times) triples for a whole corpus."""
    return [prepare_windows(s, filter_w) for s in sequences]
