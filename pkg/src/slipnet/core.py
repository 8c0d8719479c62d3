"""Canonical tactile data types and the signal-refinement chain.

A sensing element ("pillar") reports a 3-axis force at 1 kHz. Nine pillars
form a 3x3 grid, row-major, index 4 = center. All forces are newtons, all
times are seconds, everything is float64. These conventions are fixed here
and relied on by every other module.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import NUMBA_ENABLED, njit
from .errors import InvalidParameterError, InvalidSequenceError

N_PILLARS = 9
CENTER_PILLAR = 4
CORNER_PILLARS = (0, 2, 6, 8)
EDGE_PILLARS = (1, 3, 5, 7)
OUTER_PILLARS = CORNER_PILLARS + EDGE_PILLARS

SAMPLE_DT = 1e-3          # nominal 1 kHz frame spacing
SAMPLE_DT_TOL = 1e-6      # allowed jitter per frame
WINDOW_LEN = 40           # samples per classification window (25 Hz decisions)
MIN_FRAMES = 2 * WINDOW_LEN
FEATURES_PER_FRAME = 2 * N_PILLARS  # x-y forces only, z is dropped

MOVEMENTS = ("translation", "rotation", "translation+rotation")

LABEL_INCIPIENT = "incipient"
LABEL_OTHER = "other"


@dataclass(frozen=True)
class PillarFrame:
    """One 1 kHz sample: timestamp plus a (9, 3) array of (fx, fy, fz)."""

    t: float
    forces: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forces, dtype=np.float64)
        if f.shape != (N_PILLARS, 3):
            raise InvalidSequenceError(
                f"frame must have {N_PILLARS} pillars x 3 axes, got shape {f.shape}"
            )
        if not np.all(np.isfinite(f)):
            raise InvalidSequenceError(f"non-finite force in frame at t={self.t}")
        if self.t < 0:
            raise InvalidSequenceError(f"negative timestamp {self.t}")
        object.__setattr__(self, "forces", f)


@dataclass
class TactileSequence:
    """An ordered run of frames plus the scenario metadata that produced it.

    ``t`` has shape (N,), ``forces`` has shape (N, 9, 3). The optional
    ``annotation`` carries per-pillar slip onsets when known (see
    :mod:`slipnet.annotation`); transforms that invalidate it must replace it.
    """

    t: np.ndarray
    forces: np.ndarray
    movement: str
    compression_mm: float
    drive_speed: float
    contact_mask: np.ndarray
    meta: dict = field(default_factory=dict)
    annotation: "object | None" = None  # SlipAnnotation, kept untyped to avoid a cycle

    def __post_init__(self):
        self.t = np.ascontiguousarray(self.t, dtype=np.float64)
        self.forces = np.ascontiguousarray(self.forces, dtype=np.float64)
        self.contact_mask = np.asarray(self.contact_mask, dtype=bool)

    # -- invariants -------------------------------------------------------

    def validate(self) -> "TactileSequence":
        n = len(self.t)
        if self.forces.shape != (n, N_PILLARS, 3):
            raise InvalidSequenceError(
                f"forces shape {self.forces.shape} does not match {n} timestamps"
            )
        if n < MIN_FRAMES:
            raise InvalidSequenceError(f"sequence has {n} frames, minimum is {MIN_FRAMES}")
        if self.contact_mask.shape != (N_PILLARS,):
            raise InvalidSequenceError("contact_mask must have 9 entries")
        if not self.contact_mask.any():
            raise InvalidSequenceError("at least one pillar must be in contact")
        if self.movement not in MOVEMENTS:
            raise InvalidSequenceError(f"unknown movement {self.movement!r}")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise InvalidSequenceError("timestamps must be strictly increasing")
        if np.any(np.abs(dt - SAMPLE_DT) > SAMPLE_DT_TOL):
            worst = float(np.max(np.abs(dt - SAMPLE_DT)))
            raise InvalidSequenceError(
                f"frame spacing deviates from 1 ms by {worst:.3g} s (tolerance 1 us)"
            )
        if not np.all(np.isfinite(self.forces)):
            raise InvalidSequenceError("non-finite force values")
        if self.t[0] < 0:
            raise InvalidSequenceError("timestamps must be non-negative")
        return self

    # -- convenience ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.t)

    def frame(self, i: int) -> PillarFrame:
        return PillarFrame(t=float(self.t[i]), forces=self.forces[i])

    def frames(self) -> Iterator[PillarFrame]:
        for i in range(len(self.t)):
            yield self.frame(i)

    def copy(self, **overrides) -> "TactileSequence":
        kw = dict(
            t=self.t.copy(),
            forces=self.forces.copy(),
            movement=self.movement,
            compression_mm=self.compression_mm,
            drive_speed=self.drive_speed,
            contact_mask=self.contact_mask.copy(),
            meta=dict(self.meta),
            annotation=self.annotation,
        )
        kw.update(overrides)
        return TactileSequence(**kw)


@dataclass
class WindowedSample:
    """One classification unit: 40 consecutive frames of x-y features."""

    features: np.ndarray  # (40, 18)
    label: str
    window_end_t: float

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape != (WINDOW_LEN, FEATURES_PER_FRAME):
            raise InvalidSequenceError(
                f"window features must be ({WINDOW_LEN}, {FEATURES_PER_FRAME}), "
                f"got {self.features.shape}"
            )
        if self.label not in (LABEL_INCIPIENT, LABEL_OTHER):
            raise InvalidSequenceError(f"unknown label {self.label!r}")

    def flat(self) -> np.ndarray:
        """Row-major flattening to the 720-vector the classifier consumes."""
        return self.features.reshape(-1)


# ---------------------------------------------------------------------------
# Median filter: per-channel running median, shrunken windows at the edges.
# Even-count (edge) windows take the mean of the two middle values.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _median_filter_jit(x, w):  # pragma: no cover - exercised through dispatch
    # running sorted window: each sample is inserted and removed once
    n, c = x.shape
    h = w // 2
    out = np.empty_like(x)
    buf = np.empty(w)
    for j in range(c):
        m = 0
        lo = 0
        hi = -1
        for i in range(n):
            new_lo = i - h if i - h > 0 else 0
            new_hi = i + h if i + h < n - 1 else n - 1
            while hi < new_hi:
                hi += 1
                v = x[hi, j]
                pos = 0
                while pos < m and buf[pos] < v:
                    pos += 1
                for k in range(m, pos, -1):
                    buf[k] = buf[k - 1]
                buf[pos] = v
                m += 1
            while lo < new_lo:
                v = x[lo, j]
                pos = 0
                while buf[pos] != v:
                    pos += 1
                for k in range(pos, m - 1):
                    buf[k] = buf[k + 1]
                m -= 1
                lo += 1
            if m % 2 == 1:
                out[i, j] = buf[m // 2]
            else:
                out[i, j] = 0.5 * (buf[m // 2 - 1] + buf[m // 2])
    return out


def _median_filter_numpy(x: np.ndarray, w: int) -> np.ndarray:
    n, _ = x.shape
    h = w // 2
    out = np.empty_like(x)
    if n >= w:
        views = sliding_window_view(x, w, axis=0)  # (n-w+1, c, w)
        out[h : n - h] = np.median(views, axis=2)
        left = range(h)
        right = range(n - h, n)
    else:
        left = range(n)
        right = range(0)
    for i in left:
        out[i] = np.median(x[: i + h + 1], axis=0)
    for i in right:
        out[i] = np.median(x[max(0, i - h) :], axis=0)
    return out


def median_filter_array(x: np.ndarray, w: int = 21) -> np.ndarray:
    """Centered running median down each column of ``x`` (shape (N, C))."""
    if w % 2 == 0 or w < 1:
        raise InvalidParameterError(f"median filter window must be odd and positive, got {w}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidParameterError("cannot filter an empty array")
    if NUMBA_ENABLED:
        return _median_filter_jit(x, w)
    return _median_filter_numpy(x, w)


def median_filter(seq: TactileSequence, w: int = 21) -> TactileSequence:
    """Glitch-suppressing median filter over every force channel.

    Window is centered; at the sequence boundaries it shrinks to the
    available samples rather than padding. Timestamps, metadata and
    annotations pass through untouched.
    """
    n = len(seq)
    flat = seq.forces.reshape(n, N_PILLARS * 3)
    filtered = median_filter_array(flat, w)
    out = seq.copy(forces=filtered.reshape(n, N_PILLARS, 3))
    return out


# ---------------------------------------------------------------------------
# Feature selection and windowing
# ---------------------------------------------------------------------------


def select_xy_features(frame: PillarFrame) -> np.ndarray:
    """Concatenate [fx0, fy0, ..., fx8, fy8]; the z force is discarded."""
    return np.ascontiguousarray(frame.forces[:, :2], dtype=np.float64).reshape(-1)


def sequence_xy_features(seq: TactileSequence) -> np.ndarray:
    """(N, 18) x-y feature matrix for a whole sequence."""
    return np.ascontiguousarray(seq.forces[:, :, :2].reshape(len(seq), FEATURES_PER_FRAME))


def segment_windows(seq: TactileSequence) -> list[WindowedSample]:
    """Chop a (filtered) sequence into non-overlapping 40-sample windows.

    The trailing remainder shorter than one window is discarded. Returned
    windows carry the placeholder label ``other``; see
    :func:`slipnet.annotation.window_labels` for the real labels.
    """
    n = len(seq)
    n_windows = n // WINDOW_LEN
    if n_windows == 0:
        warnings.warn(f"sequence of {n} frames is shorter than one window; no output")
        return []
    feats = sequence_xy_features(seq)
    out = []
    for k in range(n_windows):
        s = k * WINDOW_LEN
        e = s + WINDOW_LEN
        out.append(
            WindowedSample(
                features=feats[s:e],
                label=LABEL_OTHER,
                window_end_t=float(seq.t[e - 1]),
            )
        )
    return out
