"""Streaming detector: 1 kHz frames in, 25 Hz decisions out.

The session reproduces the offline pipeline incrementally. The default
(centered) filter mode keeps the batch median semantics, which costs a fixed
10-frame lookahead: a frame's filtered value becomes final only once 10
further frames arrive (or the stream is flushed), and that lag is declared
on every event. A causal mode trades the batch-equivalence guarantee for
zero filter lag, using the trailing window instead.

Every decision carries its compute time; windows that blow the 25 ms budget
are flagged, never dropped.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .core import LABEL_INCIPIENT, LABEL_OTHER, WINDOW_LEN, PillarFrame, TactileSequence
from .ensemble import EnsembleModel
from .neural import CLASS_INCIPIENT, infer_window
from .pipeline import FILTER_WINDOW

DEADLINE_MS = 25.0
FILTER_HALF = FILTER_WINDOW // 2  # lookahead frames in centered mode


@dataclass
class DecisionEvent:
    window_index: int
    t: float                 # timestamp of the window's final sample
    p_mean: float
    decision: str
    compute_ms: float
    deadline_miss: bool
    filter_lag_ms: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "p_mean": self.p_mean,
            "decision": self.decision,
            "compute_ms": self.compute_ms,
            "deadline_miss": self.deadline_miss,
            "filter_lag_ms": self.filter_lag_ms,
        }


@dataclass
class ErrorEvent:
    t: float | None
    message: str

    def to_dict(self) -> dict:
        return {"t": self.t, "error": self.message}


@dataclass
class DetectorSession:
    """Single-owner streaming state around a loaded ensemble."""

    model: EnsembleModel
    causal_filter: bool = False
    deadline_ms: float = DEADLINE_MS
    clock: object = time.perf_counter

    hidden: np.ndarray = field(init=False)
    _raw: deque = field(init=False)       # last <= 21 raw (t, (9,3)) frames
    _n_raw: int = field(init=False, default=0)
    _window_feats: list = field(init=False, default_factory=list)
    _n_windows: int = field(init=False, default=0)
    _last_t: float = field(init=False, default=-np.inf)
    log: list = field(init=False, default_factory=list)

    def __post_init__(self):
        self.hidden = np.zeros((self.model.z, self.model.config.gru_hidden))
        self._raw = deque(maxlen=FILTER_WINDOW)

    @property
    def filter_lag_frames(self) -> int:
        return 0 if self.causal_filter else FILTER_HALF

    def reset(self):
        """Zero the recurrent states and clear all buffers; the event log
        survives. Idempotent."""
        self.hidden[:] = 0.0
        self._raw.clear()
        self._n_raw = 0
        self._window_feats = []
        self._n_windows = 0
        self._last_t = -np.inf
        return self


def _filtered_row(session: DetectorSession, idx: int) -> tuple[float, np.ndarray]:
    """Centered (or trailing) median for finalized frame ``idx``, x-y only."""
    base = session._n_raw - len(session._raw)  # raw index of deque[0]
    if session.causal_filter:
        lo = max(0, idx - (FILTER_WINDOW - 1))
        hi = idx + 1
    else:
        lo = max(0, idx - FILTER_HALF)
        hi = min(session._n_raw, idx + FILTER_HALF + 1)
    window = [session._raw[i - base] for i in range(lo, hi)]
    t_idx = window[idx - lo][0]
    stack = np.stack([f for _, f in window])        # (w, 9, 3)
    med = np.median(stack[:, :, :2], axis=0)        # (9, 2)
    return t_idx, med.reshape(-1)


def _maybe_decide(session: DetectorSession, t_row: float, feat_row: np.ndarray):
    session._window_feats.append(feat_row)
    if len(session._window_feats) < WINDOW_LEN:
        return None
    features = np.concatenate(session._window_feats)  # (40 * 18,) row-major
    session._window_feats = []
    start = session.clock()
    probs = np.empty(session.model.z)
    for mi, member in enumerate(session.model.members):
        session.hidden[mi], p = infer_window(member, session.hidden[mi], features)
        probs[mi] = p[CLASS_INCIPIENT]
    p_mean = float(probs.mean())
    compute_ms = (session.clock() - start) * 1e3
    event = DecisionEvent(
        window_index=session._n_windows,
        t=t_row,
        p_mean=p_mean,
        decision=LABEL_INCIPIENT if p_mean > session.model.p_threshold else LABEL_OTHER,
        compute_ms=compute_ms,
        deadline_miss=compute_ms > session.deadline_ms,
        filter_lag_ms=session.filter_lag_frames * 1.0,
    )
    session._n_windows += 1
    session.log.append(event)
    return event


def push_frame(session: DetectorSession, frame: PillarFrame):
    """Feed one frame; returns a DecisionEvent when a window completes, an
    ErrorEvent for a rejected frame, or None."""
    if frame.t <= session._last_t:
        event = ErrorEvent(
            t=frame.t,
            message=f"out-of-order timestamp {frame.t} (last accepted {session._last_t})",
        )
        session.log.append(event)
        return event
    session._last_t = frame.t
    session._raw.append((frame.t, frame.forces))
    session._n_raw += 1
    finalized = session._n_raw - 1 - session.filter_lag_frames
    if finalized < 0:
        return None
    t_row, feat = _filtered_row(session, finalized)
    return _maybe_decide(session, t_row, feat)


def flush(session: DetectorSession) -> list[DecisionEvent]:
    """End of stream: finalize the frames still waiting on lookahead (their
    median windows shrink on the right, matching the batch filter's edge
    handling) and emit any windows they complete."""
    events = []
    if not session.causal_filter:
        first_pending = session._n_raw - session.filter_lag_frames
        for idx in range(max(0, first_pending), session._n_raw):
            t_row, feat = _filtered_row(session, idx)
            event = _maybe_decide(session, t_row, feat)
            if event is not None:
                events.append(event)
    return events


def run_sequence(session: DetectorSession, seq: TactileSequence) -> list[DecisionEvent]:
    """Replay one recorded sequence from a fresh recurrent state.

    BLAS pools are pinned to one thread for the replay: the per-window
    matrix-vector products are too small to parallelize, and multi-thread
    handoff is what produces tens-of-ms latency spikes. Callers driving
    :func:`push_frame` directly own that choice themselves.
    """
    session.reset()
    events = []
    with threadpool_limits(limits=1):
        for frame in seq.frames():
            ev = push_frame(session, frame)
            if isinstance(ev, DecisionEvent):
                events.append(ev)
        events.extend(flush(session))
    return events


@dataclass
class RunLog:
    events: list
    n_sequences: int

    def compute_times_ms(self) -> np.ndarray:
        return np.asarray(
            [e.compute_ms for e in self.events if isinstance(e, DecisionEvent)]
        )

    def summary(self) -> dict:
        times = self.compute_times_ms()
        n_miss = sum(
            1 for e in self.events if isinstance(e, DecisionEvent) and e.deadline_miss
        )
        out = {
            "n_sequences": self.n_sequences,
            "n_decisions": int(len(times)),
            "deadline_misses": n_miss,
        }
        if len(times):
            out.update(
                {
                    "compute_ms_mean": float(times.mean()),
                    "compute_ms_p99": float(np.percentile(times, 99)),
                    "compute_ms_max": float(times.max()),
                }
            )
        return out


def run_file(session: DetectorSession, path) -> RunLog:
    """Stream every sequence of a dataset file, resetting between sequences."""
    from .dataio import load_dataset

    sequences = load_dataset(path, with_annotations=False)
    all_events = []
    for seq in sequences:
        all_events.extend(run_sequence(session, seq))
    return RunLog(events=all_events, n_sequences=len(sequences))


def decisions_match_batch(session_events: list[DecisionEvent], decisions, mean_probs) -> bool:
    """True when streamed decisions are bit-identical to the offline pipeline
    output for the same sequence."""
    if len(session_events) != len(decisions):
        return False
    for ev, d, p in zip(session_events, decisions, mean_probs):
        if ev.decision != d or ev.p_mean != float(p):
            return False
    return True
