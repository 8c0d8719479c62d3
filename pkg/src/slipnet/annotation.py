"""Per-pillar slip labels, the incipient interval, and window labeling.

A sequence is in the *incipient* phase from the moment the first considered
pillar starts slipping until the moment the last of them has slipped. For
pure rotation about the sensor center the center pillar never slips and is
excluded from consideration; every other movement considers all nine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CENTER_PILLAR, LABEL_INCIPIENT, LABEL_OTHER, N_PILLARS, WindowedSample
from .errors import InvalidParameterError

CLASS_SLIP = "slip"
CLASS_STOP = "stop"

DEFAULT_TIP_SPEED_THRESHOLD = 0.1  # mm/s
DEBOUNCE_S = 5e-3                  # tip speed must stay above threshold this long


@dataclass
class SlipAnnotation:
    """Ground-truth slip timing for one sequence.

    ``pillar_slip_onset[i]`` is the time pillar i first slipped, or None if it
    never did. The incipient interval is closed on both ends; it is None when
    the sequence never exhibits a mixed stuck/slipping state (stop sequences,
    and degenerate cases such as a single contacted pillar).
    """

    pillar_slip_onset: list[float | None] = field(default_factory=lambda: [None] * N_PILLARS)
    incipient_start: float | None = None
    incipient_end: float | None = None
    sequence_class: str = CLASS_STOP

    def __post_init__(self):
        if len(self.pillar_slip_onset) != N_PILLARS:
            raise InvalidParameterError("pillar_slip_onset must have 9 entries")
        if self.sequence_class not in (CLASS_SLIP, CLASS_STOP):
            raise InvalidParameterError(f"unknown class {self.sequence_class!r}")
        if self.sequence_class == CLASS_STOP:
            if any(o is not None for o in self.pillar_slip_onset):
                raise InvalidParameterError("stop sequences cannot carry slip onsets")
            if self.incipient_start is not None or self.incipient_end is not None:
                raise InvalidParameterError("stop sequences cannot carry an incipient interval")
        if (self.incipient_start is None) != (self.incipient_end is None):
            raise InvalidParameterError("incipient interval must set both ends or neither")
        if self.incipient_start is not None and self.incipient_start > self.incipient_end:
            raise InvalidParameterError("incipient_start must not exceed incipient_end")

    @property
    def has_interval(self) -> bool:
        return self.incipient_start is not None

    def to_dict(self) -> dict:
        return {
            "pillar_slip_onset": list(self.pillar_slip_onset),
            "incipient": None
            if not self.has_interval
            else [self.incipient_start, self.incipient_end],
            "class": self.sequence_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlipAnnotation":
        interval = d.get("incipient")
        return cls(
            pillar_slip_onset=list(d["pillar_slip_onset"]),
            incipient_start=None if interval is None else float(interval[0]),
            incipient_end=None if interval is None else float(interval[1]),
            sequence_class=d["class"],
        )


def considered_pillars(movement: str, contact_mask=None) -> list[int]:
    """Pillar indices whose slip state defines the sequence label.

    Pure rotation is centered on pillar 4, which by construction never moves
    relative to the surface, so only the outer eight count there. A pillar
    out of contact cannot slip or stick and is never considered.
    """
    idx = [i for i in range(N_PILLARS) if movement != "rotation" or i != CENTER_PILLAR]
    if contact_mask is not None:
        mask = np.asarray(contact_mask, dtype=bool)
        idx = [i for i in idx if mask[i]]
    return idx


def pillar_slip_from_tip_motion(
    tip_speed: np.ndarray,
    t: np.ndarray,
    threshold: float = DEFAULT_TIP_SPEED_THRESHOLD,
    debounce_s: float = DEBOUNCE_S,
) -> list[float | None]:
    """Threshold pillar-tip speeds into per-pillar slip onsets.

    ``tip_speed`` is (N, 9) in mm/s, relative to the contacted surface. The
    onset is the first time the speed exceeds ``threshold`` and stays above
    it for at least ``debounce_s``; an isolated spike does not count.
    """
    if threshold < 0:
        raise InvalidParameterError(f"threshold must be non-negative, got {threshold}")
    tip_speed = np.asarray(tip_speed, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    n = len(t)
    if tip_speed.shape != (n, N_PILLARS):
        raise InvalidParameterError(
            f"tip_speed shape {tip_speed.shape} does not match {n} timestamps"
        )
    dt = float(np.median(np.diff(t))) if n > 1 else 1e-3
    need = max(1, int(round(debounce_s / dt)))
    onsets: list[float | None] = []
    above = tip_speed > threshold
    for p in range(N_PILLARS):
        col = above[:, p]
        onset = None
        run = 0
        for i in range(n):
            if col[i]:
                run += 1
                if run >= need:
                    onset = float(t[i - run + 1])
                    break
            else:
                run = 0
        onsets.append(onset)
    return onsets


def incipient_interval(
    onsets: list[float | None],
    movement: str,
    contact_mask=None,
) -> SlipAnnotation:
    """Build the sequence annotation from per-pillar slip onsets.

    Class is ``slip`` as soon as any considered pillar slipped, ``stop``
    otherwise. The interval [min onset, max onset] is only recorded when the
    slip actually began as a partial event, i.e. at the first onset some
    considered pillar was still stuck (later onset, or never slipped).
    """
    cons = considered_pillars(movement, contact_mask)
    present = [(onsets[i], i) for i in cons if onsets[i] is not None]
    if not present:
        return SlipAnnotation(sequence_class=CLASS_STOP)
    times = [o for o, _ in present]
    start = min(times)
    end = max(times)
    stuck_at_start = (len(present) < len(cons)) or (end > start)
    ann = SlipAnnotation(
        pillar_slip_onset=list(onsets),
        incipient_start=start if stuck_at_start else None,
        incipient_end=end if stuck_at_start else None,
        sequence_class=CLASS_SLIP,
    )
    return ann


def window_labels(
    annotation: SlipAnnotation, windows: list[WindowedSample]
) -> list[WindowedSample]:
    """Label windows in place: incipient iff the final sample's timestamp
    falls inside the closed incipient interval. Everything else, including
    every window of a stop sequence and all post-interval (gross slip)
    windows, is ``other``."""
    if annotation.sequence_class == CLASS_STOP or not annotation.has_interval:
        for w in windows:
            w.label = LABEL_OTHER
        return windows
    s, e = annotation.incipient_start, annotation.incipient_end
    for w in windows:
        w.label = LABEL_INCIPIENT if s <= w.window_end_t <= e else LABEL_OTHER
    return windows
