"""Offline metrics: per-sequence verdicts, confusion matrix, latency, D_norm.

Verdict semantics (kept deliberately, even though FN/FP read unusually):

* TP - a slip sequence whose FIRST incipient decision lands inside
  [incipient_start - tolerance, incipient_end), i.e. detected before gross
  slip, allowing 0.3 s of ground-truth slack ahead of the interval;
* FP - a slip sequence with no qualifying detection (nothing detected, or
  only too early / too late);
* TN - a stop sequence with no incipient decision anywhere;
* FN - a stop sequence where incipient slip was (wrongly) detected.

Only the first incipient decision of a sequence is ever judged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import CLASS_SLIP, CLASS_STOP, SlipAnnotation
from .augment import AugmentationConfig, augment_dataset, resample_velocity, scale_pillars, zero_pillars
from .core import LABEL_INCIPIENT, MIN_FRAMES, TactileSequence
from .ensemble import EnsembleModel, ensemble_forward, train_ensemble
from .errors import InvalidParameterError
from .neural import NetworkConfig, TrainConfig
from .pipeline import prepare_dataset, prepare_windows
from .simgen import drive_displacement

DETECTION_TOLERANCE_S = 0.3
D_TH_TRANSLATION_MM = 2.0
D_TH_ROTATION_DEG = 2.0

VERDICTS = ("TP", "FN", "FP", "TN")


@dataclass
class SequenceOutcome:
    sequence_id: str
    sequence_class: str
    verdict: str
    detection_time: float | None = None
    incipient_start: float | None = None
    incipient_end: float | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise InvalidParameterError(f"unknown verdict {self.verdict!r}")
        if self.detection_time is None and self.verdict not in ("FP", "TN"):
            raise InvalidParameterError("a verdict without detection must be FP or TN")


def judge_sequence(
    decisions,
    end_times,
    annotation: SlipAnnotation,
    tolerance: float = DETECTION_TOLERANCE_S,
    sequence_id: str = "?",
) -> SequenceOutcome:
    """Classify one sequence's decision stream against its ground truth."""
    if len(decisions) != len(end_times):
        raise InvalidParameterError(
            f"{len(decisions)} decisions vs {len(end_times)} window end times"
        )
    t_d = None
    for d, t in zip(decisions, end_times):
        if d == LABEL_INCIPIENT:
            t_d = float(t)
            break

    if annotation.sequence_class == CLASS_STOP:
        verdict = "TN" if t_d is None else "FN"
        return SequenceOutcome(
            sequence_id=sequence_id,
            sequence_class=CLASS_STOP,
            verdict=verdict,
            detection_time=t_d,
        )

    start, end = annotation.incipient_start, annotation.incipient_end
    hit = (
        t_d is not None
        and annotation.has_interval
        and (start - tolerance) <= t_d < end
    )
    return SequenceOutcome(
        sequence_id=sequence_id,
        sequence_class=CLASS_SLIP,
        verdict="TP" if hit else "FP",
        detection_time=t_d,
        incipient_start=start,
        incipient_end=end,
    )


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def success_rate(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def misclassified(self) -> int:
        return self.fn + self.fp

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn,
            "total": self.total, "success_rate": self.success_rate,
        }


def confusion_matrix(outcomes: list[SequenceOutcome]) -> ConfusionMatrix:
    if not outcomes:
        raise InvalidParameterError("no outcomes to summarize")
    cm = ConfusionMatrix()
    for o in outcomes:
        setattr(cm, o.verdict.lower(), getattr(cm, o.verdict.lower()) + 1)
    return cm


@dataclass
class LatencySummary:
    """Detection latency of TP cases, relative to the incipient onset.

    Values can be negative: a detection inside the pre-onset tolerance still
    counts as successful.
    """

    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def stat(self, fn) -> float | None:
        return None if self.n == 0 else float(fn(self.values))

    def to_dict(self) -> dict:
        v = self.values
        return {
            "n": self.n,
            "mean_s": self.stat(np.mean),
            "median_s": self.stat(np.median),
            "p10_s": None if self.n == 0 else float(np.percentile(v, 10)),
            "p90_s": None if self.n == 0 else float(np.percentile(v, 90)),
            "min_s": self.stat(np.min),
            "max_s": self.stat(np.max),
        }


def detection_latency(outcomes: list[SequenceOutcome]) -> LatencySummary:
    vals = [
        o.detection_time - o.incipient_start
        for o in outcomes
        if o.verdict == "TP" and o.detection_time is not None
    ]
    return LatencySummary(values=np.asarray(vals, dtype=np.float64))


def normalized_displacement(d, movement: str) -> float:
    """Displacement normalized by the gross-slip threshold (2 mm / 2 deg).

    For compound movement pass ``d`` as (translation_mm, rotation_deg); the
    two normalized values are averaged.
    """
    if movement == "translation":
        return float(d) / D_TH_TRANSLATION_MM
    if movement == "rotation":
        return float(d) / D_TH_ROTATION_DEG
    if movement == "translation+rotation":
        trans, rot = d
        return 0.5 * (trans / D_TH_TRANSLATION_MM + rot / D_TH_ROTATION_DEG)
    raise InvalidParameterError(f"unknown movement {movement!r}")


# ---------------------------------------------------------------------------
# Whole-testset evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationResult:
    outcomes: list[SequenceOutcome]
    confusion: ConfusionMatrix
    latency: LatencySummary
    dnorm_rows: list = field(default_factory=list)  # (sequence_id, movement, dnorm)


def evaluate_model(
    model: EnsembleModel,
    sequences: list[TactileSequence],
    tolerance: float = DETECTION_TOLERANCE_S,
) -> EvaluationResult:
    """Run the offline pipeline and judge every sequence."""
    outcomes = []
    dnorm_rows = []
    for i, seq in enumerate(sequences):
        if seq.annotation is None:
            raise InvalidParameterError(f"sequence {i} has no annotation to judge against")
        feats, _, ends = prepare_windows(seq)
        decisions, _, _ = ensemble_forward(model, feats)
        sid = str(seq.meta.get("sequence_id", i))
        outcome = judge_sequence(decisions, ends, seq.annotation, tolerance, sequence_id=sid)
        outcomes.append(outcome)
        if outcome.detection_time is not None and "drive" in seq.meta:
            d_mm, d_deg = drive_displacement(seq.meta, outcome.detection_time)
            if seq.movement == "translation":
                dn = normalized_displacement(d_mm, "translation")
            elif seq.movement == "rotation":
                dn = normalized_displacement(d_deg, "rotation")
            else:
                dn = normalized_displacement((d_mm, d_deg), "translation+rotation")
            dnorm_rows.append((sid, seq.movement, dn))
    return EvaluationResult(
        outcomes=outcomes,
        confusion=confusion_matrix(outcomes),
        latency=detection_latency(outcomes),
        dnorm_rows=dnorm_rows,
    )


# ---------------------------------------------------------------------------
# Ablation: does the advanced augmentation earn its keep under domain shift?
# ---------------------------------------------------------------------------


def make_shifted_test(
    sequences: list[TactileSequence],
    seed: int = 0,
    max_zeroed: int = 3,
    keep_range: tuple = (0.7, 0.95),
    scale_range: tuple = (0.6, 1.5),
) -> list[TactileSequence]:
    """Domain-shifted copies: partial contact, resampled speed, scaled forces.

    Default magnitudes keep the slip events clearly detectable (moderate
    amplitude scaling and resampling) while the contact pattern moves well
    off the idealized all-nine-pillars training manifold.
    """
    if not sequences:
        raise InvalidParameterError("cannot shift an empty test set")
    seeds = np.random.SeedSequence(seed).spawn(len(sequences))
    out = []
    for seq, ss in zip(sequences, seeds):
        rng = np.random.default_rng(ss)
        s = seq
        contacted = np.flatnonzero(s.contact_mask)
        n_zero = min(int(rng.integers(1, max_zeroed + 1)), len(contacted) - 1)
        if n_zero >= 1:
            s = zero_pillars(s, rng.choice(contacted, size=n_zero, replace=False), 0.001, rng)
        keep = float(rng.uniform(*keep_range))
        if int(round(keep * len(s))) >= MIN_FRAMES:
            s = resample_velocity(s, keep, rng)
        s = scale_pillars(s, rng.uniform(*scale_range, size=9))
        out.append(s)
    return out


@dataclass
class AblationRun:
    seed: int
    plain: ConfusionMatrix
    augmented: ConfusionMatrix

    @property
    def delta_misclassified(self) -> int:
        """plain minus augmented; positive means augmentation helped."""
        return self.plain.misclassified - self.augmented.misclassified


def ablation_run(
    plain_train: list[TactileSequence],
    augmented_train: list[TactileSequence],
    shifted_test: list[TactileSequence],
    net_config: NetworkConfig,
    train_cfg: TrainConfig,
    z: int,
    seed: int,
    n_jobs: int = 1,
    log=None,
) -> AblationRun:
    """Train two ensembles differing only in their training set and compare
    them on the shifted test set."""
    if not shifted_test:
        raise InvalidParameterError("shifted test set is empty")
    results = {}
    for name, train_set in (("plain", plain_train), ("augmented", augmented_train)):
        prepared = prepare_dataset(train_set)
        model = train_ensemble(
            prepared, net_config, train_cfg, z=z, master_seed=seed, n_jobs=n_jobs,
            log=(lambda m, n=name: log(f"[{n}] {m}")) if log else None,
        )
        results[name] = evaluate_model(model, shifted_test).confusion
    return AblationRun(seed=seed, plain=results["plain"], augmented=results["augmented"])


def build_ablation_train_sets(
    train_sequences: list[TactileSequence], expansion_factor: int, seed: int
):
    """(plain, augmented) training sets of equal size: rotation-only versus
    the full remedy suite."""
    plain = augment_dataset(
        train_sequences, AugmentationConfig.symmetry_only(expansion_factor, rng_seed=seed)
    )
    advanced = augment_dataset(
        train_sequences, AugmentationConfig(expansion_factor=expansion_factor, rng_seed=seed)
    )
    return plain, advanced


# ---------------------------------------------------------------------------
# Plot-ready artifacts
# ---------------------------------------------------------------------------


def write_confusion_json(path, cm: ConfusionMatrix, extra: dict | None = None):
    from .dataio import _atomic_write

    payload = cm.to_dict()
    if extra:
        payload.update(extra)
    _atomic_write(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_latency_csv(path, latency: LatencySummary, n_bins: int = 20):
    from .dataio import _atomic_write

    lines = ["bin_lo_s,bin_hi_s,count"]
    if latency.n:
        counts, edges = np.histogram(latency.values, bins=n_bins)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            lines.append(f"{lo!r},{hi!r},{int(c)}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def write_dnorm_csv(path, rows):
    from .dataio import _atomic_write

    lines = ["sequence_id,movement,d_norm"]
    for sid, movement, dn in rows:
        lines.append(f"{sid},{movement},{dn!r}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")
