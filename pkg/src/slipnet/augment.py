"""Dataset expansion: rotational symmetry plus domain-adaptation remedies.

The rig collects data under idealized flat-contact, constant-speed
conditions. Real grips differ, so beyond rotating the force field by a
random angle we can also: resample frames to vary the apparent slip
velocity, silence pillars to mimic partial contact, rescale per-pillar
magnitudes, shuffle pillar positions, and assemble chimera sequences from
multiple donors. Transforms never touch force-derived labels directly; slip
onsets are carried through (or recomputed from the surviving onsets), which
is what keeps window labels consistent after expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .annotation import incipient_interval
from .core import MIN_FRAMES, N_PILLARS, SAMPLE_DT, TactileSequence
from .errors import InvalidParameterError, SequenceTooShortError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs for :func:`augment_dataset`.

    The first emitted fold is always the unmodified input; each further fold
    applies rotation (when enabled) and then each remedy independently with
    ``remedy_probability``.
    """

    expansion_factor: int = 5
    rotation: bool = True
    resample: bool = True
    resample_keep_range: tuple = (0.6, 0.95)
    zero_pillars_enabled: bool = True
    zero_pillar_count: tuple = (1, 3)
    noise_sigma: float = 0.001
    scale_enabled: bool = True
    scale_range: tuple = (0.2, 2.0)
    permute: bool = True
    mix: bool = True
    remedy_probability: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.expansion_factor < 1:
            raise InvalidParameterError("expansion factor must be at least 1")
        lo, hi = self.resample_keep_range
        if not (0 < lo <= hi <= 1):
            raise InvalidParameterError("keep fraction range must lie in (0, 1]")
        slo, shi = self.scale_range
        if not (0 < slo <= shi):
            raise InvalidParameterError("scale range must be positive")
        zlo, zhi = self.zero_pillar_count
        if not (0 <= zlo <= zhi <= N_PILLARS - 1):
            raise InvalidParameterError("zero pillar count must stay within 0..8")

    @classmethod
    def symmetry_only(cls, expansion_factor: int = 5, rng_seed: int = 0) -> "AugmentationConfig":
        """Rotation-based expansion with every advanced remedy disabled."""
        return cls(
            expansion_factor=expansion_factor,
            rotation=True,
            resample=False,
            zero_pillars_enabled=False,
            scale_enabled=False,
            permute=False,
            mix=False,
            rng_seed=rng_seed,
        )

    @classmethod
    def disabled(cls, expansion_factor: int = 1, rng_seed: int = 0) -> "AugmentationConfig":
        return cls(
            expansion_factor=expansion_factor,
            rotation=False,
            resample=False,
            zero_pillars_enabled=False,
            scale_enabled=False,
            permute=False,
            mix=False,
            rng_seed=rng_seed,
        )

    def to_dict(self) -> dict:
        return {
            "expansion_factor": self.expansion_factor,
            "rotation": self.rotation,
            "resample": self.resample,
            "resample_keep_range": list(self.resample_keep_range),
            "zero_pillars_enabled": self.zero_pillars_enabled,
            "zero_pillar_count": list(self.zero_pillar_count),
            "noise_sigma": self.noise_sigma,
            "scale_enabled": self.scale_enabled,
            "scale_range": list(self.scale_range),
            "permute": self.permute,
            "mix": self.mix,
            "remedy_probability": self.remedy_probability,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationConfig":
        kw = dict(d)
        for key in ("resample_keep_range", "zero_pillar_count", "scale_range"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


def _with_provenance(seq: TactileSequence, step: list) -> TactileSequence:
    chain = list(seq.meta.get("provenance", {}).get("chain", []))
    chain.append(step)
    prov = dict(seq.meta.get("provenance", {}))
    prov["chain"] = chain
    seq.meta["provenance"] = prov
    return seq


def rotate(seq: TactileSequence, theta: float) -> TactileSequence:
    """Rotate every pillar's tangential force by ``theta`` about the z axis.

    Only the force channels turn; pillar indices stay put, fz is untouched,
    and the annotation passes through unchanged.
    """
    theta = float(theta) % TWO_PI
    c, s = math.cos(theta), math.sin(theta)
    out = seq.copy()
    fx = seq.forces[:, :, 0]
    fy = seq.forces[:, :, 1]
    out.forces[:, :, 0] = c * fx - s * fy
    out.forces[:, :, 1] = s * fx + c * fy
    return _with_provenance(out, ["rotate", theta])


def resample_velocity(
    seq: TactileSequence, keep_fraction: float, rng: np.random.Generator
) -> TactileSequence:
    """Keep a sorted random subset of frames and re-grid them at 1 ms.

    Compressing the same force excursion into fewer uniformly spaced frames
    makes the apparent slip faster. Each slip onset moves to the new time of
    the first retained frame at or after it (never earlier than physics); an
    onset falling beyond the last retained frame is dropped.
    """
    if not 0 < keep_fraction <= 1:
        raise InvalidParameterError(f"keep fraction must be in (0, 1], got {keep_fraction}")
    n = len(seq)
    m = int(round(keep_fraction * n))
    if m < MIN_FRAMES:
        raise SequenceTooShortError(
            f"resampling to {m} frames is below the {MIN_FRAMES}-frame minimum"
        )
    if m == n:
        idx = np.arange(n)
    else:
        idx = np.sort(rng.choice(n, size=m, replace=False))
    kept_t = seq.t[idx]
    new_t = seq.t[0] + np.arange(m) * SAMPLE_DT
    out = seq.copy(t=new_t, forces=seq.forces[idx])

    if seq.annotation is not None:
        onsets: list[float | None] = []
        for onset in seq.annotation.pillar_slip_onset:
            if onset is None:
                onsets.append(None)
                continue
            pos = int(np.searchsorted(kept_t, onset - 1e-12, side="left"))
            onsets.append(None if pos >= m else float(new_t[pos]))
        out.annotation = incipient_interval(onsets, seq.movement, seq.contact_mask)
    return _with_provenance(out, ["resample", keep_fraction])


def zero_pillars(
    seq: TactileSequence,
    pillar_indices,
    sigma: float,
    rng: np.random.Generator,
) -> TactileSequence:
    """Replace selected pillars with sensor-noise-only channels.

    Mimics pillars that never touched the object: contact flags drop, their
    onsets disappear, and the annotation is rebuilt from the survivors.
    """
    idx = sorted(set(int(i) for i in pillar_indices))
    if not 1 <= len(idx) <= N_PILLARS - 1:
        raise InvalidParameterError("must zero between 1 and 8 pillars")
    if any(i < 0 or i >= N_PILLARS for i in idx):
        raise InvalidParameterError(f"pillar indices out of range: {idx}")
    out = seq.copy()
    out.forces[:, idx, :] = rng.normal(0.0, sigma, size=(len(seq), len(idx), 3))
    out.contact_mask = seq.contact_mask.copy()
    out.contact_mask[idx] = False
    if not out.contact_mask.any():
        raise InvalidParameterError("zeroing these pillars would leave no contact")
    if seq.annotation is not None:
        onsets = list(seq.annotation.pillar_slip_onset)
        for i in idx:
            onsets[i] = None
        out.annotation = incipient_interval(onsets, seq.movement, out.contact_mask)
    return _with_provenance(out, ["zero_pillars", idx, sigma])


def scale_pillars(seq: TactileSequence, factors) -> TactileSequence:
    """Per-pillar magnitude scaling; all three axes scale together so the
    stored z channel stays consistent with x-y. Labels are unchanged."""
    factors = np.asarray(factors, dtype=np.float64)
    if factors.shape != (N_PILLARS,):
        raise InvalidParameterError("need one scale factor per pillar")
    if np.any(factors <= 0):
        raise InvalidParameterError("scale factors must be positive")
    out = seq.copy()
    out.forces = seq.forces * factors[None, :, None]
    return _with_provenance(out, ["scale", factors.tolist()])


def permute_pillars(seq: TactileSequence, permutation) -> TactileSequence:
    """Relocate pillar channels by index; output pillar i takes the data of
    input pillar permutation[i]. Contact flags and onsets move along, so the
    incipient interval (a min/max over onsets) is unchanged."""
    perm = list(int(i) for i in permutation)
    if sorted(perm) != list(range(N_PILLARS)):
        raise InvalidParameterError(f"not a permutation of 0..8: {perm}")
    out = seq.copy()
    out.forces = seq.forces[:, perm, :]
    out.contact_mask = seq.contact_mask[perm]
    if seq.annotation is not None:
        old = seq.annotation
        out.annotation = replace(
            old, pillar_slip_onset=[old.pillar_slip_onset[p] for p in perm]
        )
    return _with_provenance(out, ["permute", perm])


def mix_pillars(pool: list[TactileSequence], rng: np.random.Generator) -> TactileSequence:
    """Assemble a chimera: each output pillar borrows pillar i's channels
    (and onset) from a randomly chosen pool sequence, truncated to the
    shortest donor. The result is labeled from the assembled onsets, with
    every contacted pillar considered."""
    if not pool:
        raise InvalidParameterError("donor pool is empty")
    length = min(len(s) for s in pool)
    if length < MIN_FRAMES:
        raise SequenceTooShortError(f"common donor length {length} is below {MIN_FRAMES}")
    donors = rng.integers(0, len(pool), size=N_PILLARS)
    base = pool[0]
    t = base.t[0] + np.arange(length) * SAMPLE_DT
    forces = np.empty((length, N_PILLARS, 3))
    contact = np.zeros(N_PILLARS, dtype=bool)
    onsets: list[float | None] = [None] * N_PILLARS
    t_last = float(t[-1])
    for i in range(N_PILLARS):
        d = pool[int(donors[i])]
        forces[:, i, :] = d.forces[:length, i, :]
        contact[i] = d.contact_mask[i]
        if d.annotation is not None:
            onset = d.annotation.pillar_slip_onset[i]
            if onset is not None and onset <= t_last + 1e-12:
                onsets[i] = onset
    if not contact.any():
        raise InvalidParameterError("assembled sequence has no contacted pillar")
    # Positional movement semantics are lost across donors; label the chimera
    # as compound so every contacted pillar is considered.
    movement = "translation+rotation"
    out = TactileSequence(
        t=t,
        forces=forces,
        movement=movement,
        compression_mm=base.compression_mm,
        drive_speed=base.drive_speed,
        contact_mask=contact,
        meta={"provenance": {"chain": [["mix", donors.tolist()]]}},
        annotation=incipient_interval(onsets, movement, contact),
    )
    return out


def augment_dataset(
    dataset: list[TactileSequence], config: AugmentationConfig
) -> list[TactileSequence]:
    """Expand to ``expansion_factor * len(dataset)`` sequences.

    Fold 0 is the input unchanged. Every derived sequence records its
    transform chain and per-output seed under ``meta["provenance"]`` so any
    single output can be regenerated.
    """
    if not dataset:
        return []
    factor = config.expansion_factor
    n = len(dataset)
    out: list[TactileSequence] = list(dataset)
    seed_groups = np.random.SeedSequence(config.rng_seed).spawn(max(factor - 1, 1) * n)
    for fold in range(1, factor):
        for j, src in enumerate(dataset):
            ss = seed_groups[(fold - 1) * n + j]
            rng = np.random.default_rng(ss)
            seq = src
            if config.mix and rng.random() < config.remedy_probability:
                seq = mix_pillars(dataset, rng)
            if config.rotation:
                seq = rotate(seq, rng.uniform(0.0, TWO_PI))
            if config.resample and rng.random() < config.remedy_probability:
                keep = rng.uniform(*config.resample_keep_range)
                if int(round(keep * len(seq))) >= MIN_FRAMES:
                    seq = resample_velocity(seq, keep, rng)
            if config.zero_pillars_enabled and rng.random() < config.remedy_probability:
                lo, hi = config.zero_pillar_count
                count = int(rng.integers(lo, hi + 1))
                contacted = np.flatnonzero(seq.contact_mask)
                count = min(count, len(contacted) - 1)
                if count >= 1:
                    picks = rng.choice(contacted, size=count, replace=False)
                    seq = zero_pillars(seq, picks, config.noise_sigma, rng)
            if config.scale_enabled and rng.random() < config.remedy_probability:
                seq = scale_pillars(seq, rng.uniform(*config.scale_range, size=N_PILLARS))
            if config.permute and rng.random() < config.remedy_probability:
                seq = permute_pillars(seq, rng.permutation(N_PILLARS))
            if seq is src:
                seq = src.copy()
            prov = dict(seq.meta.get("provenance", {}))
            prov.update({
                "source": src.meta.get("sequence_id", j),
                "fold": fold,
                "seed": int(ss.generate_state(1, dtype=np.uint64)[0]),
            })
            seq.meta["provenance"] = prov
            out.append(seq)
    return out
