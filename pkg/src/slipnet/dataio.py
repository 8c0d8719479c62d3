"""Dataset files: JSON-Lines sequences, annotation sidecars, CSV export.

One sequence per line:

    {"meta": {"movement": ..., "compression_mm": ..., "drive_speed": ...,
              "contact_mask": [9 bools], ...},
     "frames": [[t, fx0, fy0, fz0, ..., fx8, fy8, fz8], ...]}

Floats are serialized with Python's shortest round-trip repr, so a
save/load cycle reproduces every value bit-exactly. The annotation sidecar
(``<stem>.ann.jsonl``) carries one JSON object per dataset line.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .annotation import SlipAnnotation
from .core import N_PILLARS, TactileSequence
from .errors import DataFormatError

FRAME_ROW_LEN = 1 + 3 * N_PILLARS

_META_KEYS = ("movement", "compression_mm", "drive_speed", "contact_mask")


def annotation_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".ann.jsonl")


def _atomic_write(path: Path, text: str):
    """Write via temp file + rename so failures never leave partial output."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sequence_to_record(seq: TactileSequence) -> dict:
    meta = {
        "movement": seq.movement,
        "compression_mm": seq.compression_mm,
        "drive_speed": seq.drive_speed,
        "contact_mask": [bool(b) for b in seq.contact_mask],
    }
    if seq.meta:
        meta["extra"] = seq.meta
    frames = np.concatenate(
        [seq.t[:, None], seq.forces.reshape(len(seq), 3 * N_PILLARS)], axis=1
    )
    return {"meta": meta, "frames": frames.tolist()}


def record_to_sequence(rec: dict, line: int | None = None) -> TactileSequence:
    try:
        meta = rec["meta"]
        frames = rec["frames"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"record missing {exc}", line=line) from exc
    for key in _META_KEYS:
        if key not in meta:
            raise DataFormatError(f"meta missing required key {key!r}", line=line)
    arr = []
    for i, row in enumerate(frames):
        if len(row) != FRAME_ROW_LEN:
            raise DataFormatError(
                f"frame {i} has {len(row)} values, expected {FRAME_ROW_LEN} "
                f"(t + 9 pillars x 3 axes)",
                line=line,
            )
        arr.append(row)
    data = np.asarray(arr, dtype=np.float64).reshape(-1, FRAME_ROW_LEN)
    return TactileSequence(
        t=data[:, 0],
        forces=data[:, 1:].reshape(-1, N_PILLARS, 3),
        movement=meta["movement"],
        compression_mm=float(meta["compression_mm"]),
        drive_speed=float(meta["drive_speed"]),
        contact_mask=np.asarray(meta["contact_mask"], dtype=bool),
        meta=dict(meta.get("extra", {})),
    )


def save_dataset(path, sequences: list[TactileSequence], with_annotations: bool = True):
    """Write sequences as JSONL; annotated sequences also get a sidecar file."""
    path = Path(path)
    lines = [json.dumps(sequence_to_record(s), separators=(",", ":")) for s in sequences]
    _atomic_write(path, "".join(line + "\n" for line in lines))
    if with_annotations and any(s.annotation is not None for s in sequences):
        side = [
            json.dumps(
                s.annotation.to_dict() if s.annotation is not None else None,
                separators=(",", ":"),
            )
            for s in sequences
        ]
        _atomic_write(annotation_path(path), "".join(line + "\n" for line in side))


def load_dataset(path, with_annotations: bool = True) -> list[TactileSequence]:
    """Read a JSONL dataset; malformed records raise with their line number."""
    path = Path(path)
    sequences: list[TactileSequence] = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON: {exc.msg}", line=ln) from exc
            sequences.append(record_to_sequence(rec, line=ln))
    side = annotation_path(path)
    if with_annotations and side.exists():
        with open(side) as fh:
            anns = []
            for ln, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    d = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise DataFormatError(f"invalid JSON: {exc.msg}", line=ln) from exc
                anns.append(None if d is None else SlipAnnotation.from_dict(d))
        if len(anns) != len(sequences):
            raise DataFormatError(
                f"sidecar has {len(anns)} annotations for {len(sequences)} sequences"
            )
        for seq, ann in zip(sequences, anns):
            seq.annotation = ann
    return sequences


def export_csv(path, seq: TactileSequence):
    """One row per frame, for plotting: t, p0_fx, p0_fy, p0_fz, ..., p8_fz."""
    header = ["t"]
    for p in range(N_PILLARS):
        header += [f"p{p}_fx", f"p{p}_fy", f"p{p}_fz"]
    rows = [",".join(header)]
    flat = seq.forces.reshape(len(seq), 3 * N_PILLARS)
    for i in range(len(seq)):
        rows.append(",".join(repr(float(v)) for v in (seq.t[i], *flat[i])))
    _atomic_write(Path(path), "\n".join(rows) + "\n")
