"""Operator entry points: generate, augment, split, train, eval, detect, inspect.

Every artifact-producing command writes a ``<output>.manifest.json`` next to
its outputs with the resolved configuration, seeds, and input/output hashes,
so any run can be replayed byte-for-byte. Option precedence is command-line
flags over ``--config`` file over defaults.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentationConfig, augment_dataset
from .annotation import CLASS_SLIP
from .dataio import _atomic_write, export_csv, load_dataset, save_dataset
from .ensemble import load_ensemble, save_ensemble, train_ensemble
from .errors import InvalidParameterError, NumericError, SlipnetError
from .evaluation import (
    ablation_run,
    build_ablation_train_sets,
    evaluate_model,
    make_shifted_test,
    write_confusion_json,
    write_dnorm_csv,
    write_latency_csv,
)
from .neural import NetworkConfig, TrainConfig
from .pipeline import prepare_dataset
from .runtime import DetectorSession, flush, push_frame, run_file
from .simgen import DatasetSpec, generate_dataset

NETWORK_PRESETS = {
    "full": NetworkConfig(),
    "mid": NetworkConfig(
        input_dim=720, encoder_hidden=256, encoder_out=96,
        gru_hidden=96, estimator_hidden=(128, 64),
    ),
    "compact": NetworkConfig(
        input_dim=720, encoder_hidden=128, encoder_out=64,
        gru_hidden=64, estimator_hidden=(64, 32),
    ),
}


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(anchor_path, command: str, config: dict, seeds: dict,
                    inputs: list, outputs: list, t0: float):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs if Path(p).exists()},
        "outputs": {str(p): _sha256(p) for p in outputs if Path(p).exists()},
        "wall_s": round(time.time() - t0, 3),
    }
    _atomic_write(
        Path(str(anchor_path) + ".manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )


def _load_config_file(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            return json.load(fh)
    return {}


def _pick(args, file_cfg: dict, key: str, default):
    """flags > config file > default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in file_cfg:
        return file_cfg[key]
    return default


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    t0 = time.time()
    file_cfg = _load_config_file(args)
    spec_dict = dict(file_cfg.get("dataset_spec", {}))
    for key, flag in (("slip_count", "slip"), ("stop_count", "stop"), ("seed", "seed")):
        val = getattr(args, flag)
        if val is not None:
            spec_dict[key] = val
    spec = DatasetSpec.from_dict(spec_dict)
    sequences = generate_dataset(spec)
    save_dataset(args.out, sequences)
    _write_manifest(
        args.out, "generate", spec.to_dict(), {"seed": spec.seed},
        inputs=[args.config] if args.config else [], outputs=[args.out], t0=t0,
    )
    print(f"wrote {len(sequences)} sequences to {args.out}")
    return 0


def cmd_augment(args) -> int:
    t0 = time.time()
    file_cfg = _load_config_file(args)
    preset = _pick(args, file_cfg, "preset", "full")
    factor = int(_pick(args, file_cfg, "factor", 5))
    seed = int(_pick(args, file_cfg, "seed", 0))
    if preset == "full":
        cfg = AugmentationConfig(expansion_factor=factor, rng_seed=seed)
    elif preset == "symmetry":
        cfg = AugmentationConfig.symmetry_only(factor, rng_seed=seed)
    elif preset == "none":
        cfg = AugmentationConfig.disabled(factor, rng_seed=seed)
    else:
        raise InvalidParameterError(f"unknown augmentation preset {preset!r}")
    dataset = load_dataset(args.input)
    expanded = augment_dataset(dataset, cfg)
    save_dataset(args.out, expanded)
    _write_manifest(
        args.out, "augment", cfg.to_dict(), {"seed": seed},
        inputs=[args.input], outputs=[args.out], t0=t0,
    )
    print(f"expanded {len(dataset)} -> {len(expanded)} sequences ({preset}, x{factor})")
    return 0


def stratified_split(sequences, ratio: float, seed: int):
    """Class-stratified split; each class contributes ceil(ratio * n) to the
    training side (a 0.8 split of 200/28 gives 160+23 train, 40+5 test)."""
    if not 0 < ratio < 1:
        raise InvalidParameterError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list] = {}
    for seq in sequences:
        if seq.annotation is None:
            raise InvalidParameterError("split requires annotated sequences")
        by_class.setdefault(seq.annotation.sequence_class, []).append(seq)
    train, test = [], []
    for cls in sorted(by_class):
        group = by_class[cls]
        order = rng.permutation(len(group))
        n_train = min(len(group), math.ceil(ratio * len(group) - 1e-9))
        train.extend(group[i] for i in order[:n_train])
        test.extend(group[i] for i in order[n_train:])
    return train, test


def cmd_split(args) -> int:
    t0 = time.time()
    sequences = load_dataset(args.input)
    train, test = stratified_split(sequences, args.ratio, args.seed)
    save_dataset(args.train_out, train)
    save_dataset(args.test_out, test)
    _write_manifest(
        args.train_out, "split",
        {"ratio": args.ratio}, {"seed": args.seed},
        inputs=[args.input], outputs=[args.train_out, args.test_out], t0=t0,
    )
    n_slip = sum(1 for s in train if s.annotation.sequence_class == CLASS_SLIP)
    print(
        f"train {len(train)} ({n_slip} slip) / test {len(test)} "
        f"({sum(1 for s in test if s.annotation.sequence_class == CLASS_SLIP)} slip)"
    )
    return 0


def cmd_train(args) -> int:
    t0 = time.time()
    file_cfg = _load_config_file(args)
    net_cfg = NETWORK_PRESETS[_pick(args, file_cfg, "network", "full")]
    train_cfg = TrainConfig(
        lr=float(_pick(args, file_cfg, "lr", 1e-3)),
        momentum=float(_pick(args, file_cfg, "momentum", 0.95)),
        weight_decay=float(_pick(args, file_cfg, "weight_decay", 1e-3)),
        batch_windows=int(_pick(args, file_cfg, "batch_windows", 512)),
        epochs=int(_pick(args, file_cfg, "epochs", 30)),
        bag_fraction=float(_pick(args, file_cfg, "bag_fraction", 0.40)),
        val_fraction=float(_pick(args, file_cfg, "val_fraction", 0.0)),
        seed=int(_pick(args, file_cfg, "seed", 0)),
    )
    z = int(_pick(args, file_cfg, "z", 5))
    sequences = load_dataset(args.input)
    prepared = prepare_dataset(sequences)
    log = print if not args.quiet else None
    model = train_ensemble(
        prepared, net_cfg, train_cfg, z=z, master_seed=train_cfg.seed,
        n_jobs=args.jobs, log=log,
    )
    model.meta = {"train_data": str(args.input), "n_sequences": len(sequences)}
    save_ensemble(args.out, model)
    _write_manifest(
        args.out, "train",
        {"network": net_cfg.to_dict(), "training": train_cfg.to_dict(), "z": z},
        {"master_seed": train_cfg.seed},
        inputs=[args.input], outputs=[args.out], t0=t0,
    )
    print(f"trained Z={z} ensemble -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    test = load_dataset(args.input)

    if args.ablation:
        if not args.train_input:
            raise InvalidParameterError("--ablation needs --train-in")
        train = load_dataset(args.train_input)
        seeds = [int(s) for s in args.seeds.split(",")]
        net_cfg = NETWORK_PRESETS[args.network or "mid"]
        train_cfg = TrainConfig(epochs=args.epochs or 60, seed=seeds[0])
        rows = []
        for seed in seeds:
            plain, advanced = build_ablation_train_sets(train, args.factor, seed)
            shifted = make_shifted_test(test, seed=seed)
            run = ablation_run(
                plain, advanced, shifted, net_cfg, train_cfg,
                z=args.z or 3, seed=seed, n_jobs=args.jobs,
            )
            rows.append(
                {
                    "seed": seed,
                    "plain": run.plain.to_dict(),
                    "augmented": run.augmented.to_dict(),
                    "delta_misclassified": run.delta_misclassified,
                }
            )
        payload = {
            "runs": rows,
            "augmented_wins": sum(1 for r in rows if r["delta_misclassified"] > 0),
        }
        out = out_dir / "ablation.json"
        _atomic_write(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _write_manifest(
            out, "eval-ablation", {"seeds": seeds, "factor": args.factor},
            {"seeds": seeds}, inputs=[args.input, args.train_input],
            outputs=[out], t0=t0,
        )
        print(json.dumps(payload["runs"], indent=2))
        return 0

    model = load_ensemble(args.model)
    result = evaluate_model(model, test)
    cm_path = out_dir / "confusion.json"
    write_confusion_json(
        cm_path, result.confusion,
        extra={"n_sequences": len(test), "latency": result.latency.to_dict()},
    )
    write_latency_csv(out_dir / "latency.csv", result.latency)
    write_dnorm_csv(out_dir / "dnorm.csv", result.dnorm_rows)
    _write_manifest(
        cm_path, "eval", {"tolerance_s": 0.3}, {},
        inputs=[args.model, args.input],
        outputs=[cm_path, out_dir / "latency.csv", out_dir / "dnorm.csv"], t0=t0,
    )
    print(
        f"success rate {result.confusion.success_rate:.3f} over "
        f"{result.confusion.total} sequences "
        f"(TP {result.confusion.tp} FN {result.confusion.fn} "
        f"FP {result.confusion.fp} TN {result.confusion.tn})"
    )
    return 0


def _frame_from_json_row(row) -> "PillarFrame":
    from .core import PillarFrame

    arr = np.asarray(row, dtype=np.float64)
    if arr.shape != (28,):
        raise InvalidParameterError(f"frame row needs 28 values, got {arr.shape}")
    return PillarFrame(t=float(arr[0]), forces=arr[1:].reshape(9, 3))


def cmd_detect(args) -> int:
    model = load_ensemble(args.model)
    session = DetectorSession(model=model, causal_filter=args.causal)
    sink = open(args.out, "w") if args.out else sys.stdout

    def emit(ev):
        sink.write(json.dumps(ev.to_dict()) + "\n")

    try:
        if args.input:
            log = run_file(session, args.input)
            for ev in log.events:
                emit(ev)
            print(json.dumps(log.summary()), file=sys.stderr)
        else:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=1):
                for line in sys.stdin:
                    line = line.strip()
                    if not line:
                        continue
                    ev = push_frame(session, _frame_from_json_row(json.loads(line)))
                    if ev is not None:
                        emit(ev)
                for ev in flush(session):
                    emit(ev)
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.target)
    with open(path) as fh:
        head = fh.read(512)
    if head.lstrip().startswith("{") and "slipnet-ensemble" in head[:200]:
        model = load_ensemble(path)
        print(f"ensemble: Z={model.z} threshold={model.p_threshold} "
              f"bag={model.bag_fraction} master_seed={model.master_seed}")
        print(f"network: {model.config.to_dict()}")
        n_params = sum(v.size for v in model.members[0].params.values())
        print(f"parameters per member: {n_params}")
        for i, m in enumerate(model.members):
            print(f"  member {i}: provenance {m.provenance}")
        return 0
    sequences = load_dataset(path)
    n_slip = sum(
        1 for s in sequences
        if s.annotation is not None and s.annotation.sequence_class == CLASS_SLIP
    )
    n_frames = sum(len(s) for s in sequences)
    print(f"dataset: {len(sequences)} sequences ({n_slip} slip), {n_frames} frames")
    bad = 0
    for i, seq in enumerate(sequences):
        try:
            seq.validate()
        except SlipnetError as exc:
            bad += 1
            print(f"  sequence {i} INVALID: {exc}")
    print("all sequence invariants hold" if bad == 0 else f"{bad} invalid sequences")
    if args.csv_out and sequences:
        export_csv(args.csv_out, sequences[0])
        print(f"wrote first sequence to {args.csv_out}")
    return 0 if bad == 0 else 2


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep usage errors on exit code 1
        self.print_usage(sys.stderr)
        raise SystemExit(1) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slipnet", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="simulate a stick-slip corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--slip", type=int, default=None, help="slip sequence count (default 200)")
    g.add_argument("--stop", type=int, default=None, help="stop sequence count (default 28)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--config", default=None, help="JSON file with a dataset_spec section")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("augment", help="expand a dataset")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--preset", choices=("full", "symmetry", "none"), default=None)
    a.add_argument("--factor", type=int, default=None)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--config", default=None)
    a.set_defaults(func=cmd_augment)

    s = sub.add_parser("split", help="class-stratified train/test split")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--train-out", required=True)
    s.add_argument("--test-out", required=True)
    s.add_argument("--ratio", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_split)

    t = sub.add_parser("train", help="train the bagged ensemble")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--network", choices=tuple(NETWORK_PRESETS), default=None)
    t.add_argument("--z", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--momentum", type=float, default=None)
    t.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    t.add_argument("--batch-windows", dest="batch_windows", type=int, default=None)
    t.add_argument("--bag-fraction", dest="bag_fraction", type=float, default=None)
    t.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--quiet", action="store_true")
    t.add_argument("--config", default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="offline metrics, or the ablation protocol")
    e.add_argument("--model", default=None)
    e.add_argument("--in", dest="input", required=True, help="test dataset")
    e.add_argument("--out-dir", dest="out_dir", required=True)
    e.add_argument("--ablation", action="store_true")
    e.add_argument("--train-in", dest="train_input", default=None)
    e.add_argument("--seeds", default="1,2,3")
    e.add_argument("--factor", type=int, default=5)
    e.add_argument("--z", type=int, default=None)
    e.add_argument("--epochs", type=int, default=None)
    e.add_argument("--network", choices=tuple(NETWORK_PRESETS), default=None)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("detect", help="stream frames through the detector")
    d.add_argument("--model", required=True)
    d.add_argument("--in", dest="input", default=None,
                   help="dataset file; omit to read frame rows from stdin")
    d.add_argument("--out", default=None, help="decision JSONL (default stdout)")
    d.add_argument("--causal", action="store_true",
                   help="trailing median filter: zero lag, batch equivalence waived")
    d.set_defaults(func=cmd_detect)

    i = sub.add_parser("inspect", help="report on a dataset or model file")
    i.add_argument("target")
    i.add_argument("--csv-out", dest="csv_out", default=None)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (SlipnetError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
