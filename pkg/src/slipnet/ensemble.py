"""Bagged ensemble: training, probability aggregation, persistence.

Z classifiers are trained independently; every epoch each one draws
ceil(bag_fraction * N) whole sequences from its training set with
replacement. At inference each member carries its own recurrent state and
the per-window incipient probabilities are averaged; the decision is
"incipient" exactly when that mean strictly exceeds the threshold.
"""

from __future__ import annotations

import base64
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import LABEL_INCIPIENT, LABEL_OTHER
from .errors import (
    DataFormatError,
    InvalidParameterError,
    NumericError,
    UnsupportedVersionError,
)
from .neural import (
    CLASS_INCIPIENT,
    ModelState,
    NetworkConfig,
    SGDMomentum,
    TrainConfig,
    backward,
    batch_labels,
    bce_loss,
    forward_batch,
    infer_window,
    init_model,
)

FORMAT_VERSION = 1
DEFAULT_Z = 5
DEFAULT_THRESHOLD = 0.5


@dataclass
class EnsembleModel:
    members: list[ModelState]
    p_threshold: float = DEFAULT_THRESHOLD
    bag_fraction: float = 0.40
    master_seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise InvalidParameterError("an ensemble needs at least one member")
        if not 0 < self.p_threshold < 1:
            raise InvalidParameterError("p_threshold must lie in (0, 1)")
        cfgs = {m.config for m in self.members}
        if len(cfgs) != 1:
            raise InvalidParameterError("all members must share one network config")

    @property
    def z(self) -> int:
        return len(self.members)

    @property
    def config(self) -> NetworkConfig:
        return self.members[0].config


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _make_batches(indices: np.ndarray, window_counts: np.ndarray, batch_windows: int):
    """Greedily pack whole sequences until each batch holds >= batch_windows."""
    batches, cur, cur_w = [], [], 0
    for i in indices:
        cur.append(int(i))
        cur_w += int(window_counts[i])
        if cur_w >= batch_windows:
            batches.append(cur)
            cur, cur_w = [], 0
    if cur:
        batches.append(cur)
    return batches


def _epoch_loss(state: ModelState, prepared, idx_list, train_cfg: TrainConfig,
                optimizer: SGDMomentum, rng: np.random.Generator) -> float:
    window_counts = np.array([len(prepared[i][1]) for i in range(len(prepared))])
    if train_cfg.resample_per == "epoch":
        batches = _make_batches(idx_list, window_counts, train_cfg.batch_windows)
    else:
        # fresh with-replacement draw per gradient step, same total volume
        n_draw = len(idx_list)
        drawn, batches = 0, []
        while drawn < n_draw:
            cur, cur_w = [], 0
            while cur_w < train_cfg.batch_windows and drawn < n_draw:
                i = int(rng.integers(0, len(prepared)))
                cur.append(i)
                cur_w += int(window_counts[i])
                drawn += 1
            batches.append(cur)
    total_loss, total_windows = 0.0, 0
    for batch in batches:
        feats = [prepared[i][0] for i in batch]
        labels = [prepared[i][1] for i in batch]
        trace = forward_batch(state, feats, mode="train")
        y = batch_labels(trace, labels)
        loss, dlogits = bce_loss(trace.probs, y)
        grads = backward(trace, dlogits, state, weight_decay=train_cfg.weight_decay)
        optimizer.step(state.params, grads)
        for key, val in trace.new_running.items():
            state.running[key] = val
        state.check_finite()
        total_loss += loss * len(y)
        total_windows += len(y)
    return total_loss / max(total_windows, 1)


def _validation_loss(state: ModelState, prepared, idx_list) -> float:
    feats = [prepared[i][0] for i in idx_list]
    labels = [prepared[i][1] for i in idx_list]
    trace = forward_batch(state, feats, mode="eval")
    y = batch_labels(trace, labels)
    loss, _ = bce_loss(trace.probs, y)
    return loss


def train_member(
    prepared,
    net_config: NetworkConfig,
    train_cfg: TrainConfig,
    seed: int,
    log=None,
) -> ModelState:
    """Train one classifier on with-replacement sequence bags.

    ``prepared`` is the list of (features, labels, end_times) triples from
    :func:`slipnet.pipeline.prepare_dataset`. Deterministic given the seed.
    """
    if not prepared:
        raise InvalidParameterError("training set is empty")
    rng = np.random.default_rng(seed)
    state = init_model(net_config, rng)
    optimizer = SGDMomentum(lr=train_cfg.lr, momentum=train_cfg.momentum)

    n = len(prepared)
    pool = np.arange(n)
    val_idx = np.array([], dtype=np.int64)
    if train_cfg.val_fraction > 0 and n > 2:
        n_val = max(1, int(round(train_cfg.val_fraction * n)))
        perm = rng.permutation(n)
        val_idx, pool = perm[:n_val], perm[n_val:]
    n_bag = max(1, math.ceil(train_cfg.bag_fraction * len(pool)))

    best_val, best_state = math.inf, None
    for epoch in range(train_cfg.epochs):
        bag = pool[rng.integers(0, len(pool), size=n_bag)]
        try:
            loss = _epoch_loss(state, prepared, bag, train_cfg, optimizer, rng)
        except NumericError as exc:
            raise NumericError(f"training aborted at epoch {epoch}: {exc}") from exc
        msg = f"epoch {epoch + 1}/{train_cfg.epochs} loss {loss:.4f}"
        if len(val_idx):
            vloss = _validation_loss(state, prepared, val_idx)
            msg += f" val {vloss:.4f}"
            if vloss < best_val:
                best_val, best_state = vloss, state.copy()
        if log:
            log(msg)
    out = best_state if best_state is not None else state
    out.provenance = {
        "seed": int(seed),
        "epochs": train_cfg.epochs,
        "n_train_sequences": n,
        "train_config": train_cfg.to_dict(),
    }
    return out


def _train_member_job(args):
    prepared, net_cfg_d, train_cfg_d, seed = args
    return train_member(
        prepared, NetworkConfig.from_dict(net_cfg_d), TrainConfig.from_dict(train_cfg_d), seed
    )


def member_seeds(master_seed: int, z: int) -> list[int]:
    """Fixed seed split so ensembles are reproducible from one master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(z)]


def train_ensemble(
    prepared,
    net_config: NetworkConfig,
    train_cfg: TrainConfig,
    z: int = DEFAULT_Z,
    master_seed: int = 0,
    n_jobs: int = 1,
    log=None,
) -> EnsembleModel:
    """Z independently seeded members; optionally trained in parallel."""
    if z < 1:
        raise InvalidParameterError("ensemble size must be at least 1")
    seeds = member_seeds(master_seed, z)
    if n_jobs > 1 and z > 1:
        jobs = [(prepared, net_config.to_dict(), train_cfg.to_dict(), s) for s in seeds]
        with ProcessPoolExecutor(max_workers=min(n_jobs, z)) as pool:
            members = list(pool.map(_train_member_job, jobs))
    else:
        members = []
        for i, s in enumerate(seeds):
            member_log = (lambda m, i=i: log(f"[member {i + 1}/{z}] {m}")) if log else None
            members.append(train_member(prepared, net_config, train_cfg, s, log=member_log))
    return EnsembleModel(
        members=members,
        bag_fraction=train_cfg.bag_fraction,
        master_seed=master_seed,
    )


# ---------------------------------------------------------------------------
# Inference and decision rule
# ---------------------------------------------------------------------------


def aggregate_decide(member_probs, p_threshold: float = DEFAULT_THRESHOLD) -> str:
    """Mean of member probabilities, strictly above threshold -> incipient.

    A tie at exactly the threshold resolves to "other". Kept scalar-only:
    it runs once per window per stream and in exhaustive verification loops.
    """
    probs = [float(p) for p in member_probs]
    if not probs:
        raise InvalidParameterError("no member probabilities given")
    for p in probs:
        if not 0.0 <= p <= 1.0:  # NaN fails this comparison too
            raise InvalidParameterError(f"probabilities must lie in [0, 1], got {probs}")
    return LABEL_INCIPIENT if sum(probs) / len(probs) > p_threshold else LABEL_OTHER


def ensemble_forward(model: EnsembleModel, features: np.ndarray):
    """Per-window mean probabilities and decisions for one sequence.

    Every member steps its own recurrent state across the windows. Returns
    (decisions list[str], mean_probs (W,), member_probs (Z, W)).
    """
    features = np.asarray(features, dtype=np.float64)
    w = len(features)
    g = model.config.gru_hidden
    member_probs = np.empty((model.z, w))
    for mi, member in enumerate(model.members):
        h = np.zeros(g)
        for wi in range(w):
            h, probs = infer_window(member, h, features[wi])
            member_probs[mi, wi] = probs[CLASS_INCIPIENT]
    mean_probs = member_probs.mean(axis=0)
    decisions = [
        LABEL_INCIPIENT if mp > model.p_threshold else LABEL_OTHER for mp in mean_probs
    ]
    return decisions, mean_probs, member_probs


# ---------------------------------------------------------------------------
# Persistence: versioned JSON envelope, float64 tensors as base64
# ---------------------------------------------------------------------------


def _enc(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _dec(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype=np.float64).copy()
    return arr.reshape(obj["shape"])


def model_to_dict(state: ModelState) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": state.config.to_dict(),
        "tensors": {k: _enc(v) for k, v in sorted(state.params.items())},
        "bn_running": {k: _enc(v) for k, v in sorted(state.running.items())},
        "provenance": state.provenance,
    }


def model_from_dict(d: dict) -> ModelState:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model format version {version!r}")
    return ModelState(
        config=NetworkConfig.from_dict(d["config"]),
        params={k: _dec(v) for k, v in d["tensors"].items()},
        running={k: _dec(v) for k, v in d["bn_running"].items()},
        provenance=d.get("provenance", {}),
    )


def save_ensemble(path, model: EnsembleModel):
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "slipnet-ensemble",
        "z": model.z,
        "p_threshold": model.p_threshold,
        "bag_fraction": model.bag_fraction,
        "master_seed": model.master_seed,
        "meta": model.meta,
        "members": [model_to_dict(m) for m in model.members],
    }
    from .dataio import _atomic_write

    _atomic_write(Path(path), json.dumps(payload, separators=(",", ":")))


def load_ensemble(path) -> EnsembleModel:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"ensemble file is corrupt or truncated: {exc.msg}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported ensemble format version {version!r}")
    model = EnsembleModel(
        members=[model_from_dict(m) for m in payload["members"]],
        p_threshold=float(payload["p_threshold"]),
        bag_fraction=float(payload["bag_fraction"]),
        master_seed=int(payload["master_seed"]),
        meta=payload.get("meta", {}),
    )
    if model.z != payload["z"]:
        raise DataFormatError(f"member count {model.z} does not match declared z {payload['z']}")
    return model
