"""From-scratch numerical engine for the window classifier.

Architecture, one window at a time:

    window features (flattened, 40 x 18 = 720)
      -> encoder: affine -> batchnorm -> relu -> affine (128)
      -> GRU cell (hidden 128), state carried across windows, h0 = zeros
      -> estimator: [affine -> batchnorm -> relu] x 2 (256, 128) -> affine -> softmax(2)

Class index 0 is "other", index 1 is "incipient". Everything is float64.

GRU convention used throughout (update gate z, reset gate r, candidate c):

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wh + (r * h) Uh + bh)
    h' = (1 - z) * h + z * c

so z = 0 keeps the previous state and z = 1 replaces it with the candidate.

Training runs batches of whole sequences: windows from all sequences share
batch-norm statistics, while the recurrence is stepped per sequence (ragged
batching, no cross-sequence padding). Backpropagation through time is exact;
see :func:`gradient_check` for the finite-difference harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, NumericError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PROB_CLIP = 1e-12
_MAX_NLL = -np.log(PROB_CLIP)

CLASS_OTHER = 0
CLASS_INCIPIENT = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Layer sizes. Defaults are the full-size classifier."""

    input_dim: int = 720
    encoder_hidden: int = 1024
    encoder_out: int = 128
    gru_hidden: int = 128
    estimator_hidden: tuple = (256, 128)
    n_classes: int = 2

    def __post_init__(self):
        dims = (
            self.input_dim,
            self.encoder_hidden,
            self.encoder_out,
            self.gru_hidden,
            *self.estimator_hidden,
        )
        if any(d <= 0 for d in dims):
            raise InvalidParameterError("all layer dimensions must be positive")
        if self.n_classes != 2:
            raise InvalidParameterError("the output layer is a two-class softmax")
        if len(self.estimator_hidden) != 2:
            raise InvalidParameterError("the estimator has exactly two hidden layers")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "encoder_hidden": self.encoder_hidden,
            "encoder_out": self.encoder_out,
            "gru_hidden": self.gru_hidden,
            "estimator_hidden": list(self.estimator_hidden),
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        kw = dict(d)
        kw["estimator_hidden"] = tuple(kw["estimator_hidden"])
        return cls(**kw)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.95
    weight_decay: float = 1e-3
    batch_windows: int = 512
    epochs: int = 30
    bag_fraction: float = 0.40
    resample_per: str = "epoch"  # "epoch" | "step"
    val_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.bag_fraction <= 1:
            raise InvalidParameterError("bag_fraction must be in (0, 1]")
        if self.resample_per not in ("epoch", "step"):
            raise InvalidParameterError("resample_per must be 'epoch' or 'step'")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "batch_windows": self.batch_windows,
            "epochs": self.epochs,
            "bag_fraction": self.bag_fraction,
            "resample_per": self.resample_per,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


_BN_LAYERS = ("enc_bn0", "est_bn0", "est_bn1")


@dataclass
class ModelState:
    """All learnable tensors plus batch-norm running statistics.

    The initial recurrent state is always the zero vector and is not stored.
    """

    config: NetworkConfig
    params: dict = field(default_factory=dict)
    running: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def decayed_keys(self) -> list[str]:
        # L2 decay applies to weight matrices only, not biases or bn affine.
        return [k for k in self.params if "_W" in k or "_U" in k]

    def check_finite(self):
        for name, arr in self.params.items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in parameter {name}")

    def copy(self) -> "ModelState":
        return ModelState(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            running={k: v.copy() for k, v in self.running.items()},
            provenance=dict(self.provenance),
        )


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(config: NetworkConfig, rng: np.random.Generator) -> ModelState:
    """Glorot-uniform weights, zero biases, identity batch-norm affine."""
    d, h1, e = config.input_dim, config.encoder_hidden, config.encoder_out
    g = config.gru_hidden
    s0, s1 = config.estimator_hidden
    p: dict[str, np.ndarray] = {}
    # Layers feeding straight into batch-norm carry no bias: the mean
    # subtraction would cancel it exactly, leaving a dead parameter.
    p["enc_W0"] = _glorot(rng, d, h1)
    p["enc_g0"] = np.ones(h1)
    p["enc_beta0"] = np.zeros(h1)
    p["enc_W1"] = _glorot(rng, h1, e)
    p["enc_b1"] = np.zeros(e)
    for gate in ("z", "r", "h"):
        p[f"gru_W{gate}"] = _glorot(rng, e, g)
        p[f"gru_U{gate}"] = _glorot(rng, g, g)
        p[f"gru_b{gate}"] = np.zeros(g)
    p["est_W0"] = _glorot(rng, g, s0)
    p["est_g0"] = np.ones(s0)
    p["est_beta0"] = np.zeros(s0)
    p["est_W1"] = _glorot(rng, s0, s1)
    p["est_g1"] = np.ones(s1)
    p["est_beta1"] = np.zeros(s1)
    p["est_W2"] = _glorot(rng, s1, config.n_classes)
    p["est_b2"] = np.zeros(config.n_classes)
    running = {}
    for layer, width in (("enc_bn0", h1), ("est_bn0", s0), ("est_bn1", s1)):
        running[f"{layer}_mean"] = np.zeros(width)
        running[f"{layer}_var"] = np.ones(width)
    return ModelState(config=config, params=p, running=running)


# ---------------------------------------------------------------------------
# Elementwise pieces, numerically stable forms
# ---------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def batchnorm(x, gamma, beta, running_mean, running_var, mode="train",
              momentum=BN_MOMENTUM):
    """Batch normalization over axis 0.

    Train mode normalizes with batch statistics (biased variance) and returns
    updated running statistics; eval mode normalizes with the running ones so
    a batch of one is well-defined. Returns (y, cache, (mean, var)) where the
    cache feeds :func:`batchnorm_backward`.
    """
    x = np.atleast_2d(x)
    if mode == "train":
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mu) * inv
        y = gamma * xhat + beta
        new_mean = (1.0 - momentum) * running_mean + momentum * mu
        new_var = (1.0 - momentum) * running_var + momentum * var
        return y, (xhat, inv), (new_mean, new_var)
    inv = 1.0 / np.sqrt(running_var + BN_EPS)
    xhat = (x - running_mean) * inv
    return gamma * xhat + beta, (xhat, inv), (running_mean, running_var)


def batchnorm_backward(dy, cache, gamma):
    xhat, inv = cache
    n = dy.shape[0]
    dgamma = np.sum(dy * xhat, axis=0)
    dbeta = np.sum(dy, axis=0)
    dxhat = dy * gamma
    dx = inv * (dxhat - dxhat.mean(axis=0) - xhat * np.mean(dxhat * xhat, axis=0))
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# Per-window operations (the eval path composes exactly these three)
# ---------------------------------------------------------------------------


def encoder_forward(x, state: ModelState, mode: str = "eval", window_index=None):
    """Window features -> 128-vector GRU input."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        where = "" if window_index is None else f" at window {window_index}"
        raise NumericError(f"non-finite encoder input{where}")
    was_1d = x.ndim == 1
    p = state.params
    a0 = x @ p["enc_W0"]
    y, _, _ = batchnorm(
        a0, p["enc_g0"], p["enc_beta0"],
        state.running["enc_bn0_mean"], state.running["enc_bn0_var"], mode,
    )
    r0 = np.maximum(y, 0.0)
    out = r0 @ p["enc_W1"] + p["enc_b1"]
    return out[0] if was_1d else out


def gru_cell_forward(x, h_prev, state: ModelState):
    """One recurrence step; see the module docstring for the gate layout."""
    p = state.params
    z = sigmoid(x @ p["gru_Wz"] + h_prev @ p["gru_Uz"] + p["gru_bz"])
    r = sigmoid(x @ p["gru_Wr"] + h_prev @ p["gru_Ur"] + p["gru_br"])
    c = np.tanh(x @ p["gru_Wh"] + (r * h_prev) @ p["gru_Uh"] + p["gru_bh"])
    return (1.0 - z) * h_prev + z * c


def estimator_forward(h, state: ModelState, mode: str = "eval"):
    """GRU hidden state -> (p_other, p_incipient), summing to one."""
    h = np.asarray(h, dtype=np.float64)
    was_1d = h.ndim == 1
    p = state.params
    a = h @ p["est_W0"]
    a, _, _ = batchnorm(a, p["est_g0"], p["est_beta0"],
                        state.running["est_bn0_mean"], state.running["est_bn0_var"], mode)
    a = np.maximum(a, 0.0)
    a = a @ p["est_W1"]
    a, _, _ = batchnorm(a, p["est_g1"], p["est_beta1"],
                        state.running["est_bn1_mean"], state.running["est_bn1_var"], mode)
    a = np.maximum(a, 0.0)
    logits = a @ p["est_W2"] + p["est_b2"]
    probs = softmax(logits)
    return probs[0] if was_1d else probs


def infer_window(state: ModelState, h, x):
    """Eval-mode step used by both offline and streaming inference.

    Returns (new hidden state, probability pair). Keeping one code path here
    is what makes streaming decisions bit-identical to batch decisions.
    """
    xg = encoder_forward(x, state, mode="eval")
    h_new = gru_cell_forward(xg, h, state)
    probs = estimator_forward(h_new, state, mode="eval")
    return h_new, probs


def model_forward(state: ModelState, features: np.ndarray, mode: str = "eval"):
    """Run one sequence of windows, h0 = zeros, windows in order.

    ``features`` is (W, input_dim). Returns (probs (W, 2), trace); the trace
    is None in eval mode.
    """
    features = np.asarray(features, dtype=np.float64)
    if mode == "eval":
        h = np.zeros(state.config.gru_hidden)
        probs = np.empty((len(features), state.config.n_classes))
        for i, x in enumerate(features):
            h, probs[i] = infer_window(state, h, x)
        return probs, None
    trace = forward_batch(state, [features], mode="train")
    return trace.probs_for(0), trace


# ---------------------------------------------------------------------------
# Batched training path (ragged over sequences, exact recurrence)
# ---------------------------------------------------------------------------


@dataclass
class BatchTrace:
    """Everything the backward pass needs, for one batch of sequences."""

    config: NetworkConfig
    order: np.ndarray          # sorted (desc length) -> original position
    lengths: np.ndarray        # per sorted sequence
    offsets: np.ndarray        # row offset of each sorted sequence
    X: np.ndarray              # (B, D) concatenated windows, sorted order
    enc_a0_cache: tuple
    enc_relu: np.ndarray
    enc_r0: np.ndarray         # post-relu encoder hidden
    XG: np.ndarray             # (B, E) GRU inputs
    step_idx: list             # per step: row indices into X
    step_z: list
    step_r: list
    step_c: list
    step_hprev: list
    H: np.ndarray              # (B, G) hidden states
    est_caches: tuple
    logits: np.ndarray
    probs: np.ndarray          # (B, 2)
    new_running: dict          # post-batch running statistics

    def probs_for(self, original_index: int) -> np.ndarray:
        pos = int(np.where(self.order == original_index)[0][0])
        s = self.offsets[pos]
        return self.probs[s : s + self.lengths[pos]]

    def rows_for(self, original_index: int) -> slice:
        pos = int(np.where(self.order == original_index)[0][0])
        s = self.offsets[pos]
        return slice(s, s + int(self.lengths[pos]))


def forward_batch(state: ModelState, feature_list, mode: str = "train") -> BatchTrace:
    """Forward a batch of whole sequences.

    Batch-norm statistics span every window in the batch; the recurrence is
    stepped jointly across sequences ordered by descending length, which is
    arithmetically identical to stepping each sequence alone.
    """
    cfg = state.config
    p = state.params
    lengths_all = np.array([len(f) for f in feature_list], dtype=np.int64)
    if np.any(lengths_all == 0):
        raise InvalidParameterError("cannot forward an empty sequence")
    order = np.argsort(-lengths_all, kind="stable")
    feats = [np.asarray(feature_list[i], dtype=np.float64) for i in order]
    lengths = lengths_all[order]
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    X = np.vstack(feats)
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite window features in batch")

    # encoder
    a0 = X @ p["enc_W0"]
    y0, enc_cache, enc_run = batchnorm(
        a0, p["enc_g0"], p["enc_beta0"],
        state.running["enc_bn0_mean"], state.running["enc_bn0_var"], mode,
    )
    relu0 = y0 > 0
    r0 = y0 * relu0
    XG = r0 @ p["enc_W1"] + p["enc_b1"]

    # GRU, ragged across sequences
    g = cfg.gru_hidden
    max_w = int(lengths[0])
    H = np.empty((X.shape[0], g))
    h = np.zeros((len(feats), g))
    step_idx, step_z, step_r, step_c, step_hprev = [], [], [], [], []
    for t in range(max_w):
        k = int(np.sum(lengths > t))
        h = h[:k]
        idx = offsets[:k] + t
        x_t = XG[idx]
        z = sigmoid(x_t @ p["gru_Wz"] + h @ p["gru_Uz"] + p["gru_bz"])
        r = sigmoid(x_t @ p["gru_Wr"] + h @ p["gru_Ur"] + p["gru_br"])
        c = np.tanh(x_t @ p["gru_Wh"] + (r * h) @ p["gru_Uh"] + p["gru_bh"])
        h_new = (1.0 - z) * h + z * c
        H[idx] = h_new
        step_idx.append(idx)
        step_z.append(z)
        step_r.append(r)
        step_c.append(c)
        step_hprev.append(h)
        h = h_new

    # estimator
    a1 = H @ p["est_W0"]
    y1, est_cache0, est_run0 = batchnorm(
        a1, p["est_g0"], p["est_beta0"],
        state.running["est_bn0_mean"], state.running["est_bn0_var"], mode,
    )
    relu1 = y1 > 0
    r1 = y1 * relu1
    a2 = r1 @ p["est_W1"]
    y2, est_cache1, est_run1 = batchnorm(
        a2, p["est_g1"], p["est_beta1"],
        state.running["est_bn1_mean"], state.running["est_bn1_var"], mode,
    )
    relu2 = y2 > 0
    r2 = y2 * relu2
    logits = r2 @ p["est_W2"] + p["est_b2"]
    probs = softmax(logits)

    new_running = {
        "enc_bn0_mean": enc_run[0], "enc_bn0_var": enc_run[1],
        "est_bn0_mean": est_run0[0], "est_bn0_var": est_run0[1],
        "est_bn1_mean": est_run1[0], "est_bn1_var": est_run1[1],
    }
    return BatchTrace(
        config=cfg, order=order, lengths=lengths, offsets=offsets, X=X,
        enc_a0_cache=enc_cache, enc_relu=relu0, enc_r0=r0, XG=XG,
        step_idx=step_idx, step_z=step_z, step_r=step_r, step_c=step_c,
        step_hprev=step_hprev, H=H,
        est_caches=(est_cache0, relu1, r1, est_cache1, relu2, r2),
        logits=logits, probs=probs, new_running=new_running,
    )


def batch_labels(trace: BatchTrace, label_list) -> np.ndarray:
    """Concatenate per-sequence label arrays in the trace's internal order."""
    return np.concatenate([np.asarray(label_list[i], dtype=np.int64) for i in trace.order])


def bce_loss(probs: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood of the true class, clipped at 1e-12.

    Returns (loss, gradient w.r.t. the softmax logits), using the standard
    softmax + cross-entropy pairing: d loss / d logits = (p - onehot) / B.
    """
    probs = np.atleast_2d(probs)
    labels = np.asarray(labels, dtype=np.int64)
    b = len(labels)
    p_true = probs[np.arange(b), labels]
    nll = -np.log(np.clip(p_true, PROB_CLIP, None))
    loss = float(np.mean(nll))
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    dlogits[nll >= _MAX_NLL] = 0.0  # clipped terms carry no gradient
    return loss, dlogits


def backward(trace: BatchTrace, dlogits: np.ndarray, state: ModelState,
             weight_decay: float = 0.0) -> dict:
    """Exact gradients for every parameter via backpropagation through time.

    The L2 penalty contributes 2 * weight_decay * W to each weight matrix.
    """
    p = state.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    est_cache0, relu1, r1, est_cache1, relu2, r2 = trace.est_caches

    # estimator
    grads["est_W2"] = r2.T @ dlogits
    grads["est_b2"] = dlogits.sum(axis=0)
    dr2 = dlogits @ p["est_W2"].T
    dy2 = dr2 * relu2
    da2, grads["est_g1"], grads["est_beta1"] = batchnorm_backward(dy2, est_cache1, p["est_g1"])
    grads["est_W1"] = r1.T @ da2
    dr1 = da2 @ p["est_W1"].T
    dy1 = dr1 * relu1
    da1, grads["est_g0"], grads["est_beta0"] = batchnorm_backward(dy1, est_cache0, p["est_g0"])
    grads["est_W0"] = trace.H.T @ da1
    dH = da1 @ p["est_W0"].T

    # GRU, reversed
    dXG = np.zeros_like(trace.XG)
    dh_carry = np.zeros((0, trace.config.gru_hidden))
    for t in range(len(trace.step_idx) - 1, -1, -1):
        idx = trace.step_idx[t]
        k = len(idx)
        z, r, c, h_prev = trace.step_z[t], trace.step_r[t], trace.step_c[t], trace.step_hprev[t]
        dh = dH[idx].copy()
        dh[: len(dh_carry)] += dh_carry
        dz = dh * (c - h_prev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        da_c = dc * (1.0 - c * c)
        grads["gru_Wh"] += trace.XG[idx].T @ da_c
        grads["gru_Uh"] += (r * h_prev).T @ da_c
        grads["gru_bh"] += da_c.sum(axis=0)
        drh = da_c @ p["gru_Uh"].T
        dr = drh * h_prev
        dh_prev += drh * r
        da_z = dz * z * (1.0 - z)
        grads["gru_Wz"] += trace.XG[idx].T @ da_z
        grads["gru_Uz"] += h_prev.T @ da_z
        grads["gru_bz"] += da_z.sum(axis=0)
        dh_prev += da_z @ p["gru_Uz"].T
        da_r = dr * r * (1.0 - r)
        grads["gru_Wr"] += trace.XG[idx].T @ da_r
        grads["gru_Ur"] += h_prev.T @ da_r
        grads["gru_br"] += da_r.sum(axis=0)
        dh_prev += da_r @ p["gru_Ur"].T
        dXG[idx] = da_c @ p["gru_Wh"].T + da_z @ p["gru_Wz"].T + da_r @ p["gru_Wr"].T
        dh_carry = dh_prev

    # encoder
    grads["enc_W1"] = trace.enc_r0.T @ dXG
    grads["enc_b1"] = dXG.sum(axis=0)
    dr0 = dXG @ p["enc_W1"].T
    dy0 = dr0 * trace.enc_relu
    da0, grads["enc_g0"], grads["enc_beta0"] = batchnorm_backward(
        dy0, trace.enc_a0_cache, p["enc_g0"]
    )
    grads["enc_W0"] = trace.X.T @ da0

    if weight_decay > 0.0:
        for k in state.decayed_keys():
            grads[k] = grads[k] + 2.0 * weight_decay * p[k]
    for name, gr in grads.items():
        if not np.all(np.isfinite(gr)):
            raise NumericError(f"non-finite gradient for {name}")
    return grads


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class SGDMomentum:
    """v <- momentum * v + g;  w <- w - lr * v. Velocity starts at zero."""

    def __init__(self, lr: float = 1e-3, momentum: float = 0.95):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict):
        for k, g in grads.items():
            v = self.velocity.get(k)
            if v is None:
                v = np.zeros_like(g)
            v = self.momentum * v + g
            self.velocity[k] = v
            params[k] -= self.lr * v


def sgd_momentum_step(params: dict, grads: dict, velocity: dict,
                      lr: float = 1e-3, momentum: float = 0.95) -> dict:
    """Functional form of one momentum-SGD update; returns the new velocity."""
    new_v = {}
    for k, g in grads.items():
        v = velocity.get(k, np.zeros_like(g))
        v = momentum * v + g
        params[k] -= lr * v
        new_v[k] = v
    return new_v


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------


def batch_loss(state: ModelState, feature_list, label_list, weight_decay: float = 0.0) -> float:
    """Scalar training loss for a batch, including the L2 penalty term.

    This is the quantity finite differences probe; its analytic gradient is
    exactly what :func:`backward` returns.
    """
    trace = forward_batch(state, feature_list, mode="train")
    labels = batch_labels(trace, label_list)
    loss, _ = bce_loss(trace.probs, labels)
    if weight_decay > 0.0:
        loss += weight_decay * sum(float(np.sum(state.params[k] ** 2))
                                   for k in state.decayed_keys())
    return loss


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    worst: tuple  # (param name, flat index, analytic, numeric)
    passed: bool

    def __str__(self):
        name, idx, a, f = self.worst
        return (
            f"gradient check: {self.n_checked} coords, max rel err "
            f"{self.max_rel_error:.3e} (worst {name}[{idx}]: analytic {a:.6e}, "
            f"fd {f:.6e}) -> {'pass' if self.passed else 'FAIL'}"
        )


def gradient_check(
    state: ModelState,
    feature_list,
    label_list,
    n_samples: int = 200,
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    rng: np.random.Generator | None = None,
    weight_decay: float = 0.0,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences on
    randomly sampled parameter coordinates."""
    rng = rng or np.random.default_rng(0)
    trace = forward_batch(state, feature_list, mode="train")
    labels = batch_labels(trace, label_list)
    _, dlogits = bce_loss(trace.probs, labels)
    grads = backward(trace, dlogits, state, weight_decay=weight_decay)

    names = sorted(state.params)
    sizes = np.array([state.params[n].size for n in names])
    cum = np.cumsum(sizes)
    total = int(cum[-1])
    picks = rng.choice(total, size=min(n_samples, total), replace=False)

    max_rel = 0.0
    worst = (names[0], 0, 0.0, 0.0)
    for flat in picks:
        pi = int(np.searchsorted(cum, flat, side="right"))
        name = names[pi]
        idx = int(flat - (cum[pi - 1] if pi > 0 else 0))
        w = state.params[name].reshape(-1)
        orig = w[idx]
        w[idx] = orig + eps
        lp = batch_loss(state, feature_list, label_list, weight_decay)
        w[idx] = orig - eps
        lm = batch_loss(state, feature_list, label_list, weight_decay)
        w[idx] = orig
        fd = (lp - lm) / (2.0 * eps)
        an = float(grads[name].reshape(-1)[idx])
        denom = max(abs(an), abs(fd))
        # below the fd noise floor (~loss * eps_machine / eps) both sides
        # read as zero; treat as agreement rather than dividing noise by noise
        rel = 0.0 if denom < 1e-9 else abs(an - fd) / denom
        if rel > max_rel:
            max_rel = rel
            worst = (name, idx, an, fd)
    return GradCheckReport(
        max_rel_error=max_rel,
        n_checked=len(picks),
        worst=worst,
        passed=max_rel < tolerance,
    )
