"""Multistep-ahead prediction with a one-hidden-layer perceptron.

The network maps the first ``t`` columns of a series to the remaining
``n - t`` columns: ``out = W2 @ sigmoid(W1 @ vec(head) + b1) + b2``, where
``vec`` flattens time-major (all features of step 1, then step 2, ...).
It is trained with Adam on either the squared Euclidean loss or the
soft-DTW loss; the soft-DTW gradient w.r.t. the prediction comes from the
backward recursion and is chained through the network by hand.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import as_series, check_gamma, cost_matrix, dtw, forward_from_cost, jacobian_apply, sdtw_backward

LOSSES = ("euclidean", "sdtw")


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        h, d_in = self.w1.shape
        d_out = self.w2.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (d_out, h) or self.b2.shape != (d_out,):
            raise ValueError("inconsistent parameter shapes")

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def map(self, fn, *others: "MlpParams") -> "MlpParams":
        return MlpParams(**{k: fn(v, *(o.arrays()[k] for o in others)) for k, v in self.arrays().items()})

    def copy(self) -> "MlpParams":
        return self.map(np.copy)

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[0]


def init_params(input_size: int, output_size: int, hidden: int = 64, seed=0) -> MlpParams:
    """LeCun-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    return MlpParams(
        w1=rng.standard_normal((hidden, input_size)) / np.sqrt(input_size),
        b1=np.zeros(hidden),
        w2=rng.standard_normal((output_size, hidden)) / np.sqrt(hidden),
        b2=np.zeros(output_size),
    )


def split_series(x, fraction: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Split a ``(p, n)`` series at ``t = floor(fraction * n)``."""
    x = as_series(x)
    n = x.shape[1]
    t = int(np.floor(fraction * n))
    if not 1 <= t < n:
        raise ValueError(f"fraction {fraction} gives t={t} for n={n}; need 1 <= t < n")
    return x[:, :t], x[:, t:]


def make_pairs(series, fraction: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Stack head/tail splits of equal-length series into ``(N, p, t)`` and ``(N, p, n - t)``."""
    heads, tails = zip(*(split_series(x, fraction) for x in series))
    return np.stack(heads), np.stack(tails)


def _flatten(segments: np.ndarray) -> np.ndarray:
    # (B, p, t) -> (B, t * p), time-major
    return segments.transpose(0, 2, 1).reshape(segments.shape[0], -1)


def _unflatten(vectors: np.ndarray, p: int) -> np.ndarray:
    return vectors.reshape(vectors.shape[0], -1, p).transpose(0, 2, 1)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward(params: MlpParams, inputs: np.ndarray):
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[np.newaxis]
    p = inputs.shape[1]
    flat = _flatten(inputs)
    if flat.shape[1] != params.w1.shape[1]:
        raise ValueError(f"input has {flat.shape[1]} entries, network expects {params.w1.shape[1]}")
    if params.w2.shape[0] % p:
        raise ValueError("output size is not a multiple of the feature dimension")
    hidden = _sigmoid(flat @ params.w1.T + params.b1)
    out = hidden @ params.w2.T + params.b2
    return flat, hidden, _unflatten(out, p)


def mlp_forward(params: MlpParams, inputs) -> np.ndarray:
    """Predict tails for one ``(p, t)`` head or a batch ``(B, p, t)``."""
    arr = np.asarray(inputs, dtype=np.float64)
    out = _forward(params, arr)[2]
    return out[0] if arr.ndim == 2 else out


def _check_loss(loss: str, gamma):
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    if loss == "sdtw":
        if gamma is None or check_gamma(gamma) <= 0:
            raise ValueError("the sdtw loss needs gamma > 0")
        return float(gamma)
    return None


def _loss_and_output_grad(pred: np.ndarray, targets: np.ndarray, loss: str, gamma, want_grad=True):
    """Per-example losses and d(loss_k)/d(pred_k)."""
    if loss == "euclidean":
        diff = pred - targets
        return np.sum(diff**2, axis=(1, 2)), 2.0 * diff
    values = np.empty(pred.shape[0])
    grads = np.empty_like(pred)
    for k in range(pred.shape[0]):
        delta = cost_matrix(pred[k], targets[k])
        table = forward_from_cost(delta, gamma)
        values[k] = table.value
        if want_grad:
            grads[k] = jacobian_apply(pred[k], targets[k], sdtw_backward(table, delta))
    return values, grads


def training_loss(params: MlpParams, inputs, targets, loss: str = "euclidean", gamma: float | None = None) -> float:
    """Mean over the batch of the squared Euclidean or soft-DTW loss."""
    gamma = _check_loss(loss, gamma)
    pred = _forward(params, inputs)[2]
    targets = np.asarray(targets, dtype=np.float64).reshape(pred.shape)
    if pred.shape[0] == 0:
        raise ValueError("empty batch")
    return float(np.mean(_loss_and_output_grad(pred, targets, loss, gamma, want_grad=False)[0]))


def training_value_and_grad(params: MlpParams, inputs, targets, loss="euclidean", gamma=None):
    gamma = _check_loss(loss, gamma)
    flat, hidden, pred = _forward(params, inputs)
    targets = np.asarray(targets, dtype=np.float64).reshape(pred.shape)
    batch = pred.shape[0]
    values, dpred = _loss_and_output_grad(pred, targets, loss, gamma)
    dout = _flatten(dpred) / batch
    dhidden = (dout @ params.w2) * hidden * (1.0 - hidden)
    grad = MlpParams(
        w1=dhidden.T @ flat,
        b1=dhidden.sum(axis=0),
        w2=dout.T @ hidden,
        b2=dout.sum(axis=0),
    )
    return float(values.mean()), grad


def training_grad(params: MlpParams, inputs, targets, loss: str = "euclidean", gamma: float | None = None) -> MlpParams:
    """Gradient of :func:`training_loss` w.r.t. every parameter."""
    return training_value_and_grad(params, inputs, targets, loss, gamma)[1]


@dataclass
class AdamState:
    step: int
    m: MlpParams
    v: MlpParams
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, **kwargs) -> "AdamState":
        zero = params.map(np.zeros_like)
        return cls(step=0, m=zero, v=zero.copy(), **kwargs)


def adam_step(state: AdamState, params: MlpParams, grad: MlpParams) -> tuple[AdamState, MlpParams]:
    """One Adam update; returns new state and parameters without mutating inputs."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = state.m.map(lambda m_, g: b1 * m_ + (1 - b1) * g, grad)
    v = state.v.map(lambda v_, g: b2 * v_ + (1 - b2) * g * g, grad)
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new_params = params.map(
        lambda w, m_, v_: w - state.lr * (m_ / c1) / (np.sqrt(v_ / c2) + state.eps), m, v
    )
    new_state = AdamState(step=t, m=m, v=v, lr=state.lr, beta1=b1, beta2=b2, eps=state.eps)
    return new_state, new_params


@dataclass
class TrainingConfig:
    loss: str = "euclidean"
    gamma: float | None = None
    epochs: int = 200
    batch_size: int = 16
    hidden: int = 64
    lr: float = 1e-3
    seed: int = 0
    init: str = "random"  # or "euclidean-warm-start"


@dataclass
class TrainingResult:
    params: MlpParams
    history: list[float] = field(default_factory=list)
    phases: list[str] = field(default_factory=list)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def _run_epochs(params, inputs, targets, loss, gamma, config, rng, history, phases, tag):
    state = AdamState.zeros_like(params, lr=config.lr)
    n = inputs.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            value, grad = training_value_and_grad(params, inputs[idx], targets[idx], loss, gamma)
            if not np.isfinite(value):
                raise TrainingDiverged(f"non-finite loss during {tag} training", history)
            state, params = adam_step(state, params, grad)
            total += value * len(idx)
        history.append(total / n)
        phases.append(tag)
    return params


def train_predictor(inputs, targets, config: TrainingConfig | None = None, params: MlpParams | None = None) -> TrainingResult:
    """Mini-batch Adam training; ``history`` holds the mean training loss per epoch.

    With ``init="euclidean-warm-start"`` and the sdtw loss, the network is
    first trained with the Euclidean loss for ``epochs`` epochs (exactly the
    Euclidean-only run with the same seed) and then for another ``epochs``
    epochs with the soft-DTW loss.
    """
    config = config or TrainingConfig()
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 3 or targets.ndim != 3 or inputs.shape[0] != targets.shape[0] or inputs.shape[0] == 0:
        raise ValueError("inputs and targets must be nonempty (N, p, t) and (N, p, n - t) arrays")
    gamma = _check_loss(config.loss, config.gamma)
    if config.init not in ("random", "euclidean-warm-start"):
        raise ValueError(f"unknown init {config.init!r}")
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(inputs.shape[1] * inputs.shape[2], targets.shape[1] * targets.shape[2], config.hidden, rng)
    history: list[float] = []
    phases: list[str] = []
    if config.init == "euclidean-warm-start" and config.loss == "sdtw":
        params = _run_epochs(params, inputs, targets, "euclidean", None, config, rng, history, phases, "euclidean")
    params = _run_epochs(params, inputs, targets, config.loss, gamma, config, rng, history, phases, config.loss)
    return TrainingResult(params=params, history=history, phases=phases)


def evaluate_predictor(params: MlpParams, inputs, targets) -> tuple[float, float]:
    """Mean DTW and mean squared Euclidean loss of the predictions."""
    pred = _forward(params, inputs)[2]
    targets = np.asarray(targets, dtype=np.float64).reshape(pred.shape)
    if pred.shape[0] == 0:
        raise ValueError("empty test set")
    dtw_losses = [dtw(a, b) for a, b in zip(pred, targets)]
    euc = np.sum((pred - targets) ** 2, axis=(1, 2))
    return float(np.mean(dtw_losses)), float(np.mean(euc))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

MAGIC = b"SDTWMLP\x00"
FORMAT_VERSION = 1


def save_params(params: MlpParams, path, metadata: dict | None = None) -> None:
    """Write a binary parameter file plus a ``<path>.json`` metadata sidecar.

    Layout (little-endian): 8-byte magic, uint32 version, uint32 array
    count, then per array uint32 ndim, ndim uint64 dims and the row-major
    float64 payload. Arrays appear in the order w1, b1, w2, b2.
    """
    path = Path(path)
    arrays = params.arrays()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(arrays)))
        for arr in arrays.values():
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    sidecar = {
        "format": "softdtw-mlp",
        "version": FORMAT_VERSION,
        "arrays": {k: list(v.shape) for k, v in arrays.items()},
        "metadata": metadata or {},
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_params(path) -> MlpParams:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a soft-DTW MLP parameter file")
    version, count = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    offset = 16
    arrays = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arrays.append(np.frombuffer(data, dtype="<f8", count=size, offset=offset).reshape(shape).astype(np.float64))
        offset += 8 * size
    names = [f.name for f in fields(MlpParams)]
    if len(arrays) != len(names):
        raise ValueError(f"{path}: expected {len(names)} arrays, found {len(arrays)}")
    return MlpParams(**dict(zip(names, arrays)))
