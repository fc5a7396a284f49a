"""Scalar-output spectrogram regressors trained with Adam on MSE.

Two backbones share one training loop: a flat ``linear`` map over all
spectrogram cells, and ``small_conv`` — stacked (3x3 conv, stride 1, same
padding -> ReLU -> 2x2 average pool) stages followed by global average
pooling and an affine head. All math is float64 numpy with manual backprop;
given (seed, data, config) a run is fully deterministic. The backbone is a
plug-in choice: any regressor with a 1-channel input and a 1-value output
fills the same role.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import CheckpointError, DivergenceError, ShapeError
from .validation import check_equal_lengths, spectrogram_batch

CHECKPOINT_MAGIC = b"PFCK"
ARCHITECTURES = ("linear", "small_conv")

# distinct PCG64 stream for batch shuffling so weight init draws stay separate
_SHUFFLE_STREAM = 0x5B5C


@dataclass(frozen=True)
class RegressorConfig:
    """Backbone and optimizer settings."""

    architecture: str = "small_conv"
    conv_channels: tuple[int, ...] = (8, 16, 32)
    learning_rate: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 30
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.architecture == "small_conv" and (
            not self.conv_channels or any(c < 1 for c in self.conv_channels)
        ):
            raise ValueError("conv_channels must be a non-empty tuple of positive counts")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")


@dataclass
class RegressorParams:
    """Named parameter tensors plus the input shape they were built for."""

    architecture: str
    input_shape: tuple[int, int]
    tensors: dict[str, np.ndarray]

    def copy(self) -> "RegressorParams":
        return RegressorParams(
            architecture=self.architecture,
            input_shape=self.input_shape,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )

    def n_parameters(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per tensor."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


@dataclass
class TrainReport:
    """Outcome of one training run.

    ``val_loss_curve[0]`` is the pre-training validation MSE; entry ``e`` is
    the MSE after epoch ``e``. ``train_loss_curve[e-1]`` is the mean
    mini-batch loss during epoch ``e``. ``best_epoch`` indexes
    ``val_loss_curve`` (0 = initial parameters).
    """

    best_epoch: int
    train_loss_curve: list[float]
    val_loss_curve: list[float]
    selected_params: RegressorParams


def init_params(cfg: RegressorConfig, input_shape) -> RegressorParams:
    """Seeded uniform(-s, s) weights with s = sqrt(1/fan_in); zero biases."""
    n_mels, n_frames = (int(d) for d in input_shape)
    if n_mels < 1 or n_frames < 1:
        raise ShapeError(f"bad input shape {input_shape}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    tensors: dict[str, np.ndarray] = {}
    if cfg.architecture == "linear":
        fan_in = n_mels * n_frames
        s = np.sqrt(1.0 / fan_in)
        tensors["w"] = rng.uniform(-s, s, size=fan_in)
        tensors["b"] = np.zeros(())
    else:
        c_prev = 1
        for i, c_out in enumerate(cfg.conv_channels):
            s = np.sqrt(1.0 / (c_prev * 9))
            tensors[f"conv{i}.w"] = rng.uniform(-s, s, size=(c_out, c_prev, 3, 3))
            tensors[f"conv{i}.b"] = np.zeros(c_out)
            c_prev = c_out
        s = np.sqrt(1.0 / c_prev)
        tensors["head.w"] = rng.uniform(-s, s, size=c_prev)
        tensors["head.b"] = np.zeros(())
        _check_spatial(cfg.conv_channels, (n_mels, n_frames))
    return RegressorParams(
        architecture=cfg.architecture, input_shape=(n_mels, n_frames), tensors=tensors
    )


def _check_spatial(conv_channels, input_shape) -> None:
    h, w = input_shape
    for _ in conv_channels:
        h, w = h // 2, w // 2
        if h < 1 or w < 1:
            raise ShapeError(
                f"input {input_shape} too small for {len(conv_channels)} pooling stages"
            )


# ---------------------------------------------------------------------------
# layer primitives (forward caches feed the manual backward pass)

def _im2col(padded: np.ndarray, h: int, w: int) -> np.ndarray:
    b, c = padded.shape[:2]
    s = padded.strides
    windows = np.lib.stride_tricks.as_strided(
        padded,
        shape=(b, c, h, w, 3, 3),
        strides=(s[0], s[1], s[2], s[3], s[2], s[3]),
        writeable=False,
    )
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(b, h * w, c * 9)


def _conv_forward(x, w, b):
    bsz, c, h, wd = x.shape
    padded = np.zeros((bsz, c, h + 2, wd + 2))
    padded[:, :, 1:-1, 1:-1] = x
    cols = _im2col(padded, h, wd)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    return out.transpose(0, 2, 1).reshape(bsz, w.shape[0], h, wd), cols


def _conv_backward(dout, cols, x_shape, w):
    bsz, c, h, wd = x_shape
    o = w.shape[0]
    dout_r = dout.reshape(bsz, o, h * wd).transpose(0, 2, 1)
    dw = np.einsum("bpo,bpk->ok", dout_r, cols).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dcols = (dout_r @ w.reshape(o, -1)).reshape(bsz, h, wd, c, 3, 3)
    dcols = dcols.transpose(0, 3, 4, 5, 1, 2)
    dpad = np.zeros((bsz, c, h + 2, wd + 2))
    for u in range(3):
        for v in range(3):
            dpad[:, :, u : u + h, v : v + wd] += dcols[:, :, u, v]
    return dpad[:, :, 1:-1, 1:-1], dw, db


def _pool_forward(x):
    bsz, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    t = x[:, :, : 2 * ho, : 2 * wo].reshape(bsz, c, ho, 2, wo, 2)
    return t.mean(axis=(3, 5))


def _pool_backward(dout, x_shape):
    bsz, c, h, w = x_shape
    ho, wo = h // 2, w // 2
    dx = np.zeros(x_shape)
    dx[:, :, : 2 * ho, : 2 * wo] = np.repeat(np.repeat(dout, 2, axis=2), 2, axis=3) / 4.0
    return dx


def _check_batch_shape(params: RegressorParams, X: np.ndarray) -> None:
    if tuple(X.shape[1:]) != params.input_shape:
        raise ShapeError(
            f"spectrogram shape {tuple(X.shape[1:])} does not match "
            f"parameter input shape {params.input_shape}"
        )


def _forward_batch(params: RegressorParams, X: np.ndarray, keep_cache: bool = False):
    _check_batch_shape(params, X)
    t = params.tensors
    if params.architecture == "linear":
        flat = X.reshape(X.shape[0], -1)
        pred = flat @ t["w"] + t["b"]
        return pred, {"flat": flat} if keep_cache else None

    x = X[:, None, :, :]
    stages = []
    i = 0
    while f"conv{i}.w" in t:
        out, cols = _conv_forward(x, t[f"conv{i}.w"], t[f"conv{i}.b"])
        act = np.maximum(out, 0.0)
        pooled = _pool_forward(act)
        if pooled.shape[2] < 1 or pooled.shape[3] < 1:
            raise ShapeError("input too small for the configured pooling stages")
        stages.append(
            {"x_shape": x.shape, "cols": cols, "pre": out, "act_shape": act.shape}
        )
        x = pooled
        i += 1
    feats = x.mean(axis=(2, 3))
    pred = feats @ t["head.w"] + t["head.b"]
    cache = {"stages": stages, "feats": feats, "gap_shape": x.shape} if keep_cache else None
    return pred, cache


def forward(params: RegressorParams, spec) -> float:
    """Predict the target for one spectrogram."""
    X = spectrogram_batch(spec, "spec")
    pred, _ = _forward_batch(params, X)
    return float(pred[0])


def predict_set(params: RegressorParams, specs) -> np.ndarray:
    """Deterministic forward over a collection, order-preserving."""
    if _collection_size(specs) == 0:
        return np.zeros(0)
    X = spectrogram_batch(specs, "specs")
    pred, _ = _forward_batch(params, X)
    return pred


def mse(preds, targets) -> float:
    """Mean squared difference."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.size == 0:
        raise ValueError("mse of empty sequences is undefined")
    check_equal_lengths(preds, targets, "preds/targets")
    return float(np.mean((preds - targets) ** 2))


def loss_and_grad(params: RegressorParams, X, y):
    """Batch-mean MSE and its exact gradient for every parameter tensor."""
    X = spectrogram_batch(X, "X")
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    check_equal_lengths(X, y, "X/y")
    pred, cache = _forward_batch(params, X, keep_cache=True)
    residual = pred - y
    loss = float(np.mean(residual**2))
    dpred = 2.0 * residual / X.shape[0]

    t = params.tensors
    grads: dict[str, np.ndarray] = {}
    if params.architecture == "linear":
        grads["w"] = cache["flat"].T @ dpred
        grads["b"] = np.asarray(dpred.sum())
        return loss, grads

    feats = cache["feats"]
    grads["head.w"] = feats.T @ dpred
    grads["head.b"] = np.asarray(dpred.sum())
    dfeats = dpred[:, None] * t["head.w"][None, :]
    _, _, gh, gw = cache["gap_shape"]
    dx = dfeats[:, :, None, None] / (gh * gw) * np.ones(cache["gap_shape"])
    for i in reversed(range(len(cache["stages"]))):
        stage = cache["stages"][i]
        dact = _pool_backward(dx, stage["act_shape"])
        dpre = dact * (stage["pre"] > 0)
        dx, dw, db = _conv_backward(dpre, stage["cols"], stage["x_shape"], t[f"conv{i}.w"])
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
    return loss, grads


def grad(params: RegressorParams, X, y) -> dict[str, np.ndarray]:
    """Gradient of batch-mean MSE (see :func:`loss_and_grad`)."""
    return loss_and_grad(params, X, y)[1]


def init_adam_state(params: RegressorParams) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.tensors.items()},
        v={k: np.zeros_like(v) for k, v in params.tensors.items()},
    )


def adam_step(params, grads, state, t, cfg):
    """One bias-corrected Adam update; returns new params and state."""
    if t < 1:
        raise ValueError("step index t must be >= 1")
    lr, b1, b2, eps = cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    new_t, new_m, new_v = {}, {}, {}
    for name, p in params.tensors.items():
        g = grads[name]
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
        m = b1 * state.m[name] + (1 - b1) * g
        v = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_t[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    params = RegressorParams(params.architecture, params.input_shape, new_t)
    return params, AdamState(m=new_m, v=new_v)


def _collection_size(X) -> int:
    if isinstance(X, np.ndarray):
        return X.shape[0] if X.ndim == 3 else 1
    if hasattr(X, "bins"):
        return 1
    return len(X)


def _coerce_set(data):
    """Accept either a (specs, targets) tuple or a list of (spec, target) pairs."""
    if isinstance(data, tuple) and len(data) == 2:
        X, y = data
    else:
        pairs = list(data)
        X = [p[0] for p in pairs]
        y = [p[1] for p in pairs]
    if _collection_size(X) == 0:
        raise ValueError("dataset is empty")
    return spectrogram_batch(X, "specs"), np.asarray(y, dtype=np.float64)


def train(cfg: RegressorConfig, train_set, val_set) -> TrainReport:
    """Mini-batch Adam on the training set with validation-based selection.

    Batches are reshuffled each epoch (seeded); the final short batch is
    used. The returned parameters are the snapshot from the epoch with the
    lowest validation MSE (epoch 0 = initial parameters).
    """
    X_t, y_t = _coerce_set(train_set)
    X_v, y_v = _coerce_set(val_set)
    check_equal_lengths(X_t, y_t, "train specs/targets")
    check_equal_lengths(X_v, y_v, "val specs/targets")
    if X_v.shape[1:] != X_t.shape[1:]:
        raise ShapeError("train and validation spectrogram shapes differ")

    params = init_params(cfg, X_t.shape[1:])
    state = init_adam_state(params)
    shuffle_rng = np.random.Generator(np.random.PCG64([cfg.seed, _SHUFFLE_STREAM]))

    def val_mse(p):
        pred, _ = _forward_batch(p, X_v)
        return float(np.mean((pred - y_v) ** 2))

    val_curve = [val_mse(params)]
    train_curve: list[float] = []
    best_epoch, best_val, best_params = 0, val_curve[0], params
    n = X_t.shape[0]
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo : lo + cfg.batch_size]
            loss, grads = loss_and_grad(params, X_t[sel], y_t[sel])
            if not np.isfinite(loss):
                raise DivergenceError("training loss is not finite", epoch=epoch)
            step += 1
            params, state = adam_step(params, grads, state, step, cfg)
            batch_losses.append(loss)
        train_curve.append(float(np.mean(batch_losses)))
        v = val_mse(params)
        if not np.isfinite(v):
            raise DivergenceError("validation loss is not finite", epoch=epoch)
        val_curve.append(v)
        if v < best_val:
            best_epoch, best_val, best_params = epoch, v, params
    return TrainReport(
        best_epoch=best_epoch,
        train_loss_curve=train_curve,
        val_loss_curve=val_curve,
        selected_params=best_params,
    )


class SpectrogramRegressor(RegressorMixin, BaseEstimator):
    """Sklearn-style front end over the functional training core.

    ``fit`` accepts an optional held-out selection set; without one the
    training set doubles as the selection set. Parameters follow sklearn
    conventions (``get_params``/``set_params``/``clone`` all work).
    """

    def __init__(
        self,
        architecture: str = "small_conv",
        conv_channels: tuple[int, ...] = (8, 16, 32),
        learning_rate: float = 1e-4,
        batch_size: int = 128,
        max_epochs: int = 30,
        adam_beta1: float = 0.9,
        adam_beta2: float = 0.999,
        adam_eps: float = 1e-8,
        seed: int = 0,
    ):
        self.architecture = architecture
        self.conv_channels = conv_channels
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.seed = seed

    def _config(self) -> RegressorConfig:
        return RegressorConfig(
            architecture=self.architecture,
            conv_channels=tuple(self.conv_channels),
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        train_set = (X, y)
        val_set = train_set if X_val is None else (X_val, y_val)
        self.report_ = train(self._config(), train_set, val_set)
        self.params_ = self.report_.selected_params
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise RuntimeError("regressor is not fitted")
        return predict_set(self.params_, X)


# ---------------------------------------------------------------------------
# parameter checkpoints

def save_params(path, params: RegressorParams) -> None:
    """Write a checkpoint: magic ``PFCK``, architecture tag, input shape,
    shape table, then little-endian float64 tensor data in table order."""
    arch = params.architecture.encode("utf-8")
    buf = bytearray(struct.pack("<4sB", CHECKPOINT_MAGIC, len(arch)))
    buf += arch
    buf += struct.pack("<II", *params.input_shape)
    buf += struct.pack("<I", len(params.tensors))
    for name, arr in params.tensors.items():
        nb = name.encode("utf-8")
        buf += struct.pack("<B", len(nb)) + nb
        buf += struct.pack("<B", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
    for arr in params.tensors.values():
        buf += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_params(path) -> RegressorParams:
    """Read a checkpoint, rejecting bad magic, truncation, or inconsistent
    shapes for the recorded architecture."""
    raw = Path(path).read_bytes()
    try:
        magic, arch_len = struct.unpack_from("<4sB", raw)
        off = 5
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        arch = raw[off : off + arch_len].decode("utf-8")
        off += arch_len
        h, w = struct.unpack_from("<II", raw, off)
        off += 8
        (n_tensors,) = struct.unpack_from("<I", raw, off)
        off += 4
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<B", raw, off)
            off += 1
            name = raw[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            dims = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            shapes.append((name, tuple(dims)))
        tensors: dict[str, np.ndarray] = {}
        for name, shape in shapes:
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
            off += 8 * count
            tensors[name] = data.reshape(shape).astype(np.float64)
        if off != len(raw):
            raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    except CheckpointError:
        raise
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    params = RegressorParams(architecture=arch, input_shape=(h, w), tensors=tensors)
    validate_param_shapes(params)
    return params


def validate_param_shapes(params: RegressorParams) -> None:
    """Check that tensor shapes form a consistent model for the architecture."""
    t = params.tensors
    h, w = params.input_shape
    if params.architecture == "linear":
        expected = {"w": (h * w,), "b": ()}
    elif params.architecture == "small_conv":
        channels = []
        i = 0
        while f"conv{i}.w" in t:
            channels.append(t[f"conv{i}.w"].shape[0])
            i += 1
        if not channels:
            raise CheckpointError("small_conv checkpoint has no conv stages")
        expected = {}
        c_prev = 1
        for i, c in enumerate(channels):
            expected[f"conv{i}.w"] = (c, c_prev, 3, 3)
            expected[f"conv{i}.b"] = (c,)
            c_prev = c
        expected["head.w"] = (c_prev,)
        expected["head.b"] = ()
        try:
            _check_spatial(channels, (h, w))
        except ShapeError as exc:
            raise CheckpointError(str(exc)) from exc
    else:
        raise CheckpointError(f"unknown architecture tag {params.architecture!r}")
    actual = {k: tuple(v.shape) for k, v in t.items()}
    if actual != expected:
        raise CheckpointError(
            f"tensor shapes {actual} inconsistent with architecture "
            f"{params.architecture!r} and input shape {params.input_shape}"
        )
