"""A small float64 convolutional classifier written directly in numpy.

Tensors are NHWC throughout. Conv weights are ``(out, in, k, k)``, dense weights
``(in, out)``. Parameters live in a flat dict keyed ``"<layer index>.W"`` /
``"<layer index>.b"`` so checkpoints and gradient checks can address them by name.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from spsl.exceptions import InvalidConfigError, InvalidInputError, TrainingDivergenceError

logger = logging.getLogger(__name__)

LAYER_KINDS = ("conv", "relu", "maxpool", "gap", "dense")
# channel widths of the six-block backbone at width multiplier 1
BACKBONE_CHANNELS = (8, 16, 16, 16, 16, 16)
N_BACKBONE_BLOCKS = len(BACKBONE_CHANNELS)
SHALLOW_BLOCKS = (1, 2, 3, 6)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    in_channels: int = 0
    out_channels: int = 0

    @classmethod
    def conv(cls, cin, cout, kernel=3, stride=1, padding=None):
        return cls("conv", kernel, stride, kernel // 2 if padding is None else padding, cin, cout)

    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def maxpool(cls, size=2, stride=None):
        return cls("maxpool", size, size if stride is None else stride)

    @classmethod
    def gap(cls):
        return cls("gap")

    @classmethod
    def dense(cls, din, dout):
        return cls("dense", in_channels=din, out_channels=dout)

    @property
    def spatial(self) -> bool:
        return self.kind in ("conv", "maxpool")


@dataclass(frozen=True)
class NetConfig:
    input_channels: int
    layers: tuple[LayerSpec, ...]
    n_classes: int = 2
    profile: str = "custom"
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        validate_config(self)

    def to_dict(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "n_classes": self.n_classes,
            "profile": self.profile,
            "standardize": self.standardize,
            "layers": [asdict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            input_channels=d["input_channels"],
            layers=tuple(LayerSpec(**layer) for layer in d["layers"]),
            n_classes=d.get("n_classes", 2),
            profile=d.get("profile", "custom"),
            standardize=d.get("standardize", True),
        )

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def validate_config(config: NetConfig) -> None:
    if config.input_channels < 1:
        raise InvalidConfigError("input_channels must be positive")
    if config.n_classes < 2:
        raise InvalidConfigError("need at least two classes")
    channels = config.input_channels
    flat = False
    dense_seen = 0
    for i, layer in enumerate(config.layers):
        if layer.kind not in LAYER_KINDS:
            raise InvalidConfigError(f"layer {i}: unknown kind {layer.kind!r}")
        if dense_seen:
            raise InvalidConfigError(f"layer {i}: nothing may follow the dense head")
        if layer.kind == "conv":
            if flat:
                raise InvalidConfigError(f"layer {i}: conv after global pooling")
            if layer.kernel < 1 or layer.kernel % 2 == 0:
                raise InvalidConfigError(f"layer {i}: conv kernel must be odd")
            if layer.stride < 1 or layer.padding < 0:
                raise InvalidConfigError(f"layer {i}: bad stride/padding")
            if layer.in_channels != channels or layer.out_channels < 1:
                raise InvalidConfigError(
                    f"layer {i}: conv expects {layer.in_channels} input channels, got {channels}"
                )
            channels = layer.out_channels
        elif layer.kind == "maxpool":
            if flat:
                raise InvalidConfigError(f"layer {i}: pooling after global pooling")
            if layer.kernel < 1 or layer.stride < 1:
                raise InvalidConfigError(f"layer {i}: bad pool size/stride")
        elif layer.kind == "gap":
            if flat:
                raise InvalidConfigError(f"layer {i}: repeated global pooling")
            flat = True
        elif layer.kind == "dense":
            if not flat:
                raise InvalidConfigError(f"layer {i}: dense head needs global pooling first")
            if layer.in_channels != channels:
                raise InvalidConfigError(
                    f"layer {i}: dense expects {layer.in_channels} inputs, got {channels}"
                )
            if layer.out_channels != config.n_classes:
                raise InvalidConfigError(f"layer {i}: dense head must output n_classes")
            dense_seen += 1
    if dense_seen != 1:
        raise InvalidConfigError("config needs exactly one final dense head")


def build_net(
    input_channels: int = 4,
    blocks=SHALLOW_BLOCKS,
    width: float = 1.0,
    n_classes: int = 2,
    profile: str | None = None,
    standardize: bool = True,
) -> NetConfig:
    """Assemble a net from numbered backbone blocks.

    Blocks 1..5 are conv3x3 + ReLU + maxpool2; block 6 is the final conv3x3 + ReLU.
    Any kept subset is chained in order and followed by global average pooling
    and a dense head. ``profile="shallow"`` keeps blocks 1-3 and 6, ``"deep"`` keeps all.
    """
    if profile == "shallow":
        blocks = SHALLOW_BLOCKS
    elif profile == "deep":
        blocks = tuple(range(1, N_BACKBONE_BLOCKS + 1))
    blocks = tuple(sorted(set(int(b) for b in blocks)))
    if not blocks or blocks[0] < 1 or blocks[-1] > N_BACKBONE_BLOCKS:
        raise InvalidConfigError(f"blocks must be a non-empty subset of 1..{N_BACKBONE_BLOCKS}")
    layers = []
    cin = input_channels
    for b in blocks:
        cout = max(1, int(round(BACKBONE_CHANNELS[b - 1] * width)))
        layers += [LayerSpec.conv(cin, cout, 3), LayerSpec.relu()]
        if b != N_BACKBONE_BLOCKS:
            layers.append(LayerSpec.maxpool(2))
        cin = cout
    layers += [LayerSpec.gap(), LayerSpec.dense(cin, n_classes)]
    if profile is None:
        profile = {SHALLOW_BLOCKS: "shallow", tuple(range(1, N_BACKBONE_BLOCKS + 1)): "deep"}.get(
            blocks, "blocks-" + "".join(map(str, blocks))
        )
    return NetConfig(input_channels, tuple(layers), n_classes, profile, standardize)


def depth_blocks(depth: int) -> tuple[int, ...]:
    """The first ``depth - 1`` backbone blocks plus the final block."""
    if not 1 <= depth <= N_BACKBONE_BLOCKS:
        raise InvalidConfigError(f"depth must lie in 1..{N_BACKBONE_BLOCKS}")
    return tuple(range(1, depth)) + (N_BACKBONE_BLOCKS,)


# --------------------------------------------------------------------------- receptive field


@dataclass(frozen=True)
class RFEntry:
    layer: int
    kind: str
    size: int
    stride: int
    start: int

    @property
    def offset(self) -> int:
        """Effective padding: how far unit 0's field reaches before the first pixel."""
        return -self.start


@dataclass(frozen=True)
class ReceptiveField:
    entries: tuple[RFEntry, ...]

    @property
    def head(self) -> RFEntry:
        return self.entries[-1]

    def span(self, index: int) -> tuple[int, int]:
        """Inclusive input-pixel range seen by output unit ``index`` of the last spatial layer."""
        e = self.head
        lo = e.start + index * e.stride
        return lo, lo + e.size - 1


def receptive_field(config: NetConfig) -> ReceptiveField:
    """Per-layer receptive field size, cumulative stride and start offset (one axis).

    ``size_l = size_{l-1} + (k_l - 1) * stride_{l-1}``, ``stride_l = stride_{l-1} * s_l``,
    ``start_l = start_{l-1} - p_l * stride_{l-1}``. Non-spatial layers repeat the
    previous entry, so the head reports the field of the features that get pooled.
    """
    validate_config(config)
    size, stride, start = 1, 1, 0
    entries = []
    for i, layer in enumerate(config.layers):
        if layer.spatial:
            pad = layer.padding if layer.kind == "conv" else 0
            size += (layer.kernel - 1) * stride
            start -= pad * stride
            stride *= layer.stride
        entries.append(RFEntry(i, layer.kind, size, stride, start))
    return ReceptiveField(tuple(entries))


# --------------------------------------------------------------------------- parameters


def init_params(config: NetConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Fan-in scaled normal init (He for conv, Glorot-style for the head); zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for i, layer in enumerate(config.layers):
        if layer.kind == "conv":
            fan_in = layer.in_channels * layer.kernel**2
            shape = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
            params[f"{i}.W"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
            params[f"{i}.b"] = np.zeros(layer.out_channels)
        elif layer.kind == "dense":
            params[f"{i}.W"] = rng.normal(0.0, np.sqrt(1.0 / layer.in_channels),
                                          (layer.in_channels, layer.out_channels))
            params[f"{i}.b"] = np.zeros(layer.out_channels)
    return params


def _check_batch(config: NetConfig, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4:
        raise InvalidInputError(f"expected an (n, H, W, C) batch, got shape {X.shape}")
    if X.shape[-1] != config.input_channels:
        raise InvalidInputError(
            f"net expects {config.input_channels} input channels, got {X.shape[-1]}"
        )
    return X


STD_EPS = 1e-6


def standardize_images(X) -> np.ndarray:
    """Per-image, per-channel zero mean and unit variance.

    Raw pixels in [0, 1] put most of the first layer's response into the image
    mean; resampling traces live in small local differences.
    """
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=(1, 2), keepdims=True)
    var = X.var(axis=(1, 2), keepdims=True)
    return (X - mu) / np.sqrt(var + STD_EPS)


# --------------------------------------------------------------------------- layers


def _conv_forward(x, W, b, stride, pad):
    n, h, w, c = x.shape
    k = W.shape[-1]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    if ho < 1 or wo < 1:
        raise InvalidInputError(f"input {h}x{w} too small for a {k}x{k} conv")
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    # column order (ki, kj, c) keeps channel slices contiguous in the backward pass
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, k * k * c)
    wmat = W.transpose(0, 2, 3, 1).reshape(W.shape[0], -1)
    out = (cols @ wmat.T).reshape(n, ho, wo, -1) + b
    return out, (x.shape, cols)


def _conv_backward(dout, W, cache, stride, pad, need_dx=True):
    xshape, cols = cache
    n, h, w, c = xshape
    k = W.shape[-1]
    _, ho, wo, cout = dout.shape
    d2 = dout.reshape(-1, cout)
    dW = (d2.T @ cols).reshape(cout, k, k, c).transpose(0, 3, 1, 2)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dW, db
    dcols = (d2 @ W.transpose(0, 2, 3, 1).reshape(cout, -1)).reshape(n, ho, wo, k, k, c)
    dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c))
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, :, :, i, j]
    dx = dxp[:, pad : pad + h, pad : pad + w] if pad else dxp
    return dx, dW, db


def _pool_forward(x, size, stride):
    n, h, w, c = x.shape
    ho = (h - size) // stride + 1
    wo = (w - size) // stride + 1
    if ho < 1 or wo < 1:
        raise InvalidInputError(f"input {h}x{w} too small for a {size}x{size} pool")
    win = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    flat = win.reshape(n, ho, wo, c, size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg)


def _pool_backward(dout, cache, size, stride):
    xshape, arg = cache
    _, ho, wo, _ = dout.shape
    dx = np.zeros(xshape)
    for i in range(size):
        for j in range(size):
            hit = arg == i * size + j
            dx[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += dout * hit
    return dx


def forward(config: NetConfig, params: dict, X, return_cache: bool = False):
    """Class scores (logits) for an ``(n, H, W, C)`` batch."""
    x = _check_batch(config, X)
    if config.standardize:
        x = standardize_images(x)
    caches = []
    for i, layer in enumerate(config.layers):
        if layer.kind == "conv":
            x, cache = _conv_forward(x, params[f"{i}.W"], params[f"{i}.b"], layer.stride, layer.padding)
        elif layer.kind == "relu":
            cache = x > 0
            x = x * cache
        elif layer.kind == "maxpool":
            x, cache = _pool_forward(x, layer.kernel, layer.stride)
        elif layer.kind == "gap":
            cache = x.shape
            x = x.mean(axis=(1, 2))
        else:
            cache = x
            x = x @ params[f"{i}.W"] + params[f"{i}.b"]
        caches.append(cache)
    if return_cache:
        return x, caches
    return x


def softmax(scores) -> np.ndarray:
    z = np.asarray(scores, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(scores, labels) -> float:
    z = scores - scores.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def backward(config: NetConfig, params: dict, X, labels) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy loss and its gradient for every parameter."""
    loss, grads, _ = _loss_and_grads(config, params, X, labels)
    return loss, grads


def _loss_and_grads(config, params, X, labels):
    labels = np.asarray(labels, dtype=int)
    scores, caches = forward(config, params, X, return_cache=True)
    if labels.shape != (scores.shape[0],):
        raise InvalidInputError("labels must be a vector with one entry per sample")
    if labels.min() < 0 or labels.max() >= config.n_classes:
        raise InvalidInputError("label out of range")
    if not np.all(np.isfinite(scores)):
        raise TrainingDivergenceError("non-finite activations")
    n = len(labels)
    loss = cross_entropy(scores, labels)
    d = softmax(scores)
    d[np.arange(n), labels] -= 1.0
    d /= n
    grads = {}
    for i in range(len(config.layers) - 1, -1, -1):
        layer, cache = config.layers[i], caches[i]
        if layer.kind == "dense":
            grads[f"{i}.W"] = cache.T @ d
            grads[f"{i}.b"] = d.sum(axis=0)
            d = d @ params[f"{i}.W"].T
        elif layer.kind == "gap":
            _, h, w, _ = cache
            d = np.broadcast_to(d[:, None, None, :] / (h * w), cache)
        elif layer.kind == "maxpool":
            d = _pool_backward(d, cache, layer.kernel, layer.stride)
        elif layer.kind == "relu":
            d = d * cache
        else:
            d, grads[f"{i}.W"], grads[f"{i}.b"] = _conv_backward(
                d, params[f"{i}.W"], cache, layer.stride, layer.padding, need_dx=i > 0
            )
    return loss, grads, scores


def predict_proba(config: NetConfig, params: dict, X, batch_size: int = 256) -> np.ndarray:
    X = _check_batch(config, X)
    out = [softmax(forward(config, params, X[i : i + batch_size])) for i in range(0, len(X), batch_size)]
    return np.concatenate(out) if out else np.empty((0, config.n_classes))


# --------------------------------------------------------------------------- training


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    factor: float = 0.5
    batch_size: int = 32
    max_epochs: int = 100
    min_lr: float = 1e-5
    restore_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning rate must be positive")
        if self.patience < 1:
            raise InvalidConfigError("patience must be >= 1")
        if not 0 < self.factor < 1:
            raise InvalidConfigError("factor must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidConfigError("batch_size and max_epochs must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


class Adam:
    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name in sorted(grads):
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            params[name] -= lr * mhat / (np.sqrt(vhat) + self.eps)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without a new best."""

    def __init__(self, lr: float, patience: int = 5, factor: float = 0.5):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    train_acc: float
    val_acc: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = -1


def _eval_loss(config, params, X, y, batch_size=256) -> tuple[float, float]:
    total, correct = 0.0, 0
    for i in range(0, len(X), batch_size):
        s = forward(config, params, X[i : i + batch_size])
        total += cross_entropy(s, y[i : i + batch_size]) * len(s)
        correct += int((s.argmax(axis=1) == y[i : i + batch_size]).sum())
    return total / len(X), correct / len(X)


def train(
    config: NetConfig,
    tc: TrainConfig,
    X_train,
    y_train,
    X_val,
    y_val,
    params: dict | None = None,
) -> TrainResult:
    """Mini-batch Adam with plateau halving of the learning rate.

    Stops at ``max_epochs`` or once the learning rate falls below ``min_lr``. The
    per-epoch sample order comes from ``tc.seed``, so runs are bit-reproducible.
    """
    X_train = _check_batch(config, X_train)
    X_val = _check_batch(config, X_val)
    y_train = np.asarray(y_train, dtype=int)
    y_val = np.asarray(y_val, dtype=int)
    if len(X_val) == 0 or len(X_train) == 0:
        raise InvalidInputError("train and val splits must be non-empty")
    params = init_params(config, tc.seed) if params is None else {k: v.copy() for k, v in params.items()}
    rng = np.random.default_rng(tc.seed)
    opt = Adam(tc.beta1, tc.beta2, tc.eps)
    sched = PlateauScheduler(tc.learning_rate, tc.patience, tc.factor)
    result = TrainResult(params=params)
    best_loss, best_params = np.inf, None
    for epoch in range(tc.max_epochs):
        lr = sched.lr
        if lr < tc.min_lr:
            break
        order = rng.permutation(len(X_train))
        running, correct = 0.0, 0
        for start in range(0, len(order), tc.batch_size):
            idx = order[start : start + tc.batch_size]
            try:
                loss, grads, scores = _loss_and_grads(config, params, X_train[idx], y_train[idx])
            except TrainingDivergenceError as exc:
                raise TrainingDivergenceError(str(exc), last_good_epoch=epoch - 1) from exc
            if not np.isfinite(loss):
                raise TrainingDivergenceError(f"loss became {loss} in epoch {epoch}", epoch - 1)
            running += loss * len(idx)
            correct += int((scores.argmax(axis=1) == y_train[idx]).sum())
            opt.step(params, grads, lr)
        val_loss, val_acc = _eval_loss(config, params, X_val, y_val)
        if not np.isfinite(val_loss):
            raise TrainingDivergenceError(f"validation loss became {val_loss}", epoch - 1)
        train_acc = correct / len(order)
        result.log.append(EpochLog(epoch, running / len(order), val_loss, lr, train_acc, val_acc))
        logger.debug("epoch %d train %.4f val %.4f lr %.2e", epoch, running / len(order), val_loss, lr)
        if val_loss < best_loss:
            best_loss, result.best_epoch = val_loss, epoch
            best_params = {k: v.copy() for k, v in params.items()}
        sched.step(val_loss)
    if tc.restore_best and best_params is not None:
        result.params = best_params
    return result
