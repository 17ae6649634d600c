"""Network assembly, loss, reverse-mode gradients, Adam, training and evaluation.

Architecture per sample (``N×1×T_in`` window):

    embed: fc1 -> relu -> fc2 -> relu, applied per (node, time step)
    conv1 -> relu -> conv2 -> relu       (full or factorized graph convolution)
    readout: σ(X_(1) W + b)              -> N×T_out

Gradients are written out by hand. In the factorized modes the Tucker
decomposition of each conv input is a stop-gradient step: filter gradients
are exact for the fixed factors and the input gradient is passed back
through the projection onto those factors.
"""
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .decomp import DEFAULT_MAX_ITER, DEFAULT_TOL, tucker_ranks
from .metrics import compute_metrics
from .stconv import (
    ConvLayerParams,
    decompose_input,
    factorized_backward,
    factorized_components,
    factorized_pre,
    sigmoid,
    st_conv_full_backward,
    st_conv_full_pre,
)
from .tensor import DataError, mode_product, unfold

log = logging.getLogger(__name__)

MODES = ("full", "factorized", "spatial-only", "temporal-only")
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.001
    batch_size: int = 32
    l2: float = 1e-5
    p: int = 2
    mode: str = "factorized"
    ranks: object = "sqrt"  # rule name, numeric exponent, or explicit (n, d, t)
    refactorize_every: int = 1
    seed: int = 0
    t_in: int = 12
    t_out: int = 1
    embed_hidden: int = 128
    embed_dim: int = 128
    conv_dims: tuple = (128, 64)
    activation: str = "relu"
    readout_activation: str = "sigmoid"
    hooi_max_iter: int = DEFAULT_MAX_ITER
    hooi_tol: float = DEFAULT_TOL
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        for name in ("epochs", "batch_size", "t_in", "t_out", "embed_hidden", "embed_dim",
                     "refactorize_every", "hooi_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0 or self.l2 < 0 or self.p < 0:
            raise ValueError("learning_rate, l2 and p must be non-negative")
        self.conv_dims = tuple(int(c) for c in self.conv_dims)
        if len(self.conv_dims) != 2 or min(self.conv_dims) < 1:
            raise ValueError("conv_dims needs two positive widths")
        if isinstance(self.ranks, list):
            self.ranks = tuple(int(r) for r in self.ranks)

    @property
    def factorized(self):
        return self.mode != "full"

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


PARAM_NAMES = ("fc1_w", "fc1_b", "fc2_w", "fc2_b", "theta1", "theta2", "w_out", "b_out")


@dataclass
class ModelParams:
    """All trainable arrays. Gradients and Adam moments use the same structure."""

    fc1_w: np.ndarray  # embed_hidden x 1
    fc1_b: np.ndarray
    fc2_w: np.ndarray  # embed_dim x embed_hidden
    fc2_b: np.ndarray
    theta1: np.ndarray  # (p+1, p+1, c1, embed_dim)
    theta2: np.ndarray  # (p+1, p+1, c2, c1)
    w_out: np.ndarray  # c2*t_in x t_out
    b_out: np.ndarray

    def items(self):
        return [(name, getattr(self, name)) for name in PARAM_NAMES]

    def map(self, fn, *others):
        return ModelParams(**{
            name: fn(arr, *(getattr(o, name) for o in others)) for name, arr in self.items()
        })

    def copy(self):
        return self.map(np.copy)

    def zeros_like(self):
        return self.map(np.zeros_like)

    def squared_norm(self):
        return float(sum(np.sum(arr * arr) for _, arr in self.items()))

    def n_params(self):
        return sum(arr.size for _, arr in self.items())

    def is_finite(self):
        return all(np.all(np.isfinite(arr)) for _, arr in self.items())

    def equal(self, other):
        return all(np.array_equal(a, getattr(other, n)) for n, a in self.items())


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config, seed=None):
    rng = np.random.default_rng(config.seed if seed is None else seed)
    h, e = config.embed_hidden, config.embed_dim
    c1, c2 = config.conv_dims
    k = config.p + 1
    return ModelParams(
        fc1_w=_glorot(rng, (h, 1), 1, h),
        fc1_b=np.zeros(h),
        fc2_w=_glorot(rng, (e, h), h, e),
        fc2_b=np.zeros(e),
        theta1=_glorot(rng, (k, k, c1, e), e, c1),
        theta2=_glorot(rng, (k, k, c2, c1), c1, c2),
        w_out=_glorot(rng, (c2 * config.t_in, config.t_out), c2 * config.t_in, config.t_out),
        b_out=np.zeros(config.t_out),
    )


def mode_graphs(sg, at, mode):
    """Spatial and temporal powers used by the given mode (ablations swap in identities)."""
    if mode == "spatial-only":
        at = at.identity_like()
    elif mode == "temporal-only":
        sg = sg.identity_like()
    return sg.powers, at.powers


def layer_ranks(config, dims):
    if isinstance(config.ranks, (tuple, list)):
        ranks = tuple(int(r) for r in config.ranks)
        return tuple(min(r, d) for r, d in zip(ranks, dims))
    return tucker_ranks(dims, config.ranks)


class FactorCache:
    """Per-layer Tucker factors reused for ``refactorize_every`` consecutive forwards."""

    def __init__(self, every):
        self.every = every
        self.calls = [0, 0]
        self.factors = [None, None]

    def get(self, layer):
        fresh = self.calls[layer] % self.every == 0
        self.calls[layer] += 1
        return None if fresh else self.factors[layer]

    def put(self, layer, factors):
        self.factors[layer] = factors


def _act(x, name):
    return np.maximum(x, 0.0) if name == "relu" else x


def _act_grad(g, pre, name):
    return g * (pre > 0) if name == "relu" else g


def _conv_forward(x, theta, s_powers, t_powers, config, layer, cache):
    if not config.factorized:
        return st_conv_full_pre(x, s_powers, t_powers, ConvLayerParams(theta)), None
    ranks = layer_ranks(config, x.shape)
    cached = cache.get(layer) if cache is not None else None
    factors = decompose_input(x, ranks, cached, config.hooi_max_iter, config.hooi_tol)
    if cache is not None:
        cache.put(layer, factors)
    comps = factorized_components(factors, s_powers, t_powers, theta)
    return factorized_pre(factors, comps), (factors, comps)


def forward(params, x, s_powers, t_powers, config, cache=None):
    """Prediction for one window plus the tape needed by :func:`backward`."""
    x = np.asfortranarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != config.t_in:
        raise ValueError(f"window must be N x 1 x {config.t_in}, got {x.shape}")
    if s_powers[0].shape[0] != x.shape[0]:
        raise ValueError(f"graph has {s_powers[0].shape[0]} nodes, window has {x.shape[0]}")
    act = config.activation
    tape = {"x": x}
    tape["e1_pre"] = mode_product(x, params.fc1_w, 2) + params.fc1_b[None, :, None]
    tape["e1"] = _act(tape["e1_pre"], act)
    tape["e2_pre"] = mode_product(tape["e1"], params.fc2_w, 2) + params.fc2_b[None, :, None]
    tape["e2"] = _act(tape["e2_pre"], act)
    tape["c1_pre"], tape["c1_fac"] = _conv_forward(tape["e2"], params.theta1, s_powers, t_powers, config, 0, cache)
    tape["c1"] = _act(tape["c1_pre"], act)
    tape["c2_pre"], tape["c2_fac"] = _conv_forward(tape["c1"], params.theta2, s_powers, t_powers, config, 1, cache)
    tape["c2"] = _act(tape["c2_pre"], act)
    n = x.shape[0]
    tape["flat"] = np.reshape(tape["c2"], (n, -1), order="F")
    z = tape["flat"] @ params.w_out + params.b_out
    y_hat = sigmoid(z) if config.readout_activation == "sigmoid" else z
    tape["y_hat"] = y_hat
    return y_hat, tape


def model_forward(params, window, sg, at, config):
    s_powers, t_powers = mode_graphs(sg, at, config.mode)
    return forward(params, window, s_powers, t_powers, config)[0]


def _conv_backward(g_pre, x, theta, fac, s_powers, t_powers):
    if fac is None:
        return st_conv_full_backward(x, s_powers, t_powers, theta, g_pre)
    factors, comps = fac
    return factorized_backward(factors, comps, g_pre)


def backward(params, tape, g_yhat, s_powers, t_powers, config):
    """Accumulate parameter gradients of ``<g_yhat, y_hat>`` for one window."""
    act = config.activation
    y_hat = tape["y_hat"]
    g_z = g_yhat * y_hat * (1.0 - y_hat) if config.readout_activation == "sigmoid" else g_yhat
    grads = {}
    grads["w_out"] = tape["flat"].T @ g_z
    grads["b_out"] = g_z.sum(axis=0)
    g_c2 = np.reshape(g_z @ params.w_out.T, tape["c2"].shape, order="F")
    g_c2_pre = _act_grad(g_c2, tape["c2_pre"], act)
    grads["theta2"], g_c1 = _conv_backward(g_c2_pre, tape["c1"], params.theta2, tape["c2_fac"], s_powers, t_powers)
    g_c1_pre = _act_grad(g_c1, tape["c1_pre"], act)
    grads["theta1"], g_e2 = _conv_backward(g_c1_pre, tape["e2"], params.theta1, tape["c1_fac"], s_powers, t_powers)
    g_e2_pre = _act_grad(g_e2, tape["e2_pre"], act)
    grads["fc2_w"] = unfold(g_e2_pre, 2) @ unfold(tape["e1"], 2).T
    grads["fc2_b"] = g_e2_pre.sum(axis=(0, 2))
    g_e1 = mode_product(g_e2_pre, params.fc2_w.T, 2)
    g_e1_pre = _act_grad(g_e1, tape["e1_pre"], act)
    grads["fc1_w"] = unfold(g_e1_pre, 2) @ unfold(tape["x"], 2).T
    grads["fc1_b"] = g_e1_pre.sum(axis=(0, 2))
    return ModelParams(**grads)


def compute_loss(pred, target, params, l2):
    """Squared Frobenius error averaged over the batch plus ``l2 * ||params||²``.

    ``pred``/``target`` are one ``N×T_out`` matrix or a stack ``(B, N, T_out)``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    batch = pred.shape[0] if pred.ndim == 3 else 1
    data = float(np.sum((target - pred) ** 2)) / batch
    reg = l2 * params.squared_norm() if l2 else 0.0
    return data + reg


def compute_gradients(params, batch, sg, at, config, cache=None, graphs=None):
    """Loss and gradients over a minibatch ``(inputs (B,N,1,T), targets (B,N,T'))``.

    Samples are processed one at a time and accumulated in batch order.
    """
    inputs, targets = batch
    s_powers, t_powers = graphs if graphs is not None else mode_graphs(sg, at, config.mode)
    n_batch = len(inputs)
    total = params.zeros_like()
    data_loss = 0.0
    for x, y in zip(inputs, targets):
        y_hat, tape = forward(params, x, s_powers, t_powers, config, cache)
        resid = y_hat - y
        data_loss += float(np.sum(resid * resid))
        g = backward(params, tape, 2.0 * resid / n_batch, s_powers, t_powers, config)
        total = total.map(np.add, g)
    loss = data_loss / n_batch + config.l2 * params.squared_norm()
    if not math.isfinite(loss):
        raise DataError(f"non-finite loss {loss} (data term {data_loss / n_batch})")
    if config.l2:
        total = total.map(lambda g, p: g + 2.0 * config.l2 * p, params)
    return loss, total


def batch_loss(params, batch, sg, at, config, graphs=None):
    inputs, targets = batch
    s_powers, t_powers = graphs if graphs is not None else mode_graphs(sg, at, config.mode)
    preds = np.stack([forward(params, x, s_powers, t_powers, config)[0] for x in inputs])
    return compute_loss(preds, targets, params, config.l2)


FD_ABS_FLOOR = 1e-7


def finite_difference_check(params, batch, sg, at, config, h=1e-5, n_samples=200, seed=0):
    """Compare analytic gradients with central differences on sampled entries.

    Relative error is ``|a - f| / max(|a|, |f|, FD_ABS_FLOOR)``. Returns
    ``{block: {"max": ..., "mean": ..., "checked": ...}}``.
    """
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    graphs = mode_graphs(sg, at, config.mode)
    _, grads = compute_gradients(params, batch, sg, at, config, graphs=graphs)
    rng = np.random.default_rng(seed)
    total = params.n_params()
    report = {}
    for name, arr in params.items():
        k = min(arr.size, max(1, math.ceil(n_samples * arr.size / total)))
        picks = rng.choice(arr.size, size=k, replace=False) if k < arr.size else np.arange(arr.size)
        analytic = getattr(grads, name).ravel()
        errs = []
        for flat_idx in np.sort(picks):
            idx = np.unravel_index(flat_idx, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + h
            up = batch_loss(params, batch, sg, at, config, graphs)
            arr[idx] = orig - h
            down = batch_loss(params, batch, sg, at, config, graphs)
            arr[idx] = orig
            fd = (up - down) / (2.0 * h)
            a = analytic[flat_idx]
            errs.append(abs(a - fd) / max(abs(a), abs(fd), FD_ABS_FLOOR))
        report[name] = {"max": float(max(errs)), "mean": float(np.mean(errs)), "checked": len(errs)}
    return report


@dataclass
class AdamState:
    step: int
    m: ModelParams
    v: ModelParams

    @classmethod
    def zeros(cls, params):
        return cls(0, params.zeros_like(), params.zeros_like())


def adam_step(params, grads, state, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    step = state.step + 1
    m = state.m.map(lambda m, g: beta1 * m + (1.0 - beta1) * g, grads)
    v = state.v.map(lambda v, g: beta2 * v + (1.0 - beta2) * g * g, grads)
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    new = params.map(lambda p, m_, v_: p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps), m, v)
    return new, AdamState(step, m, v)


def predict(params, inputs, sg, at, config, graphs=None):
    s_powers, t_powers = graphs if graphs is not None else mode_graphs(sg, at, config.mode)
    if len(inputs) == 0:
        return np.empty((0, s_powers[0].shape[0], config.t_out))
    return np.stack([forward(params, x, s_powers, t_powers, config)[0] for x in inputs])


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)
    best_epoch: int = -1


def _split_validation(windows, fraction):
    n = windows.n_train
    n_val = int(math.floor(fraction * n)) if n > 1 else 0
    n_fit = n - n_val
    return (windows.train_inputs[:n_fit], windows.train_targets[:n_fit]), (
        windows.train_inputs[n_fit:], windows.train_targets[n_fit:])


def train(config, windows, sg, at, callback=None):
    """Minibatch Adam over ``config.epochs``; keeps the parameters with the best validation RMSE.

    The validation set is the chronologically last ``val_fraction`` of the
    training windows. Without validation windows the training loss decides.
    """
    if windows.n_train == 0:
        raise ValueError("no training windows")
    (fit_x, fit_y), (val_x, val_y) = _split_validation(windows, config.val_fraction)
    graphs = mode_graphs(sg, at, config.mode)
    params = init_params(config)
    state = AdamState.zeros(params)
    cache = FactorCache(config.refactorize_every) if config.factorized else None
    best = (math.inf, params.copy(), -1)
    history = []
    n_fit = len(fit_x)
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n_fit)
        losses = []
        for start in range(0, n_fit, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = compute_gradients(params, (fit_x[idx], fit_y[idx]), sg, at, config,
                                            cache=cache, graphs=graphs)
            params, state = adam_step(params, grads, state, config.learning_rate,
                                      config.beta1, config.beta2, config.eps)
            if not params.is_finite():
                raise DataError(f"parameters diverged at epoch {epoch}")
            losses.append(loss)
        row = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if len(val_x):
            preds = predict(params, val_x, sg, at, config, graphs)
            rep = compute_metrics(windows.scaler.descale(val_y), windows.scaler.descale(preds))
            row.update({f"val_{k}": v for k, v in rep.as_dict().items()})
            score = rep.rmse
        else:
            score = row["train_loss"]
        if score < best[0]:
            best = (score, params.copy(), epoch)
        history.append(row)
        log.info("epoch %d loss %.6g score %.6g", epoch, row["train_loss"], score)
        if callback is not None:
            callback(row)
    return TrainResult(best[1], history, best[2])


def evaluate(params, windows, sg, at, config, split="test"):
    """Descaled predictions and the five metrics over every (window, node, horizon) entry."""
    inputs = windows.test_inputs if split == "test" else windows.train_inputs
    targets = windows.test_targets if split == "test" else windows.train_targets
    if len(inputs) == 0:
        raise ValueError(f"{split} split is empty")
    preds = windows.scaler.descale(predict(params, inputs, sg, at, config))
    truth = windows.scaler.descale(targets)
    return compute_metrics(truth, preds), preds


def save_checkpoint(path, params, config, scaler=None, extra=None):
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "scaler_max": None if scaler is None else scaler.max_value,
        "seed": config.seed,
        "extra": extra or {},
    }
    arrays = {name: arr for name, arr in params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Returns ``(params, config, scaler_max, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        params = ModelParams(**{name: data[name].copy() for name in PARAM_NAMES})
    config = TrainConfig.from_dict(meta["config"])
    return params, config, meta["scaler_max"], meta
