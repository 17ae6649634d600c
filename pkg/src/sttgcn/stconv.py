"""Spatial-temporal tensor graph convolution: full form, Tucker-factorized form, readout.

Temporal aggregation treats each node's ``T×T`` adjacency power ``A`` as
an operator on the time index (a mode-3 product), so a node slice ``X_k``
(``D×T``) becomes ``X_k A_kᵀ``. The factorized path uses the same
convention through its temporal components ``A_k U_T``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .decomp import DEFAULT_MAX_ITER, DEFAULT_TOL, hooi, project
from .tensor import as_tensor3, mode_product, unfold

ACTIVATIONS = ("relu", "identity")
READOUT_ACTIVATIONS = ("sigmoid", "identity")


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate(x, name):
    if name == "relu":
        return relu(x)
    if name == "sigmoid":
        return sigmoid(x)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class ConvLayerParams:
    """Filters ``theta[kS, kT]`` of shape ``d_out×d_in`` for every order pair."""

    theta: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 4 or self.theta.shape[0] != self.theta.shape[1]:
            raise ValueError(f"theta must have shape (p+1, p+1, d_out, d_in), got {self.theta.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def p(self):
        return self.theta.shape[0] - 1

    @property
    def d_out(self):
        return self.theta.shape[2]

    @property
    def d_in(self):
        return self.theta.shape[3]


@dataclass
class ReadoutParams:
    w: np.ndarray
    b: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.w.ndim != 2 or self.w.shape[1] != self.b.shape[0]:
            raise ValueError(f"readout shapes w{self.w.shape} b{self.b.shape} are inconsistent")
        if self.activation not in READOUT_ACTIVATIONS:
            raise ValueError(f"unknown readout activation {self.activation!r}")


def temporal_aggregate(y, at_power):
    """Apply each node's temporal operator along mode 3: ``out_k = y_k A_kᵀ``."""
    return kernels.batch_matmul(y, np.transpose(at_power, (0, 2, 1)))


def _check_inputs(x, s_powers, t_powers, params):
    x = as_tensor3(x)
    p = params.p
    if len(s_powers) < p + 1 or len(t_powers) < p + 1:
        raise ValueError(
            f"graph powers computed to order {len(s_powers) - 1}/{len(t_powers) - 1}, layer needs {p}"
        )
    n, d, t = x.shape
    if d != params.d_in:
        raise ValueError(f"input feature dim {d} != layer d_in {params.d_in}")
    if s_powers[0].shape != (n, n):
        raise ValueError(f"spatial graph has {s_powers[0].shape[0]} nodes, input has {n}")
    if t_powers[0].shape != (n, t, t):
        raise ValueError(f"temporal adjacency shape {t_powers[0].shape} does not match input {x.shape}")
    return x


def st_conv_full_pre(x, s_powers, t_powers, params):
    """Pre-activation sum over order pairs of ``x ×1 Ã^kS ×̃3 A_T^kT ×2 Θ``."""
    x = _check_inputs(x, s_powers, t_powers, params)
    p = params.p
    out = None
    for ks in range(p + 1):
        xs = mode_product(x, s_powers[ks], 1)
        for kt in range(p + 1):
            term = mode_product(temporal_aggregate(xs, t_powers[kt]), params.theta[ks, kt], 2)
            out = term if out is None else out + term
    return out


def st_conv_full(x, sg, at, params):
    return activate(st_conv_full_pre(x, sg.powers, at.powers, params), params.activation)


def st_conv_full_backward(x, s_powers, t_powers, theta, g_pre):
    """Gradients of ``<g_pre, pre-activation>`` w.r.t. ``theta`` and ``x``."""
    p = theta.shape[0] - 1
    g_theta = np.zeros_like(theta)
    g_x = np.zeros_like(x)
    for ks in range(p + 1):
        xs = mode_product(x, s_powers[ks], 1)
        g_xs = None
        for kt in range(p + 1):
            z = temporal_aggregate(xs, t_powers[kt])
            g_theta[ks, kt] = unfold(g_pre, 2) @ unfold(z, 2).T
            g_z = mode_product(g_pre, theta[ks, kt].T, 2)
            term = kernels.batch_matmul(g_z, t_powers[kt])
            g_xs = term if g_xs is None else g_xs + term
        g_x += mode_product(g_xs, s_powers[ks].T, 1)
    return g_theta, g_x


@dataclass
class FactorizedComponents:
    """Spatial ``Ã^kS U_S``, per-node temporal ``A_T^kT U_T`` and feature ``Θ U_F`` components."""

    spatial: list
    temporal: list
    feature: np.ndarray


def _spatial_components(s_powers, u_s, p):
    return [s_powers[k] @ u_s for k in range(p + 1)]


def _temporal_components(t_powers, u_t, p):
    return [np.matmul(t_powers[k], u_t) for k in range(p + 1)]


def _feature_components(theta, u_f):
    return np.matmul(theta, u_f)


def factorized_components(factors, s_powers, t_powers, theta, parallel=False):
    p = theta.shape[0] - 1
    if parallel:
        with ThreadPoolExecutor(max_workers=3) as pool:
            fs = pool.submit(_spatial_components, s_powers, factors.uS, p)
            ft = pool.submit(_temporal_components, t_powers, factors.uT, p)
            ff = pool.submit(_feature_components, theta, factors.uF)
            return FactorizedComponents(fs.result(), ft.result(), ff.result())
    return FactorizedComponents(
        _spatial_components(s_powers, factors.uS, p),
        _temporal_components(t_powers, factors.uT, p),
        _feature_components(theta, factors.uF),
    )


def factorized_pre(factors, comps):
    """Per-node reconstruction ``C ×1 [X̃_S]_k ×2 X̃_F ×3 [X̃_T]_k`` summed over order pairs."""
    core = factors.core
    n, d, t = core.shape
    p = len(comps.spatial) - 1
    out = None
    for ks in range(p + 1):
        q = mode_product(core, comps.spatial[ks], 1)  # N x d x t
        for kt in range(p + 1):
            r = np.matmul(comps.feature[ks, kt], q)  # N x D' x t
            term = np.matmul(r, np.transpose(comps.temporal[kt], (0, 2, 1)))
            out = term if out is None else out + term
    return out


def decompose_input(x, ranks, cache=None, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """HOOI factors of ``x``, or a re-projection onto ``cache``'s factors when given."""
    if cache is not None:
        if tuple(cache.core.shape) != tuple(ranks) or cache.uS.shape[0] != x.shape[0]:
            raise ValueError("cached factors do not match the requested ranks or input shape")
        return project(x, cache)
    return hooi(x, ranks, max_iter=max_iter, tol=tol)


def st_conv_factorized(x, sg, at, params, ranks, cache=None, parallel=False,
                       max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Factorized convolution: Tucker-decompose ``x``, filter the three components, rebuild per node.

    Returns ``(output, factors)``. With ``cache`` the cached factor matrices
    are reused and only the core is recomputed.
    """
    x = _check_inputs(x, sg.powers, at.powers, params)
    factors = decompose_input(x, ranks, cache, max_iter, tol)
    comps = factorized_components(factors, sg.powers, at.powers, params.theta, parallel)
    return activate(factorized_pre(factors, comps), params.activation), factors


def factorized_backward(factors, comps, g_pre):
    """Exact ``theta`` gradient for fixed factors; ``x`` gradient passed straight through the projection."""
    core = factors.core
    p = len(comps.spatial) - 1
    n, d, t = core.shape
    d_out = g_pre.shape[1]
    g_theta = np.zeros((p + 1, p + 1, d_out, factors.uF.shape[0]))
    g_core = np.zeros_like(core)
    core_2 = unfold(core, 2)  # d x (n t)
    for kt in range(p + 1):
        e = np.matmul(g_pre, comps.temporal[kt])  # N x D' x t
        for ks in range(p + 1):
            m = mode_product(e, comps.spatial[ks].T, 1)  # n x D' x t
            g_theta[ks, kt] = (unfold(m, 2) @ core_2.T) @ factors.uF.T
            g_core += np.matmul(comps.feature[ks, kt].T, m)
    g_x = mode_product(mode_product(mode_product(g_core, factors.uS, 1), factors.uF, 2), factors.uT, 3)
    return g_theta, g_x


def readout(x_enc, params):
    """``σ(X_(1) W + b)``: flatten each node's ``D'×T`` features and project to the horizon."""
    x_enc = as_tensor3(x_enc)
    n, d, t = x_enc.shape
    if params.w.shape[0] != d * t:
        raise ValueError(f"readout expects {params.w.shape[0]} features per node, got {d}*{t}")
    flat = np.reshape(x_enc, (n, d * t), order="F")
    return activate(flat @ params.w + params.b, params.activation)
