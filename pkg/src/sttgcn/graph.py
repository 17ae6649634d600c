"""Spatial adjacency normalization and temporal adjacency tensors with their powers."""
from dataclasses import dataclass

import numpy as np

from .tensor import as_mat, batch_mode3_product

TEMPORAL_SCHEMES = ("backward-chain", "identity")


def normalize_adjacency(a, add_self_loops=True):
    """Symmetric normalization ``D^-1/2 (A [+ I]) D^-1/2``; isolated nodes map to zero."""
    a = as_mat(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if np.any(a < 0):
        raise ValueError("adjacency has negative entries")
    if add_self_loops:
        a = a + np.eye(a.shape[0])
    deg = a.sum(axis=1)
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def spatial_powers(a_norm, p):
    """``[I, Ã, Ã², ..., Ã^p]``."""
    a_norm = as_mat(a_norm)
    if a_norm.shape[0] != a_norm.shape[1]:
        raise ValueError(f"adjacency must be square, got {a_norm.shape}")
    if p < 0:
        raise ValueError("order p must be >= 0")
    powers = [np.eye(a_norm.shape[0])]
    for _ in range(p):
        powers.append(powers[-1] @ a_norm)
    return powers


def temporal_pattern(t_steps, scheme="backward-chain"):
    if scheme not in TEMPORAL_SCHEMES:
        raise ValueError(f"unknown temporal scheme {scheme!r}; choose from {TEMPORAL_SCHEMES}")
    if t_steps < 1:
        raise ValueError("t_steps must be >= 1")
    if scheme == "identity":
        return np.eye(t_steps)
    m = np.eye(t_steps)
    m[np.arange(1, t_steps), np.arange(t_steps - 1)] = 1.0
    return m / m.sum(axis=1, keepdims=True)


def temporal_powers(tensor, p):
    """Per-node matrix powers ``[A_T^0, ..., A_T^p]`` with identity slices at order 0."""
    if p < 0:
        raise ValueError("order p must be >= 0")
    tensor = np.asfortranarray(tensor, dtype=np.float64)
    n, t, t2 = tensor.shape
    if t != t2:
        raise ValueError(f"temporal slices must be square, got {t}x{t2}")
    eye = np.asfortranarray(np.broadcast_to(np.eye(t), (n, t, t)))
    powers = [eye]
    for _ in range(p):
        powers.append(batch_mode3_product(powers[-1], tensor))
    return powers


@dataclass
class SpatialGraph:
    a: np.ndarray
    a_norm: np.ndarray
    powers: list

    @property
    def n_nodes(self):
        return self.a.shape[0]

    @property
    def order(self):
        return len(self.powers) - 1

    @classmethod
    def build(cls, a, p, add_self_loops=True):
        a = as_mat(a)
        a_norm = normalize_adjacency(a, add_self_loops)
        return cls(a, a_norm, spatial_powers(a_norm, p))

    def identity_like(self):
        """Same graph with every power replaced by the identity (temporal-only ablation)."""
        eye = np.eye(self.n_nodes)
        return SpatialGraph(self.a, self.a_norm, [eye] * len(self.powers))


@dataclass
class TemporalAdjacency:
    tensor: np.ndarray
    powers: list
    scheme: str = "backward-chain"

    @property
    def order(self):
        return len(self.powers) - 1

    def identity_like(self):
        """Same shape with identity slices at every order (spatial-only ablation)."""
        return TemporalAdjacency(self.powers[0], [self.powers[0]] * len(self.powers), "identity")


def build_temporal_adjacency(n_nodes, t_steps, scheme="backward-chain", p=0):
    """N×T×T adjacency with one shared T×T pattern per node, plus powers up to ``p``.

    ``backward-chain`` links step t to itself and to t-1 with rows normalized
    to sum to one; ``identity`` disables temporal mixing.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    pattern = temporal_pattern(t_steps, scheme)
    tensor = np.asfortranarray(np.broadcast_to(pattern, (n_nodes, t_steps, t_steps)))
    return TemporalAdjacency(tensor, temporal_powers(tensor, p), scheme)
