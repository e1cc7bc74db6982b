"""Deterministic field algebra on a pinned graph.

Field vectors are indexed like ``graph.vertices`` (pin first).  Every function
accepts a batch of fields with arbitrary leading axes, ``u.shape == (..., n)``,
and returns arrays with the same leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import GraphError, PinnedGraph


class OutsideSupportError(ValueError):
    """β is not in the range of the β field (H_β not PD or e^u not positive)."""


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class FieldConfig:
    """A point (u, s) of the pinned configuration space."""

    u: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if u.shape != s.shape:
            raise ValueError("u and s must have the same shape")
        if u[..., 0].any() or s[..., 0].any():
            raise ValueError("fields must vanish at the pin")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)

    @classmethod
    def zeros(cls, graph: PinnedGraph) -> FieldConfig:
        return cls(np.zeros(graph.n), np.zeros(graph.n))


def pinned(graph: PinnedGraph, u_interior) -> np.ndarray:
    """Prepend the pin value 0 to interior values."""
    u_interior = np.asarray(u_interior, dtype=float)
    if u_interior.shape[-1] != graph.n - 1:
        raise ValueError(f"expected {graph.n - 1} interior values, got {u_interior.shape[-1]}")
    zero = np.zeros(u_interior.shape[:-1] + (1,))
    return np.concatenate([zero, u_interior], axis=-1)


def _check_u(graph: PinnedGraph, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != graph.n:
        raise ValueError(f"field has {u.shape[-1]} entries, graph has {graph.n} vertices")
    if np.any(u[..., 0] != 0):
        raise ValueError("u must vanish at the pin")
    return u


def as_lambda(graph: PinnedGraph, lam) -> np.ndarray:
    """Validate scaling parameters; interior-only input gets λ_pin = 0."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape == (graph.n - 1,):
        lam = pinned(graph, lam)
    if lam.shape != (graph.n,):
        raise ValueError(f"lambda must have {graph.n} (or {graph.n - 1}) entries")
    if lam[0] != 0:
        raise ValueError("lambda must vanish at the pin")
    if np.any(lam <= -1) or not np.all(np.isfinite(lam)):
        raise ValueError("lambda entries must be finite and > -1")
    return lam


def assemble_laplacian(graph: PinnedGraph, u) -> np.ndarray:
    """A_ij = -W_ij e^{u_i+u_j} off the diagonal, rows summing to zero."""
    u = _check_u(graph, u)
    eu = np.exp(u)
    X = graph.weights * eu[..., :, None] * eu[..., None, :]
    A = -X
    diag = X.sum(axis=-1)
    idx = np.arange(graph.n)
    A[..., idx, idx] = diag
    return A


def beta_field(graph: PinnedGraph, u) -> np.ndarray:
    """β_i = ½ Σ_j W_ij e^{u_j - u_i} for i in V."""
    u = _check_u(graph, u)
    eu = np.exp(u)
    return 0.5 * (eu @ graph.weights.T)[..., 1:] / eu[..., 1:]


def cholesky(A: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a (batch of) SPD matrices through the Cholesky factor."""
    L = cholesky(A)
    eye = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    Linv = np.linalg.solve(L, eye)
    return np.swapaxes(Linv, -1, -2) @ Linv


def spd_logdet(A: np.ndarray) -> np.ndarray:
    L = cholesky(A)
    return 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)


def green_function(graph: PinnedGraph, u) -> np.ndarray:
    """Ĝ_ij = e^{u_i} (A_VV^{-1})_ij e^{u_j} on V x V, zero row/column at the pin."""
    u = _check_u(graph, u)
    A = assemble_laplacian(graph, u)[..., 1:, 1:]
    eu = np.exp(u[..., 1:])
    G = np.zeros(u.shape + (graph.n,))
    G[..., 1:, 1:] = eu[..., :, None] * spd_inverse(A) * eu[..., None, :]
    return G


def h_matrix(graph: PinnedGraph, beta) -> np.ndarray:
    """(H_b)_ij = 2 b_i δ_ij - W_ij on V x V."""
    beta = np.asarray(beta, dtype=float)
    H = -np.broadcast_to(graph.interior_weights, beta.shape + (beta.shape[-1],)).copy()
    idx = np.arange(beta.shape[-1])
    H[..., idx, idx] += 2.0 * beta
    return H


def is_positive_definite(H: np.ndarray) -> np.ndarray:
    """Elementwise PD test over a batch (eigenvalue based, never raises)."""
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        out = np.zeros(H.shape[:-2], dtype=bool)
        ok = np.isfinite(H).all(axis=(-1, -2))
        out[ok] = is_positive_definite(H[ok])
        return out
    return np.linalg.eigvalsh(H)[..., 0] > 0


def reconstruct_u(graph: PinnedGraph, beta) -> np.ndarray:
    """Recover u from β by solving H_β e^u_V = W_{V,pin}."""
    beta = np.asarray(beta, dtype=float)
    H = h_matrix(graph, beta)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise OutsideSupportError("H_beta is not positive definite") from exc
    rhs = np.broadcast_to(graph.pin_weights, beta.shape)[..., None]
    y = np.linalg.solve(L, rhs)
    x = np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]
    if np.any(x <= 0):
        raise OutsideSupportError("H_beta^{-1} W_{V,pin} has a non-positive entry")
    return pinned(graph, np.log(x))


def scale_transform(config: FieldConfig, lam) -> FieldConfig:
    """The local shift u_i -> u_i + log sqrt(1 + λ_i); s is unchanged."""
    lam = np.asarray(lam, dtype=float)
    if lam[0] != 0 or np.any(lam <= -1):
        raise ValueError("invalid scaling parameters")
    return FieldConfig(shift_u(config.u, lam), config.s)


def shift_u(u, lam) -> np.ndarray:
    return np.asarray(u, dtype=float) + 0.5 * np.log1p(np.asarray(lam, dtype=float))


def inverse_lambda(lam) -> np.ndarray:
    """λ' with sqrt(1+λ) sqrt(1+λ') = 1."""
    lam = np.asarray(lam, dtype=float)
    return -lam / (1.0 + lam)


def rescale_weights(graph: PinnedGraph, lam) -> PinnedGraph:
    """W^λ_ij = sqrt(1+λ_i) sqrt(1+λ_j) W_ij."""
    lam = as_lambda(graph, lam)
    r = np.sqrt(1.0 + lam)
    return graph.with_weights(graph.weights * np.outer(r, r))


def scale_h(W: np.ndarray, b, phi) -> tuple[np.ndarray, np.ndarray]:
    """Return (b', W') with b'_i = φ_i² b_i and W' = diag(φ) W diag(φ)."""
    phi = np.asarray(phi, dtype=float)
    return phi**2 * np.asarray(b, dtype=float), phi[:, None] * W * phi[None, :]


class Rank1Split(NamedTuple):
    scale: float
    """W_{ℓ,pin} e^{-u_ℓ}."""
    exp_tilde_u: np.ndarray
    """e^{u_i - u_ℓ} over V (entry 1 at ℓ)."""
    reduced_green: np.ndarray
    """Green's function over V x V of the graph V pinned at ℓ; zero at ℓ."""
    reduced_graph: PinnedGraph

    def reconstruct(self) -> np.ndarray:
        return np.outer(self.exp_tilde_u, self.exp_tilde_u) / self.scale + self.reduced_green


def reduced_graph(graph: PinnedGraph) -> tuple[PinnedGraph, int]:
    """Drop the pin of a graph whose pin has a single neighbor ℓ; ℓ becomes the pin."""
    nbrs = np.flatnonzero(graph.pin_weights)
    if len(nbrs) != 1:
        raise GraphError(f"pin must have exactly one neighbor, has {len(nbrs)}")
    if graph.n < 3:
        raise GraphError("rank-1 split needs at least two interior vertices")
    ell = int(nbrs[0]) + 1
    order = [ell] + [k for k in range(1, graph.n) if k != ell]
    W = graph.weights[np.ix_(order, order)]
    return PinnedGraph(tuple(graph.vertices[k] for k in order), W), ell


def green_rank1_split(graph: PinnedGraph, u) -> Rank1Split:
    """Split Ĝ_VV(u) into a rank-one part plus the reduced Green's function.

    With ℓ the unique neighbor of the pin and ũ = u - u_ℓ on V,
    ``Ĝ_VV(u) = e^ũ (e^ũ)^T / (W_{ℓ,pin} e^{-u_ℓ}) + Ĝ^{reduced}(ũ)``.
    Returned vectors and matrices are indexed like ``graph.interior``.
    """
    u = _check_u(graph, u)
    if u.ndim != 1:
        raise ValueError("green_rank1_split takes a single field")
    red, ell = reduced_graph(graph)
    order = [ell] + [k for k in range(1, graph.n) if k != ell]
    tilde = u[order] - u[ell]
    G_red = green_function(red, tilde)
    # back to graph.interior order
    back = np.argsort(np.array(order) - 1)
    G_red = G_red[np.ix_(back, back)]
    e_tilde = np.exp(u[1:] - u[ell])
    scale = float(graph.weights[ell, 0] * np.exp(-u[ell]))
    return Rank1Split(scale, e_tilde, G_red, red)
