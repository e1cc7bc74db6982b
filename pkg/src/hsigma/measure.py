"""Densities and closed forms of the H^{2|2} measure on a pinned graph."""

from __future__ import annotations

from collections.abc import Mapping
from typing import NamedTuple

import numpy as np

from .fields import (
    _check_u,
    as_lambda,
    beta_field,
    green_function,
    h_matrix,
    is_positive_definite,
    rescale_weights,
)
from .graph import HostExhaustion, PinnedGraph

LOG_2PI = np.log(2.0 * np.pi)


class LogDensity(NamedTuple):
    value: np.ndarray | float
    normalized: bool


def _logdet_pd(H: np.ndarray) -> np.ndarray:
    """log det of a batch of symmetric matrices; -inf where not PD."""
    try:
        L = np.linalg.cholesky(H)
        return 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)
    except np.linalg.LinAlgError:
        pass
    flat = H.reshape((-1,) + H.shape[-2:])
    out = np.full(flat.shape[0], -np.inf)
    ok = is_positive_definite(flat)
    if ok.any():
        L = np.linalg.cholesky(flat[ok])
        out[ok] = 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)
    return out.reshape(H.shape[:-2])


def log_density_u_values(graph: PinnedGraph, u: np.ndarray) -> np.ndarray:
    """Normalized log density of the u-marginal, vectorized; -inf off support.

    Integrating out s leaves (2π)^{-|V|/2} det(A_VV)^{1/2} e^{-Σ_e W(cosh-1)}
    e^{-Σ u}.  Since A_VV = diag(e^u) H_β diag(e^u), the determinant is taken
    in the better-conditioned form det(H_β) e^{2Σu}.
    """
    u = np.asarray(u, dtype=float)
    iu, ju, w = graph.edge_index()
    with np.errstate(over="ignore", invalid="ignore"):
        edge_term = (w * (np.cosh(u[..., iu] - u[..., ju]) - 1.0)).sum(axis=-1)
        beta = beta_field(graph, u)
        H = h_matrix(graph, beta)
    good = np.isfinite(edge_term) & np.isfinite(H).all(axis=(-1, -2))
    out = np.full(u.shape[:-1], -np.inf)
    if np.ndim(good) == 0:
        if good:
            out = 0.5 * _logdet_pd(H) - edge_term - 0.5 * (graph.n - 1) * LOG_2PI
        return np.asarray(out)
    if good.any():
        out[good] = 0.5 * _logdet_pd(H[good]) - edge_term[good] - 0.5 * (graph.n - 1) * LOG_2PI
    return out


def log_density_u(graph: PinnedGraph, u) -> LogDensity:
    """Log density of the u-marginal of μ^W (s integrated out).

    The value is ½ logdet A_VV(u) - Σ_edges W_ij (cosh(u_i - u_j) - 1) - Σ_V u_i
    plus the exact normalizing constant -|V|/2 log 2π.
    """
    u = _check_u(graph, u)
    return LogDensity(log_density_u_values(graph, u), True)


def single_edge_log_density(t, w: float = 1.0):
    """Exact log density of u_1 on the single-edge graph with weight ``w``."""
    t = np.asarray(t, dtype=float)
    return 0.5 * np.log(w / (2 * np.pi)) - w * (np.cosh(t) - 1.0) - 0.5 * t


def sample_s_given_u(graph: PinnedGraph, u, rng: np.random.Generator, green=None) -> np.ndarray:
    """Draw s | u: centered Gaussian on V with covariance A_VV(u)^{-1}, s_pin = 0.

    Drawn as s = e^{-u} y with y ~ N(0, Ĝ(u)).  ``green`` may pass a
    precomputed Ĝ (same leading shape as ``u``).
    """
    u = _check_u(graph, u)
    G = green_function(graph, u) if green is None else np.asarray(green)
    L = np.linalg.cholesky(G[..., 1:, 1:])
    z = rng.standard_normal(u.shape[:-1] + (graph.n - 1,))
    y = (L @ z[..., None])[..., 0]
    s = np.zeros_like(u)
    s[..., 1:] = y * np.exp(-u[..., 1:])
    return s


def laplace_closed_form(graph: PinnedGraph, lam) -> float:
    """L^W(λ) = Π_edges e^{W(1 - sqrt(1+λ_i) sqrt(1+λ_j))} Π_V (1+λ_i)^{-1/2}."""
    lam = as_lambda(graph, lam)
    return float(np.exp(log_laplace_closed_form(graph, lam)))


def log_laplace_closed_form(graph: PinnedGraph, lam) -> float:
    lam = as_lambda(graph, lam)
    r = np.sqrt(1.0 + lam)
    iu, ju, w = graph.edge_index()
    return float(np.sum(w * (1.0 - r[iu] * r[ju])) - 0.5 * np.sum(np.log1p(lam[1:])))


def rn_derivative(graph: PinnedGraph, lam, u) -> np.ndarray:
    """d(S_λ μ^{W^λ})/dμ^W at u.

    Π_edges e^{W^λ_ij - W_ij} Π_V sqrt(1+λ_j) e^{-λ_j β_j(u)}.
    """
    lam = as_lambda(graph, lam)
    u = _check_u(graph, u)
    scaled = rescale_weights(graph, lam)
    iu, ju, w = graph.edge_index()
    log_const = np.sum(scaled.weights[iu, ju] - w) + 0.5 * np.sum(np.log1p(lam[1:]))
    return np.exp(log_const - beta_field(graph, u) @ lam[1:])


def nu_log_density(graph: PinnedGraph, beta) -> LogDensity:
    """Log density of the β-law ν^{W,1} on the interior graph (V, E).

    Uses only the interior weights W_VV; the value is -inf where H_β is not
    positive definite.
    """
    beta = np.asarray(beta, dtype=float)
    W = graph.interior_weights
    nv = W.shape[0]
    const = 0.5 * nv * np.log(2.0 / np.pi) + 0.5 * W.sum()  # Σ over edges = ½ Σ_ij
    H = h_matrix(graph, beta)
    value = const - beta.sum(axis=-1) - 0.5 * _logdet_pd(H)
    return LogDensity(np.where(np.isfinite(value), value, -np.inf), True)


def theta_restriction(theta: Mapping[int, float], exhaustion: HostExhaustion, n: int) -> np.ndarray:
    """θ^{(n)} over the level-``n`` collapse (pin first).

    Entries inside V_n are copied; everything outside is summed onto δ_n.
    ``theta`` maps host vertex ids to non-positive reals.
    """
    from .graph import wired_collapse

    if any(v > 0 for v in theta.values()):
        raise ValueError("theta must be non-positive")
    g = wired_collapse(exhaustion, n)
    idx = g.index
    out = np.zeros(g.n)
    for v, t in theta.items():
        out[idx[exhaustion.level_vertex(n, v)]] += t
    return out
