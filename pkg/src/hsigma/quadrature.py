"""Deterministic checks by adaptive quadrature for one and two interior vertices."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fields import scale_h
from .graph import PinnedGraph
from .identities import IdentityVerdict, exact_pair
from .measure import single_edge_log_density


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the nested adaptive quadrature.

    Half-lines are mapped to (0, 1) by ``b = x / (1 - x)``; for two vertices
    the inner variable starts at the cone boundary ``b_2 = W²/(4 b_1)``.
    ``cone_scale`` multiplies that boundary and exists only so tests can
    check that a misplaced boundary is detected.
    """

    epsrel: float = 1e-11
    epsabs: float = 0.0
    limit: int = 400
    transform: str = "x/(1-x)"
    cone_scale: float = 1.0

    def __post_init__(self):
        if self.epsrel <= 0 or self.limit < 1:
            raise ValueError("invalid quadrature tolerances")


def _quad(f, a, b, spec: QuadratureSpec, **kw) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, epsabs=spec.epsabs, epsrel=spec.epsrel, limit=spec.limit, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    if not math.isfinite(val):
        raise QuadratureError("integral is not finite")
    return val


def _half_line(x: float) -> tuple[float, float]:
    """b = x/(1-x) and db/dx."""
    return x / (1.0 - x), 1.0 / (1.0 - x) ** 2


def _interior_weights(graph_or_w) -> np.ndarray:
    if isinstance(graph_or_w, PinnedGraph):
        return np.asarray(graph_or_w.interior_weights, dtype=float)
    return np.atleast_2d(np.asarray(graph_or_w, dtype=float))


def letac_integrand(W: np.ndarray, b, phi, theta) -> float:
    """exp(-½(<φ,H_b φ> + <θ,H_b^{-1} θ>)) / sqrt(det H_b); no cone indicator."""
    b = np.asarray(b, dtype=float)
    H = 2.0 * np.diag(b) - W
    det = np.linalg.det(H)
    q = phi @ H @ phi + theta @ np.linalg.solve(H, theta)
    with np.errstate(invalid="ignore", over="ignore"):
        return float(np.exp(-0.5 * q) / np.sqrt(det))


def letac_lhs(graph, phi, theta, spec: QuadratureSpec | None = None) -> float:
    """∫ over {H_b > 0} of the Letac integrand, |V| ∈ {1, 2}.

    ``graph`` is a :class:`PinnedGraph` (only its interior weights matter) or
    the interior weight matrix itself.
    """
    spec = spec or QuadratureSpec()
    W = _interior_weights(graph)
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    nv = W.shape[0]
    if np.any(phi <= 0) or np.any(theta <= 0):
        raise ValueError("phi and theta must be positive")
    if phi.shape != (nv,) or theta.shape != (nv,):
        raise ValueError("phi and theta must be vectors over V")
    if nv == 1:
        p, t = phi[0], theta[0]

        def f1(x):
            b, jac = _half_line(x)
            if b <= 0 or not math.isfinite(b):
                return 0.0
            return math.exp(-p * p * b - t * t / (4.0 * b)) / math.sqrt(2.0 * b) * jac

        return _quad(f1, 0.0, 1.0, spec)
    if nv == 2:
        w = W[0, 1]
        p1, p2 = phi
        t1, t2 = theta

        def inner(y, b1, c):
            r, jac = _half_line(y)
            b2 = c + r
            if not math.isfinite(b2):
                return 0.0
            det = 4.0 * b1 * b2 - w * w
            # <θ, H^{-1} θ> with H^{-1} = [[2 b2, w], [w, 2 b1]] / det
            quad_inv = (2 * b2 * t1 * t1 + 2 * w * t1 * t2 + 2 * b1 * t2 * t2) / det
            quad_h = 2 * b1 * p1 * p1 + 2 * b2 * p2 * p2 - 2 * w * p1 * p2
            with np.errstate(all="ignore"):
                return float(np.exp(-0.5 * (quad_h + quad_inv)) / np.sqrt(det)) * jac

        def outer(x):
            b1, jac = _half_line(x)
            if b1 <= 0 or not math.isfinite(b1):
                return 0.0
            c = spec.cone_scale * w * w / (4.0 * b1)
            return _quad(inner, 0.0, 1.0, spec, args=(b1, c)) * jac

        return _quad(outer, 0.0, 1.0, spec)
    raise ValueError("quadrature is implemented for |V| = 1 or 2 only")


def letac_rhs(phi, theta) -> float:
    """(π/2)^{|V|/2} e^{-<φ,θ>} / Π φ_i."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return float((math.pi / 2) ** (len(phi) / 2) * math.exp(-phi @ theta) / np.prod(phi))


def scaling_reduction(phi, theta, W) -> tuple[np.ndarray, np.ndarray]:
    """(θφ, diag(φ) W diag(φ)): reduces a Letac integral to φ = 1."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if np.any(phi <= 0):
        raise ValueError("phi must be positive")
    _, W_scaled = scale_h(_interior_weights(W), np.zeros_like(phi), phi)
    return phi * np.atleast_1d(np.asarray(theta, dtype=float)), W_scaled


def scaling_jacobian(phi) -> float:
    """|db/db'| for b'_i = φ_i² b_i."""
    return float(np.prod(np.asarray(phi, dtype=float)) ** -2)


def letac_check(graph, phi, theta, tol: float, spec: QuadratureSpec | None = None) -> IdentityVerdict:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    W = _interior_weights(graph)
    name = f"letac |V|={len(phi)} w={W[np.triu_indices(len(phi), 1)].tolist()} phi={phi.tolist()} theta={theta.tolist()}"
    try:
        lhs = letac_lhs(W, phi, theta, spec)
    except QuadratureError:
        lhs = math.nan
    v = exact_pair(name, "letac-formula", lhs, letac_rhs(phi, theta), tol)
    if not math.isfinite(lhs):
        v.score = math.inf
    return v


def scaling_check(graph, phi, theta, tol: float, spec: QuadratureSpec | None = None) -> IdentityVerdict:
    """Letac integral at (W, φ, θ) against the φ = 1 integral at (W', θφ)."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    W = _interior_weights(graph)
    theta_s, W_s = scaling_reduction(phi, theta, W)
    try:
        a = letac_lhs(W, phi, theta, spec)
        b = letac_lhs(W_s, np.ones_like(phi), theta_s, spec) / np.prod(phi)
    except QuadratureError:
        a = b = math.nan
    v = exact_pair(f"letac-scaling phi={phi.tolist()}", "letac-scaling", a, b, tol)
    if not math.isfinite(a):
        v.score = math.inf
    return v


def cond_exp_closed_form(w: float, c: float) -> float:
    """E[e^{-c e^{u}}] on the single-edge graph: e^{W(1 - sqrt(1 + 2c/W))}."""
    return math.exp(w * (1.0 - math.sqrt(1.0 + 2.0 * c / w)))


def cond_exp_quadrature(w: float, c: float, spec: QuadratureSpec | None = None) -> float:
    spec = spec or QuadratureSpec()

    def f(t):
        with np.errstate(over="ignore"):
            return math.exp(-c * math.exp(t) + single_edge_log_density(t, w)) if t < 700 else 0.0

    return _quad(f, -np.inf, np.inf, spec)


def cond_exp_closed_form_check(w: float, c: float, spec: QuadratureSpec | None = None, tol=1e-8):
    if w <= 0 or c < 0:
        raise ValueError("need W > 0 and c >= 0")
    return exact_pair(
        f"cond-exp W={w:g} c={c:g}", "conditional-expectation-single-edge",
        cond_exp_quadrature(w, c, spec), cond_exp_closed_form(w, c), tol,
    )


def single_edge_normalization(w: float = 1.0, spec: QuadratureSpec | None = None) -> float:
    spec = spec or QuadratureSpec()
    return _quad(lambda t: math.exp(single_edge_log_density(t, w)) if abs(t) < 700 else 0.0,
                 -np.inf, np.inf, spec)


def single_edge_cdf(w: float = 1.0, grid_step: float = 0.005, spec: QuadratureSpec | None = None):
    """CDF of u_1 on the single-edge graph, tabulated by piecewise quadrature.

    Returns a vectorized callable (linear interpolation between nodes).
    """
    spec = spec or QuadratureSpec(epsrel=1e-12)
    density = lambda t: math.exp(single_edge_log_density(t, w))  # noqa: E731
    # support where the density exceeds ~1e-300
    lo, hi = -1.0, 1.0
    while single_edge_log_density(lo, w) > -700:
        lo *= 1.5
    while single_edge_log_density(hi, w) > -700:
        hi *= 1.5
    grid = np.arange(lo, hi + grid_step, grid_step)
    pieces = [0.0] + [_quad(density, a, b, spec) for a, b in zip(grid[:-1], grid[1:])]
    cdf = np.cumsum(pieces)

    def F(t):
        return np.interp(t, grid, cdf, left=0.0, right=1.0)

    return F
