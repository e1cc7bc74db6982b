"""Adaptive Metropolis sampling of the u-marginal and Monte Carlo estimation.

Chains are advanced in lock step as one numpy batch: ``C`` independent chains
each update their coordinates one at a time with a Gaussian random-walk
proposal.  During burn-in the per-coordinate step sizes follow a
Robbins-Monro recursion towards ``target_accept`` using the acceptance rate
pooled over chains; afterwards they are frozen, so retained draws come from a
fixed reversible kernel.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fields import beta_field, green_function
from .graph import PinnedGraph
from .measure import log_density_u_values, nu_log_density, sample_s_given_u

log = logging.getLogger(__name__)

GreenFn = Callable[[PinnedGraph, np.ndarray], np.ndarray]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *stream)``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ChainConfig:
    """MCMC budget.  ``burn_in`` and ``samples`` are totals over all chains."""

    seed: int = 0
    burn_in: int = 20_000
    samples: int = 200_000
    thinning: int = 1
    initial_step_size: float = 1.0
    target_accept: float = 0.44
    chains: int = 256
    min_burn_in_sweeps: int = 100

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.chains < 1 or self.burn_in < 0 or self.initial_step_size <= 0:
            raise ValueError("invalid chain configuration")

    @property
    def per_chain(self) -> int:
        return max(1, math.ceil(self.samples / self.chains))

    @property
    def burn_in_sweeps(self) -> int:
        return max(self.min_burn_in_sweeps, math.ceil(self.burn_in / self.chains))


@dataclass
class ChainRun:
    """Retained states, shape (chains, draws, dim), plus kernel diagnostics."""

    x: np.ndarray
    step_size: np.ndarray
    acceptance: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0] * self.x.shape[1]

    def flat(self) -> np.ndarray:
        return self.x.reshape(-1, self.x.shape[-1])


def metropolis(
    log_density: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    config: ChainConfig,
    rng: np.random.Generator,
    coords: np.ndarray | None = None,
) -> ChainRun:
    """Componentwise random-walk Metropolis on a batch of chains.

    ``x0`` has shape (dim,) and is copied to every chain.  Only positions in
    ``coords`` are updated (default: all).
    """
    C = config.chains
    x = np.tile(np.asarray(x0, dtype=float), (C, 1))
    coords = np.arange(x.shape[1]) if coords is None else np.asarray(coords)
    lp = log_density(x)
    if not np.all(np.isfinite(lp)):
        raise ValueError("initial state is outside the support")
    log_step = np.full(len(coords), math.log(config.initial_step_size))
    accepted = np.zeros(len(coords))

    def sweep(adapt_gain: float | None) -> np.ndarray:
        rates = np.empty(len(coords))
        for k, c in enumerate(coords):
            prop = x.copy()
            prop[:, c] += math.exp(log_step[k]) * rng.standard_normal(C)
            lp_prop = log_density(prop)
            accept = np.log(rng.random(C)) < lp_prop - lp
            x[accept] = prop[accept]
            lp[accept] = lp_prop[accept]
            rates[k] = accept.mean()
        if adapt_gain is not None:
            log_step[:] += adapt_gain * (rates - config.target_accept)
        return rates

    for t in range(config.burn_in_sweeps):
        sweep(1.0 / (t + 1) ** 0.6)

    T = config.per_chain
    out = np.empty((C, T, x.shape[1]))
    for t in range(T):
        for _ in range(config.thinning):
            accepted += sweep(None)
        out[:, t] = x
    acceptance = accepted / (T * config.thinning)
    if np.any(np.abs(acceptance - config.target_accept) > 0.25):
        log.warning("acceptance %s far from target %.2f", acceptance, config.target_accept)
    return ChainRun(out, np.exp(log_step), acceptance)


def run_chain(graph: PinnedGraph, config: ChainConfig, stream: tuple[int, ...] = ()) -> ChainRun:
    """Sample the u-marginal of μ^W starting from u = 0."""
    rng = make_rng(config.seed, *stream)
    return metropolis(
        lambda u: log_density_u_values(graph, u),
        np.zeros(graph.n),
        config,
        rng,
        coords=np.arange(1, graph.n),
    )


def run_nu_chain(graph: PinnedGraph, config: ChainConfig, stream: tuple[int, ...] = ()) -> ChainRun:
    """Sample β from ν^{W,1} on the interior graph; proposals off the cone are rejected."""
    rng = make_rng(config.seed, *stream)
    W = graph.interior_weights
    beta0 = 0.5 * W.sum(axis=1) + 1.0
    return metropolis(lambda b: nu_log_density(graph, b).value, beta0, config, rng)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    ess: float
    n: int

    def z(self, target: float) -> float:
        return z_score(self.mean - target, self.std_error)


def z_score(diff: float, se: float) -> float:
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


def batch_means(values: np.ndarray) -> McEstimate:
    """Mean with batch-means standard error for chain-shaped ``values`` (C, T).

    Batch length is about sqrt(n) but never crosses a chain boundary.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None]
    C, T = values.shape
    n = C * T
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise FloatingPointError(f"{bad} of {n} functional values are not finite")
    mean = float(values.mean())
    b = min(T, max(1, math.ceil(math.sqrt(n))))
    if C == 1:
        b = max(1, min(b, T // 2))  # at least two batches
    nb = T // b
    means = values[:, : nb * b].reshape(C, nb, b).mean(axis=2).ravel()
    if means.size < 2:
        raise ValueError("not enough data for a batch-means error estimate")
    se = float(means.std(ddof=1) / math.sqrt(means.size))
    var = float(values.var(ddof=1)) if n > 1 else 0.0
    ess = float(n) if se == 0 else max(1.0, min(float(n), var / se**2))
    return McEstimate(mean, se, ess, n)


class FieldBatch:
    """Lazy view of a block of samples handed to functionals."""

    def __init__(self, graph: PinnedGraph, u: np.ndarray, green_fn: GreenFn, rng, s_needed: bool):
        self.graph = graph
        self.u = u
        self._green_fn = green_fn
        self._rng = rng
        self._s = None
        if s_needed:
            self._s = sample_s_given_u(graph, u, rng, green=self.green)

    @cached_property
    def green(self) -> np.ndarray:
        return self._green_fn(self.graph, self.u)

    @cached_property
    def beta(self) -> np.ndarray:
        return beta_field(self.graph, self.u)

    @property
    def s(self) -> np.ndarray:
        if self._s is None:
            raise RuntimeError("functional uses s but no s draws were requested")
        return self._s

    def redraw_s(self) -> None:
        self._s = sample_s_given_u(self.graph, self.u, self._rng, green=self.green)


Functional = Callable[[FieldBatch], np.ndarray]


def evaluate(
    functional: Functional,
    u_samples: np.ndarray,
    graph: PinnedGraph,
    rng: np.random.Generator | None = None,
    s_draws: int = 0,
    green_fn: GreenFn = green_function,
    chunk: int = 1 << 15,
) -> np.ndarray:
    """Functional values for every retained u, averaged over ``s_draws`` fresh s | u."""
    u_samples = np.asarray(u_samples, dtype=float)
    shape = u_samples.shape[:-1]
    flat = u_samples.reshape(-1, graph.n)
    out = np.empty(flat.shape[0])
    if s_draws and rng is None:
        raise ValueError("s draws need a random generator")
    for lo in range(0, flat.shape[0], chunk):
        batch = FieldBatch(graph, flat[lo : lo + chunk], green_fn, rng, s_needed=s_draws > 0)
        acc = np.asarray(functional(batch), dtype=float)
        for _ in range(1, s_draws):
            batch.redraw_s()
            acc = acc + functional(batch)
        out[lo : lo + chunk] = acc / max(1, s_draws)
    return out.reshape(shape)


def estimate(
    functional: Functional,
    u_samples: np.ndarray | ChainRun,
    graph: PinnedGraph,
    rng: np.random.Generator | None = None,
    s_draws: int = 0,
    green_fn: GreenFn = green_function,
) -> McEstimate:
    """Monte Carlo mean of ``functional`` with an autocorrelation-aware error.

    ``u_samples`` is a :class:`ChainRun` or an array shaped (chains, draws, n).
    Functionals that read ``batch.s`` need ``s_draws >= 1``.
    """
    if isinstance(u_samples, ChainRun):
        u_samples = u_samples.x
    values = evaluate(functional, u_samples, graph, rng, s_draws, green_fn)
    return batch_means(values)
