"""Identity checks: each exact expectation identity becomes a test statistic.

Statistical checks compare a Monte Carlo estimate with an exact value (or two
independent estimates with each other) through a z-score.  Exact checks
compare two closed forms through a relative error.
"""

from __future__ import annotations

import itertools
import math
import zlib
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .fields import as_lambda, green_function, h_matrix, rescale_weights, shift_u, spd_inverse
from .graph import HostExhaustion, PinnedGraph, wired_collapse
from .measure import laplace_closed_form, theta_restriction
from .sampler import ChainConfig, ChainRun, FieldBatch, GreenFn, McEstimate, estimate, make_rng
from .sampler import batch_means, run_chain, run_nu_chain, z_score

Pairing = tuple[tuple[int, int], ...]

Z_THRESHOLD = 3.0


# --- verdicts -------------------------------------------------------------------------------


@dataclass
class IdentityVerdict:
    statistic: str
    anchor: str
    lhs: float
    rhs: float
    score: float
    """z-score for statistical checks, relative error for exact ones."""
    kind: str = "statistical"
    threshold: float = Z_THRESHOLD
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    ess: float | None = None
    suite: str = ""

    @property
    def passed(self) -> bool:
        if self.kind == "statistical":
            return abs(self.score) <= self.threshold
        return self.score <= self.threshold

    def record(self) -> dict:
        key = "z" if self.kind == "statistical" else "rel_err"
        rec = {
            "suite": self.suite,
            "anchor": self.anchor,
            "statistic": self.statistic,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            key: float(self.score),
            "pass": bool(self.passed),
        }
        if self.kind == "statistical":
            rec["lhs_se"] = float(self.lhs_se)
            rec["rhs_se"] = float(self.rhs_se)
            if self.ess is not None:
                rec["ess"] = float(self.ess)
        return rec


def versus_exact(statistic: str, anchor: str, est: McEstimate, exact: float, threshold=Z_THRESHOLD):
    return IdentityVerdict(
        statistic, anchor, est.mean, exact, est.z(exact),
        threshold=threshold, lhs_se=est.std_error, ess=est.ess,
    )


def two_run(statistic: str, anchor: str, a: McEstimate, b: McEstimate, threshold=Z_THRESHOLD):
    se = math.hypot(a.std_error, b.std_error)
    return IdentityVerdict(
        statistic, anchor, a.mean, b.mean, z_score(a.mean - b.mean, se),
        threshold=threshold, lhs_se=a.std_error, rhs_se=b.std_error, ess=min(a.ess, b.ess),
    )


def exact_pair(statistic: str, anchor: str, lhs: float, rhs: float, tol: float):
    scale = max(abs(lhs), abs(rhs))
    err = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return IdentityVerdict(statistic, anchor, lhs, rhs, err, kind="exact", threshold=tol)


def _scaled(est: McEstimate, c: float) -> McEstimate:
    return McEstimate(c * est.mean, abs(c) * est.std_error, est.ess, est.n)


# --- Monte Carlo handle ---------------------------------------------------------------------


def _graph_key(graph: PinnedGraph) -> int:
    return zlib.crc32(np.asarray(graph.vertices, dtype=np.int64).tobytes() + graph.weights.tobytes())


@dataclass
class MonteCarlo:
    """Shared sampling state for a batch of checks.

    One u-chain per distinct graph, cached; its random stream is derived from
    the seed and a checksum of the graph, so results do not depend on the
    order in which checks run.  ``green_fn`` is the Green's function used by
    every functional and by the s | u draws.
    """

    config: ChainConfig
    green_fn: GreenFn = green_function
    s_draws: int = 1
    _chains: dict = field(default_factory=dict, repr=False)
    _draw_counter: dict = field(default_factory=dict, repr=False)

    def chain(self, graph: PinnedGraph) -> ChainRun:
        key = ("mu", _graph_key(graph))
        if key not in self._chains:
            self._chains[key] = run_chain(graph, self.config, stream=(key[1], 0))
        return self._chains[key]

    def nu_chain(self, graph: PinnedGraph) -> ChainRun:
        key = ("nu", _graph_key(graph))
        if key not in self._chains:
            self._chains[key] = run_nu_chain(graph, self.config, stream=(key[1], 1))
        return self._chains[key]

    def _rng(self, graph: PinnedGraph) -> np.random.Generator:
        key = _graph_key(graph)
        k = self._draw_counter.get(key, 0)
        self._draw_counter[key] = k + 1
        return make_rng(self.config.seed, key, 2, k)

    def estimate(self, graph, functional, uses_s=False, u=None) -> McEstimate:
        """Estimate under μ^W of ``graph``; ``u`` overrides the chain states."""
        u = self.chain(graph).x if u is None else u
        rng = self._rng(graph) if uses_s else None
        return estimate(functional, u, graph, rng, self.s_draws if uses_s else 0, self.green_fn)


# --- pairings and hierarchy terms -----------------------------------------------------------


def enumerate_pairings(items: Iterable[int]) -> list[Pairing]:
    """All perfect matchings of ``items``; empty list for odd size, ``[()]`` for none."""
    items = list(items)
    if len(items) % 2:
        return []
    if not items:
        return [()]
    first, rest = items[0], items[1:]
    out = []
    for k, partner in enumerate(rest):
        for sub in enumerate_pairings(rest[:k] + rest[k + 1 :]):
            out.append(((first, partner),) + sub)
    return out


def martingale_term(indices: Sequence[int], u, green) -> np.ndarray:
    """Hierarchy term for positions ``indices`` (repeats allowed).

    Σ over even I ⊆ {1..m} and pairings of I of
    (-1)^{|I|/2} Π_{k∉I} e^{u_{i_k}} Π_{pairs} Ĝ_{i_k i_l}.
    """
    u = np.asarray(u, dtype=float)
    green = np.asarray(green, dtype=float)
    idx = list(indices)
    m = len(idx)
    eu = np.exp(u[..., idx])
    total = np.zeros(u.shape[:-1])
    for size in range(0, m + 1, 2):
        sign = (-1) ** (size // 2)
        for subset in itertools.combinations(range(m), size):
            rest = [k for k in range(m) if k not in subset]
            free = eu[..., rest].prod(axis=-1)
            paired = np.zeros(u.shape[:-1])
            for pairing in enumerate_pairings(subset):
                p = np.ones(u.shape[:-1])
                for a, b in pairing:
                    p = p * green[..., idx[a], idx[b]]
                paired = paired + p
            total = total + sign * free * paired
    return total


def generating_term(theta, u, green) -> np.ndarray:
    """exp(<θ, e^u> - ½ <θ, Ĝ θ>)."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    quad = np.einsum("i,...ij,j->...", theta, np.asarray(green, dtype=float), theta)
    return np.exp(np.exp(u) @ theta - 0.5 * quad)


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(theta > 0):
        raise ValueError("theta must be non-positive")
    return theta


# --- checks on one graph --------------------------------------------------------------------


def ward_functional(indices: Sequence[int]) -> Callable[[FieldBatch], np.ndarray]:
    idx = list(indices)

    def f(b: FieldBatch):
        return np.exp(b.u[:, idx].sum(axis=1)) * np.prod(1 + 1j * b.s[:, idx], axis=1).real

    return f


def ward_identity_check(graph: PinnedGraph, indices: Sequence[int], mc: MonteCarlo) -> list[IdentityVerdict]:
    """E[e^{Σ u_{i_k}} Re Π (1 + i s_{i_k})] = 1 for positions ``indices``."""
    if not indices:
        raise ValueError("need at least one index")
    est = mc.estimate(graph, ward_functional(indices), uses_s=True)
    name = f"ward m={len(indices)} at {tuple(graph.vertices[i] for i in indices)}"
    return [versus_exact(name, "ward-identity-moments", est, 1.0)]


def exp_ward_check(graph: PinnedGraph, theta, mc: MonteCarlo) -> list[IdentityVerdict]:
    """E[exp<θ, e^u (1 + i s)>] = e^{<θ, 1>}: real and imaginary parts."""
    theta = _check_theta(theta)

    def part(fn):
        def f(b: FieldBatch):
            eu = np.exp(b.u)
            return np.exp(eu @ theta) * fn((eu * b.s) @ theta)

        return f

    re = mc.estimate(graph, part(np.cos), uses_s=True)
    im = mc.estimate(graph, part(np.sin), uses_s=True)
    target = math.exp(theta.sum())
    name = f"exp-ward theta={theta.tolist()}"
    return [
        versus_exact(name + " real", "ward-identity-exp", re, target),
        versus_exact(name + " imag", "ward-identity-exp", im, 0.0),
    ]


def laplace_check(graph: PinnedGraph, lam, mc: MonteCarlo) -> list[IdentityVerdict]:
    """E[e^{-<λ_V, β>}] against the closed-form Laplace transform."""
    lam = as_lambda(graph, lam)
    est = mc.estimate(graph, lambda b: np.exp(-b.beta @ lam[1:]))
    return [versus_exact(f"laplace lambda={lam[1:].tolist()}", "laplace-transform-beta", est,
                         laplace_closed_form(graph, lam))]


def generalized_laplace_check(graph: PinnedGraph, theta, lam, mc: MonteCarlo) -> list[IdentityVerdict]:
    """E[exp(<θ,e^u> - ½<θ,Ĝθ>) e^{-<λ_V,β>}] = L^W(λ) e^{<θ, sqrt(1+λ)>}."""
    theta = _check_theta(theta)
    lam = as_lambda(graph, lam)

    def f(b: FieldBatch):
        return generating_term(theta, b.u, b.green) * np.exp(-b.beta @ lam[1:])

    est = mc.estimate(graph, f)
    target = laplace_closed_form(graph, lam) * math.exp(theta @ np.sqrt(1 + lam))
    name = f"generalized-laplace theta={theta.tolist()} lambda={lam[1:].tolist()}"
    return [versus_exact(name, "generalized-laplace-transform", est, target)]


def importance_identity_check(
    graph: PinnedGraph,
    lam,
    g: Callable[[FieldBatch], np.ndarray],
    mc: MonteCarlo,
    name: str = "g",
    uses_s: bool = False,
    closed_form: float | None = None,
) -> list[IdentityVerdict]:
    """E_W[g e^{-<λ,β>}] = L^W(λ) E_{W^λ}[g ∘ S_λ] by two independent runs.

    ``g`` is evaluated on fields of ``graph``; on the right-hand side the
    chain of the rescaled graph is shifted by S_λ first.  With
    ``closed_form`` both sides are also compared with that value.
    """
    lam = as_lambda(graph, lam)
    L = laplace_closed_form(graph, lam)
    lhs = mc.estimate(graph, lambda b: g(b) * np.exp(-b.beta @ lam[1:]), uses_s=uses_s)
    scaled = rescale_weights(graph, lam)
    shifted = shift_u(mc.chain(scaled).x, lam)
    rhs = _scaled(mc.estimate(graph, g, uses_s=uses_s, u=shifted), L)
    label = f"image-measure {name} lambda={lam[1:].tolist()}"
    out = [two_run(label, "image-measure", lhs, rhs)]
    if closed_form is not None:
        out.append(versus_exact(label + " lhs-closed", "image-measure-example", lhs, closed_form))
        out.append(versus_exact(label + " rhs-closed", "image-measure-example", rhs, closed_form))
    return out


# --- cross-level checks ---------------------------------------------------------------------


def _level_lambda(exhaustion: HostExhaustion, n: int, lam: Mapping[int, float]) -> np.ndarray:
    g = wired_collapse(exhaustion, n)
    out = np.zeros(g.n)
    idx = g.index
    for v, x in lam.items():
        if x == 0:
            continue
        if v not in exhaustion.levels[n - 1]:
            raise ValueError(f"lambda must vanish outside V_{n}; vertex {v} has {x}")
        out[idx[v]] = x
    return as_lambda(g, out)


def consistency_check(exhaustion: HostExhaustion, n: int, lam: Mapping[int, float], tol=1e-12):
    """Closed-form Laplace transforms agree at levels n and n+1 (λ supported in V_n)."""
    if not 1 <= n < exhaustion.m:
        raise ValueError(f"need 1 <= n < {exhaustion.m}")
    a = laplace_closed_form(wired_collapse(exhaustion, n), _level_lambda(exhaustion, n, lam))
    b = laplace_closed_form(wired_collapse(exhaustion, n + 1), _level_lambda(exhaustion, n + 1, lam))
    return [exact_pair(f"consistency n={n} lambda={dict(sorted(lam.items()))}", "kolmogorov-consistency",
                       a, b, tol)]


def martingale_step_check(
    exhaustion: HostExhaustion,
    n: int,
    lam: Mapping[int, float],
    mc: MonteCarlo,
    indices: Sequence[int] | None = None,
    theta: Mapping[int, float] | None = None,
) -> list[IdentityVerdict]:
    """Expectations of a hierarchy term (``indices``) or of the generating term
    (``theta``) times e^{-<λ,β>} at levels n and n+1, plus both against the
    closed form.  Host vertices outside V_n are read at the collapsed pin."""
    if (indices is None) == (theta is None):
        raise ValueError("give exactly one of indices or theta")
    levels = (n, n + 1)
    graphs = [wired_collapse(exhaustion, k) for k in levels]
    lams = [_level_lambda(exhaustion, k, lam) for k in levels]
    L = laplace_closed_form(graphs[0], lams[0])
    ests = []
    if indices is not None:
        for k, g, lv in zip(levels, graphs, lams):
            pos = [g.index[exhaustion.level_vertex(k, v)] for v in indices]
            ests.append(mc.estimate(
                g, lambda b, pos=pos, lv=lv: martingale_term(pos, b.u, b.green) * np.exp(-b.beta @ lv[1:])
            ))
        pos = [graphs[0].index[exhaustion.level_vertex(n, v)] for v in indices]
        closed = L * float(np.prod(np.sqrt(1 + lams[0][pos])))
        label = f"martingale m={len(indices)} at {tuple(indices)}"
        anchor = "martingale-hierarchy"
    else:
        for k, g, lv in zip(levels, graphs, lams):
            th = theta_restriction(theta, exhaustion, k)
            ests.append(mc.estimate(
                g, lambda b, th=th, lv=lv: generating_term(th, b.u, b.green) * np.exp(-b.beta @ lv[1:])
            ))
        th = theta_restriction(theta, exhaustion, n)
        closed = L * math.exp(th @ np.sqrt(1 + lams[0]))
        label = f"generating martingale theta={dict(sorted(theta.items()))}"
        anchor = "generating-martingale"
    label += f" n={n} lambda={dict(sorted(lam.items()))}"
    return [
        two_run(label, anchor, ests[1], ests[0]),
        versus_exact(label + f" level {n + 1} closed", anchor, ests[1], closed),
        versus_exact(label + f" level {n} closed", anchor, ests[0], closed),
    ]


# --- the β-law ν ----------------------------------------------------------------------------


def nu_laplace_closed_form(graph: PinnedGraph, lam) -> float:
    """Laplace transform of ν on the interior graph (V, E)."""
    lam = np.asarray(lam, dtype=float)
    r = np.sqrt(1 + lam)
    W = graph.interior_weights
    iu, ju = np.nonzero(np.triu(W))
    return float(np.exp(np.sum(W[iu, ju] * (1 - r[iu] * r[ju]))) / np.prod(r))


def nu_laplace_check(graph: PinnedGraph, lam, mc: MonteCarlo) -> list[IdentityVerdict]:
    """E_ν[e^{-<λ,β>}] = E_μ[e^{-<λ,β>}] e^{-W_{ℓ,pin}(1 - sqrt(1+λ_ℓ))}.

    ``graph`` must have a pin with a single neighbor ℓ.
    """
    lam_full = as_lambda(graph, lam)
    lam = lam_full[1:]
    nbrs = np.flatnonzero(graph.pin_weights)
    if len(nbrs) != 1:
        raise ValueError("pin must have exactly one neighbor")
    ell = int(nbrs[0])
    w = graph.pin_weights[ell]
    nu = batch_means(np.exp(-mc.nu_chain(graph).x @ lam))
    mu = mc.estimate(graph, lambda b: np.exp(-b.beta @ lam))
    mu = _scaled(mu, math.exp(-w * (1 - math.sqrt(1 + lam[ell]))))
    label = f"nu-laplace lambda={lam.tolist()}"
    return [
        two_run(label, "nu-vs-mu-laplace", nu, mu),
        versus_exact(label + " nu-closed", "nu-laplace", nu, nu_laplace_closed_form(graph, lam)),
    ]


def letac_mc_check(graph: PinnedGraph, theta, mc: MonteCarlo) -> list[IdentityVerdict]:
    """E_ν[exp(-½<θ, H_β^{-1} θ>)] = e^{-<θ, 1>} for θ > 0 (the φ = 1 integral)."""
    theta = np.asarray(theta, dtype=float)
    beta = mc.nu_chain(graph).x
    Hinv = spd_inverse(h_matrix(graph, beta))
    vals = np.exp(-0.5 * np.einsum("i,...ij,j->...", theta, Hinv, theta))
    est = batch_means(vals)
    return [versus_exact(f"letac-mc theta={theta.tolist()}", "letac-formula", est, math.exp(-theta.sum()))]


def suite_passes(verdicts: Sequence[IdentityVerdict], alpha: float = 0.01, p: float = 0.0027) -> bool:
    """Suite-level decision.

    Exact verdicts must all pass.  Statistical ones may exceed the threshold
    as often as a Binomial(k, p) count does with probability >= 1 - alpha.
    """
    from scipy.stats import binom

    if not all(v.passed for v in verdicts if v.kind == "exact"):
        return False
    stat = [v for v in verdicts if v.kind == "statistical"]
    if not stat:
        return True
    if any(not math.isfinite(v.score) for v in stat):
        return False
    fails = sum(not v.passed for v in stat)
    allowed = int(binom.ppf(1 - alpha, len(stat), p))
    return fails <= allowed
