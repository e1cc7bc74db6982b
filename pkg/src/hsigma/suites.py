"""Named verification suites shared by the CLI and the acceptance tests."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import identities as ids
from .fields import (
    assemble_laplacian,
    beta_field,
    green_function,
    green_rank1_split,
    h_matrix,
    pinned,
    reconstruct_u,
    rescale_weights,
    scale_h,
    shift_u,
)
from .graph import HostExhaustion, PinnedGraph, build_exhaustion, build_host_graph, build_pinned_graph
from .graph import path_exhaustion, path_graph, single_edge, triangle
from .identities import IdentityVerdict, MonteCarlo, martingale_term
from .measure import laplace_closed_form
from .quadrature import QuadratureSpec, cond_exp_closed_form_check, letac_check, scaling_check
from .quadrature import single_edge_cdf
from .sampler import ChainConfig, batch_means, run_chain


@dataclass
class SuiteContext:
    config: ChainConfig
    graphs: list[PinnedGraph] | None = None
    exhaustion: HostExhaustion | None = None
    z_threshold: float = ids.Z_THRESHOLD
    tol: float | None = None
    green_fn: Callable = green_function
    quad_spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    _mc: MonteCarlo | None = None

    @property
    def mc(self) -> MonteCarlo:
        if self._mc is None:
            self._mc = MonteCarlo(self.config, green_fn=self.green_fn)
        return self._mc

    def graphs_or(self, *default: PinnedGraph) -> list[PinnedGraph]:
        return list(self.graphs) if self.graphs else list(default)

    def exhaustion_or_default(self) -> HostExhaustion:
        return self.exhaustion or default_exhaustion()


def default_exhaustion() -> HostExhaustion:
    """Host path -2..2 with V_1 = {0} and V_2 = {-1, 0, 1}."""
    return path_exhaustion(2, [[0], [-1, 0, 1]])


def _lambda_grid(k: int) -> list[np.ndarray]:
    alt = np.where(np.arange(k) % 2 == 0, -0.3, 0.6)
    first = np.zeros(k)
    first[0] = 3.0
    return [first, np.full(k, 0.5), alt, np.linspace(-0.25, 1.5, k), np.full(k, 2.0)]


def _spike(g: PinnedGraph, value: float, pos: int = 1) -> np.ndarray:
    theta = np.zeros(g.n)
    theta[pos] = value
    return theta


# --- statistical suites ---------------------------------------------------------------------


def laplace_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    out = []
    for g in ctx.graphs_or(path_graph(2), triangle()):
        for lam in _lambda_grid(g.n - 1):
            out += ids.laplace_check(g, lam, ctx.mc)
    return out


def generalized_laplace_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    out = []
    for g in ctx.graphs_or(path_graph(2)):
        k = g.n - 1
        deep = np.zeros(g.n)
        deep[1:] = -2.0
        mixed = np.zeros(g.n)
        mixed[0], mixed[-1] = -1.0, -1.5
        pairs = [
            (np.zeros(g.n), np.r_[3.0, np.zeros(k - 1)]),
            (pinned(g, np.full(k, -1.0)), np.zeros(k)),
            (pinned(g, np.linspace(-0.5, 0.0, k)) + np.r_[-0.5, np.zeros(k)], np.linspace(1.0, 0.5, k)),
            (deep, np.full(k, 0.5)),
            (mixed, np.where(np.arange(k) % 2 == 0, -0.3, 2.0)),
            # mass at one vertex near θ = -3 maximizes sensitivity to Ĝ
            (_spike(g, -3.0), np.zeros(k)),
            (_spike(g, -3.0), np.full(k, 0.5)),
        ]
        for theta, lam in pairs:
            out += ids.generalized_laplace_check(g, theta, lam, ctx.mc)
    return out


def ward_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    out = []
    for g in ctx.graphs_or(path_graph(2)):
        last = g.n - 1
        for k in range(1, g.n):
            out += ids.ward_identity_check(g, [k], ctx.mc)
        out += ids.ward_identity_check(g, [last, last], ctx.mc)
        out += ids.ward_identity_check(g, [1, last], ctx.mc)
        out += ids.ward_identity_check(g, [1, last, last], ctx.mc)
        out += ids.ward_identity_check(g, [0, 1, last], ctx.mc)
        out += ids.exp_ward_check(g, np.full(g.n, -1.0), ctx.mc)
        out += ids.exp_ward_check(g, np.linspace(0.0, -1.0, g.n), ctx.mc)
        out += ids.exp_ward_check(g, _spike(g, -2.0), ctx.mc)
        out += ids.exp_ward_check(g, _spike(g, -3.0), ctx.mc)
    return out


def image_measure_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    out = []
    for g in ctx.graphs_or(path_graph(2)):
        j, k = 1, g.n - 1
        for lam in (np.linspace(1.0, 0.5, g.n - 1), np.full(g.n - 1, -0.3)):
            lamf = np.r_[0.0, lam]
            L = laplace_closed_form(g, lamf)
            r = np.sqrt(1 + lamf)
            out += ids.importance_identity_check(g, lamf, lambda b: np.ones(len(b.u)), ctx.mc, "1", closed_form=L)
            out += ids.importance_identity_check(
                g, lamf, lambda b: np.exp(b.u[:, k]), ctx.mc, f"e^u_{g.vertices[k]}", closed_form=L * r[k]
            )
            for a, c in ((j, k), (k, k)):
                out += ids.importance_identity_check(
                    g, lamf,
                    lambda b, a=a, c=c: np.exp(b.u[:, a] + b.u[:, c]) - b.green[:, a, c],
                    ctx.mc,
                    f"e^(u_{g.vertices[a]}+u_{g.vertices[c]})-G",
                    closed_form=L * r[a] * r[c],
                )
            theta = _spike(g, -3.0)
            out += ids.importance_identity_check(
                g, lamf, lambda b, theta=theta: ids.generating_term(theta, b.u, b.green), ctx.mc,
                f"generating theta={theta.tolist()}", closed_form=L * math.exp(theta @ r),
            )
    return out


def martingale_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    ex = ctx.exhaustion_or_default()
    out = []
    for n in range(1, ex.m):
        inner = sorted(ex.levels[n - 1])
        ring = sorted(ex.levels[n] - ex.levels[n - 1])
        k, o = inner[0], ring[0]
        lams = [{k: 0.5}, {v: -0.3 for v in inner}]
        for lam in lams:
            for indices in ([k], [o], [k, k], [k, o], [o, o], [k, k, o], [k, o, ring[-1]]):
                out += ids.martingale_step_check(ex, n, lam, ctx.mc, indices=indices)
            out += ids.martingale_step_check(ex, n, lam, ctx.mc, theta={k: -1.5, o: -1.0})
            far = min(ex.host.vertices)
            out += ids.martingale_step_check(ex, n, lam, ctx.mc, theta={k: -2.0, far: -0.5})
            out += ids.martingale_step_check(ex, n, lam, ctx.mc, theta={k: -3.0})
    return out


# --- exact suites ---------------------------------------------------------------------------


def random_graph(rng: np.random.Generator, max_interior: int = 8) -> PinnedGraph:
    """Random connected pinned graph: random spanning tree plus extra edges."""
    nv = int(rng.integers(1, max_interior + 1)) + 1
    edges = {}
    for v in range(1, nv):
        edges[(int(rng.integers(0, v)), v)] = float(rng.uniform(0.2, 3.0))
    for _ in range(int(rng.integers(0, nv + 1))):
        a, b = sorted(int(x) for x in rng.choice(nv, 2, replace=False))
        edges[(a, b)] = float(rng.uniform(0.2, 3.0))
    return build_pinned_graph(range(nv), 0, [(a, b, w) for (a, b), w in edges.items()])


def random_exhaustion(rng: np.random.Generator) -> HostExhaustion:
    """Random connected host with two or three nested levels grown by BFS."""
    while True:
        g = random_graph(rng, max_interior=10)
        host = build_host_graph(g.vertices, g.edges())
        verts = list(host.vertices)
        start = int(rng.choice(verts))
        order, seen = [start], {start}
        for v in order:
            for w in sorted(host.neighbors(v)):
                if w not in seen:
                    seen.add(w)
                    order.append(w)
        if len(order) < 3:
            continue
        m = int(rng.integers(2, min(3, len(order) - 1) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(order)), m, replace=False))
        levels = [order[:c] for c in cuts]
        try:
            return build_exhaustion(host, levels)
        except ValueError:
            continue


def algebra_suite(ctx: SuiteContext, count: int = 100, tol: float = 1e-10) -> list[IdentityVerdict]:
    """Exact identities on random graphs with |V| <= 8."""
    rng = np.random.default_rng(ctx.config.seed)
    worst = {k: 0.0 for k in ("green-h-inverse", "u-beta-roundtrip", "beta-u-roundtrip", "scaled-laplacian",
                              "rank1-green", "phi-scaling", "pin-appended-term")}

    def rel(a, b):
        a, b = np.asarray(a), np.asarray(b)
        return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))

    for _ in range(count):
        g = random_graph(rng)
        u = pinned(g, rng.normal(0, 1.0, g.n - 1))
        beta = beta_field(g, u)
        G = green_function(g, u)
        H = h_matrix(g, beta)
        worst["green-h-inverse"] = max(worst["green-h-inverse"], rel(G[1:, 1:] @ H, np.eye(g.n - 1)))
        worst["u-beta-roundtrip"] = max(worst["u-beta-roundtrip"], rel(reconstruct_u(g, beta), u))
        worst["beta-u-roundtrip"] = max(worst["beta-u-roundtrip"], rel(beta_field(g, reconstruct_u(g, beta)), beta))
        lam = np.r_[0.0, rng.uniform(-0.9, 4.0, g.n - 1)]
        worst["scaled-laplacian"] = max(
            worst["scaled-laplacian"],
            rel(assemble_laplacian(rescale_weights(g, lam), u), assemble_laplacian(g, shift_u(u, lam))),
        )
        phi = rng.uniform(0.3, 3.0, g.n - 1)
        b2, W2 = scale_h(g.interior_weights, beta, phi)
        lhs = np.diag(phi) @ H @ np.diag(phi)
        worst["phi-scaling"] = max(worst["phi-scaling"], rel(lhs, 2 * np.diag(b2) - W2))
        idx = list(rng.integers(0, g.n, int(rng.integers(1, 5))))
        worst["pin-appended-term"] = max(
            worst["pin-appended-term"], rel(martingale_term(idx + [0], u, G), martingale_term(idx, u, G))
        )
        # rank-1 split needs a pin with a single neighbor: attach a fresh pin to vertex ℓ
        if g.n >= 2:
            ell = int(rng.integers(1, g.n))
            edges = [(a + 1, b + 1, w) for a, b, w in g.edges()] + [(0, ell + 1, float(rng.uniform(0.2, 3.0)))]
            g2 = build_pinned_graph(range(g.n + 1), 0, edges)
            u2 = pinned(g2, rng.normal(0, 1.0, g2.n - 1))
            split = green_rank1_split(g2, u2)
            worst["rank1-green"] = max(worst["rank1-green"], rel(split.reconstruct(), green_function(g2, u2)[1:, 1:]))
    tol = ctx.tol if ctx.tol is not None else tol
    return [
        IdentityVerdict(f"{name} max over {count} graphs", name, err, 0.0, err, kind="exact", threshold=tol)
        for name, err in worst.items()
    ]


def consistency_suite(ctx: SuiteContext, count: int = 100, tol: float = 1e-12) -> list[IdentityVerdict]:
    tol = ctx.tol if ctx.tol is not None else tol
    rng = np.random.default_rng(ctx.config.seed)
    out = []
    if ctx.exhaustion is not None:
        instances = []
        for _ in range(10):
            n = int(rng.integers(1, ctx.exhaustion.m))
            instances.append((ctx.exhaustion, n))
    else:
        instances = []
        for _ in range(count):
            ex = random_exhaustion(rng)
            instances.append((ex, int(rng.integers(1, ex.m))))
    for ex, n in instances:
        lam = {v: float(rng.uniform(-0.9, 5.0)) for v in sorted(ex.levels[n - 1])}
        out += ids.consistency_check(ex, n, lam, tol)
    return out


def letac_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    spec = ctx.quad_spec
    grid = [0.5, 1.0, 2.0, 4.0, 8.0]
    out = [letac_check(np.zeros((1, 1)), [p], [t], 1e-6, spec) for p in grid for t in grid]
    W2 = lambda w: np.array([[0.0, w], [w, 0.0]])  # noqa: E731
    for w, phi, theta in [
        (1.0, (1.0, 1.0), (1.0, 1.0)),
        (1.0, (1.0, 2.0), (0.5, 1.0)),
        (0.5, (2.0, 0.5), (1.0, 3.0)),
        (1.0, (1.0, 1.0), (0.05, 0.05)),
        (2.0, (1.0, 1.0), (0.01, 0.01)),
    ]:
        out.append(letac_check(W2(w), phi, theta, 1e-4, spec))
    out.append(scaling_check(np.zeros((1, 1)), [2.0], [1.0], 1e-6, spec))
    out.append(scaling_check(W2(1.0), [2.0, 3.0], [0.5, 0.25], 1e-4, spec))
    return out


def cond_exp_suite(ctx: SuiteContext) -> list[IdentityVerdict]:
    tol = ctx.tol if ctx.tol is not None else 1e-8
    return [
        cond_exp_closed_form_check(float(w), float(c), ctx.quad_spec, tol)
        for w in np.logspace(-1, 1, 5)
        for c in (0.0, 0.01, 0.1, 1.0, 4.0, 10.0)
    ]


def sampler_selftest_suite(ctx: SuiteContext, seeds: int = 50) -> list[IdentityVerdict]:
    """KS distance to the exact single-edge law, z calibration over seeds, reversibility."""
    g = single_edge(1.0)
    cfg = ctx.config
    run = run_chain(g, cfg, stream=(7,))
    u = run.x[..., 1]
    cdf = single_edge_cdf(1.0)
    ks = float(stats.kstest(u.ravel(), cdf).statistic)
    ess = batch_means(np.exp(u)).ess
    out = [IdentityVerdict(f"ks single-edge (ess={ess:.0f})", "sampler-law", ks, 0.0, ks, kind="exact", threshold=0.01)]
    # empirical reversibility of a two-state summary
    median = float(np.median(u))
    state = u > median
    ab = int(np.count_nonzero(~state[:, :-1] & state[:, 1:]))
    ba = int(np.count_nonzero(state[:, :-1] & ~state[:, 1:]))
    out.append(IdentityVerdict("reversibility two-state flux", "sampler-detailed-balance", ab, ba,
                               ids.z_score(ab - ba, math.sqrt(ab + ba)), threshold=ctx.z_threshold))
    small = replace(cfg, samples=max(cfg.chains * 200, cfg.samples // 10))
    zs = []
    for s in range(seeds):
        r = run_chain(g, replace(small, seed=cfg.seed + 1000 + s))
        zs.append(batch_means(np.exp(r.x[..., 1])).z(1.0))
    sd = float(np.std(zs, ddof=1))
    v = IdentityVerdict(f"z-score sd over {seeds} seeds", "sampler-error-calibration", sd, 1.0,
                        0.0 if 0.6 <= sd <= 1.6 else math.inf, kind="exact", threshold=0.0)
    out.append(v)
    return out


SUITES: dict[str, Callable[[SuiteContext], list[IdentityVerdict]]] = {
    "algebra": algebra_suite,
    "ward": ward_suite,
    "laplace": laplace_suite,
    "generalized-laplace": generalized_laplace_suite,
    "image-measure": image_measure_suite,
    "consistency": consistency_suite,
    "martingale": martingale_suite,
    "letac": letac_suite,
    "cond-exp": cond_exp_suite,
    "sampler-selftest": sampler_selftest_suite,
}

MC_SUITES = {"ward", "laplace", "generalized-laplace", "image-measure", "martingale", "sampler-selftest"}


def run_suite(name: str, ctx: SuiteContext) -> list[IdentityVerdict]:
    verdicts = SUITES[name](ctx)
    for v in verdicts:
        v.suite = name
        if v.kind == "statistical":
            v.threshold = ctx.z_threshold
    return verdicts
