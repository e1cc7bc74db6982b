"""``verify``: run named verification suites and report one record per verdict."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass

from .graph import load_exhaustion, load_graph
from .identities import Z_THRESHOLD, IdentityVerdict, suite_passes
from .sampler import ChainConfig
from .suites import SUITES, SuiteContext, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    suites: tuple[str, ...]
    chain: ChainConfig
    graph: str | None = None
    exhaustion: str | None = None
    report: str = "text"
    z_threshold: float = Z_THRESHOLD
    tol: float | None = None

    def __post_init__(self):
        if not self.suites:
            raise ValueError("select at least one suite")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
        if self.report not in ("json", "text"):
            raise ValueError("report must be json or text")
        if self.z_threshold <= 0 or (self.tol is not None and self.tol <= 0):
            raise ValueError("thresholds must be positive")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description=__doc__)
    p.add_argument("--suite", required=True, help="comma-separated suite names: " + ", ".join(SUITES))
    p.add_argument("--graph", help="pinned graph JSON file")
    p.add_argument("--exhaustion", help="host exhaustion JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200_000, help="retained draws, summed over chains")
    p.add_argument("--burn-in", type=int, default=20_000, help="burn-in draws, summed over chains")
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--chains", type=int, default=256)
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--z-threshold", type=float, default=Z_THRESHOLD)
    p.add_argument("--tol", type=float, default=None, help="override the exact-suite tolerance")
    return p


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    return x


def _summary(results: dict[str, list[IdentityVerdict]], cfg: RunConfig) -> dict:
    per_suite = {
        name: {
            "verdicts": len(vs),
            "failures": sum(not v.passed for v in vs),
            "pass": suite_passes(vs),
        }
        for name, vs in results.items()
    }
    return {
        "summary": True,
        "seed": cfg.chain.seed,
        "samples": cfg.chain.samples,
        "suites": per_suite,
        "pass": all(s["pass"] for s in per_suite.values()),
    }


def _text_line(rec: dict) -> str:
    mark = "PASS" if rec["pass"] else "FAIL"
    if "z" in rec:
        score = "z=" + ("inf" if rec["z"] is None else f"{rec['z']:+.2f}")
    else:
        score = "rel_err=" + ("inf" if rec["rel_err"] is None else f"{rec['rel_err']:.2e}")
    lhs = "nan" if rec["lhs"] is None else f"{rec['lhs']:.8g}"
    rhs = "nan" if rec["rhs"] is None else f"{rec['rhs']:.8g}"
    return f"{mark} [{rec['suite']}] {rec['anchor']}: {rec['statistic']}  lhs={lhs} rhs={rhs} {score}"


def load_context(cfg: RunConfig) -> SuiteContext:
    """Read the graph and exhaustion files; raises on missing or malformed input."""
    graphs = [load_graph(cfg.graph)] if cfg.graph else None
    exhaustion = load_exhaustion(cfg.exhaustion) if cfg.exhaustion else None
    return SuiteContext(cfg.chain, graphs=graphs, exhaustion=exhaustion, z_threshold=cfg.z_threshold, tol=cfg.tol)


def run(cfg: RunConfig, ctx: SuiteContext | None = None, out=None) -> int:
    """Execute the selected suites and write the report; returns the exit status."""
    out = out or sys.stdout
    ctx = ctx or load_context(cfg)
    results = {}
    for name in cfg.suites:
        results[name] = run_suite(name, ctx)
    summary = _summary(results, cfg)
    for vs in results.values():
        for v in vs:
            rec = _clean(v.record())
            out.write((json.dumps(rec) if cfg.report == "json" else _text_line(rec)) + "\n")
    if cfg.report == "json":
        out.write(json.dumps(summary) + "\n")
    else:
        for name, s in summary["suites"].items():
            out.write(f"suite {name}: {'PASS' if s['pass'] else 'FAIL'} ({s['failures']}/{s['verdicts']} verdicts outside tolerance)\n")
        out.write(f"overall: {'PASS' if summary['pass'] else 'FAIL'}\n")
    return EXIT_OK if summary["pass"] else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(
            suites=tuple(s.strip() for s in args.suite.split(",") if s.strip()),
            chain=ChainConfig(
                seed=args.seed,
                burn_in=args.burn_in,
                samples=args.samples,
                thinning=args.thinning,
                chains=args.chains,
            ),
            graph=args.graph,
            exhaustion=args.exhaustion,
            report=args.report,
            z_threshold=args.z_threshold,
            tol=args.tol,
        )
        ctx = load_context(cfg)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg, ctx)


if __name__ == "__main__":
    sys.exit(main())
