"""Command-line experiment runner.

Examples::

    epsstrong --experiment fa --samples 100000 --seed 1 --out fa.csv
    epsstrong --experiment euler-fb --delta 0.001 --samples 10000
    epsstrong --summarize fa.csv
    epsstrong --experiment tan --tan-x0 1.2 --tan-t 0.25 --dump-histogram tan.csv
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import options
from .eps_strong import dominating_csv, gap_metrics, run
from .estimators import EstimateRecord, estimate_uniform_improved
from .exceptions import DomainError, SamplerStallError, UndecidedError
from .streams import stream
from .tan_diffusion import sample_transition

EXPERIMENTS = ("fa", "fb", "fc", "euler-fa", "euler-fb", "euler-fc", "tan", "layers-demo")
SAMPLE_HEADER = ("sample_index", "value", "generations_used", "hit_nmax", "bias_bound")
EULER_BLOCK = 1000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    samples: int = 1000
    seed: int = 0
    n0: int = 2
    n_max: int = 10
    delta: float | None = None
    market: options.MarketParams = options.MarketParams()
    out: str | None = None
    format: str = "json"
    workers: int = 1
    dump_layers: str | None = None
    dump_dominating: str | None = None
    generations: int = 8
    tan_x0: float = 0.0
    tan_t: float = 0.5
    dump_histogram: str | None = None
    bins: int = 50

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.samples < 1:
            raise ConfigError("--samples must be at least 1")
        if self.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        if self.experiment.startswith("euler-"):
            if self.delta is None:
                raise ConfigError("--delta is required for Euler experiments")
            if not self.delta > 0:
                raise ConfigError("--delta must be positive")
            steps = round(self.market.T / self.delta)
            if steps < 2 or not math.isclose(steps * self.delta, self.market.T, rel_tol=1e-9):
                raise ConfigError("--delta must divide the maturity into at least two steps")
        elif self.delta is not None:
            raise ConfigError("--delta only applies to Euler experiments")
        if not 0 <= self.n0 <= self.n_max:
            raise ConfigError("need 0 <= --n0 <= --nmax")
        if self.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
        if (self.dump_layers or self.dump_dominating) and self.experiment != "layers-demo":
            raise ConfigError("--dump-layers and --dump-dominating apply to layers-demo only")
        if self.dump_histogram and self.experiment != "tan":
            raise ConfigError("--dump-histogram applies to tan only")
        if self.bins < 1:
            raise ConfigError("--bins must be at least 1")
        if self.experiment == "tan" and not (abs(self.tan_x0) < math.pi / 2 and self.tan_t > 0):
            raise ConfigError("tan needs |x0| < pi/2 and t > 0")
        return self


@dataclass(frozen=True)
class RunSummary:
    mean: float
    stderr: float
    ci95_low: float
    ci95_high: float
    wall_time_seconds: float
    samples: int
    hit_nmax_fraction: float
    bias_bound: float
    undecided: int = 0
    degenerate: bool = False

    def comparable(self) -> dict:
        d = asdict(self)
        d.pop("wall_time_seconds")
        return d


# --------------------------------------------------------------------------
# per-replicate work


def _pricing_record(cfg: ExperimentConfig, ctx, i: int):
    rng = stream(cfg.seed, i)
    layer = options.draw_terminal_and_gate(ctx, rng)
    if layer is None:
        return EstimateRecord(0.0, 0, False)
    b = options.BOUNDERS[ctx.case](layer, ctx, rng)
    return estimate_uniform_improved(b, rng, cfg.n0, cfg.n_max)


def _chunk(args):
    cfg, lo, hi = args
    exp = cfg.experiment
    rows = []
    if exp.startswith("euler-"):
        case = exp[-1]
        for blk in range(lo, hi):
            n = min(EULER_BLOCK, cfg.samples - blk * EULER_BLOCK)
            vals = options.euler_payoffs(cfg.market, case, cfg.delta, n, stream(cfg.seed, blk))
            rows.extend((blk * EULER_BLOCK + k, float(v), 0, False, 0.0) for k, v in enumerate(vals))
        return rows
    if exp in ("fa", "fb", "fc"):
        ctx = options.map_gbm(cfg.market, exp[-1])
    for i in range(lo, hi):
        try:
            if exp == "tan":
                rec = EstimateRecord(sample_transition(cfg.tan_x0, cfg.tan_t, stream(cfg.seed, i)), 0, False)
            elif exp == "layers-demo":
                rng = stream(cfg.seed, i)
                _, trace = run(0.0, rng.normal(), cfg.generations, rng)
                rec = EstimateRecord(gap_metrics(trace[-1])["l1_gap"], cfg.generations, False)
            else:
                rec = _pricing_record(cfg, ctx, i)
        except (UndecidedError, SamplerStallError):
            rows.append((i, math.nan, 0, False, 0.0))
            continue
        rows.append((i, rec.value, rec.generations_used, rec.hit_nmax, rec.bias_bound))
    return rows


def _units(cfg: ExperimentConfig) -> int:
    if cfg.experiment.startswith("euler-"):
        return -(-cfg.samples // EULER_BLOCK)
    return cfg.samples


def collect(cfg: ExperimentConfig) -> list[tuple]:
    units = _units(cfg)
    n_chunks = min(units, cfg.workers * 8)
    edges = np.linspace(0, units, n_chunks + 1).round().astype(int)
    jobs = [(cfg, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if cfg.workers == 1:
        parts = [_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(_chunk, jobs))
    return [row for part in parts for row in part]


# --------------------------------------------------------------------------
# summaries and files


def summarize_rows(rows, wall_time: float = 0.0) -> RunSummary:
    if not rows:
        raise ValueError("no samples to summarize")
    vals = np.array([r[1] for r in rows], dtype=float)
    ok = ~np.isnan(vals)
    undecided = int((~ok).sum())
    v = vals[ok]
    n = v.size
    if n == 0:
        raise ValueError("every sample was undecided")
    hits = np.array([bool(r[3]) for r in rows])[ok]
    bias = np.array([float(r[4]) for r in rows], dtype=float)[ok]
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RunSummary(
        mean=mean,
        stderr=se,
        ci95_low=mean - 1.96 * se,
        ci95_high=mean + 1.96 * se,
        wall_time_seconds=wall_time,
        samples=n,
        hit_nmax_fraction=float(hits.mean()),
        bias_bound=float(bias.mean()),
        undecided=undecided,
        degenerate=n == 1,
    )


def write_samples(rows, path: str):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SAMPLE_HEADER) + "\n")
        for i, v, g, h, b in rows:
            fh.write(f"{i},{v!r},{g},{int(bool(h))},{b!r}\n")


def write_histogram(rows, bins: int, path: str):
    """Counts of the sample values on equal bins over (-pi/2, pi/2)."""
    vals = np.array([r[1] for r in rows], dtype=float)
    counts, edges = np.histogram(vals[~np.isnan(vals)], bins=bins, range=(-math.pi / 2, math.pi / 2))
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for a, b, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()):
            fh.write(f"{a!r},{b!r},{c}\n")


def read_samples(path: str) -> list[tuple]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:4]) != SAMPLE_HEADER[:4]:
            raise ValueError(f"{path}:1: expected header starting {','.join(SAMPLE_HEADER[:4])}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) not in (4, 5):
                raise ValueError(f"{path}:{lineno}: expected 4 or 5 fields, got {len(rec)}")
            try:
                row = (int(rec[0]), float(rec[1]), int(rec[2]), bool(int(rec[3])),
                       float(rec[4]) if len(rec) == 5 else 0.0)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            rows.append(row)
    return rows


def summarize(path: str) -> RunSummary:
    return summarize_rows(read_samples(path))


def format_summary(s: RunSummary, fmt: str) -> str:
    d = asdict(s)
    if fmt == "json":
        return json.dumps(d, indent=2)
    return ",".join(d) + "\n" + ",".join(repr(v) if isinstance(v, float) else str(v) for v in d.values())


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    cfg.validate()
    t0 = time.perf_counter()
    rows = collect(cfg)
    summary = summarize_rows(rows, time.perf_counter() - t0)
    if cfg.out:
        write_samples(rows, cfg.out)
        with open(f"{cfg.out}.summary.{cfg.format}", "w") as fh:
            fh.write(format_summary(summary, cfg.format) + "\n")
    if cfg.experiment == "layers-demo" and (cfg.dump_layers or cfg.dump_dominating):
        rng = stream(cfg.seed, 0)
        part, trace = run(0.0, rng.normal(), cfg.generations, rng)
        if cfg.dump_layers:
            with open(cfg.dump_layers, "w") as fh:
                fh.write(part.to_text())
        if cfg.dump_dominating:
            with open(cfg.dump_dominating, "w") as fh:
                fh.write(dominating_csv(trace))
    if cfg.dump_histogram:
        write_histogram(rows, cfg.bins, cfg.dump_histogram)
    return summary


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epsstrong", description="Exact Monte Carlo experiments on Brownian layers.")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--summarize", metavar="FILE", help="recompute the summary of a per-sample CSV")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n0", type=int, default=2)
    p.add_argument("--nmax", type=int, default=10)
    p.add_argument("--delta", type=float)
    d = options.MarketParams()
    p.add_argument("--r", type=float, default=d.r)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--s0", type=float, default=d.S0)
    p.add_argument("--strike", type=float, default=d.K)
    p.add_argument("--maturity", type=float, default=d.T)
    p.add_argument("--barrier-lo", type=float, default=d.L_S)
    p.add_argument("--barrier-hi", type=float, default=d.U_S)
    p.add_argument("--out", help="per-sample CSV path; the summary goes next to it")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-layers", metavar="FILE")
    p.add_argument("--dump-dominating", metavar="FILE")
    p.add_argument("--generations", type=int, default=8, help="generations for layers-demo")
    p.add_argument("--tan-x0", type=float, default=0.0)
    p.add_argument("--tan-t", type=float, default=0.5)
    p.add_argument("--dump-histogram", metavar="FILE", help="bin counts of tan transition draws")
    p.add_argument("--bins", type=int, default=50)
    return p


def config_from_args(a) -> ExperimentConfig:
    try:
        market = options.MarketParams(r=a.r, sigma=a.sigma, S0=a.s0, K=a.strike, T=a.maturity,
                                      U_S=a.barrier_hi, L_S=a.barrier_lo)
    except DomainError as e:
        raise ConfigError(str(e)) from None
    return ExperimentConfig(
        experiment=a.experiment, samples=a.samples, seed=a.seed, n0=a.n0, n_max=a.nmax, delta=a.delta,
        market=market, out=a.out, format=a.format, workers=a.workers, dump_layers=a.dump_layers,
        dump_dominating=a.dump_dominating, generations=a.generations, tan_x0=a.tan_x0, tan_t=a.tan_t,
        dump_histogram=a.dump_histogram, bins=a.bins,
    ).validate()


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    if a.summarize:
        try:
            s = summarize(a.summarize)
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        print(format_summary(s, a.format))
        return 0
    if not a.experiment:
        parser.print_usage(sys.stderr)
        print("error: --experiment or --summarize is required", file=sys.stderr)
        return 2
    try:
        cfg = config_from_args(a)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(format_summary(run_experiment(cfg), cfg.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
