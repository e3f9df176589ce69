"""Command-line front end: config parsing, experiment orchestration, CSV output.

Everything a run does is a pure function of (config, seed): output files are
byte-identical across repeated runs for any worker count. Columns of the raw
replication log: rep_index, level, value components, cost; the summary file
holds one row per value component.
"""
from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import engine, func_mean, quantile, ratio, saa
from .engine import (
    ConfigError,
    EstimationError,
    DegenerateDeltaError,
    EstimatorSummary,
    FailureBudgetExceeded,
    LevelDistribution,
    optimal_ratio,
)
from .sampling import (
    BernoulliSource,
    ConstantSource,
    EmpiricalSource,
    ExponentialSource,
    LognormalSource,
    NormalSource,
    SampleSource,
    UniformSource,
    VectorSource,
)

__all__ = [
    "RunConfig",
    "ComparisonReport",
    "parse_source",
    "ingest_csv",
    "run",
    "compare_saa",
    "pilot",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

APPLICATIONS = ("func_mean", "regen", "snis", "saa_value", "saa_solution", "quantile")


@dataclass
class RunConfig:
    """Validated run description; see README for the key-value schema."""

    application: str
    options: dict = field(default_factory=dict)
    n_reps: int = 10_000
    seed: int | None = None
    workers: int = 1
    confidence: float = 0.95
    ratio: float | None = None
    base: int | None = None
    alpha: float | None = None
    output: str = "run"

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        opts = dict(mapping)
        app = opts.pop("application", None)
        if app not in APPLICATIONS:
            raise ConfigError(f"application must be one of {APPLICATIONS}, got {app!r}")
        cfg = cls(
            application=app,
            n_reps=int(opts.pop("n_reps", 10_000)),
            seed=None if "seed" not in opts else int(opts.pop("seed")),
            workers=int(opts.pop("workers", 1)),
            confidence=float(opts.pop("confidence", 0.95)),
            ratio=None if "ratio" not in opts else float(opts.pop("ratio")),
            base=None if "base" not in opts else int(opts.pop("base")),
            alpha=None if "alpha" not in opts else float(opts.pop("alpha")),
            output=str(opts.pop("output", "run")),
        )
        cfg.options = opts
        if cfg.n_reps < 2:
            raise ConfigError("n_reps must be >= 2")
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0.0 < cfg.confidence < 1.0:
            raise ConfigError("confidence must be in (0, 1)")
        return cfg


_SOURCE_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def parse_source(spec: str) -> SampleSource:
    """Parse a source expression like ``exponential(1.0)`` or
    ``vector(normal(0,1), exponential(2))``."""
    spec = spec.strip()
    m = _SOURCE_RE.match(spec)
    if not m:
        raise ConfigError(f"cannot parse source spec {spec!r}")
    name, argstr = m.group(1).lower(), m.group(2).strip()
    if name == "vector":
        return VectorSource([parse_source(part) for part in _split_args(argstr)])
    try:
        args = [float(a) for a in _split_args(argstr)] if argstr else []
    except ValueError:
        raise ConfigError(f"non-numeric argument in source spec {spec!r}") from None
    makers = {
        "bernoulli": BernoulliSource,
        "uniform": UniformSource,
        "exponential": ExponentialSource,
        "normal": NormalSource,
        "lognormal": LognormalSource,
        "constant": lambda *a: ConstantSource(list(a)),
    }
    if name not in makers:
        raise ConfigError(f"unknown source {name!r}; available: {sorted(makers)} or vector(...)")
    try:
        return makers[name](*args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad arguments for source {spec!r}: {exc}") from None


def _split_args(argstr: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in argstr:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def source_variance(source: SampleSource) -> float | None:
    """Population variance for the parametric scalar sources, else None."""
    if isinstance(source, BernoulliSource):
        return source.p * (1.0 - source.p)
    if isinstance(source, UniformSource):
        return (source.high - source.low) ** 2 / 12.0
    if isinstance(source, ExponentialSource):
        return 1.0 / source.rate**2
    if isinstance(source, NormalSource):
        return source.sd**2
    if isinstance(source, LognormalSource):
        s2 = source.sigma**2
        return (np.exp(s2) - 1.0) * np.exp(2.0 * source.mu + s2)
    return None


def ingest_csv(path: str, response_column: str, feature_columns: list[str] | None = None) -> np.ndarray:
    """Load a numeric CSV with a header row into a matrix whose columns are
    the features followed by the response, rows in file order.

    Missing or non-numeric cells are rejected with their row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response_column not in header:
            raise ConfigError(f"{path}: response column {response_column!r} not in header {header}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != response_column]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise ConfigError(f"{path}: feature columns {missing} not in header {header}")
        ordered = feature_columns + [response_column]
        idx = [header.index(c) for c in ordered]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for col, j in zip(ordered, idx):
                if j >= len(row) or not row[j].strip():
                    raise ConfigError(f"{path}: missing value at row {lineno}, column {col!r}")
                try:
                    v = float(row[j])
                except ValueError:
                    raise ConfigError(
                        f"{path}: non-numeric cell {row[j]!r} at row {lineno}, column {col!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ConfigError(f"{path}: non-finite value at row {lineno}, column {col!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _opt(cfg: RunConfig, key: str, default=None, required=False):
    if key in cfg.options:
        return cfg.options[key]
    if required:
        raise ConfigError(f"application {cfg.application!r} requires the {key!r} key")
    return default


def _snis_reward_y(batch):
    return batch[:, 0]


def _snis_reward_y_squared(batch):
    return batch[:, 0] ** 2


class _UnnormalizedNormal:
    def __init__(self, mean, sd):
        self.mean, self.sd = mean, sd

    def __call__(self, batch):
        z = (batch[:, 0] - self.mean) / self.sd
        return np.exp(-0.5 * z * z)


def build_problem(cfg: RunConfig) -> tuple[saa.SaaProblem, SampleSource, float | None, np.ndarray | None]:
    """Problem, data source, and (value, solution) truth baselines if known."""
    kind = str(_opt(cfg, "problem", required=True))
    dataset = _opt(cfg, "dataset")
    if kind == "quadratic":
        source = parse_source(str(_opt(cfg, "source", "normal(0,1)")))
        if source.dimension != 1:
            raise ConfigError("quadratic problem needs a scalar source")
        problem = saa.builtin_problem("quadratic")
        return problem, source, source_variance(source), None
    if dataset is not None:
        response = str(_opt(cfg, "response", required=True))
        features = _opt(cfg, "features")
        features = [f.strip() for f in str(features).split(",")] if features else None
        data = ingest_csv(str(dataset), response, features)
        if _parse_bool(_opt(cfg, "add_intercept", "true")):
            data = np.column_stack([np.ones(data.shape[0]), data])
        source = EmpiricalSource(data)
        dim = data.shape[1] - 1
        problem = _make_regression(kind, dim, cfg)
        full = saa.solve_saa(problem, data)  # truth = solve on all data
        return problem, source, full.value, full.beta
    beta0 = _opt(cfg, "beta0", required=True)
    beta0 = np.array([float(v) for v in str(beta0).split(",")])
    dim = beta0.size
    if kind == "logistic":
        source = saa.LogisticDataSource(beta0)
        problem = _make_regression(kind, dim, cfg)
        return problem, source, None, None
    noise_sd = float(_opt(cfg, "noise_sd", 1.0))
    source = saa.RegressionDataSource(beta0, noise_sd)
    problem = _make_regression(kind, dim, cfg)
    truth_value = noise_sd**2 if kind == "linear" else None
    truth_beta = beta0 if kind == "linear" else None
    return problem, source, truth_value, truth_beta


def _make_regression(kind: str, dim: int, cfg: RunConfig) -> saa.SaaProblem:
    kw = {}
    if kind == "ridge":
        kw["shrinkage"] = float(_opt(cfg, "shrinkage", required=True))
    if kind == "lasso":
        kw["bound"] = float(_opt(cfg, "bound", required=True))
    return saa.builtin_problem(kind, dim, **kw)


def _parse_bool(v) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def build_oracle(cfg: RunConfig) -> tuple[engine.LevelOracle, LevelDistribution]:
    """Build the application oracle and its validated level distribution."""
    app = cfg.application
    if app == "quantile":
        p = float(_opt(cfg, "p", required=True))
        base = cfg.base if cfg.base is not None else quantile.base_level(p)
        spec = quantile.QuantileSpec(p=p, base=base, ratio=cfg.ratio if cfg.ratio is not None else 0.64)
        source = parse_source(str(_opt(cfg, "source", required=True)))
        return quantile.make_quantile_oracle(source, p), spec.distribution()

    alpha = cfg.alpha if cfg.alpha is not None else 1.0
    dist = LevelDistribution(
        base=cfg.base if cfg.base is not None else _default_base(app),
        ratio=cfg.ratio if cfg.ratio is not None else optimal_ratio(alpha),
        alpha=alpha,
    )
    if app == "func_mean":
        g = func_mean.get_functional(str(_opt(cfg, "g", required=True)))
        source = parse_source(str(_opt(cfg, "source", required=True)))
        return func_mean.make_func_mean_oracle(g, source), dist
    if app == "regen":
        reward = (
            ratio.unit_reward
            if str(_opt(cfg, "reward", "wait")) == "unit"
            else ratio.waiting_time_reward
        )
        if "interarrival" in cfg.options or "service" in cfg.options:
            # general single-server queue with user-chosen distributions
            proc = ratio.LindleyQueue(
                parse_source(str(_opt(cfg, "interarrival", required=True))),
                parse_source(str(_opt(cfg, "service", required=True))),
                reward,
            )
        else:
            proc = ratio.mm1_queue(
                float(_opt(cfg, "arrival_rate", required=True)),
                float(_opt(cfg, "service_rate", required=True)),
                reward,
            )
        return ratio.make_regen_oracle(proc), dist
    if app == "snis":
        target = parse_source(str(_opt(cfg, "target", "normal(0,1)")))
        if not isinstance(target, NormalSource):
            raise ConfigError("snis target must be a normal(...) spec (unnormalized density)")
        proposal = parse_source(str(_opt(cfg, "proposal", required=True)))
        reward_name = str(_opt(cfg, "reward", "y"))
        if reward_name not in ("y", "y_squared"):
            raise ConfigError("snis reward must be 'y' or 'y_squared'")
        reward = _snis_reward_y if reward_name == "y" else _snis_reward_y_squared
        return (
            ratio.make_snis_oracle(_UnnormalizedNormal(target.mean, target.sd), proposal, reward),
            dist,
        )
    if app in ("saa_value", "saa_solution"):
        problem, source, _, _ = build_problem(cfg)
        if app == "saa_value":
            return saa.make_value_oracle(problem, source), dist
        return saa.make_solution_oracle(problem, source), dist
    raise ConfigError(f"unknown application {app!r}")


def _default_base(app: str) -> int:
    # regressions follow the burn-in convention used for the experiments
    return 10 if app in ("saa_value", "saa_solution") else 0


def _resolve_seed(cfg: RunConfig) -> int:
    if cfg.seed is not None:
        return cfg.seed
    seed = int.from_bytes(os.urandom(4), "little")
    print(f"seed not given; using seed={seed}")
    return seed


def _fmt(x) -> str:
    return repr(float(x))


def write_replication_log(path: str, log: engine.ReplicationLog):
    dim = log.values.shape[1]
    cols = ["rep_index", "level"] + (
        ["value"] if dim == 1 else [f"value_{i}" for i in range(dim)]
    ) + ["cost"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(log.values.shape[0]):
            if log.levels[i] < 0:
                continue  # failed replication, recorded separately
            row = [str(i), str(int(log.levels[i]))]
            row += [_fmt(v) for v in log.values[i]]
            row.append(_fmt(log.costs[i]))
            w.writerow(row)


def write_summary(path: str, summary: EstimatorSummary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "component",
                "count",
                "mean",
                "variance",
                "std_error",
                "ci_low",
                "ci_high",
                "confidence",
                "mean_cost",
                "work_normalized_variance",
            ]
        )
        for i in range(summary.mean.shape[0]):
            w.writerow(
                [
                    str(i),
                    str(summary.count),
                    _fmt(summary.mean[i]),
                    _fmt(summary.variance[i]),
                    _fmt(summary.std_error[i]),
                    _fmt(summary.ci_low[i]),
                    _fmt(summary.ci_high[i]),
                    _fmt(summary.confidence),
                    _fmt(summary.mean_cost),
                    _fmt(summary.work_normalized_variance),
                ]
            )


def run(cfg: RunConfig) -> EstimatorSummary:
    """Execute a run config: replicate, aggregate, and write the two CSVs."""
    oracle, dist = build_oracle(cfg)
    seed = _resolve_seed(cfg)
    log = engine.run_replications(oracle, dist, cfg.n_reps, seed, cfg.workers)
    ok = log.ok_mask()
    summary = engine.summarize_arrays(log.values[ok], log.costs[ok], cfg.confidence)
    write_replication_log(cfg.output + "_replications.csv", log)
    write_summary(cfg.output + "_summary.csv", summary)
    if log.failures:
        print(f"warning: {len(log.failures)} replication(s) failed and were recorded")
    print(
        f"{cfg.application}: mean={np.array2string(summary.mean, precision=6)} "
        f"se={np.array2string(summary.std_error, precision=3)} "
        f"mean_cost={summary.mean_cost:.2f} reps={summary.count}"
    )
    return summary


@dataclass
class ComparisonReport:
    """Plain-SAA-at-fixed-n versus the debiased estimator, replication by
    replication; running means are prefix means of the stored values."""

    fixed_n: int
    reps: int
    truth: float | None
    saa_values: np.ndarray
    unbiased_values: np.ndarray
    saa_cost_total: float
    unbiased_cost_total: float
    confidence: float = 0.99

    def running_means(self, values: np.ndarray) -> np.ndarray:
        return np.cumsum(values) / np.arange(1, values.shape[0] + 1)

    def final_stats(self) -> dict:
        from statistics import NormalDist

        n = self.reps
        saa_mean = float(np.mean(self.saa_values))
        saa_se = float(np.std(self.saa_values, ddof=1) / np.sqrt(n))
        unb_mean = float(np.mean(self.unbiased_values))
        unb_se = float(np.std(self.unbiased_values, ddof=1) / np.sqrt(n))
        z = NormalDist().inv_cdf(0.5 + self.confidence / 2.0)
        stats = {
            "saa_mean": saa_mean,
            "saa_se": saa_se,
            "unbiased_mean": unb_mean,
            "unbiased_se": unb_se,
            "unbiased_ci_low": unb_mean - z * unb_se,
            "unbiased_ci_high": unb_mean + z * unb_se,
            "saa_cost_total": self.saa_cost_total,
            "unbiased_cost_total": self.unbiased_cost_total,
        }
        if self.truth is not None:
            z_stat = (saa_mean - self.truth) / saa_se if saa_se > 0 else float("-inf")
            stats["truth"] = self.truth
            stats["saa_below_truth_z"] = z_stat
            stats["saa_below_truth_p"] = NormalDist().cdf(z_stat)
            stats["unbiased_ci_covers_truth"] = bool(
                stats["unbiased_ci_low"] <= self.truth <= stats["unbiased_ci_high"]
            )
        return stats


def compare_saa(cfg: RunConfig, fixed_n: int, reps: int, confidence: float = 0.99) -> ComparisonReport:
    """Run the biased-vs-debiased comparison on a value-estimation config."""
    if cfg.application not in ("saa_value", "saa_solution"):
        raise ConfigError("compare-saa needs an saa_value or saa_solution application")
    problem, source, truth_value, _ = build_problem(cfg)
    seed = _resolve_seed(cfg)
    if truth_value is None:
        truth_n = int(_opt(cfg, "truth_samples", 1_000_000))
        big = source.draw(truth_n, engine.RandomStream(seed, (1, 4)))
        truth_value = saa.solve_saa(problem, big).value
    saa_vals = saa.plain_saa_values(problem, source, fixed_n, reps, seed)
    alpha = cfg.alpha if cfg.alpha is not None else 1.0
    dist = LevelDistribution(
        base=cfg.base if cfg.base is not None else 10,
        ratio=cfg.ratio if cfg.ratio is not None else optimal_ratio(alpha),
        alpha=alpha,
    )
    oracle = saa.make_value_oracle(problem, source)
    log = engine.run_replications(oracle, dist, reps, seed, cfg.workers)
    ok = log.ok_mask()
    report = ComparisonReport(
        fixed_n=fixed_n,
        reps=reps,
        truth=truth_value,
        saa_values=saa_vals,
        unbiased_values=log.values[ok][:, 0],
        saa_cost_total=float(fixed_n) * reps,
        unbiased_cost_total=float(np.sum(log.costs[ok])),
        confidence=confidence,
    )
    _write_comparison(cfg.output, report)
    return report


def _write_comparison(prefix: str, report: ComparisonReport):
    saa_run = report.running_means(report.saa_values)
    unb_run = report.running_means(report.unbiased_values)
    with open(prefix + "_compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rep_index", "saa_value", "saa_running_mean", "unbiased_value", "unbiased_running_mean"])
        for i in range(report.reps):
            w.writerow(
                [
                    str(i),
                    _fmt(report.saa_values[i]),
                    _fmt(saa_run[i]),
                    _fmt(report.unbiased_values[i]),
                    _fmt(unb_run[i]),
                ]
            )
    stats = report.final_stats()
    with open(prefix + "_compare_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "value"])
        w.writerow(["fixed_n", str(report.fixed_n)])
        w.writerow(["reps", str(report.reps)])
        for k, v in stats.items():
            w.writerow([k, _fmt(v) if isinstance(v, float) else str(v)])


def pilot(cfg: RunConfig, levels: list[int], reps_per_level: int) -> dict:
    """Estimate the decay exponent and recommend a level ratio."""
    oracle, _ = build_oracle(cfg)
    seed = _resolve_seed(cfg)
    table = engine.delta_decay_table(oracle, levels, reps_per_level, seed)
    print("level  mean_delta_sq")
    for n, m in table:
        print(f"{n:5d}  {m:.6e}")
    if any(m == 0.0 for _, m in table):
        print("linear functional: level differences vanish; any ratio > 1/2 is valid")
        return {"table": table, "alpha": None, "ratio": None}
    if cfg.application in ("saa_value", "saa_solution"):
        # solver noise must sit far below the differences it feeds into
        top = max(levels)
        stream = engine.derive_stream(seed, top, "pilot")
        deltas = np.array(
            [
                float(np.max(np.abs(oracle.evaluate_level(top, stream).delta)))
                for _ in range(min(100, reps_per_level))
            ]
        )
        ok, quartile = saa.solver_noise_check(deltas)
        if not ok:
            print(
                f"warning: solver tolerance is within 100x of the lower |delta| "
                f"quartile {quartile:.3e} at level {top}; solver noise may pollute the decay"
            )
    ns = np.array([n for n, _ in table], dtype=np.float64)
    slope = float(np.polyfit(ns, np.log2([m for _, m in table]), 1)[0])
    alpha_hat = float(min(3.0, max(0.1, -slope - 1.0)))
    rec = optimal_ratio(alpha_hat)
    if cfg.application == "quantile":
        rec = min(rec, quantile.QUANTILE_RATIO_MAX - 1e-6)
    print(f"fitted slope {slope:.3f}, alpha_hat {alpha_hat:.3f}, recommended ratio {rec:.6f}")
    return {"table": table, "slope": slope, "alpha": alpha_hat, "ratio": rec}


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    mapping: dict = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, _, value = line.partition("=")
                mapping[key.strip()] = value.strip()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        mapping[key.strip()] = value.strip()
    return RunConfig.from_mapping(mapping)


def _parse_levels(spec: str) -> list[int]:
    if ":" in spec:
        lo, _, hi = spec.partition(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",")]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="unbiased-mlmc",
        description="Unbiased multilevel Monte Carlo estimation runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an estimation config and write CSVs")
    p_run.add_argument("--config", help="key = value config file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p_cmp = sub.add_parser("compare-saa", help="plain SAA at fixed n versus the debiased estimator")
    p_cmp.add_argument("--config", help="key = value config file")
    p_cmp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_cmp.add_argument("--fixed-n", type=int, required=True)
    p_cmp.add_argument("--reps", type=int, required=True)

    p_pilot = sub.add_parser("pilot", help="estimate the decay exponent and recommend a ratio")
    p_pilot.add_argument("--config", help="key = value config file")
    p_pilot.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_pilot.add_argument("--levels", default="3:8", help="lo:hi or comma list")
    p_pilot.add_argument("--reps-per-level", type=int, default=500)

    p_ing = sub.add_parser("ingest-check", help="validate a CSV dataset")
    p_ing.add_argument("path")
    p_ing.add_argument("--response", required=True)
    p_ing.add_argument("--features", help="comma-separated; defaults to all non-response columns")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            run(load_config(args.config, args.overrides))
        elif args.command == "compare-saa":
            report = compare_saa(load_config(args.config, args.overrides), args.fixed_n, args.reps)
            for k, v in report.final_stats().items():
                print(f"{k}: {v}")
        elif args.command == "pilot":
            pilot(
                load_config(args.config, args.overrides),
                _parse_levels(args.levels),
                args.reps_per_level,
            )
        elif args.command == "ingest-check":
            features = args.features.split(",") if args.features else None
            data = ingest_csv(args.path, args.response, features)
            print(f"{args.path}: {data.shape[0]} rows, {data.shape[1]} columns (response last)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FailureBudgetExceeded, DegenerateDeltaError, EstimationError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
