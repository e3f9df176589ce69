"""Unbiased multilevel Monte Carlo estimation.

A random level N with geometric tail selects a coupled difference of a
statistic evaluated on empirical measures of sizes 2^(N+1) and 2^N; dividing
by the level probability and adding an independent base term yields an
unbiased, finite-variance, bounded-expected-cost estimator. Application
suites: smooth functions of expectations, regenerative/self-normalized
ratios, debiased sample average approximation, and quantiles.
"""
from .engine import (
    ConfigError,
    DegenerateDeltaError,
    EstimationError,
    EstimatorSummary,
    FailureBudgetExceeded,
    LevelDistribution,
    LevelOracle,
    Replication,
    ReplicationError,
    SolverError,
    TripleEvaluation,
    estimate_alpha,
    merge_summaries,
    optimal_ratio,
    pmf,
    run_estimator,
    sample_level,
    single_replication,
    summarize,
)
from .func_mean import SmoothFunctional, func_mean_delta, make_func_mean_oracle
from .quantile import (
    QuantileSpec,
    base_level,
    estimate_quantile,
    quantile_delta,
    sample_quantile,
)
from .ratio import (
    CyclePair,
    LindleyQueue,
    make_regen_oracle,
    make_snis_oracle,
    mm1_queue,
    ratio_functional,
    simulate_cycle,
)
from .saa import (
    SaaProblem,
    SolveResult,
    builtin_problem,
    estimate_optimal_solution,
    estimate_optimal_value,
    saa_solution_delta,
    saa_value_delta,
    solve_saa,
)
from .sampling import (
    RandomStream,
    SampleSource,
    derive_stream,
    draw_batch,
    empirical_source,
    split_odd_even,
)

__version__ = "0.1.0"
