"""SAA solvers against independent oracles, coupling deltas, debiased estimates."""
import math

import numpy as np
import pytest

from unbiased_mlmc.engine import (
    ConfigError,
    LevelDistribution,
    SolverError,
    optimal_ratio,
)
from unbiased_mlmc.saa import (
    BallConstraint,
    BoxConstraint,
    L1BallConstraint,
    LeastSquaresProblem,
    LogisticDataSource,
    QuadraticLocationProblem,
    RegressionDataSource,
    builtin_problem,
    estimate_optimal_solution,
    estimate_optimal_value,
    make_value_oracle,
    plain_saa_values,
    saa_solution_delta,
    saa_value_delta,
    solve_saa,
    solver_noise_check,
)
from unbiased_mlmc.sampling import (
    NormalSource,
    RandomStream,
    UniformSource,
    derive_stream,
    split_odd_even,
)

BETA0 = np.array([1.0, -2.0, 0.5])


def reg_rows(n, noise=0.5, seed=1):
    return RegressionDataSource(BETA0, noise).draw(n, RandomStream(seed, (0,)))


class TestLinearRidge:
    def test_noiseless_interpolation(self):
        rows = reg_rows(64, noise=0.0)
        res = solve_saa(builtin_problem("linear", 3), rows)
        assert np.max(np.abs(res.beta - BETA0)) < 1e-10
        assert abs(res.value) < 1e-12

    def test_matches_lstsq_oracle(self):
        # independent route: SVD least squares instead of normal equations
        rows = reg_rows(200)
        res = solve_saa(builtin_problem("linear", 3), rows)
        x, y = rows[:, :3], rows[:, 3]
        oracle = np.linalg.lstsq(x, y, rcond=None)[0]
        assert np.max(np.abs(res.beta - oracle)) < 1e-10

    def test_ridge_matches_augmented_lstsq_oracle(self):
        rows = reg_rows(200)
        lam = 0.37
        res = solve_saa(builtin_problem("ridge", 3, shrinkage=lam), rows)
        x, y = rows[:, :3], rows[:, 3]
        n = rows.shape[0]
        aug_x = np.vstack([x, math.sqrt(n * lam) * np.eye(3)])
        aug_y = np.concatenate([y, np.zeros(3)])
        oracle = np.linalg.lstsq(aug_x, aug_y, rcond=None)[0]
        assert np.max(np.abs(res.beta - oracle)) < 1e-10

    def test_ridge_zero_coincides_with_linear(self):
        rows = reg_rows(100)
        a = solve_saa(builtin_problem("linear", 3), rows)
        b = solve_saa(builtin_problem("ridge", 3, shrinkage=0.0), rows)
        assert np.max(np.abs(a.beta - b.beta)) < 1e-10

    def test_ridge_penalty_dominance(self):
        rows = reg_rows(100)
        res = solve_saa(builtin_problem("ridge", 3, shrinkage=1e12), rows)
        assert np.linalg.norm(res.beta) < 1e-9

    def test_solver_determinism(self):
        rows = reg_rows(128)
        a = solve_saa(builtin_problem("linear", 3), rows)
        solve_saa(builtin_problem("linear", 3), reg_rows(64, seed=9))  # interleaved work
        b = solve_saa(builtin_problem("linear", 3), rows)
        assert np.array_equal(a.beta, b.beta)
        assert a.value == b.value

    def test_singular_batch_fails(self):
        rows = reg_rows(2)  # fewer rows than coefficients
        with pytest.raises(SolverError):
            solve_saa(builtin_problem("linear", 3), rows)


def cvxpy_ls_oracle(rows, dim, constraints_fn):
    import cvxpy as cp

    x, y = rows[:, :dim], rows[:, dim]
    beta = cp.Variable(dim)
    objective = cp.Minimize(cp.sum_squares(y - x @ beta) / rows.shape[0])
    problem = cp.Problem(objective, constraints_fn(beta))
    problem.solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11
    )
    assert problem.status in ("optimal", "optimal_inaccurate")
    return np.asarray(beta.value)


class TestConstrainedLeastSquares:
    def test_lasso_inactive_equals_ols(self):
        rows = reg_rows(120)
        ols = solve_saa(builtin_problem("linear", 3), rows)
        bound = float(np.sum(np.abs(ols.beta))) * 1.5
        res = solve_saa(builtin_problem("lasso", 3, bound=bound), rows)
        assert np.max(np.abs(res.beta - ols.beta)) < 1e-10
        assert res.multipliers[0] == 0.0

    def test_lasso_active_against_cvxpy(self):
        import cvxpy as cp

        rows = reg_rows(120)
        res = solve_saa(builtin_problem("lasso", 3, bound=1.0), rows)
        oracle = cvxpy_ls_oracle(rows, 3, lambda b: [cp.norm1(b) <= 1.0])
        assert np.max(np.abs(res.beta - oracle)) < 1e-6
        assert abs(np.sum(np.abs(res.beta)) - 1.0) < 1e-9
        assert res.multipliers[0] > 0.0
        assert res.kkt_residual <= 1e-12

    def test_ball_active_against_cvxpy(self):
        import cvxpy as cp

        rows = reg_rows(120)
        res = solve_saa(LeastSquaresProblem(3, constraint=BallConstraint(0.5)), rows)
        oracle = cvxpy_ls_oracle(rows, 3, lambda b: [cp.sum_squares(b) <= 0.25])
        assert np.max(np.abs(res.beta - oracle)) < 1e-6
        assert abs(np.linalg.norm(res.beta) - 0.5) < 1e-9
        assert res.multipliers[0] > 0.0

    def test_box_active_against_cvxpy(self):
        import cvxpy as cp

        rows = reg_rows(120)
        res = solve_saa(LeastSquaresProblem(3, constraint=BoxConstraint(0.4)), rows)
        oracle = cvxpy_ls_oracle(rows, 3, lambda b: [cp.abs(b) <= 0.4])
        assert np.max(np.abs(res.beta - oracle)) < 1e-6
        assert np.max(np.abs(res.beta)) <= 0.4 + 1e-12

    def test_multiplier_sign_and_complementarity(self):
        rows = reg_rows(150)
        for problem, slack_fn in [
            (
                builtin_problem("lasso", 3, bound=1.0),
                lambda r: np.sum(np.abs(r.beta)) - 1.0,
            ),
            (
                LeastSquaresProblem(3, constraint=BallConstraint(0.5)),
                lambda r: float(r.beta @ r.beta) - 0.25,
            ),
        ]:
            res = solve_saa(problem, rows)
            assert np.all(res.multipliers >= 0.0)
            assert abs(res.multipliers[0] * slack_fn(res)) < 1e-8


def logistic_fixture():
    # small fixed design: intercept, one feature, labels in {-1, +1}
    return np.array(
        [
            [1.0, -1.2, -1.0],
            [1.0, -0.8, -1.0],
            [1.0, -0.5, 1.0],
            [1.0, -0.1, -1.0],
            [1.0, 0.2, 1.0],
            [1.0, 0.7, -1.0],
            [1.0, 1.1, 1.0],
            [1.0, 1.6, 1.0],
        ]
    )


class TestLogistic:
    def test_matches_scipy_high_precision(self):
        from scipy.optimize import minimize

        rows = logistic_fixture()
        res = solve_saa(builtin_problem("logistic", 2), rows)
        x, y = rows[:, :2], rows[:, 2]

        def loss(beta):
            return float(np.mean(np.logaddexp(0.0, -y * (x @ beta))))

        def grad(beta):
            z = y * (x @ beta)
            s = 1.0 / (1.0 + np.exp(z))
            return -(x.T @ (y * s)) / len(y)

        oracle = minimize(loss, np.zeros(2), jac=grad, method="BFGS", tol=1e-14)
        assert np.max(np.abs(res.beta - oracle.x)) < 1e-8
        assert res.kkt_residual <= 1e-12
        assert res.converged

    def test_separable_batch_reports_divergence(self):
        rows = np.array(
            [
                [1.0, -2.0, -1.0],
                [1.0, -1.0, -1.0],
                [1.0, 1.0, 1.0],
                [1.0, 2.0, 1.0],
            ]
        )
        with pytest.raises(SolverError, match="separable"):
            solve_saa(builtin_problem("logistic", 2), rows)

    def test_label_validation(self):
        rows = logistic_fixture()
        rows[0, 2] = 0.5
        with pytest.raises(ConfigError):
            solve_saa(builtin_problem("logistic", 2), rows)

    def test_solution_estimator_matches_large_sample_baseline(self):
        beta0 = np.array([0.4, -0.8])
        source = LogisticDataSource(beta0)
        problem = builtin_problem("logistic", 2)
        big = source.draw(400_000, RandomStream(99, (0,)))
        baseline = solve_saa(problem, big).beta
        dist = LevelDistribution(base=7, ratio=optimal_ratio(1.0))
        summary = estimate_optimal_solution(problem, source, dist, 2_000, seed=100)
        for j in range(2):
            gap = abs(summary.mean[j] - baseline[j])
            se = math.sqrt(summary.std_error[j] ** 2 + 0.005**2)
            assert gap < 3 * se, f"component {j}"


class TestQuadraticInstance:
    def test_value_delta_matches_closed_form(self):
        problem = builtin_problem("quadratic")
        batch = NormalSource(2.0, 1.5).draw(64, RandomStream(7, (0,)))

        def fhat(rows):  # independent formula: second moment minus squared mean
            x = rows[:, 0]
            return float(np.mean(x**2) - np.mean(x) ** 2)

        odd, even = split_odd_even(batch)
        direct = fhat(batch) - 0.5 * (fhat(odd) + fhat(even))
        ev = saa_value_delta(problem, batch)
        assert abs(ev.delta[0] - direct) < 1e-10

    def test_constant_batch_zero_delta(self):
        problem = builtin_problem("quadratic")
        batch = np.full((16, 1), 3.7)
        ev = saa_value_delta(problem, batch)
        assert ev.delta[0] == 0.0
        assert ev.theta_full[0] == 0.0

    def test_solution_delta_linear_statistic(self):
        problem = builtin_problem("quadratic")
        batch = NormalSource(0.0, 1.0).draw(128, RandomStream(8, (0,)))
        ev = saa_solution_delta(problem, batch)
        assert abs(ev.delta[0]) <= 8 * np.spacing(1.0)

    def test_symmetric_two_point_batch(self):
        problem = builtin_problem("quadratic")
        v = 1.234
        ev = saa_solution_delta(problem, np.array([[v], [-v]]))
        assert ev.theta_full[0] == 0.0
        assert ev.delta[0] == 0.0

    def test_level_mean_matches_variance_gap(self):
        # E[difference at level n] = sigma^2 / 2^(n+1) for the location problem
        problem = builtin_problem("quadratic")
        source = NormalSource(1.0, 2.0)
        oracle = make_value_oracle(problem, source)
        level, reps = 3, 20_000
        stream = derive_stream(9, level, "pilot")
        deltas = np.array([oracle.evaluate_level(level, stream).delta[0] for _ in range(reps)])
        se = deltas.std(ddof=1) / math.sqrt(reps)
        assert abs(deltas.mean() - 4.0 / 2 ** (level + 1)) < 3 * se


class TestSolutionDeltaOracle:
    def test_linear_regression_delta_matches_lstsq_route(self):
        problem = builtin_problem("linear", 3)
        batch = RegressionDataSource(BETA0, 0.5).draw(64, RandomStream(10, (0,)))
        odd, even = split_odd_even(batch)

        def beta_lstsq(rows):
            return np.linalg.lstsq(rows[:, :3], rows[:, 3], rcond=None)[0]

        direct = beta_lstsq(batch) - 0.5 * (beta_lstsq(odd) + beta_lstsq(even))
        ev = saa_solution_delta(problem, batch)
        assert np.max(np.abs(ev.delta - direct)) < 1e-10


class TestEstimators:
    def test_optimal_value_of_quadratic(self):
        # f(beta) = E(beta - X)^2 is minimized at the mean with value sigma^2
        problem = builtin_problem("quadratic")
        source = NormalSource(3.0, 1.0)
        dist = LevelDistribution(base=2, ratio=optimal_ratio(1.0))
        s = estimate_optimal_value(problem, source, dist, 20_000, seed=11)
        assert abs(s.mean[0] - 1.0) < 3 * s.std_error[0]

    def test_noiseless_regression_value_zero(self):
        problem = builtin_problem("linear", 3)
        source = RegressionDataSource(BETA0, 0.0)
        dist = LevelDistribution(base=4, ratio=optimal_ratio(1.0))
        s = estimate_optimal_value(problem, source, dist, 500, seed=12)
        assert abs(s.mean[0]) < 1e-20

    def test_optimal_solution_of_regression(self):
        problem = builtin_problem("linear", 3)
        source = RegressionDataSource(BETA0, 0.5)
        dist = LevelDistribution(base=4, ratio=optimal_ratio(1.0))
        s = estimate_optimal_solution(problem, source, dist, 20_000, seed=13)
        assert s.mean.shape == (3,)
        for j in range(3):
            assert abs(s.mean[j] - BETA0[j]) < 3 * s.std_error[j], f"component {j}"

    def test_symmetric_source_solution_zero(self):
        problem = builtin_problem("quadratic")
        source = UniformSource(-1.0, 1.0)
        dist = LevelDistribution(base=1, ratio=optimal_ratio(1.0))
        s = estimate_optimal_solution(problem, source, dist, 20_000, seed=14)
        assert abs(s.mean[0]) < 3 * s.std_error[0]

    def test_plain_saa_is_biased_low(self):
        # E[SAA value at n] = sigma^2 (n-1)/n < sigma^2
        problem = builtin_problem("quadratic")
        source = NormalSource(0.0, 1.0)
        values = plain_saa_values(problem, source, fixed_n=32, reps=4_000, seed=15)
        se = values.std(ddof=1) / math.sqrt(values.size)
        z = (values.mean() - 1.0) / se
        assert z < -2.326  # one-sided test at the 1% point


class TestKktResiduals:
    @pytest.mark.parametrize(
        "problem",
        [
            builtin_problem("quadratic"),
            builtin_problem("linear", 3),
            builtin_problem("ridge", 3, shrinkage=0.2),
            builtin_problem("lasso", 3, bound=1.0),
            LeastSquaresProblem(3, constraint=BallConstraint(0.5)),
            LeastSquaresProblem(3, constraint=BoxConstraint(0.4)),
        ],
        ids=["quadratic", "linear", "ridge", "lasso", "ball", "box"],
    )
    def test_residuals_below_tolerance(self, problem):
        for seed in range(5):
            if isinstance(problem, QuadraticLocationProblem):
                rows = NormalSource(0.5, 1.2).draw(96, RandomStream(800 + seed, (0,)))
            else:
                rows = reg_rows(96, seed=800 + seed)
            res = solve_saa(problem, rows)
            assert res.kkt_residual <= 1e-12
            assert np.all(res.multipliers >= 0.0)


class TestSampleGradients:
    @pytest.mark.parametrize(
        "problem,rows",
        [
            (builtin_problem("quadratic"), NormalSource(0.5, 1.2).draw(6, RandomStream(900, (0,)))),
            (builtin_problem("linear", 3), None),
            (builtin_problem("ridge", 3, shrinkage=0.3), None),
            (builtin_problem("logistic", 2), None),
        ],
        ids=["quadratic", "linear", "ridge", "logistic"],
    )
    def test_matches_central_differences(self, problem, rows):
        if rows is None:
            if problem.dim == 2:
                rows = LogisticDataSource(np.array([0.3, -0.7])).draw(6, RandomStream(901, (0,)))
            else:
                rows = reg_rows(6, seed=902)
        beta = RandomStream(903).gen.standard_normal(problem.dim) * 0.5
        grads = problem.sample_gradient(beta, rows)
        assert grads.shape == (rows.shape[0], problem.dim)
        h = 1e-6
        for j in range(problem.dim):
            e = np.zeros(problem.dim)
            e[j] = h
            fd = (problem.sample_objective(beta + e, rows) - problem.sample_objective(beta - e, rows)) / (2 * h)
            assert np.max(np.abs(grads[:, j] - fd)) < 1e-6


class TestHyperparameterValidation:
    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            builtin_problem("ridge", 3)
        with pytest.raises(ConfigError):
            builtin_problem("lasso", 3)
        with pytest.raises(ConfigError):
            builtin_problem("linear", 3, ridge=-0.1)
        with pytest.raises(ConfigError):
            builtin_problem("unknown", 3)
        with pytest.raises(ConfigError):
            L1BallConstraint(-1.0)

    def test_solver_noise_check(self):
        ok, quartile = solver_noise_check(np.array([1e-3, 2e-3, 5e-3, 1e-2]))
        assert ok and quartile > 0
        bad, _ = solver_noise_check(np.array([1e-12, 2e-12, 3e-12, 4e-12]))
        assert not bad
