"""Debiased sample average approximation for stochastic convex programs.

Plain SAA optimal values are biased low; the coupled level differences of
the SAA optimal value and optimal solution debias them. All inner solvers
are deterministic and high-accuracy: solver noise would enter the level
differences and destroy their decay, so stochastic solvers are forbidden
here.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .engine import (
    BatchDeltaOracle,
    ConfigError,
    EstimatorSummary,
    LevelDistribution,
    SolverError,
    TripleEvaluation,
    run_estimator,
)
from .sampling import RandomStream, SampleSource, split_odd_even

__all__ = [
    "SolveResult",
    "NoConstraint",
    "BoxConstraint",
    "BallConstraint",
    "L1BallConstraint",
    "SaaProblem",
    "QuadraticLocationProblem",
    "LeastSquaresProblem",
    "LogisticRegressionProblem",
    "builtin_problem",
    "RegressionDataSource",
    "LogisticDataSource",
    "solve_saa",
    "saa_value_delta",
    "saa_solution_delta",
    "make_value_oracle",
    "make_solution_oracle",
    "estimate_optimal_value",
    "estimate_optimal_solution",
    "plain_saa_values",
    "solver_noise_check",
]

DEFAULT_TOL = 1e-12


@dataclass
class SolveResult:
    """Deterministic solver output for one SAA instance."""

    beta: np.ndarray
    value: float
    multipliers: np.ndarray
    iterations: int
    converged: bool
    kkt_residual: float


@dataclass(frozen=True)
class NoConstraint:
    pass


@dataclass(frozen=True)
class BoxConstraint:
    bound: float  # |beta_i| <= bound

    def __post_init__(self):
        if not self.bound > 0:
            raise ConfigError("box bound must be positive")


@dataclass(frozen=True)
class BallConstraint:
    radius: float  # ||beta||_2 <= radius

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("ball radius must be positive")


@dataclass(frozen=True)
class L1BallConstraint:
    bound: float  # ||beta||_1 <= bound

    def __post_init__(self):
        if self.bound < 0:
            raise ConfigError("l1 bound must be nonnegative")


class SaaProblem(ABC):
    """A convex stochastic program defined by its per-sample objective.

    Convexity of the per-sample objective and well-posedness on the
    constraint set are user contracts. Solvers must return bitwise-identical
    results on identical batches.
    """

    dim: int
    tol: float = DEFAULT_TOL
    beta_star: np.ndarray | None = None
    f_star: float | None = None

    @abstractmethod
    def sample_objective(self, beta: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Per-sample objective values, shape (n,)."""

    @abstractmethod
    def sample_gradient(self, beta: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Per-sample gradients in beta, shape (n, dim)."""

    @abstractmethod
    def solve(self, rows: np.ndarray) -> SolveResult:
        """Minimize the batch average objective subject to the constraints."""

    def empirical_value(self, beta: np.ndarray, rows: np.ndarray) -> float:
        return float(np.mean(self.sample_objective(beta, rows)))


def _rel_residual(grad: np.ndarray, scale_grad: np.ndarray) -> float:
    return float(np.max(np.abs(grad)) / max(1.0, float(np.max(np.abs(scale_grad)))))


class QuadraticLocationProblem(SaaProblem):
    """F(beta, x) = (beta - x)^2: the SAA solution is the sample mean and the
    SAA value the (biased, divisor n) sample variance."""

    dim = 1

    def __init__(self, beta_star=None, f_star=None, tol=DEFAULT_TOL):
        self.beta_star = None if beta_star is None else np.atleast_1d(np.float64(beta_star))
        self.f_star = f_star
        self.tol = tol

    def sample_objective(self, beta, rows):
        d = rows[:, 0] - beta[0]
        return d * d

    def sample_gradient(self, beta, rows):
        return (2.0 * (beta[0] - rows[:, 0])).reshape(-1, 1)

    def solve(self, rows):
        x = rows[:, 0]
        m = float(np.mean(x))
        value = float(np.mean((x - m) ** 2))
        grad = np.array([2.0 * (m - np.mean(x))])
        return SolveResult(
            beta=np.array([m]),
            value=value,
            multipliers=np.empty(0),
            iterations=1,
            converged=True,
            kkt_residual=_rel_residual(grad, np.array([2.0 * np.mean(x)])),
        )


def _split_xy(rows: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if rows.ndim != 2 or rows.shape[1] != dim + 1:
        raise ConfigError(f"regression rows must have {dim + 1} columns, got {rows.shape}")
    return rows[:, :dim], rows[:, dim]


def _soft_threshold(v: float, thresh: float) -> float:
    if v > thresh:
        return v - thresh
    if v < -thresh:
        return v + thresh
    return 0.0


class LeastSquaresProblem(SaaProblem):
    """Mean squared error over rows (x..., y), optionally ridge-penalized or
    constrained; first feature coordinate is conventionally the intercept.

    Solvers: normal equations (plain and ridge-shifted), coordinate descent
    with a multiplier bisection for the l1 ball, clipped coordinate descent
    for the box, and a radius bisection on the shifted normal equations for
    the l2 ball.
    """

    def __init__(
        self,
        dim: int,
        ridge: float = 0.0,
        constraint=NoConstraint(),
        beta_star=None,
        f_star=None,
        tol: float = DEFAULT_TOL,
    ):
        if dim < 1:
            raise ConfigError("dimension must be >= 1")
        if ridge < 0:
            raise ConfigError("ridge penalty must be nonnegative")
        if ridge > 0 and not isinstance(constraint, NoConstraint):
            raise ConfigError("use either a ridge penalty or a constraint, not both")
        self.dim = dim
        self.ridge = float(ridge)
        self.constraint = constraint
        self.beta_star = None if beta_star is None else np.asarray(beta_star, dtype=np.float64)
        self.f_star = f_star
        self.tol = tol

    def sample_objective(self, beta, rows):
        x, y = _split_xy(rows, self.dim)
        r = y - x @ beta
        vals = r * r
        if self.ridge > 0:
            vals = vals + self.ridge * float(beta @ beta)
        return vals

    def sample_gradient(self, beta, rows):
        x, y = _split_xy(rows, self.dim)
        grads = -2.0 * (y - x @ beta)[:, None] * x
        if self.ridge > 0:
            grads = grads + 2.0 * self.ridge * beta
        return grads

    def _moments(self, rows):
        x, y = _split_xy(rows, self.dim)
        n = rows.shape[0]
        gram = (x.T @ x) / n
        cross = (x.T @ y) / n
        return x, y, gram, cross

    def solve(self, rows):
        if isinstance(self.constraint, L1BallConstraint):
            return self._solve_l1(rows)
        if isinstance(self.constraint, BallConstraint):
            return self._solve_ball(rows)
        if isinstance(self.constraint, BoxConstraint):
            return self._solve_box(rows)
        return self._solve_plain(rows)

    def _solve_plain(self, rows):
        x, y, gram, cross = self._moments(rows)
        shifted = gram + self.ridge * np.eye(self.dim)
        try:
            beta = np.linalg.solve(shifted, cross)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"normal equations singular on batch of {rows.shape[0]}") from exc
        grad = 2.0 * (shifted @ beta - cross)
        res = _rel_residual(grad, 2.0 * cross)
        if res > self.tol:
            raise SolverError(f"normal equations residual {res:.2e} above tolerance {self.tol}")
        return SolveResult(
            beta=beta,
            value=self.empirical_value(beta, rows),
            multipliers=np.empty(0),
            iterations=1,
            converged=True,
            kkt_residual=res,
        )

    def _cd_l1(self, gram, cross, lam, beta, max_sweeps=20_000):
        # coordinate descent on mse + lam * ||beta||_1, fixed sweep order
        d = self.dim
        for sweep in range(max_sweeps):
            biggest = 0.0
            for j in range(d):
                rho = cross[j] - gram[j] @ beta + gram[j, j] * beta[j]
                new = _soft_threshold(rho, lam / 2.0) / gram[j, j]
                change = abs(new - beta[j])
                if change > biggest:
                    biggest = change
                beta[j] = new
            if biggest <= 1e-15 * max(1.0, float(np.max(np.abs(beta)))):
                return beta, sweep + 1
        return beta, max_sweeps

    def _solve_l1(self, rows):
        x, y, gram, cross = self._moments(rows)
        if np.any(np.diag(gram) <= 0):
            raise SolverError("degenerate design: zero-variance feature in l1 solve")
        bound = self.constraint.bound
        ols = self._solve_plain_beta(gram, cross, rows)
        iters = 1
        if float(np.sum(np.abs(ols))) <= bound:
            beta, lam = ols, 0.0
        else:
            lam_hi = 2.0 * float(np.max(np.abs(cross)))
            lam_lo = 0.0
            beta = np.zeros(self.dim)
            for _ in range(200):
                lam = 0.5 * (lam_lo + lam_hi)
                beta, sweeps = self._cd_l1(gram, cross, lam, beta)
                iters += sweeps
                if float(np.sum(np.abs(beta))) > bound:
                    lam_lo = lam
                else:
                    lam_hi = lam
                if lam_hi - lam_lo <= 1e-16 * max(1.0, lam_hi):
                    break
            lam = lam_hi
            beta, sweeps = self._cd_l1(gram, cross, lam, beta)
            iters += sweeps
        grad = 2.0 * (gram @ beta - cross)
        stationarity = np.where(
            beta != 0.0, np.abs(grad + lam * np.sign(beta)), np.maximum(np.abs(grad) - lam, 0.0)
        )
        res = _rel_residual(stationarity, 2.0 * cross)
        return SolveResult(
            beta=beta,
            value=float(np.mean((y - x @ beta) ** 2)),
            multipliers=np.array([lam]),
            iterations=iters,
            converged=True,
            kkt_residual=res,
        )

    def _solve_plain_beta(self, gram, cross, rows):
        try:
            return np.linalg.solve(gram, cross)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"normal equations singular on batch of {rows.shape[0]}") from exc

    def _solve_ball(self, rows):
        x, y, gram, cross = self._moments(rows)
        radius = self.constraint.radius
        beta = self._solve_plain_beta(gram, cross, rows)
        mu = 0.0
        iters = 1
        if float(np.sqrt(beta @ beta)) > radius:
            mu_lo, mu_hi = 0.0, 1.0
            eye = np.eye(self.dim)
            while _ball_norm(gram, cross, mu_hi, eye) > radius:
                mu_hi *= 2.0
                if mu_hi > 1e18:
                    raise SolverError("ball-constraint bisection failed to bracket")
            for _ in range(200):
                mu = 0.5 * (mu_lo + mu_hi)
                if _ball_norm(gram, cross, mu, eye) > radius:
                    mu_lo = mu
                else:
                    mu_hi = mu
                iters += 1
            mu = mu_hi
            beta = np.linalg.solve(gram + mu * eye, cross)
        grad = 2.0 * (gram @ beta - cross) + 2.0 * mu * beta
        res = _rel_residual(grad, 2.0 * cross)
        return SolveResult(
            beta=beta,
            value=float(np.mean((y - x @ beta) ** 2)),
            multipliers=np.array([mu]),
            iterations=iters,
            converged=True,
            kkt_residual=res,
        )

    def _solve_box(self, rows):
        x, y, gram, cross = self._moments(rows)
        if np.any(np.diag(gram) <= 0):
            raise SolverError("degenerate design: zero-variance feature in box solve")
        bound = self.constraint.bound
        beta = np.zeros(self.dim)
        iters = 0
        for sweep in range(20_000):
            biggest = 0.0
            for j in range(self.dim):
                rho = cross[j] - gram[j] @ beta + gram[j, j] * beta[j]
                new = min(max(rho / gram[j, j], -bound), bound)
                biggest = max(biggest, abs(new - beta[j]))
                beta[j] = new
            iters = sweep + 1
            if biggest <= 1e-15 * max(1.0, float(np.max(np.abs(beta)))):
                break
        grad = 2.0 * (gram @ beta - cross)
        # multipliers for the 2*dim constraints (+bound, -bound) per coordinate
        mult = np.zeros(2 * self.dim)
        stationarity = np.array(grad)
        for j in range(self.dim):
            if beta[j] >= bound:
                mult[2 * j] = max(-grad[j], 0.0)
                stationarity[j] = grad[j] + mult[2 * j]
            elif beta[j] <= -bound:
                mult[2 * j + 1] = max(grad[j], 0.0)
                stationarity[j] = grad[j] - mult[2 * j + 1]
        res = _rel_residual(stationarity, 2.0 * cross)
        return SolveResult(
            beta=beta,
            value=float(np.mean((y - x @ beta) ** 2)),
            multipliers=mult,
            iterations=iters,
            converged=True,
            kkt_residual=res,
        )


def _ball_norm(gram, cross, mu, eye):
    return float(np.linalg.norm(np.linalg.solve(gram + mu * eye, cross)))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * t))


class LogisticRegressionProblem(SaaProblem):
    """Negative log-likelihood log(1 + exp(-y x'beta)) over rows (x..., y)
    with labels y in {-1, +1}, minimized by damped Newton with backtracking.

    Linearly separable batches drive the optimum to infinity; the solver
    reports divergence instead of returning a spurious optimum.
    """

    def __init__(self, dim: int, beta_star=None, f_star=None, tol: float = DEFAULT_TOL,
                 max_iter: int = 200, beta_cap: float = 1e6):
        if dim < 1:
            raise ConfigError("dimension must be >= 1")
        self.dim = dim
        self.beta_star = None if beta_star is None else np.asarray(beta_star, dtype=np.float64)
        self.f_star = f_star
        self.tol = tol
        self.max_iter = max_iter
        self.beta_cap = beta_cap

    def sample_objective(self, beta, rows):
        x, y = _split_xy(rows, self.dim)
        return np.logaddexp(0.0, -y * (x @ beta))

    def sample_gradient(self, beta, rows):
        x, y = _split_xy(rows, self.dim)
        s = _sigmoid(-y * (x @ beta))
        return -(y * s)[:, None] * x

    def _loss_grad_hess(self, beta, x, y):
        n = x.shape[0]
        z = y * (x @ beta)
        loss = float(np.mean(np.logaddexp(0.0, -z)))
        s = _sigmoid(-z)  # P(misclassify margin)
        grad = -(x.T @ (y * s)) / n
        w = s * (1.0 - s)
        hess = (x.T * w) @ x / n
        return loss, grad, hess

    def solve(self, rows):
        x, y = _split_xy(rows, self.dim)
        if not np.all(np.abs(y) == 1.0):
            raise ConfigError("logistic labels must be -1 or +1")
        beta = np.zeros(self.dim)
        loss, grad, hess = self._loss_grad_hess(beta, x, y)
        scale = np.array(grad)
        for it in range(1, self.max_iter + 1):
            if _rel_residual(grad, scale) <= self.tol:
                if np.all(y * (x @ beta) > 0.0):
                    # every margin positive: separable batch, infimum not attained
                    raise SolverError(
                        "batch is linearly separable: the empirical problem has no "
                        "finite optimum (gradient vanishes only in the limit)"
                    )
                return SolveResult(
                    beta=beta,
                    value=loss,
                    multipliers=np.empty(0),
                    iterations=it,
                    converged=True,
                    kkt_residual=_rel_residual(grad, scale),
                )
            try:
                direction = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError as exc:
                raise SolverError(
                    "logistic Hessian singular (batch may be linearly separable)"
                ) from exc
            step = 1.0
            slope = float(grad @ direction)
            if -slope > 1e-13 * max(1.0, abs(loss)):
                while step >= 2.0**-60:
                    cand = beta + step * direction
                    cand_loss = float(np.mean(np.logaddexp(0.0, -y * (x @ cand))))
                    if cand_loss <= loss + 1e-4 * step * slope:
                        break
                    step *= 0.5
                else:
                    raise SolverError("logistic line search failed to make progress")
            # else: decrement below float resolution of the loss; in the
            # strictly convex terminal phase the full Newton step is safe and
            # the backtracking test cannot observe the (sub-ulp) improvement
            beta = beta + step * direction
            if float(np.max(np.abs(beta))) > self.beta_cap:
                raise SolverError(
                    "logistic iterates diverging (batch likely linearly separable)"
                )
            loss, grad, hess = self._loss_grad_hess(beta, x, y)
        raise SolverError(f"logistic Newton did not converge in {self.max_iter} iterations")


def builtin_problem(kind: str, dim: int = 1, **kw) -> SaaProblem:
    """Named problem instances with their deterministic solvers wired in.

    Kinds: quadratic, linear, ridge (shrinkage=...), lasso (bound=...),
    logistic.
    """
    if kind == "quadratic":
        return QuadraticLocationProblem(**kw)
    if kind == "linear":
        return LeastSquaresProblem(dim, **kw)
    if kind == "ridge":
        shrinkage = kw.pop("shrinkage", None)
        if shrinkage is None:
            raise ConfigError("ridge needs a shrinkage= parameter (>= 0)")
        return LeastSquaresProblem(dim, ridge=shrinkage, **kw)
    if kind == "lasso":
        bound = kw.pop("bound", None)
        if bound is None:
            raise ConfigError("lasso needs a bound= parameter (>= 0)")
        return LeastSquaresProblem(dim, constraint=L1BallConstraint(bound), **kw)
    if kind == "logistic":
        return LogisticRegressionProblem(dim, **kw)
    raise ConfigError(f"unknown problem kind {kind!r}")


class RegressionDataSource(SampleSource):
    """Synthetic regression rows (1, z..., y) with standard normal features
    and y = x'beta0 + noise_sd * eps."""

    def __init__(self, beta0, noise_sd: float = 1.0):
        self.beta0 = np.asarray(beta0, dtype=np.float64)
        if self.beta0.ndim != 1 or self.beta0.size < 1:
            raise ConfigError("beta0 must be a nonempty vector")
        if noise_sd < 0:
            raise ConfigError("noise sd must be nonnegative")
        self.noise_sd = float(noise_sd)
        self.dimension = self.beta0.size + 1

    def draw(self, n, stream):
        d = self.beta0.size
        x = np.empty((n, d))
        x[:, 0] = 1.0
        if d > 1:
            x[:, 1:] = stream.gen.standard_normal((n, d - 1))
        y = x @ self.beta0 + self.noise_sd * stream.gen.standard_normal(n)
        return np.column_stack([x, y])


class LogisticDataSource(SampleSource):
    """Synthetic classification rows (1, z..., y) with y in {-1, +1} and
    P(y = 1 | x) given by the logistic link at x'beta0."""

    def __init__(self, beta0):
        self.beta0 = np.asarray(beta0, dtype=np.float64)
        if self.beta0.ndim != 1 or self.beta0.size < 1:
            raise ConfigError("beta0 must be a nonempty vector")
        self.dimension = self.beta0.size + 1

    def draw(self, n, stream):
        d = self.beta0.size
        x = np.empty((n, d))
        x[:, 0] = 1.0
        if d > 1:
            x[:, 1:] = stream.gen.standard_normal((n, d - 1))
        probs = _sigmoid(x @ self.beta0)
        y = np.where(stream.gen.random(n) < probs, 1.0, -1.0)
        return np.column_stack([x, y])


def solve_saa(problem: SaaProblem, batch: np.ndarray) -> SolveResult:
    """Deterministic SAA solve on one batch; identical batches give
    bitwise-identical results."""
    if batch.shape[0] < 1:
        raise ConfigError("empty batch")
    return problem.solve(batch)


def saa_value_delta(problem: SaaProblem, batch: np.ndarray) -> TripleEvaluation:
    """Coupled difference of the SAA optimal value: three solves, one per
    empirical measure. Cost counts samples; solver work is internal."""
    odd, even = split_odd_even(batch)
    full_r = solve_saa(problem, batch)
    odd_r = solve_saa(problem, odd)
    even_r = solve_saa(problem, even)
    return TripleEvaluation(
        theta_full=np.array([full_r.value]),
        theta_odd=np.array([odd_r.value]),
        theta_even=np.array([even_r.value]),
        delta=np.array([full_r.value - 0.5 * (odd_r.value + even_r.value)]),
        cost=float(batch.shape[0]),
    )


def saa_solution_delta(problem: SaaProblem, batch: np.ndarray) -> TripleEvaluation:
    """Coupled difference of the SAA optimal solution (vector valued)."""
    odd, even = split_odd_even(batch)
    full_r = solve_saa(problem, batch)
    odd_r = solve_saa(problem, odd)
    even_r = solve_saa(problem, even)
    delta = full_r.beta - 0.5 * (odd_r.beta + even_r.beta)
    return TripleEvaluation(
        theta_full=full_r.beta,
        theta_odd=odd_r.beta,
        theta_even=even_r.beta,
        delta=delta,
        cost=float(batch.shape[0]),
    )


class _ValueDelta:
    def __init__(self, problem):
        self.problem = problem

    def __call__(self, batch, stream):
        return saa_value_delta(self.problem, batch)


class _ValueBase:
    def __init__(self, problem):
        self.problem = problem

    def __call__(self, batch, stream):
        return np.array([solve_saa(self.problem, batch).value])


class _SolutionDelta:
    def __init__(self, problem):
        self.problem = problem

    def __call__(self, batch, stream):
        return saa_solution_delta(self.problem, batch)


class _SolutionBase:
    def __init__(self, problem):
        self.problem = problem

    def __call__(self, batch, stream):
        return solve_saa(self.problem, batch).beta


def make_value_oracle(problem: SaaProblem, source: SampleSource, max_level: int = 30) -> BatchDeltaOracle:
    return BatchDeltaOracle(source, _ValueDelta(problem), _ValueBase(problem), dim=1, max_level=max_level)


def make_solution_oracle(problem: SaaProblem, source: SampleSource, max_level: int = 30) -> BatchDeltaOracle:
    return BatchDeltaOracle(
        source, _SolutionDelta(problem), _SolutionBase(problem), dim=problem.dim, max_level=max_level
    )


def estimate_optimal_value(
    problem: SaaProblem,
    source: SampleSource,
    dist: LevelDistribution,
    n_reps: int,
    seed: int,
    workers: int = 1,
    confidence: float = 0.95,
) -> EstimatorSummary:
    """Unbiased estimate of the optimal objective value."""
    return run_estimator(
        make_value_oracle(problem, source), dist, n_reps, seed, workers=workers, confidence=confidence
    )


def estimate_optimal_solution(
    problem: SaaProblem,
    source: SampleSource,
    dist: LevelDistribution,
    n_reps: int,
    seed: int,
    workers: int = 1,
    confidence: float = 0.95,
) -> EstimatorSummary:
    """Unbiased estimate of the optimal solution vector (componentwise summary)."""
    return run_estimator(
        make_solution_oracle(problem, source), dist, n_reps, seed, workers=workers, confidence=confidence
    )


def plain_saa_values(
    problem: SaaProblem, source: SampleSource, fixed_n: int, reps: int, seed: int
) -> np.ndarray:
    """Optimal values of plain SAA at a fixed sample size over independent
    batches; the biased baseline the debiased estimator is compared against."""
    out = np.empty(reps)
    stream = RandomStream(seed, (0, 4))
    for i in range(reps):
        out[i] = solve_saa(problem, source.draw(fixed_n, stream)).value
    return out


def solver_noise_check(deltas: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Whether the solver tolerance sits at least 100x below the lower
    quartile of |delta| at the pilot's largest level; if not, solver noise
    may pollute the decay."""
    quartile = float(np.percentile(np.abs(deltas), 25))
    return tol * 100.0 <= quartile, quartile
