"""Iterative thresholding solvers: IT (modified lp), Soft and Half baselines.

All three share one driver: a gradient step ``B = x + mu * A.T (b - A x)``,
an adaptive regularization weight chosen so that the threshold sits at the
(r+1)-st largest magnitude of ``B``, and a coordinatewise thresholding.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from lpthresh.errors import ContractError
from lpthresh.linalg import as_matrix, as_vector, nonincreasing_rearrangement
from lpthresh.thresholds import half_lambda_for_knee, half_threshold, soft_threshold

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 5000
DEFAULT_ETA = 0.01
DEFAULT_EPS_SCALE = 0.7
DEFAULT_EPS_FLOOR = 1e-3


class Algorithm(str, enum.Enum):
    IT = "it"
    SOFT = "soft"
    HALF = "half"


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    DEGENERATE_INPUT = "degenerate_input"


@dataclass(frozen=True)
class SolverConfig:
    algorithm: Algorithm = Algorithm.IT
    p: float = 0.7
    eta: float = DEFAULT_ETA
    sparsity_r: int = 1
    tolerance: float = DEFAULT_TOL
    max_iterations: int = DEFAULT_MAX_ITERS
    epsilon_scale: float = DEFAULT_EPS_SCALE
    epsilon_floor: float = DEFAULT_EPS_FLOOR
    fixed_lambda: float | None = None
    # Frozen epsilon (scalar or per-coordinate); disables the per-iteration rule.
    fixed_epsilon: float | tuple[float, ...] | None = None
    # When set and no explicit start is given, x0 is drawn N(0, 1) from this seed.
    rng_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not 0.0 < self.eta < 1.0:
            raise ContractError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0.0 < self.p < 1.0:
            raise ContractError(f"p must lie in (0, 1), got {self.p}")
        if self.sparsity_r < 1:
            raise ContractError(f"sparsity_r must be >= 1, got {self.sparsity_r}")
        if not self.tolerance > 0:
            raise ContractError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ContractError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (self.epsilon_scale > 0 and self.epsilon_floor > 0):
            raise ContractError("epsilon_scale and epsilon_floor must be positive")
        if self.fixed_lambda is not None and not self.fixed_lambda > 0:
            raise ContractError(f"fixed_lambda must be positive, got {self.fixed_lambda}")
        if self.fixed_epsilon is not None:
            eps = np.atleast_1d(np.asarray(self.fixed_epsilon, dtype=np.float64))
            if not np.all(eps > 0):
                raise ContractError("fixed_epsilon must be strictly positive")
            if eps.size > 1:
                object.__setattr__(self, "fixed_epsilon", tuple(float(e) for e in eps))
            else:
                object.__setattr__(self, "fixed_epsilon", float(eps[0]))


@dataclass
class IterationTrace:
    objective: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    support: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.step_norm)

    def append(self, objective, step_norm, lam, support):
        self.objective.append(objective)
        self.step_norm.append(step_norm)
        self.lam.append(lam)
        self.support.append(support)

    def rows(self):
        return zip(range(1, len(self) + 1), self.objective, self.step_norm, self.lam, self.support)


@dataclass
class SolveResult:
    solution: np.ndarray
    iterations: int
    termination: Termination
    trace: IterationTrace
    mu: float
    # Objective at the starting point, with the first iteration's weights.
    initial_objective: float = math.nan
    # Parameters of the final iteration; the fixed-point check needs them.
    final_lambda: float = math.nan
    final_epsilon: np.ndarray | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED


def gradient_step(A, b, x, mu: float) -> np.ndarray:
    """B_mu(x) = x + mu * A.T @ (b - A @ x)."""
    A = as_matrix(A)
    x = as_vector(x)
    b = as_vector(b, "b")
    if A.cols != x.shape[0] or A.rows != b.shape[0]:
        raise ContractError(f"inconsistent shapes: A {A.shape}, x {x.shape}, b {b.shape}")
    return x + mu * (A.data.T @ (b - A.data @ x))


def compute_epsilon(A, b, x, mu: float, scale: float, floor: float) -> np.ndarray:
    """eps_i = max(scale * |mu * [A.T (b - A x)]_i|, floor)."""
    A = as_matrix(A)
    x = as_vector(x)
    b = as_vector(b, "b")
    if A.cols != x.shape[0] or A.rows != b.shape[0]:
        raise ContractError(f"inconsistent shapes: A {A.shape}, x {x.shape}, b {b.shape}")
    g = mu * (A.data.T @ (b - A.data @ x))
    return np.maximum(scale * np.abs(g), floor)


def _kth_largest(v: np.ndarray, k: int) -> float:
    # k is 1-based
    return float(nonincreasing_rearrangement(v)[k - 1])


def adaptive_lambda(b_mu, x, epsilon, mu: float, p: float, r: int) -> float:
    """Regularization weight placing the IT threshold at the (r+1)-st entry.

    ``2 * |B|_(r+1) * (|x|_(r+1) + eps_(r+1))**(1-p) / mu`` where ``|v|_(k)``
    denotes the k-th largest magnitude of ``v``. Each vector is rearranged
    on its own.
    """
    b_mu = as_vector(b_mu, "b_mu")
    x = as_vector(x)
    epsilon = as_vector(epsilon, "epsilon")
    n = b_mu.shape[0]
    if not (x.shape[0] == n and epsilon.shape[0] == n):
        raise ContractError("b_mu, x and epsilon must have equal length")
    if not 1 <= r < n:
        raise ContractError(f"need 1 <= r < n, got r={r}, n={n}")
    k = r + 1
    return 2.0 * _kth_largest(b_mu, k) * (_kth_largest(x, k) + _kth_largest(epsilon, k)) ** (1.0 - p) / mu


def soft_lambda(b_mu, mu: float, r: int) -> float:
    """Soft-baseline weight: threshold lam*mu/2 equals the (r+1)-st magnitude of ``b_mu``."""
    return 2.0 * _kth_largest(as_vector(b_mu, "b_mu"), r + 1) / mu


def half_lambda(b_mu, mu: float, r: int) -> float:
    """Half-baseline weight: the dead zone of half thresholding with ``lam*mu`` ends at the (r+1)-st magnitude."""
    return half_lambda_for_knee(_kth_largest(as_vector(b_mu, "b_mu"), r + 1)) / mu


def relative_error(x_star, x0) -> float:
    """||x_star - x0|| / ||x0||."""
    x_star = as_vector(x_star, "x_star")
    x0 = as_vector(x0, "x0")
    if x_star.shape != x0.shape:
        raise ContractError(f"length mismatch: {x_star.shape} vs {x0.shape}")
    nrm = np.linalg.norm(x0)
    if nrm == 0.0:
        raise ContractError("relative error undefined for x0 = 0")
    return float(np.linalg.norm(x_star - x0) / nrm)


def _penalty_value(alg: Algorithm, x: np.ndarray, p: float, eps: np.ndarray | None) -> float:
    ax = np.abs(x)
    if alg is Algorithm.IT:
        return float(np.sum(ax / (ax + eps) ** (1.0 - p)))
    if alg is Algorithm.SOFT:
        return float(np.sum(ax))
    return float(np.sum(np.sqrt(ax)))


def _degenerate(x, mu, trace, msg) -> SolveResult:
    log.warning("solve aborted: %s", msg)
    return SolveResult(
        solution=x, iterations=len(trace), termination=Termination.DEGENERATE_INPUT,
        trace=trace, mu=mu, message=msg,
    )


def solve(A, b, config: SolverConfig, x0=None, callback=None) -> SolveResult:
    """Run one of the iterative thresholding solvers on ``min ||Ax - b||^2 + lam * pen(x)``.

    Parameters
    ----------
    A : DenseMatrix or array_like, shape (m, n)
    b : array_like, shape (m,)
    config : SolverConfig
    x0 : array_like, optional
        Starting point; zero by default.
    callback : callable, optional
        Called as ``callback(k, x)`` after iteration ``k`` (1-based) with the
        new iterate. The array must not be modified.

    Returns
    -------
    SolveResult
        ``termination`` is ``CONVERGED`` once
        ``||x^{k+1} - x^k|| / ||x^k|| <= config.tolerance``. A zero matrix or
        a non-finite iterate gives ``DEGENERATE_INPUT`` instead of raising.
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    m, n = A.shape
    if b.shape[0] != m:
        raise ContractError(f"b has length {b.shape[0]}, expected {m}")
    alg = config.algorithm
    r = config.sparsity_r
    if config.fixed_lambda is None and not r < n:
        raise ContractError(f"sparsity_r must be < n={n}, got {r}")
    if x0 is not None:
        x = as_vector(x0, "x0").astype(np.float64, copy=True)
    elif config.rng_seed is not None:
        x = np.random.default_rng(config.rng_seed).standard_normal(n)
    else:
        x = np.zeros(n)
    if x.shape[0] != n:
        raise ContractError(f"x0 has length {x.shape[0]}, expected {n}")

    trace = IterationTrace()
    norm_a = A.spectral_norm()
    if norm_a == 0.0:
        return _degenerate(x, math.nan, trace, "measurement matrix is zero")
    if not np.all(np.isfinite(b)):
        return _degenerate(x, math.nan, trace, "observation contains non-finite values")
    mu = (1.0 - config.eta) / norm_a**2
    assert mu * norm_a**2 < 1.0

    fixed_eps = None
    if config.fixed_epsilon is not None:
        fixed_eps = np.broadcast_to(np.asarray(config.fixed_epsilon, dtype=np.float64), (n,)).copy()
        if fixed_eps.shape[0] != n:
            raise ContractError("fixed_epsilon length does not match n")

    p = config.p
    at = A.data.T
    resid = A.data @ x - b  # A x - b, carried across iterations
    initial_objective = math.nan
    lam = math.nan
    eps = fixed_eps
    termination = Termination.MAX_ITERATIONS

    for k in range(config.max_iterations):
        grad = -mu * (at @ resid)  # mu * A^T (b - A x)
        b_mu = x + grad

        if alg is Algorithm.IT:
            if fixed_eps is None:
                eps = np.maximum(config.epsilon_scale * np.abs(grad), config.epsilon_floor)
            if config.fixed_lambda is not None:
                lam = config.fixed_lambda
            else:
                lam = adaptive_lambda(b_mu, x, eps, mu, p, r)
            x_new = soft_threshold(b_mu, lam * mu / (np.abs(x) + eps) ** (1.0 - p))
        elif alg is Algorithm.SOFT:
            lam = config.fixed_lambda if config.fixed_lambda is not None else soft_lambda(b_mu, mu, r)
            x_new = soft_threshold(b_mu, lam * mu)
        else:
            lam = config.fixed_lambda if config.fixed_lambda is not None else half_lambda(b_mu, mu, r)
            x_new = half_threshold(b_mu, lam * mu)

        if k == 0:
            initial_objective = float(resid @ resid) + lam * _penalty_value(alg, x, p, eps)

        if not np.all(np.isfinite(x_new)):
            return _degenerate(x, mu, trace, f"non-finite iterate at iteration {k + 1}")

        resid = A.data @ x_new - b
        step = float(np.linalg.norm(x_new - x))
        h1 = float(resid @ resid) + lam * _penalty_value(alg, x_new, p, eps)
        trace.append(h1, step, float(lam), int(np.count_nonzero(x_new)))

        xnorm = float(np.linalg.norm(x))
        x = x_new
        if callback is not None:
            callback(k + 1, x)
        if step == 0.0 or (xnorm > 0.0 and step <= config.tolerance * xnorm):
            termination = Termination.CONVERGED
            break

    return SolveResult(
        solution=x,
        iterations=len(trace),
        termination=termination,
        trace=trace,
        mu=mu,
        initial_objective=initial_objective,
        final_lambda=float(lam),
        final_epsilon=None if eps is None else np.array(eps),
    )
