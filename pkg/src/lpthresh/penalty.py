"""Modified lp penalty, the regularized objective and its surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lpthresh.errors import ContractError
from lpthresh.linalg import as_matrix, as_vector


@dataclass(frozen=True)
class PenaltyParams:
    """Exponent ``p`` in (0, 1) and one strictly positive epsilon per coordinate."""

    p: float
    epsilon: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ContractError(f"p must lie in (0, 1), got {self.p}")
        eps = np.atleast_1d(np.asarray(self.epsilon, dtype=np.float64))
        if eps.ndim != 1 or not np.all(eps > 0) or not np.all(np.isfinite(eps)):
            raise ContractError("epsilon must be a 1-D vector of finite positive reals")
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def uniform(cls, p: float, eps: float, n: int) -> "PenaltyParams":
        return cls(p, np.full(n, float(eps)))


def _check_len(x: np.ndarray, params: PenaltyParams) -> None:
    if x.shape[0] != params.epsilon.shape[0]:
        raise ContractError(
            f"x has length {x.shape[0]} but epsilon has length {params.epsilon.shape[0]}"
        )


def weighted_l1(x, y, params: PenaltyParams) -> float:
    """sum_i |x_i| / (|y_i| + eps_i)^(1-p); the penalty with weights frozen at ``y``."""
    x = as_vector(x)
    y = as_vector(y, "y")
    _check_len(x, params)
    _check_len(y, params)
    return float(np.sum(np.abs(x) / (np.abs(y) + params.epsilon) ** (1.0 - params.p)))


def modified_penalty(x, params: PenaltyParams) -> float:
    r"""Evaluate :math:`\sum_i |x_i| / (|x_i| + \epsilon_i)^{1-p}`.

    Bounded above by :math:`\|x\|_p^p` and tends to it as every
    :math:`\epsilon_i \to 0^+`.
    """
    return weighted_l1(x, x, params)


def _residual_sq(A, b, x) -> float:
    A = as_matrix(A)
    x = as_vector(x)
    b = as_vector(b, "b")
    if A.cols != x.shape[0] or A.rows != b.shape[0]:
        raise ContractError(f"inconsistent shapes: A {A.shape}, x {x.shape}, b {b.shape}")
    r = A.data @ x - b
    return float(r @ r)


def objective_h1(A, b, x, lam: float, params: PenaltyParams) -> float:
    """||Ax - b||^2 + lam * modified_penalty(x)."""
    return _residual_sq(A, b, x) + lam * modified_penalty(x, params)


def surrogate_h2(A, b, x, y, lam: float, mu: float, params: PenaltyParams) -> float:
    """Majorizing surrogate of ``mu * objective_h1`` anchored at ``y``.

    Equals ``mu * objective_h1(x)`` when ``x == y``.
    """
    A = as_matrix(A)
    x = as_vector(x)
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise ContractError(f"x and y differ in shape: {x.shape} vs {y.shape}")
    d = x - y
    Ad = A.data @ d
    return (
        mu * _residual_sq(A, b, x)
        + lam * mu * weighted_l1(x, y, params)
        - mu * float(Ad @ Ad)
        + float(d @ d)
    )
