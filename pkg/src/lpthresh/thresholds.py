"""Thresholding operators.

Each operator is the exact minimizer of a one-dimensional problem
``(alpha - beta)**2 + lam * penalty(alpha)``. They accept scalars or numpy
arrays and broadcast elementwise; scalar input gives a Python float back.
"""

from __future__ import annotations

import numpy as np

# Half-thresholding dead-zone boundary is HALF_KNEE * lam**(2/3).
HALF_KNEE = 54.0 ** (1.0 / 3.0) / 4.0


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def soft_threshold(beta, lam):
    """argmin_a (a - beta)^2 + lam * |a|, i.e. sign(beta) * max(|beta| - lam/2, 0)."""
    beta = np.asarray(beta, dtype=np.float64)
    return _out(np.sign(beta) * np.maximum(np.abs(beta) - 0.5 * np.asarray(lam, dtype=np.float64), 0.0))


def it_coordinate_update(b_mu_i, x_prev_i, lam, mu, p, epsilon_i):
    """One coordinate of the IT iteration.

    Soft thresholding of ``b_mu_i`` with the weight
    ``lam * mu / (|x_prev_i| + epsilon_i)**(1 - p)``.
    """
    weight = lam * mu / (np.abs(x_prev_i) + epsilon_i) ** (1.0 - p)
    return soft_threshold(b_mu_i, weight)


def half_threshold(beta, lam):
    """argmin_a (a - beta)^2 + lam * |a|^(1/2).

    Uses the closed-form cubic root of the stationarity condition. On the
    dead-zone boundary, where zero and a nonzero point tie, zero is returned.
    """
    beta = np.asarray(beta, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    abeta = np.abs(beta)
    knee = HALF_KNEE * lam ** (2.0 / 3.0)
    keep = abeta > knee
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(keep, (lam / 8.0) * (abeta / 3.0) ** -1.5, 1.0)
    phi = np.arccos(np.clip(arg, -1.0, 1.0))
    val = (2.0 / 3.0) * beta * (1.0 + np.cos(2.0 * np.pi / 3.0 - (2.0 / 3.0) * phi))
    return _out(np.where(keep, val, 0.0))


def half_lambda_for_knee(tau: float) -> float:
    """Weight ``lam`` whose half-thresholding dead zone ends exactly at ``tau``."""
    return (tau / HALF_KNEE) ** 1.5
