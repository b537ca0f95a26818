"""Dense linear-algebra primitives shared by the solvers."""

from __future__ import annotations

import threading

import numpy as np

from lpthresh.errors import ContractError

POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 10_000
POWER_ITER_SEED = 0x5EED


class DenseMatrix:
    """Row-major float64 matrix with a lazily cached spectral norm.

    The wrapped array is made read-only so that a matrix can be shared
    between concurrent solves without copying.
    """

    __slots__ = ("_data", "_norm", "_lock")

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ContractError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ContractError("matrix entries must be finite")
        arr.flags.writeable = False
        self._data = arr
        self._norm: float | None = None
        self._lock = threading.Lock()

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def spectral_norm_cache(self) -> float | None:
        return self._norm

    def spectral_norm(self) -> float:
        if self._norm is None:
            with self._lock:
                if self._norm is None:
                    self._norm = _power_iteration(self._data)
        return self._norm

    def __repr__(self) -> str:
        return f"DenseMatrix({self.rows}x{self.cols})"

    def __getstate__(self):
        return {"data": self._data, "norm": self._norm}

    def __setstate__(self, state):
        arr = np.array(state["data"], dtype=np.float64, order="C")
        arr.flags.writeable = False
        self._data = arr
        self._norm = state["norm"]
        self._lock = threading.Lock()


def as_matrix(A) -> DenseMatrix:
    return A if isinstance(A, DenseMatrix) else DenseMatrix(A)


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x``."""
    A = as_matrix(A)
    x = as_vector(x)
    if x.shape[0] != A.cols:
        raise ContractError(f"matvec: A has {A.cols} columns but x has length {x.shape[0]}")
    return A.data @ x


def matvec_transpose(A, y) -> np.ndarray:
    """Return ``A.T @ y``."""
    A = as_matrix(A)
    y = as_vector(y, "y")
    if y.shape[0] != A.rows:
        raise ContractError(f"matvec_transpose: A has {A.rows} rows but y has length {y.shape[0]}")
    return A.data.T @ y


def _power_iteration(a: np.ndarray) -> float:
    # Power iteration on A^T A; stops when successive Rayleigh quotients agree
    # to POWER_ITER_TOL relative to the current estimate.
    if not np.any(a):
        return 0.0
    rng = np.random.default_rng(POWER_ITER_SEED)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(POWER_ITER_MAX):
        w = a.T @ (a @ v)
        rq = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector fell in the null space; restart from a fresh draw
            v = rng.standard_normal(a.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if abs(rq - prev) <= POWER_ITER_TOL * rq:
            break
        prev = rq
    return float(np.sqrt(max(rq, 0.0)))


def spectral_norm(A) -> float:
    """Largest singular value of ``A``, cached on the matrix.

    A zero matrix yields 0.0; callers that divide by the norm must reject it.
    """
    return as_matrix(A).spectral_norm()


def nonincreasing_rearrangement(x) -> np.ndarray:
    """Absolute values of ``x`` sorted in nonincreasing order.

    Ties keep their original index order (stable sort).
    """
    a = np.abs(as_vector(x))
    order = np.argsort(-a, kind="stable")
    return a[order]
