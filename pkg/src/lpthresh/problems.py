"""Seeded synthetic recovery instances and their on-disk format."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lpthresh.errors import ContractError
from lpthresh.linalg import DenseMatrix

GENERATOR_ID = "numpy.PCG64"
NORMAL_METHOD_ID = "numpy.ziggurat"
VALUE_DISTRIBUTIONS = ("gaussian", "rademacher")

MAGIC = b"LPTHINST"
FORMAT_VERSION = 1
# magic, version, m, n, r, seed, distribution code
_HEADER = struct.Struct("<8sI3Qq B")
_TEXT = struct.Struct("<H")


@dataclass(frozen=True)
class ProblemInstance:
    A: DenseMatrix
    b: np.ndarray
    x0: np.ndarray
    sparsity: int
    seed: int
    distribution: str = "gaussian"

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def n(self) -> int:
        return self.A.cols


def derive_seed(*parts: int) -> int:
    """Stable 63-bit child seed from integer parts (e.g. master seed, r, trial)."""
    h = hashlib.blake2b(":".join(str(int(p)) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def _check_dims(m: int, n: int, r: int) -> None:
    if m < 1 or n < 1 or r < 1:
        raise ContractError(f"dimensions must be positive: m={m}, n={n}, r={r}")
    if r > m:
        raise ContractError(f"sparsity r={r} exceeds the number of measurements m={m}")
    if m >= n:
        raise ContractError(f"system must be underdetermined: m={m} >= n={n}")


def generate_instance(m: int, n: int, r: int, seed: int, distribution: str = "gaussian") -> ProblemInstance:
    """Gaussian ``A`` (m x n), r-sparse ``x0`` at uniformly random positions, ``b = A x0``."""
    _check_dims(m, n, r)
    if distribution not in VALUE_DISTRIBUTIONS:
        raise ContractError(f"unknown distribution {distribution!r}; choose from {VALUE_DISTRIBUTIONS}")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.standard_normal((m, n))
    support = rng.choice(n, size=r, replace=False)
    if distribution == "gaussian":
        vals = rng.standard_normal(r)
        # a zero draw would break ||x0||_0 = r; redraw (probability ~0)
        while np.any(vals == 0.0):
            vals[vals == 0.0] = rng.standard_normal(int(np.sum(vals == 0.0)))
    else:
        vals = rng.choice(np.array([-1.0, 1.0]), size=r)
    x0 = np.zeros(n)
    x0[support] = vals
    A = DenseMatrix(a)
    return ProblemInstance(A=A, b=A.data @ x0, x0=x0, sparsity=r, seed=seed, distribution=distribution)


def _pack_text(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _TEXT.pack(len(raw)) + raw


def instance_bytes(inst: ProblemInstance) -> bytes:
    dist_code = VALUE_DISTRIBUTIONS.index(inst.distribution)
    parts = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, inst.m, inst.n, inst.sparsity, inst.seed, dist_code),
        _pack_text(GENERATOR_ID),
        _pack_text(NORMAL_METHOD_ID),
        inst.A.data.astype("<f8").tobytes(order="C"),
        inst.x0.astype("<f8").tobytes(),
    ]
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_instance(inst: ProblemInstance, path) -> str:
    """Write ``inst`` to ``path``; returns the hex SHA-256 of the file.

    Layout (little endian): header (magic, version, m, n, r, seed,
    value-distribution code), generator and normal-method ids as
    length-prefixed UTF-8, row-major ``A`` and ``x0`` as float64, then a
    SHA-256 of everything before it. ``b`` is not stored.
    """
    data = instance_bytes(inst)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_instance(path) -> ProblemInstance:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + 32:
        raise ContractError(f"{path}: file too short to be an instance")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ContractError(f"{path}: checksum mismatch")
    magic, version, m, n, r, seed, dist_code = _HEADER.unpack_from(body, 0)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ContractError(f"{path}: not a version-{FORMAT_VERSION} instance file")
    off = _HEADER.size
    ids = []
    for _ in range(2):
        (ln,) = _TEXT.unpack_from(body, off)
        off += _TEXT.size
        ids.append(body[off:off + ln].decode("utf-8"))
        off += ln
    if ids != [GENERATOR_ID, NORMAL_METHOD_ID]:
        log_ids = ", ".join(ids)
        raise ContractError(f"{path}: unsupported generator ids ({log_ids})")
    expected = off + 8 * (m * n + n)
    if len(body) != expected:
        raise ContractError(f"{path}: payload length {len(body)} does not match m={m}, n={n}")
    a = np.frombuffer(body, dtype="<f8", count=m * n, offset=off).reshape(m, n)
    x0 = np.frombuffer(body, dtype="<f8", count=n, offset=off + 8 * m * n).astype(np.float64)
    _check_dims(m, n, r)
    if np.count_nonzero(x0) != r:
        raise ContractError(f"{path}: x0 has {np.count_nonzero(x0)} nonzeros, header says {r}")
    A = DenseMatrix(a)
    b = A.data @ x0
    if not np.all(np.isfinite(b)):
        raise ContractError(f"{path}: recomputed observation is not finite")
    return ProblemInstance(A=A, b=b, x0=x0, sparsity=r, seed=seed, distribution=VALUE_DISTRIBUTIONS[dist_code])
