"""Dense complex linear algebra shared by every other module.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype ``complex128``
stored in C (row-major) order. The module provides the handful of
primitives the randomized SVD and the TEBD code are built on: products,
adjoints, a blocked Householder QR, a reference SVD and the two matrix
norms, plus reader/writer for the ``RRSM`` binary matrix format.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from os import PathLike

import numpy as np
import scipy.linalg as sla

__all__ = [
    "ContractViolation",
    "NumericFailure",
    "QrFactors",
    "SvdResult",
    "as_dense",
    "matmul",
    "adjoint",
    "qr",
    "svd_full",
    "operator_norm_estimate",
    "frobenius_norm",
    "write_rrsm",
    "read_rrsm",
]

DTYPE = np.complex128

# Panel width of the blocked Householder QR.
QR_BLOCK = 32


class ContractViolation(ValueError):
    """An argument violates the documented preconditions of an operation."""


class NumericFailure(RuntimeError):
    """An iterative numerical kernel did not converge."""

    def __init__(self, message: str, shape: tuple[int, ...] | None = None):
        if shape is not None:
            message = f"{message} (matrix shape {shape[0]}x{shape[1]})"
        super().__init__(message)
        self.shape = shape


@dataclass
class QrFactors:
    """Thin QR factors ``a = q @ r`` with ``q`` of shape (m, l)."""

    q: np.ndarray
    r: np.ndarray

    def __iter__(self):
        return iter((self.q, self.r))


@dataclass
class SvdResult:
    """A full or truncated factorization ``a ~ u @ diag(sigma) @ v^H``.

    ``v`` holds the right singular vectors as columns (shape ``(n, k)``),
    not its adjoint. ``discarded_weight`` is the squared Frobenius mass
    that the factorization does not reproduce, relative to ``||a||_F^2``.
    ``tolerance_not_certified`` is only ever set by the fixed-precision
    solver when its accuracy loop ran out of room.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    discarded_weight: float = 0.0
    achieved_rank: int = 0
    tolerance_not_certified: bool = False

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.conj().T

    def truncate(self, k: int) -> "SvdResult":
        """Leading-``k`` part; the discarded weight is left for the caller to set."""
        k = min(k, self.sigma.size)
        return SvdResult(
            self.u[:, :k],
            self.sigma[:k],
            self.v[:, :k],
            discarded_weight=self.discarded_weight,
            achieved_rank=k,
            tolerance_not_certified=self.tolerance_not_certified,
        )


def as_dense(a, *, check_finite: bool = True) -> np.ndarray:
    """Coerce ``a`` to a C-ordered complex128 2-D array."""
    arr = np.ascontiguousarray(a, dtype=DTYPE)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ContractViolation(f"expected a 2-D matrix, got shape {arr.shape}")
    if check_finite and not np.isfinite(arr).all():
        raise ContractViolation("matrix has non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_dense(a, check_finite=False)
    b = as_dense(b, check_finite=False)
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a) -> np.ndarray:
    return np.ascontiguousarray(as_dense(a, check_finite=False).conj().T)


def _house(x: np.ndarray) -> tuple[np.ndarray | None, complex]:
    """Unit reflector ``v`` with ``(I - 2 v v^H) x = beta e_1``.

    Returns ``(None, 0)`` for an exactly zero vector.
    """
    alpha = np.linalg.norm(x)
    if alpha == 0.0:
        return None, 0.0
    x0 = x[0]
    phase = x0 / abs(x0) if x0 != 0 else 1.0
    v = x.copy()
    v[0] += phase * alpha
    v /= np.linalg.norm(v)
    return v, -phase * alpha


def _panel(r: np.ndarray, j0: int, j1: int) -> tuple[np.ndarray, np.ndarray]:
    """Factor columns ``j0:j1`` of ``r`` in place; return ``(V, T)``.

    The panel's reflectors satisfy ``H_j0 ... H_{j1-1} = I - V T V^H``
    (compact WY form) with ``V`` living on rows ``j0:``.
    """
    m = r.shape[0]
    b = j1 - j0
    vmat = np.zeros((m - j0, b), dtype=DTYPE)
    tmat = np.zeros((b, b), dtype=DTYPE)
    for c in range(b):
        j = j0 + c
        v, beta = _house(r[j:, j])
        if v is None:
            continue
        # apply H to the rest of the panel
        block = r[j:, j + 1:j1]
        if block.size:
            block -= 2.0 * np.outer(v, v.conj() @ block)
        r[j, j] = beta
        r[j + 1:, j] = 0.0
        vmat[c:, c] = v
        if c:
            tmat[:c, c] = -2.0 * (tmat[:c, :c] @ (vmat[:, :c].conj().T @ vmat[:, c]))
        tmat[c, c] = 2.0
    return vmat, tmat


def qr(a) -> QrFactors:
    """Thin Householder QR of a tall matrix.

    Blocked: panels of ``QR_BLOCK`` columns are reduced one reflector at a
    time and the trailing matrix is updated with the compact WY form, so
    the bulk of the work runs in matrix-matrix products. Rank-deficient
    input is allowed; ``q`` stays orthonormal and ``r`` picks up (near-)zero
    diagonal entries.
    """
    r = as_dense(a).copy()
    m, n = r.shape
    if m < n:
        raise ContractViolation(f"qr needs rows >= cols, got {m}x{n}")
    panels = []
    for j0 in range(0, n, QR_BLOCK):
        j1 = min(j0 + QR_BLOCK, n)
        vmat, tmat = _panel(r, j0, j1)
        trail = r[j0:, j1:]
        if trail.size:
            # (I - V T V^H)^H applied from the left
            trail -= vmat @ (tmat.conj().T @ (vmat.conj().T @ trail))
        panels.append((j0, vmat, tmat))

    q = np.eye(m, n, dtype=DTYPE)
    for j0, vmat, tmat in reversed(panels):
        sub = q[j0:, j0:]
        sub -= vmat @ (tmat @ (vmat.conj().T @ sub))
    return QrFactors(q, np.triu(r[:n, :]))


def svd_full(a) -> SvdResult:
    """Reference (economy) SVD through LAPACK.

    ``gesdd`` is tried first; ``gesvd`` is the fallback when divide and
    conquer fails to converge.
    """
    a = as_dense(a)
    m, n = a.shape
    if a.size == 0:
        k = 0
        return SvdResult(np.zeros((m, k), DTYPE), np.zeros(k), np.zeros((n, k), DTYPE), 0.0, 0)
    try:
        u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        try:
            u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericFailure("SVD did not converge", (m, n)) from exc
    return SvdResult(u, s, np.ascontiguousarray(vh.conj().T), 0.0, min(m, n))


def operator_norm_estimate(a) -> float:
    """Largest singular value of ``a``."""
    a = as_dense(a)
    if a.size == 0:
        return 0.0
    return float(sla.svdvals(a, check_finite=False)[0])


def frobenius_norm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    # scaled to avoid overflow/underflow in the squares
    scale = float(np.max(np.abs(a)))
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    b = a / scale
    return scale * math.sqrt(float(np.vdot(b, b).real))


# ---------------------------------------------------------------------------
# RRSM v1 matrix files

RRSM_MAGIC = b"RRSM"
RRSM_VERSION = 1
RRSM_COMPLEX_DOUBLE = 0
_HEADER = struct.Struct("<4sIBQQ")


def write_rrsm(path: str | PathLike, a) -> None:
    """Write ``a`` as an RRSM v1 file (complex double, row-major, little-endian)."""
    a = as_dense(a)
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RRSM_MAGIC, RRSM_VERSION, RRSM_COMPLEX_DOUBLE, rows, cols))
        fh.write(a.astype("<c16", copy=False).tobytes(order="C"))


def read_rrsm(path: str | PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ContractViolation(f"{path}: truncated RRSM header")
        magic, version, dtype, rows, cols = _HEADER.unpack(head)
        if magic != RRSM_MAGIC:
            raise ContractViolation(f"{path}: bad magic {magic!r}")
        if version != RRSM_VERSION:
            raise ContractViolation(f"{path}: unsupported RRSM version {version}")
        if dtype != RRSM_COMPLEX_DOUBLE:
            raise ContractViolation(f"{path}: unsupported dtype code {dtype}")
        payload = fh.read()
    expected = rows * cols * 16
    if len(payload) != expected:
        raise ContractViolation(f"{path}: expected {expected} data bytes, found {len(payload)}")
    a = np.frombuffer(payload, dtype="<c16").reshape(rows, cols).astype(DTYPE)
    if not np.isfinite(a).all():
        raise ContractViolation(f"{path}: matrix has non-finite entries")
    return a
