"""Reduced-rank randomized SVD.

The range of ``A`` is sketched with a complex Gaussian test matrix,
sharpened by ``q`` power iterations with a QR re-orthogonalization after
every product, and the SVD of the small projected matrix ``Q^H A`` is
lifted back through ``Q``. A probe-based accuracy loop grows the basis
until a requested operator-norm tolerance is met (fixed-precision mode).

The closed-form error predictors for the fixed-rank sketch live here as
well, so callers can compare observed residuals against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .linalg import (
    ContractViolation,
    SvdResult,
    as_dense,
    frobenius_norm,
    qr,
    svd_full,
)

__all__ = [
    "RrsvdParams",
    "RangeBasis",
    "AccuracyCheckParams",
    "ErrorBoundReport",
    "PROBE_FACTOR",
    "make_rng",
    "gaussian_test_matrix",
    "randomized_range_finder",
    "project_svd",
    "rrsvd_fixed_rank",
    "rrsvd_fixed_precision",
    "accuracy_check",
    "error_bound_report",
    "frobenius_cap",
    "residual_frobenius",
    "certified_rank",
]

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]

# ||M|| <= PROBE_FACTOR * max_i ||M w_i|| with probability >= 1 - 10^-r
PROBE_FACTOR = 10.0 * math.sqrt(2.0 / math.pi)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator from an integer seed, a SeedSequence or a Generator.

    An existing generator is passed through, so a caller can thread one
    stream through several draws. ``None`` is rejected: every random draw in
    this package is reproducible from a caller-provided seed.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ContractViolation("a seed is required")
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_test_matrix(n: int, l: int, seed: SeedLike) -> np.ndarray:
    """``n x l`` matrix whose real and imaginary parts are i.i.d. N(0, 1)."""
    if not n >= l >= 1:
        raise ContractViolation(f"need n >= l >= 1, got n={n}, l={l}")
    rng = make_rng(seed)
    out = np.empty((n, l), dtype=np.complex128)
    out.real = rng.standard_normal((n, l))
    out.imag = rng.standard_normal((n, l))
    return out


@dataclass(frozen=True)
class RrsvdParams:
    target_rank: int
    oversampling: int
    power_iterations: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.target_rank < 2:
            raise ContractViolation("target rank k must be >= 2")
        if self.oversampling < 2:
            raise ContractViolation("oversampling p must be >= 2")
        if self.power_iterations < 0:
            raise ContractViolation("power iterations q must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")

    @property
    def sketch_size(self) -> int:
        return self.target_rank + self.oversampling

    def check_shape(self, shape: tuple[int, int]) -> None:
        if self.sketch_size > min(shape):
            raise ContractViolation(
                f"k + p = {self.sketch_size} exceeds min(m, n) = {min(shape)}"
            )


@dataclass
class RangeBasis:
    q_matrix: np.ndarray

    @property
    def l(self) -> int:
        return self.q_matrix.shape[1]


@dataclass(frozen=True)
class AccuracyCheckParams:
    """Settings of the probe-based accuracy loop.

    ``growth`` is the number of columns added after a failed round, either
    a fixed block size or a function of the current basis size; the
    default doubles the basis.
    """

    tolerance: float
    probe_count: int = 10
    growth: int | Callable[[int], int] | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ContractViolation("tolerance must be positive")
        if self.probe_count < 1:
            raise ContractViolation("probe count r must be >= 1")
        if isinstance(self.growth, int) and self.growth < 1:
            raise ContractViolation("growth block must be >= 1")

    def grow(self, l: int) -> int:
        if self.growth is None:
            g = l
        elif callable(self.growth):
            g = int(self.growth(l))
        else:
            g = int(self.growth)
        if g < 1:
            raise ContractViolation("growth block must be >= 1")
        return g


@dataclass(frozen=True)
class ErrorBoundReport:
    expected_bound: float
    tail_bound: float
    failure_probability: float
    frobenius_cap: float | None


def randomized_range_finder(a, l: int, q: int, seed: SeedLike) -> RangeBasis:
    """Orthonormal ``m x l`` basis for the dominant range of ``a``.

    Power iterations alternate between ``a^H`` and ``a``; every product is
    re-orthogonalized, otherwise the directions of small singular values
    are lost to rounding after a couple of iterations.
    """
    a = as_dense(a)
    m, n = a.shape
    if not 1 <= l <= min(m, n):
        raise ContractViolation(f"sketch size l={l} must lie in [1, min(m, n)={min(m, n)}]")
    if q < 0:
        raise ContractViolation("q must be >= 0")
    omega = gaussian_test_matrix(n, l, seed)
    basis = qr(a @ omega).q
    if q:
        ah = a.conj().T
        for _ in range(q):
            basis = qr(ah @ basis).q
            basis = qr(a @ basis).q
    return RangeBasis(basis)


def project_svd(a: np.ndarray, basis: np.ndarray, a_fro: float | None = None) -> SvdResult:
    """SVD of ``a`` restricted to ``range(basis)``: factor ``basis^H a``, lift ``U`` back."""
    if a_fro is None:
        a_fro = frobenius_norm(a)
    small = svd_full(basis.conj().T @ a)
    u = basis @ small.u
    return SvdResult(u, small.sigma, small.v, _weight(small.sigma, a_fro), small.sigma.size)


def _weight(sigma: np.ndarray, a_fro: float) -> float:
    if a_fro == 0.0:
        return 0.0
    kept = float(np.sum((sigma / a_fro) ** 2))
    return max(0.0, 1.0 - kept)


def rrsvd_fixed_rank(a, params: RrsvdParams) -> SvdResult:
    """Rank-``k`` truncated SVD from a ``(k + p)``-column randomized sketch."""
    a = as_dense(a)
    params.check_shape(a.shape)
    basis = randomized_range_finder(a, params.sketch_size, params.power_iterations, params.seed)
    a_fro = frobenius_norm(a)
    full = project_svd(a, basis.q_matrix, a_fro)
    out = full.truncate(params.target_rank)
    out.discarded_weight = _weight(out.sigma, a_fro)
    return out


def accuracy_check(
    a: np.ndarray,
    basis: np.ndarray,
    check: AccuracyCheckParams,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool, int]:
    """Grow ``basis`` until ``r`` Gaussian probes see a residual below the tolerance.

    Returns ``(basis, certified, rounds)``. Each failed round appends
    ``a @ omega`` for a fresh Gaussian block of ``check.grow(l)`` columns and
    re-orthogonalizes. The basis never grows past ``n - r`` columns; if the
    probes still fail there the result is returned uncertified.
    """
    m, n = a.shape
    r = check.probe_count
    limit = min(m, n - r)
    rounds = 0
    while True:
        rounds += 1
        probes = gaussian_test_matrix(n, r, rng)
        y = a @ probes
        d = y - basis @ (basis.conj().T @ y)
        worst = float(np.max(np.linalg.norm(d, axis=0)))
        if worst <= check.tolerance:
            return basis, True, rounds
        l = basis.shape[1]
        if l >= limit:
            return basis, False, rounds
        g = min(check.grow(l), limit - l)
        block = a @ gaussian_test_matrix(n, g, rng)
        basis = qr(np.hstack([basis, block])).q


def rrsvd_fixed_precision(
    a,
    check: AccuracyCheckParams,
    initial_l: int,
    q: int,
    seed: SeedLike,
) -> SvdResult:
    """Randomized SVD whose basis is grown until the probe test passes.

    On a certified return ``||(I - QQ^H) a|| <= PROBE_FACTOR * tolerance``
    holds with probability at least ``1 - 10^-r``. All ``l`` computed
    singular triplets are returned; ``tolerance_not_certified`` flags a
    loop that hit the size limit without passing.
    """
    a = as_dense(a)
    m, n = a.shape
    if initial_l < 1 or initial_l + check.probe_count > n or initial_l > m:
        raise ContractViolation(
            f"need 1 <= initial_l and initial_l + r <= n (initial_l={initial_l}, "
            f"r={check.probe_count}, shape={a.shape})"
        )
    rng = make_rng(seed)
    basis = randomized_range_finder(a, initial_l, q, rng).q_matrix
    basis, certified, _ = accuracy_check(a, basis, check, rng)
    out = project_svd(a, basis, frobenius_norm(a))
    out.tolerance_not_certified = not certified
    return out


def error_bound_report(sigma: Sequence[float], k: int, p: int, q: int) -> ErrorBoundReport:
    """Expected-error and tail bounds for a ``(k + p)``-column sketch with ``q`` power steps.

    ``sigma`` is the full non-increasing spectrum of the matrix. The
    Frobenius cap is reported only when the spectrum decays at least as
    ``sigma_1 / j``.
    """
    s = np.asarray(getattr(sigma, "values", sigma), dtype=float)
    if k < 2 or p < 2:
        raise ContractViolation("bounds need k >= 2 and p >= 2")
    if k + p > s.size:
        raise ContractViolation("k + p exceeds the spectrum length")
    if q < 0:
        raise ContractViolation("q must be >= 0")
    e = 2 * q + 1
    tail = s[k:]
    s_next = s[k]

    if s_next == 0.0 and not tail.any():
        expected = 0.0
    else:
        # factor out sigma_{k+1} so the high powers do not underflow
        scale = s_next if s_next > 0 else float(tail.max())
        rel = tail / scale
        inner = (1.0 + math.sqrt(k / (p - 1))) * (s_next / scale) ** e + (
            math.e * math.sqrt(k + p) / p
        ) * math.sqrt(float(np.sum(rel ** (2 * e))))
        expected = scale * inner ** (1.0 / e)

    alpha = 1.0 + 6.0 * math.sqrt((k + p) * p * math.log(p))
    beta = 3.0 * math.sqrt(k + p)
    tail_bound = alpha ** (1.0 / e) * s_next + beta ** (1.0 / e) * math.sqrt(float(np.sum(tail**2)))

    j = np.arange(1, s.size + 1)
    cap = frobenius_cap(float(s[0])) if np.all(s <= s[0] / j * (1 + 1e-12)) else None
    return ErrorBoundReport(expected, tail_bound, min(1.0, 3.0 / p**p), cap)


def frobenius_cap(sigma1: float) -> float:
    """Upper bound on ``||A||_F`` for spectra with ``sigma_j <= sigma_1 / j``."""
    if sigma1 < 0:
        raise ContractViolation("sigma1 must be non-negative")
    return sigma1 * math.pi / math.sqrt(6.0)


def residual_frobenius(a, basis: RangeBasis | np.ndarray) -> float:
    """``||(I - QQ^H) a||_F`` from the identity ``||a||_F^2 - ||Q^H a||_F^2``."""
    a = as_dense(a)
    qm = basis.q_matrix if isinstance(basis, RangeBasis) else np.asarray(basis)
    if qm.shape[0] != a.shape[0]:
        raise ContractViolation(f"basis has {qm.shape[0]} rows, matrix has {a.shape[0]}")
    total = frobenius_norm(a)
    projected = qm.conj().T @ a
    captured = frobenius_norm(projected)
    if total - captured < 1e-8 * total:
        # the difference of squares has lost most digits here; project explicitly
        return frobenius_norm(a - qm @ projected)
    return math.sqrt(max(0.0, (total - captured) * (total + captured)))


def certified_rank(sigma: Sequence[float], a_fro: float, rel_tol: float) -> int:
    """Smallest ``k`` whose truncation error is provably below ``rel_tol * ||A||_F``.

    Uses ``||A||_F^2 - sum_{i<=k} sigma_i^2`` as the squared error. With
    ``sigma`` from a projected factorization this over-estimates the
    optimal tail (interlacing), so the returned rank is conservative.
    Returns ``len(sigma) + 1`` if no prefix qualifies.
    """
    s = np.asarray(sigma, dtype=float)
    if a_fro == 0.0:
        return 0
    remaining = 1.0 - np.concatenate([[0.0], np.cumsum((s / a_fro) ** 2)])
    ok = np.flatnonzero(np.sqrt(np.clip(remaining, 0.0, None)) < rel_tol)
    return int(ok[0]) if ok.size else s.size + 1
