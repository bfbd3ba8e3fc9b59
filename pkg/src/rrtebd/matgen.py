"""Structured test matrices ``U diag(sigma) V^H`` with a prescribed spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
from scipy.optimize import brentq

from .linalg import ContractViolation, qr
from .rrsvd import SeedLike, gaussian_test_matrix

__all__ = [
    "SpectrumSpec",
    "StructuredInstance",
    "random_orthonormal",
    "structured_matrix",
    "spectrum_exponential",
    "spectrum_power",
    "discarded_weight",
    "frobenius_tail",
    "calibrate_exponential_ratio",
    "write_spectrum",
    "read_spectrum",
]


@dataclass
class SpectrumSpec:
    values: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ContractViolation("spectrum must not be empty")
        if not np.isfinite(v).all() or (v < 0).any():
            raise ContractViolation("spectrum values must be finite and non-negative")
        if (np.diff(v) > 0).any():
            raise ContractViolation("spectrum must be non-increasing")
        self.values = v

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, idx):
        return self.values[idx]


@dataclass
class StructuredInstance:
    matrix: np.ndarray
    spectrum: SpectrumSpec
    u_seed: int
    v_seed: int
    u: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)


def random_orthonormal(m: int, n: int, seed: SeedLike) -> np.ndarray:
    """Haar-distributed ``m x n`` matrix with orthonormal columns.

    QR of a complex Gaussian matrix, with the phases of ``R``'s diagonal
    pushed into ``Q`` so the distribution does not depend on the QR sign
    convention.
    """
    if m < n:
        raise ContractViolation(f"random_orthonormal needs m >= n, got {m}x{n}")
    q, r = qr(gaussian_test_matrix(m, n, seed))
    d = np.diagonal(r)
    phase = np.where(d == 0, 1.0, d / np.where(d == 0, 1.0, np.abs(d)))
    return q * phase


def structured_matrix(spec: SpectrumSpec, m: int, u_seed: int, v_seed: int) -> StructuredInstance:
    n = len(spec)
    if m < n:
        raise ContractViolation(f"need m >= len(spec), got m={m}, len={n}")
    u = random_orthonormal(m, n, u_seed)
    v = random_orthonormal(n, n, v_seed)
    a = (u * spec.values) @ v.conj().T
    return StructuredInstance(np.ascontiguousarray(a), spec, u_seed, v_seed, u, v)


def spectrum_exponential(n: int, ratio: float) -> SpectrumSpec:
    """``sigma_j = ratio^(j-1)`` scaled to unit sum of squares."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    if not 0.0 < ratio < 1.0:
        raise ContractViolation(f"ratio must lie in (0, 1), got {ratio}")
    s = ratio ** np.arange(n, dtype=float)
    return SpectrumSpec(s / np.linalg.norm(s), f"exp:{ratio!r}")


def spectrum_power(n: int) -> SpectrumSpec:
    """``sigma_j = 1/j``, unnormalized."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    return SpectrumSpec(1.0 / np.arange(1, n + 1, dtype=float), "power")


def discarded_weight(spec, k: int) -> float:
    """Squared tail beyond index ``k`` relative to the total squared mass."""
    s = np.asarray(getattr(spec, "values", spec), dtype=float)
    if not 0 <= k <= s.size:
        raise ContractViolation(f"k={k} outside [0, {s.size}]")
    total = float(np.sum(s**2))
    if total == 0.0:
        return 0.0
    # summed smallest-first for accuracy in the far tail
    return float(np.sum(s[k:][::-1] ** 2)) / total


def frobenius_tail(spec, k: int) -> float:
    """Unnormalized optimal rank-``k`` Frobenius error ``sqrt(sum_{j>k} sigma_j^2)``."""
    s = np.asarray(getattr(spec, "values", spec), dtype=float)
    if not 0 <= k <= s.size:
        raise ContractViolation(f"k={k} outside [0, {s.size}]")
    return math.sqrt(float(np.sum(s[k:][::-1] ** 2)))


def calibrate_exponential_ratio(n: int, k: int, target_weight: float) -> float:
    """Ratio for which ``spectrum_exponential(n, ratio)`` has the given weight beyond ``k``."""
    if not 0 < k < n:
        raise ContractViolation("need 0 < k < n")

    # closed form of the geometric tail ratio, in logs so tiny weights stay finite
    def f(r):
        lr2 = 2.0 * math.log(r)
        return (
            k * lr2
            + math.log1p(-math.exp((n - k) * lr2))
            - math.log1p(-math.exp(n * lr2))
            - math.log(target_weight)
        )

    return brentq(f, 1e-12, 1 - 1e-12, xtol=1e-15, rtol=1e-15)


def write_spectrum(path: str | PathLike, spec: SpectrumSpec) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for x in spec.values:
            fh.write(f"{float(x)!r}\n")


def read_spectrum(path: str | PathLike, label: str | None = None) -> SpectrumSpec:
    with open(path, encoding="ascii") as fh:
        values = [float(line) for line in fh if line.strip()]
    return SpectrumSpec(np.array(values), label or str(path))
