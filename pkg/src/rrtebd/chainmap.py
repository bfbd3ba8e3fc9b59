"""Chain mapping of a bosonic bath onto a nearest-neighbour chain.

The bath measure ``h(x)^2 dx`` is discretized on a grid; the discrete
Stieltjes procedure (run as Lanczos on ``diag(x)`` with full
re-orthogonalization) yields the monic three-term recurrence
coefficients ``alpha_n, beta_n``. The chain frequencies are
``omega_n = alpha_n``, hoppings ``t_n = sqrt(beta_{n+1})`` and the
system-chain coupling is ``t0 = sqrt(beta_0)`` with ``beta_0`` the total
weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np

from .linalg import ContractViolation, NumericFailure

__all__ = [
    "MeasureGrid",
    "ChainCoefficients",
    "SpectralDensityInput",
    "ChainBreakdown",
    "measure_from_density",
    "fejer_measure",
    "spectral_density",
    "stieltjes_coefficients",
    "recurrence_coefficients",
    "polynomial_basis",
    "ladder_operators",
    "build_chain_terms",
    "read_measure",
    "write_measure",
    "read_coefficients",
    "write_coefficients",
]


class ChainBreakdown(NumericFailure):
    """The recurrence produced a non-positive ``beta_n``."""

    def __init__(self, index: int, value: float):
        super().__init__(f"Stieltjes breakdown at n={index}: beta={value:.3e}")
        self.index = index
        self.value = value


@dataclass
class MeasureGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.size != w.size or x.size == 0:
            raise ContractViolation("nodes and weights must be non-empty and of equal length")
        if np.any(np.diff(x) <= 0):
            raise ContractViolation("nodes must be strictly increasing")
        if np.any(w < 0) or not w.sum() > 0:
            raise ContractViolation("weights must be non-negative with positive total")
        self.nodes, self.weights = x, w

    def __len__(self) -> int:
        return self.nodes.size


@dataclass
class ChainCoefficients:
    t0: float
    omegas: np.ndarray
    hoppings: np.ndarray

    @property
    def n_chain(self) -> int:
        return self.omegas.size


@dataclass
class SpectralDensityInput:
    """Dispersion ``g`` and coupling ``h`` sampled on a common grid ``x``."""

    x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    x_max: float | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if not (self.x.shape == self.g.shape == self.h.shape) or self.x.ndim != 1:
            raise ContractViolation("x, g and h must be 1-D arrays of equal length")
        if self.x_max is None:
            self.x_max = float(self.x[-1])


def measure_from_density(x, h2) -> MeasureGrid:
    """Trapezoidal discretization of ``h2(x) dx`` on the grid ``x``."""
    x = np.asarray(x, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if x.shape != h2.shape or x.size < 2:
        raise ContractViolation("need at least two grid points with matching density samples")
    dx = np.diff(x)
    cell = np.zeros_like(x)
    cell[:-1] += 0.5 * dx
    cell[1:] += 0.5 * dx
    return MeasureGrid(x, h2 * cell)


def fejer_measure(density, a: float, b: float, n_nodes: int) -> MeasureGrid:
    """Fejér (first rule) discretization of ``density(x) dx`` on ``[a, b]``.

    Nodes are Chebyshev points; ``n_nodes`` nodes integrate polynomials up
    to degree ``n_nodes - 1`` exactly, so far fewer nodes than the
    trapezoidal rule are needed for a given accuracy.
    """
    k = np.arange(1, n_nodes + 1)
    theta = (2 * k - 1) * np.pi / (2 * n_nodes)
    j = np.arange(1, n_nodes // 2 + 1)
    w = np.empty(n_nodes)
    for start in range(0, n_nodes, 512):
        th = theta[start:start + 512]
        w[start:start + 512] = (2.0 / n_nodes) * (
            1.0 - 2.0 * np.sum(np.cos(2.0 * np.outer(th, j)) / (4.0 * j**2 - 1.0), axis=1)
        )
    t = np.cos(theta)[::-1]
    w = w[::-1]
    x = a + 0.5 * (b - a) * (t + 1.0)
    return MeasureGrid(x, 0.5 * (b - a) * w * np.asarray(density(x), dtype=float))


def spectral_density(inp: SpectralDensityInput, omega_grid) -> np.ndarray:
    """``J(omega) = pi h^2(g^-1(omega)) d g^-1 / d omega``.

    ``g^-1`` is tabulated by swapping the sample columns; its derivative is
    taken with second-order centered differences on the sample grid and
    then interpolated to ``omega_grid``.
    """
    x, g, h = inp.x, inp.g, inp.h
    dg = np.diff(g)
    if np.all(dg > 0):
        order = slice(None)
    elif np.all(dg < 0):
        order = slice(None, None, -1)
    else:
        raise ContractViolation("dispersion g must be strictly monotone on the grid")
    gs, xs, hs = g[order], x[order], h[order]
    dxdg = np.abs(np.gradient(xs, gs, edge_order=2))
    omega = np.asarray(omega_grid, dtype=float)
    h2 = np.interp(omega, gs, hs**2)
    jac = np.interp(omega, gs, dxdg)
    out = np.pi * h2 * jac
    out[(omega < gs[0]) | (omega > gs[-1])] = 0.0
    return out


def _lanczos(measure: MeasureGrid, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = measure.nodes, measure.weights
    if n < 1:
        raise ContractViolation("need n >= 1")
    if n > len(measure):
        raise ContractViolation(f"cannot build {n} coefficients from {len(measure)} nodes")
    alpha = np.zeros(n)
    beta = np.zeros(n + 1)
    beta[0] = float(w.sum())
    basis = np.zeros((n, x.size))
    v = np.sqrt(w / beta[0])
    # scale of the multiplication operator, for the breakdown test
    scale = max(float(np.max(np.abs(x))), 1.0)
    for k in range(n):
        basis[k] = v
        xv = x * v
        alpha[k] = float(v @ xv)
        r = xv - alpha[k] * v
        if k:
            r -= np.sqrt(beta[k]) * basis[k - 1]
        for _ in range(2):
            r -= basis[: k + 1].T @ (basis[: k + 1] @ r)
        nrm = float(np.linalg.norm(r))
        beta[k + 1] = nrm**2
        if k + 1 < n:
            if nrm <= 1e-14 * scale:
                raise ChainBreakdown(k + 1, beta[k + 1])
            v = r / nrm
    return alpha, beta, basis


def recurrence_coefficients(measure: MeasureGrid, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Monic recurrence coefficients ``alpha_0..alpha_{n-1}``, ``beta_0..beta_n``.

    ``beta_0`` is the total weight. Lanczos vectors are re-orthogonalized
    twice against all previous ones.
    """
    alpha, beta, _ = _lanczos(measure, n)
    return alpha, beta


def polynomial_basis(measure: MeasureGrid, n: int) -> np.ndarray:
    """Orthonormal polynomials ``p_0..p_{n-1}`` on the grid, scaled by ``sqrt(w_i)``.

    Row ``k`` holds ``p_k(x_i) sqrt(w_i)``, so the rows are orthonormal in
    the plain Euclidean inner product.
    """
    return _lanczos(measure, n)[2]


def stieltjes_coefficients(measure: MeasureGrid, n_chain: int) -> ChainCoefficients:
    alpha, beta = recurrence_coefficients(measure, n_chain)
    return ChainCoefficients(float(np.sqrt(beta[0])), alpha, np.sqrt(beta[1:n_chain]))


def ladder_operators(d_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated ``(b, b^dagger, b^dagger b)`` on ``d_max`` levels."""
    if d_max < 2:
        raise ContractViolation("d_max must be >= 2")
    b = np.diag(np.sqrt(np.arange(1, d_max, dtype=float)), 1).astype(complex)
    bd = b.conj().T
    return b, bd, bd @ b


def build_chain_terms(coeffs: ChainCoefficients, d_max: int, system_term, coupling_op) -> list[np.ndarray]:
    """Bond Hamiltonians of ``system - boson_0 - ... - boson_{N-1}``.

    ``system_term`` and ``coupling_op`` act on the system site. Boson
    frequencies are split half/half between the two bonds of a site; the
    system term and the last boson sit on a single bond and take the
    whole share.
    """
    hs = np.asarray(system_term, dtype=complex)
    a_op = np.asarray(coupling_op, dtype=complex)
    ds = hs.shape[0]
    if hs.shape != (ds, ds) or a_op.shape != (ds, ds):
        raise ContractViolation("system term and coupling operator must be square and equal-sized")
    n = coeffs.n_chain
    if n < 1:
        raise ContractViolation("need at least one chain site")
    b, bd, num = ladder_operators(d_max)
    eye_b = np.eye(d_max)
    terms = []
    first_share = 1.0 if n == 1 else 0.5
    h0 = np.kron(hs, eye_b) + coeffs.t0 * np.kron(a_op, b + bd)
    h0 += first_share * coeffs.omegas[0] * np.kron(np.eye(ds), num)
    terms.append(h0)
    for j in range(n - 1):
        left = 0.5
        right = 1.0 if j + 1 == n - 1 else 0.5
        h = coeffs.hoppings[j] * (np.kron(bd, b) + np.kron(b, bd))
        h += left * coeffs.omegas[j] * np.kron(num, eye_b)
        h += right * coeffs.omegas[j + 1] * np.kron(eye_b, num)
        terms.append(h)
    return terms


def read_measure(path: str | PathLike) -> MeasureGrid:
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ContractViolation(f"{path}: expected two columns (node, weight)")
    return MeasureGrid(data[:, 0], data[:, 1])


def write_measure(path: str | PathLike, measure: MeasureGrid) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for x, w in zip(measure.nodes, measure.weights):
            fh.write(f"{float(x)!r} {float(w)!r}\n")


def write_coefficients(path: str | PathLike, coeffs: ChainCoefficients) -> None:
    """Three columns ``n omega_n t_n``; row ``n`` carries the hopping to site ``n+1``.

    A header comment stores ``t0``; the last row's hopping is written as 0.
    """
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# t0 {float(coeffs.t0)!r}\n")
        for n, om in enumerate(coeffs.omegas):
            t = coeffs.hoppings[n] if n < coeffs.hoppings.size else 0.0
            fh.write(f"{n} {float(om)!r} {float(t)!r}\n")


def read_coefficients(path: str | PathLike) -> ChainCoefficients:
    t0 = None
    rows = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "t0":
                    t0 = float(parts[1])
                continue
            rows.append([float(v) for v in line.split()])
    if t0 is None or not rows:
        raise ContractViolation(f"{path}: missing t0 header or coefficient rows")
    data = np.array(rows)
    if data.shape[1] != 3:
        raise ContractViolation(f"{path}: expected three columns (n, omega, t)")
    return ChainCoefficients(t0, data[:, 1].copy(), data[:-1, 2].copy())
