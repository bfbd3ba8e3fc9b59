"""Nearest-neighbour spin Hamiltonians as lists of dense bond terms.

On-site fields are shared evenly between the two bonds touching a site;
end sites put their whole field on their single bond.
"""

from __future__ import annotations

import numpy as np

from .linalg import ContractViolation

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def onsite_shares(n_sites: int) -> list[tuple[float, float]]:
    """Fraction of each site's on-site term given to ``(left site, right site)`` of every bond."""
    if n_sites < 2:
        raise ContractViolation("need at least two sites")
    shares = []
    for b in range(n_sites - 1):
        left = 1.0 if b == 0 else 0.5
        right = 1.0 if b == n_sites - 2 else 0.5
        shares.append((left, right))
    return shares


def ising_terms(n_sites: int, coupling: float = 1.0, field: float = 1.0) -> list[np.ndarray]:
    """Transverse-field Ising chain ``H = -J sum Z Z - h sum X``."""
    terms = []
    for left, right in onsite_shares(n_sites):
        h = -coupling * np.kron(SZ, SZ)
        h -= field * (left * np.kron(SX, I2) + right * np.kron(I2, SX))
        terms.append(h)
    return terms


def heisenberg_terms(n_sites: int, coupling: float = 1.0, field: float = 0.0) -> list[np.ndarray]:
    """Heisenberg chain ``H = J sum (XX + YY + ZZ) + h sum Z``."""
    xx = np.kron(SX, SX) + np.kron(SY, SY) + np.kron(SZ, SZ)
    terms = []
    for left, right in onsite_shares(n_sites):
        h = coupling * xx
        if field:
            h = h + field * (left * np.kron(SZ, I2) + right * np.kron(I2, SZ))
        terms.append(h)
    return terms


def spin_up(n_sites: int) -> list[np.ndarray]:
    return [np.array([1.0, 0.0], dtype=complex) for _ in range(n_sites)]


def neel(n_sites: int) -> list[np.ndarray]:
    up = np.array([1.0, 0.0], dtype=complex)
    down = np.array([0.0, 1.0], dtype=complex)
    return [up if k % 2 == 0 else down for k in range(n_sites)]
