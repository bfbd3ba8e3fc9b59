"""Pure-state TEBD on matrix product states in Vidal (Gamma-lambda) form.

Conventions
-----------
* Sites are numbered ``0 .. N-1``; bond ``b`` joins sites ``b`` and ``b+1``
  and carries the Schmidt vector ``lambdas[b]``.
* ``gammas[k]`` has shape ``(chi_left, d_k, chi_right)``.
* Time evolution is ``exp(-i H t)``.
* A two-site tensor is stored in ``(alpha, i_k, i_k+1, beta)`` order, so the
  blocked ``(chi_l d_k) x (d_k+1 chi_r)`` matrix is a plain reshape.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from os import PathLike
from typing import Callable, Literal, Sequence

import numpy as np

from .linalg import ContractViolation, frobenius_norm, svd_full
from .rrsvd import (
    AccuracyCheckParams,
    accuracy_check,
    make_rng,
    project_svd,
    randomized_range_finder,
)

__all__ = [
    "MpsState",
    "TwoSiteGate",
    "ThetaTensor",
    "TrotterPlan",
    "DecimationBackend",
    "Decimation",
    "UpdateRecord",
    "EvolutionResult",
    "mps_product_state",
    "mps_from_dense",
    "build_theta",
    "apply_gate_to_theta",
    "decimate",
    "two_site_update",
    "trotter_plan_3rd",
    "bond_gate",
    "evolve",
    "schmidt_entropy",
    "expectation_local",
    "mps_norm",
    "assemble_dense_hamiltonian",
    "dense_oracle_evolve",
    "write_diagnostics_csv",
]

# lambda entries below this are treated as zero when divided out
LAMBDA_FLOOR = 1e-14
# largest Hilbert space the dense oracle will touch
DENSE_LIMIT = 2**12


@dataclass
class MpsState:
    site_dims: list[int]
    gammas: list[np.ndarray]
    lambdas: list[np.ndarray]
    chi_max: int = 64
    trunc_tolerance: float = 1e-24

    def __post_init__(self):
        n = len(self.site_dims)
        if len(self.gammas) != n or len(self.lambdas) != n - 1:
            raise ContractViolation("need N gammas and N-1 lambda vectors")
        for k, g in enumerate(self.gammas):
            if g.ndim != 3 or g.shape[1] != self.site_dims[k]:
                raise ContractViolation(f"gamma {k} has shape {g.shape}")
        for b, lam in enumerate(self.lambdas):
            if not (self.gammas[b].shape[2] == lam.size == self.gammas[b + 1].shape[0]):
                raise ContractViolation(f"bond {b}: inconsistent bond dimensions")

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def bond_dims(self) -> list[int]:
        return [lam.size for lam in self.lambdas]

    def lam(self, bond: int) -> np.ndarray:
        """Schmidt vector of ``bond``; the virtual edge bonds ``-1`` and ``N-1`` are ``[1]``."""
        if bond < 0 or bond >= self.n_sites - 1:
            return np.ones(1)
        return self.lambdas[bond]

    def copy(self) -> "MpsState":
        return replace(
            self,
            site_dims=list(self.site_dims),
            gammas=[g.copy() for g in self.gammas],
            lambdas=[lam.copy() for lam in self.lambdas],
        )

    def site_tensors(self) -> list[np.ndarray]:
        """Plain MPS tensors ``Gamma_k lambda_k`` (right-multiplied)."""
        out = []
        for k, g in enumerate(self.gammas):
            out.append(g * self.lam(k)[None, None, :])
        return out

    def to_dense(self) -> np.ndarray:
        if int(np.prod(self.site_dims)) > DENSE_LIMIT * 16:
            raise ContractViolation("state too large for a dense vector")
        psi = np.ones((1, 1), dtype=complex)
        for a in self.site_tensors():
            psi = np.tensordot(psi, a, axes=(1, 0)).reshape(-1, a.shape[2])
        return psi[:, 0]


@dataclass
class TwoSiteGate:
    site_index: int
    matrix: np.ndarray
    unitary: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.unitary:
            dim = self.matrix.shape[0]
            err = np.abs(self.matrix.conj().T @ self.matrix - np.eye(dim)).max()
            if err > 1e-10:
                raise ContractViolation(f"gate flagged unitary but |G^H G - I| = {err:.2e}")


@dataclass
class ThetaTensor:
    """Two-site tensor plus the outer Schmidt vectors needed to split it again."""

    values: np.ndarray
    lam_left: np.ndarray
    lam_right: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int, int]:
        chi_l, d1, d2, chi_r = self.values.shape
        return d1, d2, chi_l, chi_r

    def matrix(self) -> np.ndarray:
        chi_l, d1, d2, chi_r = self.values.shape
        return self.values.reshape(chi_l * d1, d2 * chi_r)


@dataclass(frozen=True)
class TrotterPlan:
    """Sweeps of one time step as ``(bond_parity, coefficient)`` pairs.

    ``bond_parity`` is ``b % 2`` of the 0-based bond index. The F half-steps
    act on parity 1 (the bonds whose left site is even when counting from
    one), G on parity 0.
    """

    dt: float
    sweeps: tuple[tuple[int, float], ...]
    order: int = 3

    def operations(self, n_bonds: int) -> list[tuple[int, int, float]]:
        """Ordered ``(sweep, bond, coefficient)`` list; empty sweeps are skipped."""
        ops = []
        for s, (parity, coeff) in enumerate(self.sweeps):
            ops.extend((s, b, coeff) for b in range(parity, n_bonds, 2))
        return ops


@dataclass
class DecimationBackend:
    """How the blocked two-site matrix is factorized.

    ``variant="randomized"`` sketches ``l = k + p`` columns with ``k =
    chi_max`` and ``p = oversampling`` (``chi_max`` when ``None``), clamped to
    the matrix's smaller dimension. Matrices whose smaller dimension is at
    most ``crossover`` go to the deterministic SVD. With ``accuracy_check``
    the sketch is grown until probes certify ``epsilon``; the bond then keeps
    as many extra values as the check added columns.
    """

    variant: Literal["deterministic", "randomized"] = "deterministic"
    oversampling: int | None = None
    power_iterations: int = 2
    seed: int = 0
    accuracy_check: bool = False
    epsilon: float = 1e-3
    probe_count: int = 10
    crossover: int = 256
    renormalize: bool = True

    @property
    def name(self) -> str:
        return "det" if self.variant == "deterministic" else "rrsvd"


@dataclass
class Decimation:
    gamma_left: np.ndarray
    lam: np.ndarray
    gamma_right: np.ndarray
    discarded: float
    method: str
    zeroed_rows: int = 0
    certified: bool | None = None


def mps_product_state(
    site_dims: Sequence[int],
    local_states: Sequence[Sequence[complex]],
    chi_max: int = 64,
    trunc_tolerance: float = 1e-24,
) -> MpsState:
    if len(site_dims) != len(local_states) or len(site_dims) < 1:
        raise ContractViolation("one local state per site is required")
    gammas = []
    for d, vec in zip(site_dims, local_states):
        v = np.asarray(vec, dtype=complex)
        if v.shape != (d,):
            raise ContractViolation(f"local state of length {v.size} for site dimension {d}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ContractViolation("local states must be normalized")
        gammas.append(v.reshape(1, d, 1).copy())
    lambdas = [np.ones(1) for _ in range(len(site_dims) - 1)]
    return MpsState(list(site_dims), gammas, lambdas, chi_max, trunc_tolerance)


def mps_from_dense(
    psi,
    site_dims: Sequence[int],
    chi_max: int | None = None,
    cutoff: float = 1e-15,
    trunc_tolerance: float = 1e-24,
) -> MpsState:
    """Exact Vidal form of a dense state by successive SVDs.

    Schmidt values below ``cutoff`` (relative to the largest) are dropped;
    ``chi_max`` only sets the cap stored on the state.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    dims = list(site_dims)
    if psi.size != int(np.prod(dims)):
        raise ContractViolation("state length does not match the site dimensions")
    psi = psi / np.linalg.norm(psi)
    gammas, lambdas = [], []
    lam_prev = np.ones(1)
    rest = psi.reshape(1, -1)
    for d in dims[:-1]:
        chi_l = rest.shape[0]
        res = svd_full(rest.reshape(chi_l * d, -1))
        keep = max(1, int(np.sum(res.sigma > cutoff * res.sigma[0])))
        u, s, vh = res.u[:, :keep], res.sigma[:keep], res.v[:, :keep].conj().T
        gammas.append(u.reshape(chi_l, d, keep) / lam_prev[:, None, None])
        lambdas.append(s.copy())
        rest = s[:, None] * vh
        lam_prev = s
    gammas.append(rest.reshape(lam_prev.size, dims[-1], 1) / lam_prev[:, None, None])
    cap = chi_max if chi_max is not None else max([1] + [lam.size for lam in lambdas])
    return MpsState(dims, gammas, lambdas, cap, trunc_tolerance)


def build_theta(state: MpsState, k: int) -> ThetaTensor:
    """``lambda[k-1] Gamma[k] lambda[k] Gamma[k+1] lambda[k+1]`` on bond ``k``."""
    if not 0 <= k < state.n_sites - 1:
        raise ContractViolation(f"bond {k} outside [0, {state.n_sites - 2}]")
    lam_l, lam_c, lam_r = state.lam(k - 1), state.lam(k), state.lam(k + 1)
    left = state.gammas[k] * (lam_l[:, None, None] * lam_c[None, None, :])
    right = state.gammas[k + 1] * lam_r[None, None, :]
    chi_l, d1, chi_c = left.shape
    _, d2, chi_r = right.shape
    values = (left.reshape(chi_l * d1, chi_c) @ right.reshape(chi_c, d2 * chi_r)).reshape(
        chi_l, d1, d2, chi_r
    )
    return ThetaTensor(values, lam_l, lam_r)


def apply_gate_to_theta(theta: ThetaTensor, gate: TwoSiteGate | np.ndarray) -> ThetaTensor:
    g = gate.matrix if isinstance(gate, TwoSiteGate) else np.asarray(gate, dtype=complex)
    chi_l, d1, d2, chi_r = theta.values.shape
    if g.shape != (d1 * d2, d1 * d2):
        raise ContractViolation(f"gate of shape {g.shape} does not fit physical dims {d1}x{d2}")
    out = np.matmul(g, theta.values.reshape(chi_l, d1 * d2, chi_r))
    return ThetaTensor(out.reshape(chi_l, d1, d2, chi_r), theta.lam_left, theta.lam_right)


def _safe_divide(x: np.ndarray, lam: np.ndarray, axis: int) -> tuple[np.ndarray, int]:
    small = lam < LAMBDA_FLOOR
    inv = np.where(small, 0.0, 1.0 / np.where(small, 1.0, lam))
    shape = [1, 1, 1]
    shape[axis] = lam.size
    return x * inv.reshape(shape), int(small.sum())


def decimate(
    theta: ThetaTensor,
    backend: DecimationBackend,
    chi_max: int,
    trunc_tolerance: float = 0.0,
    seed=None,
) -> Decimation:
    """Split a two-site tensor back into ``Gamma, lambda, Gamma``.

    The blocked matrix is factorized by ``backend``. Values with
    ``lambda^2 / ||Theta||^2 < trunc_tolerance`` are dropped first, then
    at most ``chi_max`` (plus any accuracy-check growth) are kept. The
    discarded weight is the relative squared Frobenius mass that the kept
    triplets do not reproduce.
    """
    mat = theta.matrix()
    if not np.isfinite(mat).all():
        raise ContractViolation("theta has non-finite entries")
    chi_l, d1, d2, chi_r = theta.values.shape
    rows, cols = mat.shape
    minor = min(rows, cols)
    total = frobenius_norm(mat)
    cap = chi_max
    certified = None
    method = "det"

    if backend.variant == "randomized" and minor > backend.crossover:
        rng = make_rng(seed if seed is not None else backend.seed)
        p = backend.oversampling if backend.oversampling is not None else chi_max
        l = min(chi_max + p, minor)
        basis = randomized_range_finder(mat, l, backend.power_iterations, rng).q_matrix
        if backend.accuracy_check and l + backend.probe_count <= cols:
            check = AccuracyCheckParams(backend.epsilon * total, backend.probe_count)
            basis, certified, _ = accuracy_check(mat, basis, check, rng)
            cap += basis.shape[1] - l
        res = project_svd(mat, basis, total)
        method = "rrsvd"
    else:
        res = svd_full(mat)

    s = res.sigma
    if total > 0:
        keep = (s > 0) & ((s / total) ** 2 >= trunc_tolerance)
        n_keep = max(1, min(int(keep.sum()), cap))
    else:
        n_keep = 1
    s_kept = s[:n_keep].copy()
    if total == 0:
        discarded = 0.0
    elif method == "det":
        # the full spectrum is known: sum what was dropped, exactly 0 when nothing was
        discarded = float(np.sum((s[n_keep:][::-1] / total) ** 2))
    else:
        # mass outside the sketched range is invisible to the projected spectrum
        discarded = max(0.0, 1.0 - float(np.sum((s_kept / total) ** 2)))
    if s_kept[0] == 0.0:
        s_kept[0] = 1.0
    elif backend.renormalize:
        s_kept /= math.sqrt(float(np.sum(s_kept**2)))

    u = res.u[:, :n_keep].reshape(chi_l, d1, n_keep)
    vh = res.v[:, :n_keep].conj().T.reshape(n_keep, d2, chi_r)
    gl, z1 = _safe_divide(u, theta.lam_left, 0)
    gr, z2 = _safe_divide(vh, theta.lam_right, 2)
    return Decimation(gl, s_kept, gr, discarded, method, z1 + z2, certified)


@dataclass
class UpdateRecord:
    step: int
    bond: int
    chi: int
    discarded_weight: float
    t_theta_us: float
    t_gate_us: float
    t_svd_us: float
    backend: str


CSV_FIELDS = ["step", "bond", "chi", "discarded_weight", "t_theta_us", "t_gate_us", "t_svd_us", "backend"]


def two_site_update(
    state: MpsState,
    bond: int,
    gate: TwoSiteGate | np.ndarray,
    backend: DecimationBackend,
    seed=None,
    step: int = 0,
) -> UpdateRecord:
    """Gate one bond in place and return its timing decomposition."""
    t0 = time.perf_counter()
    theta = build_theta(state, bond)
    t1 = time.perf_counter()
    theta = apply_gate_to_theta(theta, gate)
    t2 = time.perf_counter()
    dec = decimate(theta, backend, state.chi_max, state.trunc_tolerance, seed)
    t3 = time.perf_counter()
    state.gammas[bond] = dec.gamma_left
    state.gammas[bond + 1] = dec.gamma_right
    state.lambdas[bond] = dec.lam
    return UpdateRecord(
        step,
        bond,
        dec.lam.size,
        dec.discarded,
        (t1 - t0) * 1e6,
        (t2 - t1) * 1e6,
        (t3 - t2) * 1e6,
        dec.method,
    )


def trotter_plan_3rd(dt: float) -> TrotterPlan:
    """Symmetric splitting ``exp(F dt/2) exp(G dt) exp(F dt/2)``."""
    if dt == 0:
        raise ContractViolation("dt must be non-zero")
    return TrotterPlan(dt, ((1, 0.5), (0, 1.0), (1, 0.5)), 3)


def bond_gate(h: np.ndarray, tau: float) -> np.ndarray:
    """``exp(-i tau h)`` for a Hermitian bond Hamiltonian, by eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (evecs * np.exp(-1j * tau * evals)) @ evecs.conj().T


@dataclass
class EvolutionResult:
    state: MpsState
    records: list[UpdateRecord] = field(default_factory=list)
    observables: list[dict] = field(default_factory=list)
    max_bond_dims: list[int] = field(default_factory=list)
    cumulative_discarded: float = 0.0
    aborted: bool = False
    abort_step: int | None = None


def evolve(
    state: MpsState,
    hamiltonian_terms: Sequence[np.ndarray],
    plan: TrotterPlan,
    n_steps: int,
    backend: DecimationBackend,
    *,
    observe: Callable[[MpsState], dict] | None = None,
    abort_threshold: float | None = None,
    copy: bool = True,
) -> EvolutionResult:
    """Run ``n_steps`` Trotter steps.

    ``hamiltonian_terms[b]`` is the dense Hamiltonian of bond ``b``. The
    randomized backend draws from a stream seeded by ``(backend.seed,
    step, sweep, bond)``. ``observe`` is called on the initial state and
    after every step. When the summed discarded weight exceeds
    ``abort_threshold`` the run stops after the current step and the
    partial result is flagged.
    """
    if copy:
        state = state.copy()
    n_bonds = state.n_sites - 1
    if len(hamiltonian_terms) != n_bonds:
        raise ContractViolation(f"need {n_bonds} bond terms, got {len(hamiltonian_terms)}")
    for b, h in enumerate(hamiltonian_terms):
        d = state.site_dims[b] * state.site_dims[b + 1]
        if np.shape(h) != (d, d):
            raise ContractViolation(f"bond {b}: term has shape {np.shape(h)}, expected {(d, d)}")

    ops = plan.operations(n_bonds)
    gates: dict[tuple[int, float], np.ndarray] = {}
    for _, b, c in ops:
        if (b, c) not in gates:
            gates[(b, c)] = bond_gate(hamiltonian_terms[b], c * plan.dt)

    result = EvolutionResult(state)
    if observe is not None:
        result.observables.append(observe(state))
    for step in range(1, n_steps + 1):
        for sweep, b, c in ops:
            seed = np.random.SeedSequence([backend.seed, step, sweep, b])
            rec = two_site_update(state, b, gates[(b, c)], backend, seed, step)
            result.records.append(rec)
            result.cumulative_discarded += rec.discarded_weight
        result.max_bond_dims.append(max(state.bond_dims, default=1))
        if observe is not None:
            result.observables.append(observe(state))
        if abort_threshold is not None and result.cumulative_discarded > abort_threshold:
            result.aborted = True
            result.abort_step = step
            break
    return result


def schmidt_entropy(state: MpsState, bond: int) -> float:
    """Von Neumann entropy (natural log) across ``bond``."""
    if not 0 <= bond < state.n_sites - 1:
        raise ContractViolation(f"bond {bond} outside [0, {state.n_sites - 2}]")
    p = state.lambdas[bond] ** 2
    p = p[p > 0] / p.sum()
    return max(float(-np.sum(p * np.log(p))), 0.0)


def _transfer(env: np.ndarray, a: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    # env[a, a'] -> sum_{i,j} A^i^* env A^j O_{ij}
    ket = np.tensordot(env, a, axes=(1, 0))  # (a, d, b)
    if op is not None:
        ket = np.tensordot(ket, op, axes=(1, 1)).transpose(0, 2, 1)
    return np.tensordot(a.conj(), ket, axes=([0, 1], [0, 1]))


def mps_norm(state: MpsState) -> float:
    """``sqrt(<psi|psi>)`` by exact contraction."""
    env = np.ones((1, 1), dtype=complex)
    for a in state.site_tensors():
        env = _transfer(env, a)
    return math.sqrt(max(0.0, float(env[0, 0].real)))


def expectation_local(state: MpsState, site: int, operator) -> complex:
    """``<psi|O_site|psi> / <psi|psi>`` by exact contraction (no canonical-form assumption)."""
    op = np.asarray(operator, dtype=complex)
    d = state.site_dims[site]
    if op.shape != (d, d):
        raise ContractViolation(f"operator of shape {op.shape} on a site of dimension {d}")
    env_o = np.ones((1, 1), dtype=complex)
    env_n = np.ones((1, 1), dtype=complex)
    for k, a in enumerate(state.site_tensors()):
        env_o = _transfer(env_o, a, op if k == site else None)
        env_n = _transfer(env_n, a)
    return complex(env_o[0, 0] / env_n[0, 0].real)


def assemble_dense_hamiltonian(hamiltonian_terms: Sequence[np.ndarray], site_dims: Sequence[int]) -> np.ndarray:
    dims = list(site_dims)
    total = int(np.prod(dims))
    if total > DENSE_LIMIT:
        raise ContractViolation(f"dense dimension {total} exceeds {DENSE_LIMIT}")
    h = np.zeros((total, total), dtype=complex)
    for b, term in enumerate(hamiltonian_terms):
        left = int(np.prod(dims[:b]))
        right = int(np.prod(dims[b + 2:]))
        h += np.kron(np.kron(np.eye(left), term), np.eye(right))
    return h


def dense_oracle_evolve(psi0, hamiltonian_terms, T, site_dims: Sequence[int] | None = None) -> np.ndarray:
    """Exact ``exp(-i H T) psi0`` through a dense eigendecomposition of ``H``.

    ``T`` may be a scalar or a sequence of times; for a sequence the states
    are stacked along axis 0. ``site_dims`` defaults to qubits.
    """
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if site_dims is None:
        n = int(round(math.log2(psi0.size)))
        site_dims = [2] * n
    h = assemble_dense_hamiltonian(hamiltonian_terms, site_dims)
    if h.shape[0] != psi0.size:
        raise ContractViolation("initial state does not match the Hamiltonian dimension")
    evals, evecs = np.linalg.eigh(h)
    coeffs = evecs.conj().T @ psi0
    times = np.atleast_1d(np.asarray(T, dtype=float))
    out = (np.exp(-1j * np.outer(times, evals)) * coeffs) @ evecs.T
    return out[0] if np.ndim(T) == 0 else out


def write_diagnostics_csv(records: Sequence[UpdateRecord], path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow(
                [
                    r.step,
                    r.bond,
                    r.chi,
                    repr(float(r.discarded_weight)),
                    f"{r.t_theta_us:.3f}",
                    f"{r.t_gate_us:.3f}",
                    f"{r.t_svd_us:.3f}",
                    r.backend,
                ]
            )
