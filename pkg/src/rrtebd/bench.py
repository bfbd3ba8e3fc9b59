"""Experiment drivers behind the command line: matrix generation, SVD
timing, singular-value stability, TEBD runs, update profiling and chain
mapping.

Every driver is a pure function of its config and seed base, so error
columns reproduce bit-exactly in single-threaded mode. Timing columns do
not.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
import time
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field, fields
from itertools import product
from os import PathLike
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .chainmap import (
    ChainCoefficients,
    build_chain_terms,
    ladder_operators,
    read_coefficients,
    read_measure,
    stieltjes_coefficients,
    write_coefficients,
)
from .linalg import ContractViolation, frobenius_norm, svd_full, write_rrsm
from .matgen import (
    SpectrumSpec,
    calibrate_exponential_ratio,
    random_orthonormal,
    read_spectrum,
    spectrum_exponential,
    spectrum_power,
    structured_matrix,
    write_spectrum,
)
from .models import SX, SZ, heisenberg_terms, ising_terms, neel, spin_up
from .rrsvd import RrsvdParams, rrsvd_fixed_rank
from .tebd import (
    DecimationBackend,
    EvolutionResult,
    MpsState,
    UpdateRecord,
    evolve,
    expectation_local,
    mps_product_state,
    schmidt_entropy,
    trotter_plan_3rd,
    two_site_update,
    write_diagnostics_csv,
)

__all__ = [
    "BenchConfig",
    "TimingRecord",
    "SpeedupSummary",
    "StabilityRecord",
    "TebdRunConfig",
    "ProfileConfig",
    "parse_spectrum",
    "derive_seed",
    "generate_matrix",
    "run_svd_bench",
    "run_stability",
    "run_tebd",
    "random_vidal_mps",
    "profile_two_site_update",
    "run_chainmap",
    "write_records_csv",
]


def derive_seed(base: int, *keys: int) -> int:
    """64-bit seed determined by ``base`` and integer ``keys``."""
    return int(np.random.SeedSequence([base, *keys]).generate_state(1, np.uint64)[0])


def parse_spectrum(text: str, n: int, k: int | None = None) -> SpectrumSpec:
    """Spectrum from a command-line token.

    Accepted forms: ``exp:<ratio>``, ``expw:<weight>`` (exponential decay
    calibrated to the given discarded weight beyond ``k``), ``power``,
    ``zero`` and ``file:<path>``.
    """
    kind, _, arg = text.partition(":")
    try:
        if kind == "exp":
            return spectrum_exponential(n, float(arg))
        if kind == "expw":
            if k is None:
                raise ContractViolation("expw spectrum needs a target rank")
            weight = float(arg)
            if not 0.0 < weight < 1.0:
                raise ContractViolation(f"discarded weight must lie in (0, 1), got {weight}")
            spec = spectrum_exponential(n, calibrate_exponential_ratio(n, k, weight))
            return SpectrumSpec(spec.values, f"expw:{weight!r}")
        if kind == "power" and not arg:
            return spectrum_power(n)
        if kind == "zero" and not arg:
            return SpectrumSpec(np.zeros(n), "zero")
        if kind == "file" and arg:
            spec = read_spectrum(arg)
            if len(spec) != n:
                raise ContractViolation(f"{arg}: {len(spec)} values, expected {n}")
            return spec
    except ValueError as exc:
        if isinstance(exc, ContractViolation):
            raise
        raise ContractViolation(f"bad spectrum {text!r}: {exc}") from exc
    raise ContractViolation(f"unknown spectrum {text!r}; use exp:<ratio>, expw:<weight>, power, zero or file:<path>")


@contextmanager
def thread_hint(threads: int | None):
    with threadpool_limits(limits=threads) if threads else nullcontext():
        yield


def generate_matrix(rows: int, cols: int, spectrum: str, seed: int, out: str | PathLike) -> SpectrumSpec:
    """Write a structured ``rows x cols`` matrix as RRSM plus a ``.spectrum`` sidecar."""
    spec = parse_spectrum(spectrum, cols)
    inst = structured_matrix(spec, rows, derive_seed(seed, 0), derive_seed(seed, 1))
    out = Path(out)
    write_rrsm(out, inst.matrix)
    write_spectrum(out.with_suffix(out.suffix + ".spectrum"), spec)
    return spec


@dataclass
class BenchConfig:
    """One timing or stability experiment.

    ``sizes`` are column counts; each matrix has ``row_factor * size``
    rows. ``trials`` is the rerun count per instance, ``instances`` the
    number of independently drawn matrices per size.
    """

    experiment: str = "svd-bench"
    sizes: Sequence[int] = (900, 1600, 2500, 3600, 4900)
    spectrum: str = "expw:4e-4"
    ks: Sequence[int] = (100,)
    ps: Sequence[int] = (100,)
    qs: Sequence[int] = (2,)
    trials: int = 5
    instances: int = 1
    seed_base: int = 0
    threads: int | None = None
    output: str | None = None
    row_factor: int = 1

    def __post_init__(self):
        if self.trials < 1 or self.instances < 1:
            raise ContractViolation("trial and instance counts must be >= 1")
        if not self.sizes or not self.ks or not self.ps or not self.qs:
            raise ContractViolation("sizes, k, p and q lists must be non-empty")
        if self.row_factor < 1:
            raise ContractViolation("row_factor must be >= 1")
        need = max(k + p for k, p in product(self.ks, self.ps))
        small = [n for n in self.sizes if n < need]
        if small:
            raise ContractViolation(f"sizes {small} are smaller than k+p={need}")


@dataclass
class TimingRecord:
    experiment: str
    method: str
    rows: int
    size: int
    k: int
    p: int
    q: int
    trial: int
    seed: int
    wall_seconds: float
    max_abs_sv_error: float
    residual_fro: float
    threads: int
    note: str = ""


@dataclass
class SpeedupSummary:
    experiment: str
    rows: int
    size: int
    k: int
    p: int
    q: int
    trials: int
    median_det_seconds: float
    median_rrsvd_seconds: float
    speedup: float
    threads: int


@dataclass
class StabilityRecord:
    spectrum: str
    instance: int
    rerun: int
    method: str
    q: int
    index: int
    sigma_true: float
    sigma_est: float
    abs_error: float


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records_csv(records: Iterable, path: str | PathLike, record_type=None) -> None:
    """Dataclass rows as CSV with a fixed header and ``repr`` floats."""
    records = list(records)
    cls = record_type or type(records[0])
    names = [f.name for f in fields(cls)]
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in records:
            w.writerow([_fmt(getattr(r, n)) for n in names])


def _rank_k_residual(a_fro: float, kept: np.ndarray) -> float:
    """``||A - A_k||_F`` for a rank-``k`` factorization drawn from A's range basis."""
    c = math.sqrt(float(np.sum(kept**2)))
    return math.sqrt(max((a_fro - c) * (a_fro + c), 0.0))


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def _threads_used(hint: int | None) -> int:
    return hint if hint else (os.cpu_count() or 1)


def run_svd_bench(cfg: BenchConfig) -> tuple[list[TimingRecord], list[SpeedupSummary]]:
    """Time deterministic SVD against RRSVD on identical structured matrices.

    The deterministic factorization is computed once per trial and reported
    once per distinct ``k``, with its error taken over that many leading
    values. A size whose allocation fails yields one ``skip`` row.
    """
    records: list[TimingRecord] = []
    summaries: list[SpeedupSummary] = []
    threads = _threads_used(cfg.threads)
    configs = list(product(cfg.ks, cfg.ps, cfg.qs))
    with thread_hint(cfg.threads):
        for size in cfg.sizes:
            rows = cfg.row_factor * size
            size_records: list[TimingRecord] = []
            try:
                spec = parse_spectrum(cfg.spectrum, size, max(cfg.ks))
                inst = structured_matrix(spec, rows, derive_seed(cfg.seed_base, size, 0), derive_seed(cfg.seed_base, size, 1))
                a = inst.matrix
                a_fro = frobenius_norm(a)
                for trial in range(cfg.trials):
                    det, t_det = _timed(svd_full, a)
                    for k in sorted(set(cfg.ks)):
                        err = float(np.max(np.abs(det.sigma[:k] - spec.values[:k])))
                        size_records.append(
                            TimingRecord(cfg.experiment, "det", rows, size, k, 0, 0, trial, 0, t_det, err,
                                         _rank_k_residual(a_fro, det.sigma[:k]), threads)
                        )
                    for k, p, q in configs:
                        seed = derive_seed(cfg.seed_base, size, trial, k, p, q)
                        res, t_rr = _timed(rrsvd_fixed_rank, a, RrsvdParams(k, p, q, seed))
                        err = float(np.max(np.abs(res.sigma[:k] - spec.values[:k])))
                        size_records.append(
                            TimingRecord(cfg.experiment, "rrsvd", rows, size, k, p, q, trial, seed, t_rr, err,
                                         _rank_k_residual(a_fro, res.sigma), threads)
                        )
                del a, inst
            except MemoryError as exc:
                records.append(
                    TimingRecord(cfg.experiment, "skip", rows, size, 0, 0, 0, -1, 0, math.nan, math.nan, math.nan,
                                 threads, f"allocation failed: {exc or 'MemoryError'}")
                )
                continue
            records.extend(size_records)
            for k, p, q in configs:
                t_det = [r.wall_seconds for r in size_records if r.method == "det" and r.k == k]
                t_rr = [r.wall_seconds for r in size_records if r.method == "rrsvd" and (r.k, r.p, r.q) == (k, p, q)]
                md, mr = statistics.median(t_det), statistics.median(t_rr)
                summaries.append(SpeedupSummary(cfg.experiment, rows, size, k, p, q, cfg.trials, md, mr, md / mr, threads))
    return records, summaries


def run_stability(cfg: BenchConfig) -> list[StabilityRecord]:
    """Per-index singular-value errors of RRSVD reruns and the deterministic baseline.

    Uses ``cfg.sizes[0]`` columns and ``k = p = cfg.ks[0]``.
    """
    n = cfg.sizes[0]
    k = cfg.ks[0]
    p = cfg.ps[0]
    rows = cfg.row_factor * n
    spec = parse_spectrum(cfg.spectrum, n, k)
    out: list[StabilityRecord] = []

    def emit(inst_id, rerun, method, q, sigma):
        for i in range(k):
            err = abs(float(sigma[i]) - float(spec.values[i]))
            out.append(StabilityRecord(spec.label, inst_id, rerun, method, q, i + 1, float(spec.values[i]), float(sigma[i]), err))

    with thread_hint(cfg.threads):
        for inst_id in range(cfg.instances):
            inst = structured_matrix(spec, rows, derive_seed(cfg.seed_base, inst_id, 0), derive_seed(cfg.seed_base, inst_id, 1))
            emit(inst_id, 0, "det", 0, svd_full(inst.matrix).sigma)
            for q in cfg.qs:
                for rerun in range(cfg.trials):
                    seed = derive_seed(cfg.seed_base, inst_id, rerun, q, 7)
                    emit(inst_id, rerun, "rrsvd", q, rrsvd_fixed_rank(inst.matrix, RrsvdParams(k, p, q, seed)).sigma)
    return out


@dataclass
class TebdRunConfig:
    """One TEBD run. ``model`` is ``ising``, ``heisenberg`` or ``tedopa-chain``.

    For the chain model site 0 is a spin with ``H_sys = field/2 * X``
    coupled through ``Z``; the remaining ``sites - 1`` sites are bosons on
    ``boson_dim`` levels with coefficients read from ``coeff_file``.
    """

    model: str = "ising"
    sites: int = 6
    chi: int = 32
    dt: float = 1e-3
    steps: int = 1000
    backend: str = "det"
    epsilon: float = 1e-3
    accuracy_check: bool = False
    oversampling: int | None = None
    power_iterations: int = 2
    crossover: int = 256
    seed: int = 0
    coupling: float = 1.0
    field: float = 1.0
    initial: str = "up"
    coeff_file: str | None = None
    boson_dim: int = 4
    trunc_tolerance: float = 1e-24
    abort_threshold: float | None = None
    observe_every: int = 1
    threads: int | None = None

    def make_backend(self) -> DecimationBackend:
        if self.backend not in ("det", "rrsvd"):
            raise ContractViolation(f"backend must be det or rrsvd, got {self.backend!r}")
        return DecimationBackend(
            "deterministic" if self.backend == "det" else "randomized",
            oversampling=self.oversampling,
            power_iterations=self.power_iterations,
            seed=self.seed,
            accuracy_check=self.accuracy_check,
            epsilon=self.epsilon,
            crossover=self.crossover,
        )


def _chain_model(cfg: TebdRunConfig) -> tuple[list[np.ndarray], list[int], list[np.ndarray], list[np.ndarray]]:
    if cfg.coeff_file is None:
        raise ContractViolation("tedopa-chain needs a coefficient file")
    coeffs = read_coefficients(cfg.coeff_file)
    n_chain = cfg.sites - 1
    if not 1 <= n_chain <= coeffs.n_chain:
        raise ContractViolation(f"sites-1={n_chain} must lie in [1, {coeffs.n_chain}]")
    coeffs = ChainCoefficients(coeffs.t0, coeffs.omegas[:n_chain], coeffs.hoppings[: n_chain - 1])
    terms = build_chain_terms(coeffs, cfg.boson_dim, 0.5 * cfg.field * SX, SZ)
    dims = [2] + [cfg.boson_dim] * n_chain
    vac = np.zeros(cfg.boson_dim, dtype=complex)
    vac[0] = 1.0
    local = [np.array([1.0, 0.0], dtype=complex)] + [vac] * n_chain
    ops = [SZ] + [ladder_operators(cfg.boson_dim)[2]] * n_chain
    return terms, dims, local, ops


def build_model(cfg: TebdRunConfig) -> tuple[list[np.ndarray], list[int], list[np.ndarray], list[np.ndarray]]:
    """Bond terms, site dimensions, initial local states and per-site observables."""
    if cfg.model == "tedopa-chain":
        return _chain_model(cfg)
    if cfg.model == "ising":
        terms = ising_terms(cfg.sites, cfg.coupling, cfg.field)
    elif cfg.model == "heisenberg":
        terms = heisenberg_terms(cfg.sites, cfg.coupling, cfg.field)
    else:
        raise ContractViolation(f"unknown model {cfg.model!r}")
    if cfg.initial == "up":
        local = spin_up(cfg.sites)
    elif cfg.initial == "neel":
        local = neel(cfg.sites)
    else:
        raise ContractViolation(f"unknown initial state {cfg.initial!r}")
    return terms, [2] * cfg.sites, local, [SZ] * cfg.sites


@dataclass
class TebdRun:
    result: EvolutionResult
    observables: list[dict] = field(default_factory=list)


def run_tebd(cfg: TebdRunConfig) -> TebdRun:
    """Evolve the model's initial product state; observables every ``observe_every`` steps."""
    if cfg.dt == 0 or cfg.steps < 0 or cfg.chi < 1:
        raise ContractViolation("need dt != 0, steps >= 0 and chi >= 1")
    terms, dims, local, ops = build_model(cfg)
    state = mps_product_state(dims, local, chi_max=cfg.chi, trunc_tolerance=cfg.trunc_tolerance)
    mid = max(state.n_sites // 2 - 1, 0)
    counter = {"step": 0}

    def observe(s: MpsState) -> dict:
        step = counter["step"]
        counter["step"] += 1
        if step % cfg.observe_every and step != cfg.steps:
            return {}
        row = {"step": step, "time": step * cfg.dt, "entropy_mid": schmidt_entropy(s, mid),
               "max_chi": max(s.bond_dims, default=1)}
        for site, op in enumerate(ops):
            row[f"obs_{site}"] = float(expectation_local(s, site, op).real)
        return row

    with thread_hint(cfg.threads):
        result = evolve(state, terms, trotter_plan_3rd(cfg.dt), cfg.steps, cfg.make_backend(),
                        observe=observe, abort_threshold=cfg.abort_threshold, copy=False)
    return TebdRun(result, [o for o in result.observables if o])


def write_tebd_outputs(run: TebdRun, prefix: str | PathLike) -> dict[str, Path]:
    """``<prefix>_observables.csv``, ``<prefix>_diagnostics.csv`` and ``<prefix>_state.npz``."""
    prefix = str(prefix)
    paths = {
        "observables": Path(prefix + "_observables.csv"),
        "diagnostics": Path(prefix + "_diagnostics.csv"),
        "state": Path(prefix + "_state.npz"),
    }
    obs = run.observables
    if obs:
        names = list(obs[0])
        with open(paths["observables"], "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in obs:
                w.writerow([_fmt(row[n]) for n in names])
    write_diagnostics_csv(run.result.records, paths["diagnostics"])
    st = run.result.state
    arrays = {f"gamma_{k}": g for k, g in enumerate(st.gammas)}
    arrays.update({f"lambda_{b}": l for b, l in enumerate(st.lambdas)})
    np.savez(paths["state"], site_dims=np.array(st.site_dims), **arrays)
    return paths


@dataclass
class ProfileConfig:
    """Repeated updates on the middle bond of a random ``sites``-site MPS.

    All inner bonds carry ``chi`` values with geometric decay ``decay``;
    the gate is a Haar-random unitary on the two ``local_dim`` sites.
    """

    local_dim: int = 16
    chi: int = 100
    sites: int = 6
    updates: int = 5
    decay: float = 0.9
    backend: str = "det"
    oversampling: int | None = None
    power_iterations: int = 2
    accuracy_check: bool = False
    epsilon: float = 1e-3
    crossover: int = 256
    seed: int = 0
    threads: int | None = None


def random_vidal_mps(site_dims: Sequence[int], chi: int, decay: float, seed: int, chi_max: int | None = None) -> MpsState:
    """Random ``Gamma`` tensors with geometrically decaying, normalized ``lambda`` vectors."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(site_dims)
    # bond b is capped by the Hilbert-space dimension on either side
    left, right = [1] * n, [1] * n
    for k in range(n - 1):
        left[k + 1] = min(chi, left[k] * site_dims[k])
        right[n - 2 - k] = min(chi, right[n - 1 - k] * site_dims[n - 1 - k])
    bonds = [min(left[b + 1], right[b]) for b in range(n - 1)]
    full = [1, *bonds, 1]
    gammas = []
    for k, d in enumerate(site_dims):
        shape = (full[k], d, full[k + 1])
        g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        gammas.append(g / math.sqrt(2.0 * d * full[k]))
    lambdas = []
    for b in bonds:
        lam = decay ** np.arange(b, dtype=float)
        lambdas.append(lam / np.linalg.norm(lam))
    return MpsState(list(site_dims), gammas, lambdas, chi_max=chi_max or chi)


def profile_two_site_update(cfg: ProfileConfig) -> tuple[list[UpdateRecord], dict[str, float]]:
    """Timing decomposition of two-site updates at fixed bond dimension.

    Returns the per-update records and the mean times in microseconds
    together with the fraction of update time spent decimating.
    """
    state = random_vidal_mps([cfg.local_dim] * cfg.sites, cfg.chi, cfg.decay, cfg.seed)
    d2 = cfg.local_dim**2
    gate = random_orthonormal(d2, d2, derive_seed(cfg.seed, 1))
    backend = TebdRunConfig(
        backend=cfg.backend,
        oversampling=cfg.oversampling,
        power_iterations=cfg.power_iterations,
        accuracy_check=cfg.accuracy_check,
        epsilon=cfg.epsilon,
        crossover=cfg.crossover,
        seed=cfg.seed,
    ).make_backend()
    bond = (cfg.sites - 1) // 2
    records = []
    with thread_hint(cfg.threads):
        for step in range(cfg.updates):
            records.append(two_site_update(state, bond, gate, backend, derive_seed(cfg.seed, 2, step), step))
    theta = statistics.fmean(r.t_theta_us for r in records)
    gate_t = statistics.fmean(r.t_gate_us for r in records)
    svd_t = statistics.fmean(r.t_svd_us for r in records)
    summary = {
        "t_theta_us": theta,
        "t_gate_us": gate_t,
        "t_svd_us": svd_t,
        "decimate_fraction": svd_t / (theta + gate_t + svd_t),
        "decimate_over_theta": svd_t / theta,
    }
    return records, summary


def run_chainmap(measure_path: str | PathLike, n_chain: int, out: str | PathLike) -> ChainCoefficients:
    """Read a two-column measure, map it to a chain and write the coefficient file."""
    coeffs = stieltjes_coefficients(read_measure(measure_path), n_chain)
    write_coefficients(out, coeffs)
    return coeffs

