import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rrtebd.linalg import ContractViolation, frobenius_norm, read_rrsm, svd_full, write_rrsm
from rrtebd.matgen import (
    SpectrumSpec,
    calibrate_exponential_ratio,
    discarded_weight,
    frobenius_tail,
    random_orthonormal,
    read_spectrum,
    spectrum_exponential,
    spectrum_power,
    structured_matrix,
    write_spectrum,
)

from conftest import seeds

spectra = st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12).map(lambda v: sorted(v, reverse=True))


def bisect_ratio(n, k, target, iters=200):
    lo, hi = 1e-9, 1 - 1e-12
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if discarded_weight(spectrum_exponential(n, mid), k) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_random_orthonormal_examples():
    col = random_orthonormal(5, 1, 3)
    assert np.linalg.norm(col) == pytest.approx(1.0, abs=1e-14)
    u = random_orthonormal(4, 4, 9)
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-11
    assert np.max(np.abs(u @ u.conj().T - np.eye(4))) <= 1e-11
    with pytest.raises(ContractViolation):
        random_orthonormal(2, 3, 0)


@given(st.integers(1, 10), st.integers(0, 10), seeds)
def test_random_orthonormal_columns(n, extra, seed):
    q = random_orthonormal(n + extra, n, seed)
    assert np.max(np.abs(q.conj().T @ q - np.eye(n))) <= 1e-11


def test_random_orthonormal_haar_first_moment():
    m = 4
    mean = np.mean([abs(random_orthonormal(m, 2, s)[0, 0]) ** 2 for s in range(10_000)])
    assert mean == pytest.approx(1.0 / m, rel=0.1)


def test_structured_rank_one():
    inst = structured_matrix(SpectrumSpec([1.0, 0.0, 0.0]), 4, 1, 2)
    assert frobenius_norm(inst.matrix) == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.matrix_rank(inst.matrix, tol=1e-12) == 1


def test_structured_power_spectrum_norm():
    inst = structured_matrix(spectrum_power(750), 1500, 5, 6)
    partial = math.fsum(1.0 / j**2 for j in range(1, 751))
    assert frobenius_norm(inst.matrix) == pytest.approx(math.sqrt(partial), rel=1e-12)
    assert np.max(np.abs(svd_full(inst.matrix).sigma - inst.spectrum.values)) <= 1e-9


@given(spectra, st.integers(0, 4), seeds)
def test_structured_spectrum_round_trip(values, extra, seed):
    spec = SpectrumSpec(values)
    inst = structured_matrix(spec, len(values) + extra, seed, seed + 1)
    sig = svd_full(inst.matrix).sigma
    assert np.max(np.abs(sig - spec.values)) <= 1e-9 * max(spec.values[0], 1e-300)


@given(seeds, seeds)
def test_spectrum_independent_of_factor_seeds(s1, s2):
    spec = spectrum_exponential(8, 0.6)
    a = svd_full(structured_matrix(spec, 10, s1, s2).matrix).sigma
    b = svd_full(structured_matrix(spec, 10, s2 + 1, s1 + 1).matrix).sigma
    assert np.max(np.abs(a - b)) <= 1e-12


def test_structured_preconditions():
    with pytest.raises(ContractViolation):
        structured_matrix(SpectrumSpec([1.0, 0.5]), 1, 0, 0)


def test_spectrum_spec_validation():
    for bad in ([], [1.0, 2.0], [1.0, -0.1], [float("nan")]):
        with pytest.raises(ContractViolation):
            SpectrumSpec(bad)
    spec = SpectrumSpec([0.0, 0.0])
    assert len(spec) == 2 and spec[0] == 0.0


def test_spectrum_exponential_examples():
    assert spectrum_exponential(1, 0.3).values.tolist() == [1.0]
    got = spectrum_exponential(3, 0.5).values
    assert np.allclose(got, np.array([1.0, 0.5, 0.25]) / math.sqrt(1.3125), atol=1e-15)
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ContractViolation):
            spectrum_exponential(5, bad)


def test_spectrum_power_examples():
    assert spectrum_power(1).values.tolist() == [1.0]
    assert np.allclose(spectrum_power(4).values, [1.0, 0.5, 1 / 3, 0.25], atol=1e-16)
    partial = math.fsum(1.0 / j**2 for j in range(1, 751))
    assert partial == pytest.approx(1.6436016220087204, rel=1e-15)
    assert float(np.sum(spectrum_power(750).values ** 2)) == pytest.approx(partial, rel=1e-14)


def test_discarded_weight_examples():
    spec = spectrum_power(750)
    assert discarded_weight(spec, 750) == 0.0
    assert discarded_weight(spec, 0) == pytest.approx(1.0, abs=1e-15)
    partial = math.fsum(1.0 / j**2 for j in range(1, 751))
    tail = math.fsum(1.0 / j**2 for j in range(651, 751))
    w = discarded_weight(spec, 650)
    assert w == pytest.approx(tail / partial, rel=1e-12)
    assert w == pytest.approx(1.25e-4, rel=0.01)
    assert math.sqrt(w) == pytest.approx(1.1e-2, rel=0.02)
    with pytest.raises(ContractViolation):
        discarded_weight(spec, 751)


def test_frobenius_tail_is_unnormalized():
    spec = spectrum_power(750)
    tail = math.sqrt(math.fsum(1.0 / j**2 for j in range(51, 751)))
    assert frobenius_tail(spec, 50) == pytest.approx(tail, rel=1e-12)


@given(spectra)
def test_discarded_weight_monotone(values):
    w = [discarded_weight(values, k) for k in range(len(values) + 1)]
    assert all(b <= a + 1e-15 for a, b in zip(w, w[1:]))


def test_calibration_matches_bisection():
    ratio = calibrate_exponential_ratio(750, 50, 4e-4)
    assert ratio == pytest.approx(bisect_ratio(750, 50, 4e-4), abs=1e-12)
    assert discarded_weight(spectrum_exponential(750, ratio), 50) == pytest.approx(4e-4, rel=1e-9)


@given(st.integers(10, 400), st.floats(1e-12, 0.5))
def test_calibration_hits_target(n, target):
    k = n // 3
    ratio = calibrate_exponential_ratio(n, k, target)
    assert discarded_weight(spectrum_exponential(n, ratio), k) == pytest.approx(target, rel=1e-7)


def test_calibration_preconditions():
    with pytest.raises(ContractViolation):
        calibrate_exponential_ratio(10, 10, 1e-3)


@given(spectra)
def test_spectrum_file_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("spec") / "s.txt"
    spec = SpectrumSpec(values, "x")
    write_spectrum(path, spec)
    assert read_spectrum(path).values.tobytes() == spec.values.tobytes()


def test_instance_rrsm_round_trip(tmp_path):
    inst = structured_matrix(spectrum_exponential(20, 0.8), 30, 1, 2)
    write_rrsm(tmp_path / "a.rrsm", inst.matrix)
    assert read_rrsm(tmp_path / "a.rrsm").tobytes() == inst.matrix.tobytes()
