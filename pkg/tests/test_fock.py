from math import log, sqrt

import numpy as np
import pytest

from conftest import number, pure
from qclt.errors import BadTrace, NegativeEigenvalue, NonHermitian, SupportViolation, ZeroMass
from qclt.fock import (
    DiagonalState,
    FockCutoff,
    as_dense,
    build_density,
    center,
    covariance,
    diagonal_state,
    displacement_matrix,
    first_moments,
    fock_indices,
    hs_distance,
    moment,
    read_state,
    relative_entropy,
    schatten_norm,
    trace_distance,
    truncate,
    von_neumann_entropy,
    write_state,
)
from qclt.gaussian import ThermalSpec, thermal_fock
from qclt.states import random_dense, random_diagonal


def tau1(K=200):
    return thermal_fock(ThermalSpec.from_nu(4.0), K, tol=1.0)


def test_multimode_dimension_counts_total_number():
    assert FockCutoff(3, 2).dim == len(fock_indices(2, 3)) == 10


def test_build_density_accepts_vacuum_and_pure_superposition():
    vac = build_density(np.eye(1), 1)
    assert vac.trace() == pytest.approx(1.0)
    v = np.zeros(9)
    v[0] = v[3] = 1 / sqrt(2)
    rho = build_density(np.outer(v, v), 1, FockCutoff(8))
    assert np.real(np.trace(rho.entries @ rho.entries)) == pytest.approx(1.0, abs=1e-12)


def test_build_density_rejects_bad_input():
    with pytest.raises(NonHermitian):
        build_density(np.array([[0.5, 1.0], [0.0, 0.5]]), 1)
    with pytest.raises(NegativeEigenvalue):
        build_density(np.diag([1.5, -0.5]), 1)
    with pytest.raises(BadTrace):
        build_density(np.diag([0.5, 0.2]), 1)


def test_truncate_thermal_keeps_partial_sums():
    sig, kept = truncate(as_dense(tau1(40)), 0)
    assert kept == pytest.approx(0.4)
    assert np.real(sig.entries[0, 0]) == pytest.approx(1.0)
    _, kept = truncate(as_dense(tau1(40)), 1)
    assert kept == pytest.approx(0.64)
    _, kept = truncate(as_dense(number(0)), 0)
    assert kept == 1.0


def test_truncate_rejects_empty_block():
    with pytest.raises(ZeroMass):
        truncate(as_dense(number(3)), 1)


def test_moment_examples():
    assert moment(number(0), 2).value == pytest.approx(1.0)
    assert moment(number(1), 2).value == pytest.approx(2.0)
    assert moment(tau1(200), 2).value == pytest.approx(2.5, abs=1e-8)


def test_moment_holder_monotonicity(rng):
    for _ in range(50):
        rho = random_diagonal(rng, 10) if rng.random() < 0.5 else random_dense(rng, 10)
        for k1, k2 in [(1, 2), (2, 3), (1.5, 4)]:
            assert moment(rho, k1).value <= moment(rho, k2).value ** (k1 / k2) + 1e-9


def test_first_moments():
    assert np.allclose(first_moments(number(2)), 0)
    assert np.allclose(first_moments(pure([1, 0, 0, 1])), 0, atol=1e-12)
    K = 40
    D = displacement_matrix(0.5, FockCutoff(K))
    coh = build_density(np.outer(D[:, 0], D[:, 0].conj()), 1, FockCutoff(K), trace_deficit=1e-12)
    assert np.allclose(first_moments(coh), [sqrt(2) * 0.5, 0], atol=1e-10)


def test_covariance_examples():
    assert np.allclose(covariance(number(0)), np.eye(2))
    assert np.allclose(covariance(number(1)), 3 * np.eye(2))
    # dense path agrees with the diagonal path
    assert np.allclose(covariance(as_dense(number(1), 10)), 3 * np.eye(2), atol=1e-12)
    for s in (0.5, 1.0, 2.0):
        nu = 4 * s * s
        st = thermal_fock(ThermalSpec.from_nu(nu), 2000, tol=1e-9)
        assert np.allclose(covariance(st), nu * np.eye(2), atol=1e-6)


def test_schatten_norms():
    a = diagonal_state([0.5, 0, 0.5])
    b = diagonal_state([0.5, 0.25, 0.25])
    assert schatten_norm(np.diag(a.probs - b.probs), 1) == pytest.approx(0.5)
    assert schatten_norm(np.diag([1.0, -1.0]), 2) == pytest.approx(sqrt(2))
    assert trace_distance(a, a) == 0.0


def test_entropy_examples():
    assert von_neumann_entropy(pure([1, 1j, 0])) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(diagonal_state([0.5, 0.5])) == pytest.approx(log(2))
    nu = 3.0
    closed = (nu + 1) / 2 * log((nu + 1) / 2) - (nu - 1) / 2 * log((nu - 1) / 2)
    assert von_neumann_entropy(thermal_fock(ThermalSpec.from_nu(nu), 300, tol=1.0)) == pytest.approx(closed, abs=1e-8)


def test_relative_entropy_examples():
    th3 = thermal_fock(ThermalSpec.from_nu(3.0), 60)
    hom = diagonal_state([0.5, 0, 0.5])
    assert relative_entropy(hom, th3) == pytest.approx(log(2), abs=1e-12)
    assert relative_entropy(th3, th3) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(SupportViolation):
        relative_entropy(number(1), number(0))


def test_relative_entropy_dense_matches_diagonal(rng):
    th = thermal_fock(ThermalSpec.from_nu(3.0), 12, tol=1.0)
    for _ in range(5):
        d = random_diagonal(rng, 12)
        assert relative_entropy(as_dense(d), th) == pytest.approx(relative_entropy(d, th), abs=1e-10)
        assert trace_distance(as_dense(d), th) == pytest.approx(trace_distance(d, th), abs=1e-10)
        assert hs_distance(as_dense(d), th) == pytest.approx(hs_distance(d, th), abs=1e-10)


def test_relative_entropy_equals_entropy_gap_to_gaussification(rng):
    for _ in range(5):
        d = random_diagonal(rng, 10)
        nu = covariance(d)[0, 0]
        th = ThermalSpec.from_nu(nu)
        g = thermal_fock(th, 4000, tol=1e-9)
        assert relative_entropy(d, g) == pytest.approx(th.entropy() - von_neumann_entropy(d), abs=1e-8)


def test_pinsker(rng):
    th = thermal_fock(ThermalSpec.from_nu(2.0), 12, tol=1.0)
    for _ in range(20):
        d = random_dense(rng, 12)
        assert relative_entropy(d, th) >= trace_distance(d, th) ** 2 / 2 - 1e-9


def test_truncation_identities(rng):
    for _ in range(10):
        d = random_diagonal(rng, 12)
        for n in range(1, 12):
            sig, kept = truncate(as_dense(d), n)
            assert trace_distance(as_dense(d), as_dense(sig, 12)) == pytest.approx(2 * (1 - kept), abs=1e-10)
            for s in (2, 3, 4):
                assert 1 - kept <= n ** (-s / 2) * moment(d, s).value


def test_displacement_elements():
    assert np.allclose(displacement_matrix(0.0, FockCutoff(5)), np.eye(6))
    D = displacement_matrix(1.0, FockCutoff(40))
    assert D[0, 0] == pytest.approx(np.exp(-0.5))
    assert abs(D[1, 1]) < 1e-14


def test_center_examples():
    K = 40
    D = displacement_matrix(0.3, FockCutoff(K))
    coh = build_density(np.outer(D[:, 0], D[:, 0].conj()), 1, FockCutoff(K), trace_deficit=1e-12)
    out, z = center(coh)
    assert z[0] == pytest.approx(0.3, abs=1e-10)
    assert trace_distance(out, as_dense(number(0), out.K)) < 1e-8
    out, z = center(pure([1, 1]))
    assert z[0] == pytest.approx(0.5)
    assert np.allclose(first_moments(out), 0, atol=1e-8)


def test_unitary_invariance(rng):
    K = 30
    D = displacement_matrix(0.4 + 0.2j, FockCutoff(K))
    for _ in range(3):
        a = random_dense(rng, 6)
        b = random_dense(rng, 6)
        A, B = as_dense(a, K), as_dense(b, K)
        A2 = build_density(D @ A.entries @ D.conj().T, 1, FockCutoff(K), trace_deficit=1e-9)
        B2 = build_density(D @ B.entries @ D.conj().T, 1, FockCutoff(K), trace_deficit=1e-9)
        assert von_neumann_entropy(A2) == pytest.approx(von_neumann_entropy(a), abs=1e-8)
        assert relative_entropy(A2, B2) == pytest.approx(relative_entropy(a, b), abs=1e-8)


def test_state_file_round_trip(tmp_path, rng):
    d = random_diagonal(rng, 5)
    write_state(tmp_path / "d.txt", d)
    assert np.allclose(read_state(tmp_path / "d.txt").probs, d.probs)
    r = random_dense(rng, 4)
    write_state(tmp_path / "r.txt", r)
    assert np.allclose(read_state(tmp_path / "r.txt").entries, r.entries)
