from math import exp, pi, sqrt

import numpy as np
import pytest

from conftest import number, pure
from qclt.convolution import convolve_pair, wigner_positivity_probe
from qclt.errors import GridTooCoarse, NegativeMass, SpecError
from qclt.fock import FockCutoff, as_dense, displacement_matrix, schatten_norm, trace_distance
from qclt.gaussian import ThermalSpec, thermal_fock
from qclt.phase_space import (
    char_fn,
    char_samples,
    char_values,
    diagonal_from_radial_char,
    dump_samples,
    invert_char,
    lattice_grid,
    max_char_modulus,
    plancherel_residual,
    polar_grid,
    radial_grid,
    trace_norm_upper,
    wigner_fn,
    wigner_normalization,
)
from qclt.states import random_dense, random_diagonal


def test_char_examples():
    assert char_fn(number(3), 0.0) == pytest.approx(1.0)
    assert char_fn(number(0), 1.0) == pytest.approx(exp(-0.5))
    assert char_fn(number(0), 1j) == pytest.approx(exp(-0.5))
    assert char_fn(number(1), sqrt(2)) == pytest.approx(-exp(-1))


def test_dense_char_agrees_with_displacement_trace(rng):
    for _ in range(3):
        rho = random_dense(rng, 8)
        D = displacement_matrix(0.5 + 0.2j, FockCutoff(60))[:9, :9]
        direct = np.trace(rho.entries @ D)
        assert char_fn(rho, 0.5 + 0.2j) == pytest.approx(direct, abs=1e-12)


def test_char_symmetry_and_modulus(rng):
    rho = random_dense(rng, 6)
    z = rng.normal(size=20) + 1j * rng.normal(size=20)
    assert np.allclose(char_values(rho, -z), np.conj(char_values(rho, z)), atol=1e-12)
    for st in (number(1), random_diagonal(rng, 6), rho, pure([1, 0, 0, 1])):
        assert max_char_modulus(st) < 1 - 1e-12


def test_wigner_examples():
    z = np.array([0.0, 0.5, 0.3 + 0.4j])
    assert np.allclose(wigner_fn(number(0), z), 2 / pi * np.exp(-2 * np.abs(z) ** 2), atol=1e-10)
    # single photon: (2/pi)(4|z|^2 - 1) e^{-2|z|^2}
    u = np.abs(z) ** 2
    assert np.allclose(wigner_fn(number(1), z), 2 / pi * (4 * u - 1) * np.exp(-2 * u), atol=1e-10)
    th4 = thermal_fock(ThermalSpec.from_nu(4.0), 100, tol=1.0)
    assert wigner_fn(th4, [0.0])[0] == pytest.approx(1 / (2 * pi), abs=1e-8)
    assert wigner_normalization(th4) == pytest.approx(1.0, abs=1e-6)


def test_wigner_of_dense_state():
    sup = pure([1, 0, 0, 1], K=8)
    # parity of (|0> + |3>)/sqrt 2 vanishes
    g = lattice_grid(8.0, 0.2)
    assert wigner_fn(sup, [0.0], grid=g)[0] == pytest.approx(0.0, abs=1e-8)
    assert wigner_fn(sup, [0.0], grid=lattice_grid(8.0, 0.1))[0] == pytest.approx(0.0, abs=1e-8)
    assert wigner_normalization(sup, grid=g, zstep=0.25, zrad=5) == pytest.approx(1.0, abs=1e-6)


def test_wigner_of_convolution_is_nonnegative(rng):
    ax = np.arange(-3, 3.01, 0.5)
    X, Y = np.meshgrid(ax, ax)
    pts = (X + 1j * Y).ravel()
    for _ in range(3):
        a, b = random_dense(rng, 4), random_dense(rng, 4)
        out = convolve_pair(a, b, 0.5, cutoff=8)
        assert wigner_fn(out, pts, grid=lattice_grid(8.0, 0.2)).min() >= -1e-7
    for _ in range(5):
        a, b = random_diagonal(rng, 8), random_diagonal(rng, 8)
        assert wigner_positivity_probe(convolve_pair(a, b, 0.5, cutoff=16)) >= -1e-7


@pytest.mark.parametrize("state", [number(0), number(1), thermal_fock(ThermalSpec.from_nu(4.0), 100, tol=1.0)])
def test_plancherel_lattice(state):
    assert plancherel_residual(state, lattice_grid(8.0, 0.05)) <= 1e-6
    assert plancherel_residual(state, radial_grid(state.K)) <= 1e-8


def test_plancherel_thermal_purity():
    st = thermal_fock(ThermalSpec.from_nu(4.0), 100, tol=1.0)
    assert float(st.probs @ st.probs) == pytest.approx(0.25, abs=1e-12)


def test_plancherel_needs_large_grid():
    with pytest.raises(GridTooCoarse):
        plancherel_residual(number(0), lattice_grid(4.0, 0.05))


def test_trace_norm_upper_examples():
    assert trace_norm_upper(np.zeros((3, 3), dtype=complex)) == 0.0
    assert trace_norm_upper(np.diag([-1.0, 1.0]).astype(complex)) >= 2.0


def test_trace_norm_upper_dominates(rng):
    K = 12
    base = as_dense(thermal_fock(ThermalSpec.from_nu(4.0), K, tol=1.0)).entries
    base = base - as_dense(thermal_fock(ThermalSpec.from_nu(3.9), K, tol=1.0)).entries
    for _ in range(20):
        g = rng.normal(size=(K + 1, K + 1)) + 1j * rng.normal(size=(K + 1, K + 1))
        g = (g + g.conj().T) * np.exp(-np.arange(K + 1))[:, None] * np.exp(-np.arange(K + 1))[None, :]
        T = base + 1e-3 * g
        assert trace_norm_upper(T) >= schatten_norm(T, 1) - 1e-6


def test_invert_round_trips():
    vac = invert_char(char_samples(number(0), lattice_grid(10.0, 0.1)), 4)
    assert trace_distance(vac, as_dense(number(0), 4)) < 1e-8
    th = thermal_fock(ThermalSpec.from_nu(4.0), 30, tol=1.0)
    back = invert_char(char_samples(th, polar_grid(30)), 30)
    assert np.max(np.abs(np.real(np.diag(back.entries)) - th.probs)) < 1e-7
    sup = pure([1, 0, 0, 1], K=8)
    for grid in (polar_grid(8), lattice_grid(10.0, 0.1)):
        assert trace_distance(invert_char(char_samples(sup, grid), 8), sup) < 1e-6


def test_invert_squared_single_photon_char():
    g = polar_grid(4)
    vals = char_values(number(1), g.nodes / sqrt(2)) ** 2
    from qclt.phase_space import CharSamples

    out = invert_char(CharSamples(g, vals), 4)
    assert np.allclose(np.real(np.diag(out.entries))[:3], [0.5, 0, 0.5], atol=1e-8)


def test_invert_rejects_coarse_lattice():
    with pytest.raises(GridTooCoarse):
        invert_char(char_samples(number(0), lattice_grid(8.0, 0.5)), 40)


def test_radial_inversion_examples():
    assert diagonal_from_radial_char(lambda r: np.exp(-r * r / 2), 10).probs[0] == pytest.approx(1.0)
    p = diagonal_from_radial_char(lambda r: np.exp(-2 * r * r), 100).probs
    assert np.allclose(p, 0.4 * 0.6 ** np.arange(101), atol=1e-12)
    p = diagonal_from_radial_char(lambda r: (np.exp(-r * r / 4) * (1 - r * r / 2)) ** 2, 10).probs
    assert np.allclose(p[:4], [0.5, 0, 0.5, 0], atol=1e-12)


def test_radial_inversion_flags_negative_mass():
    with pytest.raises(NegativeMass):
        diagonal_from_radial_char(lambda r: np.exp(-r * r / 2) * (1 - r * r) * 2 - np.exp(-r * r / 2), 4)


def test_radial_grid_reproduces_gaussian_moments():
    g = radial_grid(16)
    for k in range(6):
        # int_0^inf 2 r r^{2k} e^{-r^2} dr = k!
        val = float(np.sum(g.weights * g.nodes ** (2 * k) * np.exp(-g.nodes ** 2)))
        assert val == pytest.approx(float(np.prod(np.arange(1, k + 1))), rel=1e-10)


def test_radial_grid_needs_phase_invariant_operator():
    with pytest.raises(SpecError):
        char_samples(pure([1, 1]), radial_grid(1))


def test_dump_samples(tmp_path):
    path = tmp_path / "chi.csv"
    dump_samples(char_samples(number(0), lattice_grid(1.0, 0.5)), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "re_z,im_z,re_chi,im_chi"
    assert len(lines) == 26
