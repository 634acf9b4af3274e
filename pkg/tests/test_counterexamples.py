from math import sqrt

import numpy as np
import pytest
from scipy.integrate import quad

from qclt.counterexamples import (
    DivergenceFlag,
    MixtureDensity,
    PointMass,
    ThermalFamilyPoint,
    char_excess,
    h_eval,
    h_threshold_search,
    lemma72_reference,
    mixture_char,
    mixture_diag,
    mixture_family,
    mixture_power,
    plateau_solve,
    w_moment,
    w_moment_quadrature,
)
from qclt.errors import NoValidDensity, SpecError
from qclt.fock import covariance, first_moments
from qclt.gaussian import ThermalSpec, gaussify, thermal_fock
from qclt.phase_space import radial_char


@pytest.fixture(scope="module")
def trace_state():
    return mixture_diag(mixture_family("trace", 0.5), 1024)


def test_plateau_solution_trace_family():
    w = plateau_solve(3.5, 0.5)
    assert w.plateau == pytest.approx(96 / 53, abs=1e-14)
    assert w.a == pytest.approx(5 / 53, abs=1e-14)
    assert w.a == pytest.approx(1 - w.plateau / 2, abs=1e-14)


@pytest.mark.parametrize("kind", ["trace", "relent"])
@pytest.mark.parametrize("theta", [0.1, 0.5, 0.9])
def test_density_constraints(kind, theta):
    w = mixture_family(kind, theta)
    for k in (0, 2):
        assert w_moment(w, k) == pytest.approx(1.0, abs=1e-12)
        assert w_moment_quadrature(w, k) == pytest.approx(1.0, abs=1e-12)
    # independent adaptive quadrature of the piecewise density
    mass = quad(w, 0.5, 1)[0] + quad(w, 1, np.inf)[0]
    second = quad(lambda s: s * s * w(s), 0.5, 1)[0] + quad(lambda s: s * s * w(s), 1, np.inf)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert second == pytest.approx(1.0, abs=1e-9)
    assert np.all(w(np.linspace(0, 50, 1001)) >= 0)
    assert isinstance(w_moment(w, w.tail_exponent - 1 + 0.01), DivergenceFlag)
    assert not w_moment(w, w.tail_exponent - 1)


def test_plateau_rejects_bad_input():
    with pytest.raises(SpecError):
        plateau_solve(3.5, 1.5)
    with pytest.raises(SpecError):
        plateau_solve(3.0, 0.5)
    with pytest.raises(NoValidDensity):
        MixtureDensity(0.5, 3.5, -0.1, 1.0)


def test_moment_examples():
    w = mixture_family("trace", 0.5)
    assert w_moment(w, 2) == pytest.approx(1.0, abs=1e-15)
    assert isinstance(w_moment(w, 3.5), DivergenceFlag)
    m = w_moment(w, 2.4)
    assert m == pytest.approx(w_moment_quadrature(w, 2.4), abs=1e-8)
    assert m == pytest.approx(2.8407641542782307, abs=1e-12)


def test_thermal_family_point():
    pt = ThermalFamilyPoint(1.0)
    assert pt.nu == 4.0
    assert pt.s_n(1) == 1.0
    assert ThermalFamilyPoint(3.0).s_n(1) == pytest.approx(3.0)
    assert ThermalFamilyPoint(3.0).s_n(1e12) == pytest.approx(1.0)
    assert np.isinf(ThermalFamilyPoint(0.5).beta_s)
    with pytest.raises(SpecError):
        ThermalFamilyPoint(0.4)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 10.0])
def test_family_weights_match_thermal(s):
    K = 60
    ref = thermal_fock(ThermalSpec.from_nu(4 * s * s), K, tol=1.0).probs
    assert np.max(np.abs(ThermalFamilyPoint(s).weights(K) - ref)) < 1e-12


def test_point_mass_gives_tau_one():
    d = mixture_diag(PointMass(), 40)
    assert np.max(np.abs(d.probs - 0.4 * 0.6 ** np.arange(41))) < 1e-12


def test_mixture_is_centered_with_thermal_covariance(trace_state):
    assert np.allclose(first_moments(trace_state), 0)
    assert np.allclose(covariance(trace_state), 4 * np.eye(2), atol=1e-8)
    assert trace_state.probs.sum() + trace_state.tail_mass == pytest.approx(1.0, abs=1e-12)


def test_mixture_gaussification_is_tau_one(trace_state):
    spec, g = gaussify(trace_state, cutoff=80, tol=1.0)
    assert np.allclose(spec.cov, 4 * np.eye(2), atol=1e-8)
    assert np.allclose(g.probs, 0.4 * 0.6 ** np.arange(81), atol=1e-12)


def test_moment_growth_across_cutoffs():
    w = mixture_family("trace", 0.5)
    m24, m30 = [], []
    for K in (256, 1024, 4096):
        d = mixture_diag(w, K)
        k = np.arange(K + 1)
        m24.append(float(d.probs @ (k + 1) ** 1.2))
        m30.append(float(d.probs @ (k + 1) ** 1.5))
    inc24 = np.diff(m24)
    inc30 = np.diff(m30)
    # below the divergence threshold the increments shrink, above it they grow
    assert inc24[1] < inc24[0]
    assert inc30[1] > inc30[0]
    assert m30[-1] > 10


def test_char_sandwich():
    r = np.linspace(0.01, 5, 200)
    for kind in ("trace", "relent"):
        w = mixture_family(kind, 0.5)
        c = mixture_char(w, r)
        assert np.all(c >= np.exp(-2 * r * r))
        assert np.all(c <= np.exp(-r * r / 2))
        eta = -np.log(c) / (2 * r * r) - 1
        assert np.all(eta <= 1e-15)
        assert np.all(char_excess(w, r) >= 0)


def test_char_agrees_with_fock_weights(trace_state):
    r = np.linspace(0.01, 5, 200)
    w = mixture_family("trace", 0.5)
    # the truncated state misses exactly its tail mass at r = 0
    gap = np.max(np.abs(radial_char(trace_state, r) - mixture_char(w, r)))
    assert gap <= trace_state.tail_mass + 1e-8


def test_reference_examples():
    w = mixture_family("relent", 0.5)
    assert lemma72_reference(w, 1, 256)[1] <= 1e-8
    for n in (1, 64, 1000):
        assert lemma72_reference(PointMass(), n, 64)[1] <= 1e-8


def test_reference_residual_decay():
    w = mixture_family("relent", 0.5)
    ns = [64, 128, 256, 512, 1024, 2048]
    res = [lemma72_reference(w, n, 256)[1] for n in ns]
    slope = np.polyfit(np.log(ns), np.log(res), 1)[0]
    assert slope <= -1.2


def test_mixture_power_matches_pair_convolution():
    from qclt.convolution import convolve_pair

    w = mixture_family("trace", 0.5)
    K = 128
    d = mixture_diag(w, K)
    direct = convolve_pair(d, d, 0.5, cutoff=2 * K).probs[: K + 1]
    P = mixture_power(w, 2, K)
    assert np.max(np.abs(P.probs - direct)) <= 2 * d.tail_mass


def test_h_examples():
    assert h_eval(0.0) == 0.0
    assert h_eval(0.01) / 0.01 ** 4 == pytest.approx(5 / 720, abs=1e-4)
    assert h_eval(1.0) == pytest.approx(0.0067733, abs=1e-6)
    t = np.arange(-100000, 100001) * 1e-3
    assert h_eval(t).min() >= -1e-12


def test_h_series_and_direct_formula_agree():
    t = np.array([0.5, 0.9, 0.999, 1.001, 1.2])
    direct = np.sin(t) / t + (np.cos(t) - 1) / t ** 2 - 0.5 + t ** 2 / 8
    assert np.allclose(h_eval(t), direct, rtol=1e-9)


def test_h_threshold():
    c = h_threshold_search()
    assert c == pytest.approx(3.477, abs=1e-9)
    t = np.arange(c, 100, 1e-3)
    assert np.all(h_eval(t) >= t ** 2 / 16)
    assert h_eval(c - 2e-3) < (c - 2e-3) ** 2 / 16
