import numpy as np
import pytest

from modesub import (
    HeraldingError,
    SecondMoments,
    SubtractionSpec,
    builtin_basis,
    change_basis,
    covariance_from_squeeze,
    excess_kurtosis_analytic,
    gaussian_moment,
    ideal_spec,
    phase_averaged_moments,
    reference_covariance,
    reference_spec,
    subtracted_moment,
    vacuum_covariance,
)
from tests.test_gaussian import random_covariance

V_SQ = np.diag([2.0, 0.5])


def quadrature_variance(V, theta):
    """V(theta) of mode 0 read directly off a single-mode covariance."""
    c, s = np.cos(theta), np.sin(theta)
    return c * c * V[0, 0] + s * s * V[1, 1] + 2 * s * c * V[0, 1]


def test_second_moments_vacuum():
    m = SecondMoments.from_covariance(vacuum_covariance(3))
    assert np.allclose(m.aa, 0.0)
    assert np.allclose(m.ada, 0.0)


def test_second_moments_squeezed():
    m = SecondMoments.from_covariance(V_SQ)
    assert np.isclose(m.ada[0, 0], 0.125)  # (Vx + Vp - 2)/4
    assert np.isclose(m.aa[0, 0], 0.375)  # (Vx - Vp)/4


def test_gaussian_moment_examples():
    m = SecondMoments.from_covariance(vacuum_covariance(1))
    assert gaussian_moment(m, [(0, True), (0, False)]) == 0.0
    msq = SecondMoments.from_covariance(V_SQ)
    assert np.isclose(gaussian_moment(msq, [(0, True), (0, False)]).real, 0.125)
    assert np.isclose(gaussian_moment(msq, [(0, False), (0, False)]).real, 0.375)
    # hand Wick pairing: <ad ad a a> = 2 q^2 + |m|^2
    val = gaussian_moment(msq, [(0, True), (0, True), (0, False), (0, False)])
    assert np.isclose(val.real, 2 * 0.125**2 + 0.375**2)
    assert np.isclose(val.real, 0.171875)


def test_odd_words_vanish():
    rng = np.random.default_rng(0)
    m = SecondMoments.from_covariance(random_covariance(rng, 2))
    assert gaussian_moment(m, [(0, False)]) == 0.0
    assert gaussian_moment(m, [(0, True), (1, False), (0, False)]) == 0.0


def test_moment_hermiticity():
    # <W> = conj(<reversed, dagger-flipped W>)
    rng = np.random.default_rng(1)
    m = SecondMoments.from_covariance(random_covariance(rng, 2))
    for _ in range(30):
        k = rng.choice([2, 4, 6])
        word = [(int(rng.integers(0, 2)), bool(rng.integers(0, 2))) for _ in range(k)]
        flipped = [(mode, not dag) for mode, dag in reversed(word)]
        assert np.isclose(
            gaussian_moment(m, word), np.conj(gaussian_moment(m, flipped)), atol=1e-12
        )


def test_word_validation():
    m = SecondMoments.from_covariance(vacuum_covariance(1))
    with pytest.raises(ValueError):
        gaussian_moment(m, [(2, False), (0, True)])
    with pytest.raises(ValueError):
        gaussian_moment(m, [(0, False)] * 14)


def test_subtracted_moment_vacuum_ideal_raises():
    with pytest.raises(HeraldingError):
        subtracted_moment(vacuum_covariance(1), ideal_spec([1.0]), [(0, True), (0, False)])


def test_subtracted_x2_is_three_vx():
    # photon subtraction turns the squeezed vacuum into a squeezed
    # one-photon state with <x^2> = 3 Vx = 6
    spec = ideal_spec([1.0])
    aa = subtracted_moment(V_SQ, spec, [(0, False), (0, False)]).real
    n = subtracted_moment(V_SQ, spec, [(0, True), (0, False)]).real
    assert np.isclose(2 * aa + 2 * n + 1, 6.0, atol=1e-12)


def test_subtracted_mode_selectivity():
    V = covariance_from_squeeze([(3.0, -3.0), (2.0, -2.0)])
    spec = ideal_spec([1.0, 0.0])
    m = SecondMoments.from_covariance(V)
    for word in ([(1, True), (1, False)], [(1, False), (1, False)],
                 [(1, True), (1, True), (1, False), (1, False)]):
        assert np.isclose(
            subtracted_moment(V, spec, word), gaussian_moment(m, word), atol=1e-12
        )


def test_passthrough_channel_reproduces_gaussian():
    V = V_SQ
    spec = SubtractionSpec(coefficients=[1.0], w0=1.0, p0=1.0, num_modes=1)
    m = SecondMoments.from_covariance(V)
    word = [(0, True), (0, True), (0, False), (0, False)]
    assert subtracted_moment(V, spec, word) == gaussian_moment(m, word)


def test_kurtosis_vacuum_is_zero():
    spec = SubtractionSpec(coefficients=[1.0], w0=1.0, p0=1.0, num_modes=1)
    assert abs(excess_kurtosis_analytic(vacuum_covariance(1), spec, [1.0])) < 1e-12
    assert abs(excess_kurtosis_analytic(vacuum_covariance(1), None, [1.0])) < 1e-12


def test_kurtosis_gaussian_squeezed_value():
    # independent quadrature oracle: K = 3 (avg V^2 / (avg V)^2 - 1)
    thetas = np.linspace(0.0, 2 * np.pi, 20001)
    v = quadrature_variance(V_SQ, thetas)
    expected = 3.0 * (np.trapezoid(v * v, thetas) / np.trapezoid(v, thetas) ** 2 * (2 * np.pi) - 1.0)
    got = excess_kurtosis_analytic(V_SQ, None, [1.0])
    assert np.isclose(got, expected, atol=1e-6)
    assert np.isclose(got, 0.54, atol=1e-12)


def test_kurtosis_subtracted_squeezed_value():
    # independent oracle: squeezed one-photon state, m4 = 15 avg(V^2),
    # m2 = 3 avg(V)
    thetas = np.linspace(0.0, 2 * np.pi, 20001)
    v = quadrature_variance(V_SQ, thetas)
    avg_v = np.trapezoid(v, thetas) / (2 * np.pi)
    avg_v2 = np.trapezoid(v * v, thetas) / (2 * np.pi)
    expected = 15.0 * avg_v2 / (3.0 * avg_v) ** 2 - 3.0
    got = excess_kurtosis_analytic(V_SQ, ideal_spec([1.0]), [1.0])
    assert np.isclose(got, expected, atol=1e-6)
    assert np.isclose(got, -31.0 / 30.0, atol=1e-12)


def test_gaussian_kurtosis_never_negative():
    rng = np.random.default_rng(2)
    for _ in range(40):
        n = int(rng.integers(1, 3))
        V = random_covariance(rng, n)
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        assert excess_kurtosis_analytic(V, None, u) >= -1e-9


def test_kurtosis_loss_map_limits():
    # eta -> full loss limit pushes any state toward vacuum statistics
    spec = ideal_spec([1.0])
    k_clean = excess_kurtosis_analytic(V_SQ, spec, [1.0], eta=1.0)
    k_lossy = excess_kurtosis_analytic(V_SQ, spec, [1.0], eta=0.5)
    assert k_lossy > k_clean
    with pytest.raises(ValueError):
        excess_kurtosis_analytic(V_SQ, spec, [1.0], eta=0.0)


def test_phase_averaged_moments_vacuum():
    m2, m4 = phase_averaged_moments(vacuum_covariance(1), None, [1.0])
    assert np.isclose(m2, 1.0)
    assert np.isclose(m4, 3.0)


def test_reference_channel_kurtosis_pattern():
    # subtraction in one mode de-Gaussifies it (kurtosis drops below 0)
    # while the other modes keep their Gaussian input kurtosis; note a
    # squeezed Gaussian mode has a large *positive* phase-averaged
    # kurtosis, so "unchanged", not "zero", is the selectivity signature
    V = reference_covariance()
    c = np.zeros(4); c[0] = 1.0
    spec = reference_spec(c)
    k0 = excess_kurtosis_analytic(V, spec, [1, 0, 0, 0])
    k0_in = excess_kurtosis_analytic(V, None, [1, 0, 0, 0])
    k1 = excess_kurtosis_analytic(V, spec, [0, 1, 0, 0])
    k1_in = excess_kurtosis_analytic(V, None, [0, 1, 0, 0])
    assert k0 < 0.0 < k0_in
    assert k1_in > 0.2
    assert abs(k1 - k1_in) < 0.05


def test_basis_covariance_of_subtraction():
    # subtracting in mode c after a passive basis change U equals
    # subtracting in U^T c before it (operators b = U a)
    rng = np.random.default_rng(3)
    V = random_covariance(rng, 2)
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    U, _ = np.linalg.qr(z)
    Vrot = change_basis(V, U)
    c = rng.normal(size=2) + 1j * rng.normal(size=2)
    c /= np.linalg.norm(c)
    k_after = excess_kurtosis_analytic(Vrot, ideal_spec(c), [1.0, 0.0])
    k_before = excess_kurtosis_analytic(V, ideal_spec(U.T @ c), U.T @ np.array([1.0, 0.0]))
    assert np.isclose(k_after, k_before, atol=1e-10)
