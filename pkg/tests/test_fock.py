import numpy as np
import pytest

from modesub import (
    FockDensity,
    HeraldingError,
    SecondMoments,
    apply_channel,
    apply_loss,
    apply_loss_fock,
    builtin_basis,
    change_basis,
    covariance_from_fock,
    covariance_from_squeeze,
    excess_kurtosis_analytic,
    excess_kurtosis_fock,
    fidelity,
    fock_moment,
    gaussian_moment,
    gaussian_to_fock,
    ideal_spec,
    parity_w0,
    partial_trace,
    purity,
    reduce_to_mode,
    reference_covariance,
    vacuum_covariance,
    wigner,
    wigner_grid,
)
from modesub.fock import destroy, mode_quadrature_moments
from tests.test_gaussian import random_covariance

V_SQ = np.diag([2.0, 0.5])


def squeezed_vacuum_vector(vx, dim):
    """Independent closed form: even Fock amplitudes of a squeezed vacuum.

    c_{2n} = (tanh r)^n sqrt((2n)!)/(2^n n!) / sqrt(cosh r) with the
    sign of r fixed so that <x^2> = vx.
    """
    r = 0.5 * np.log(vx)
    t, c = np.tanh(r), np.cosh(r)
    vec = np.zeros(dim)
    term = 1.0 / np.sqrt(c)
    for n in range(dim // 2):
        vec[2 * n] = term
        term *= t * np.sqrt((2 * n + 1) * (2 * n + 2)) / (2 * (n + 1))
    return vec / np.linalg.norm(vec)


def test_vacuum_is_fock_ground_state():
    rho = gaussian_to_fock(vacuum_covariance(2), cutoff=5)
    expected = np.zeros((25, 25))
    expected[0, 0] = 1.0
    assert np.allclose(rho.matrix, expected, atol=1e-12)


def test_squeezed_vacuum_moments_cutoff30():
    rho = gaussian_to_fock(V_SQ, cutoff=30)
    V = covariance_from_fock(rho)
    assert np.abs(V - V_SQ).max() < 1e-6
    assert rho.leak < 1e-6


def test_squeezed_vacuum_matches_closed_form():
    rho = gaussian_to_fock(V_SQ, cutoff=30)
    vec = squeezed_vacuum_vector(2.0, 30)
    overlap = np.real(vec @ rho.matrix @ vec)
    assert overlap > 1.0 - 1e-8


def test_reference_four_mode_moments():
    V = reference_covariance()
    rho = gaussian_to_fock(V, cutoff=6)
    Vb = covariance_from_fock(rho)
    assert np.abs(Vb - V).max() < 1e-3


def test_correlated_state_roundtrip():
    V = change_basis(
        covariance_from_squeeze([(2.5, -2.5), (1.5, -1.5)]), builtin_basis("EPR", 2)
    )
    rho = gaussian_to_fock(V, cutoff=14)
    assert np.abs(covariance_from_fock(rho) - V).max() < 1e-4


def test_gaussian_to_fock_validation():
    with pytest.raises(ValueError):
        gaussian_to_fock(np.eye(10))  # 5 modes
    with pytest.raises(ValueError):
        gaussian_to_fock(np.diag([0.5, 0.5]))  # unphysical
    with pytest.raises(ValueError):
        gaussian_to_fock(np.diag([8.0, 0.125]), cutoff=4)  # leaky cutoff


def test_fock_moment_matches_wick_on_random_states():
    rng = np.random.default_rng(10)
    for _ in range(3):
        V = random_covariance(rng, 2)
        rho = gaussian_to_fock(V, cutoff=16)
        m = SecondMoments.from_covariance(V)
        for _ in range(12):
            k = rng.choice([2, 4, 6])
            word = [(int(rng.integers(0, 2)), bool(rng.integers(0, 2))) for _ in range(k)]
            a = gaussian_moment(m, word)
            b = fock_moment(rho, word)
            assert abs(a - b) < 1e-5 * max(1.0, abs(a))


def test_ideal_subtraction_gives_squeezed_one_photon():
    rho = gaussian_to_fock(V_SQ, cutoff=30)
    out = apply_channel(rho, ideal_spec([1.0]))
    # independent reference: annihilate the closed-form squeezed vacuum
    vec = squeezed_vacuum_vector(2.0, 30)
    sub = destroy(30) @ vec
    sub = sub / np.linalg.norm(sub)
    ref = FockDensity(np.outer(sub, sub.conj()), (30,))
    assert fidelity(out, ref) > 1.0 - 1e-6
    assert out.heralding_weight is not None


def test_passthrough_channel_identity():
    from modesub import SubtractionSpec

    rho = gaussian_to_fock(V_SQ, cutoff=20)
    spec = SubtractionSpec(coefficients=[1.0], w0=1.0, p0=1.0, num_modes=1)
    out = apply_channel(rho, spec)
    assert np.allclose(out.matrix, rho.matrix, atol=1e-12)


def test_channel_heralding_error_on_vacuum():
    rho = gaussian_to_fock(vacuum_covariance(1), cutoff=10)
    with pytest.raises(HeraldingError):
        apply_channel(rho, ideal_spec([1.0]))


def test_channel_global_phase_invariance():
    rho = gaussian_to_fock(covariance_from_squeeze([(2, -2), (1, -1)]), cutoff=10)
    c = np.array([0.6, 0.8j])
    out1 = apply_channel(rho, ideal_spec(c))
    out2 = apply_channel(rho, ideal_spec(np.exp(1.3j) * c))
    assert np.abs(out1.matrix - out2.matrix).max() < 1e-12


def test_epr_subtraction_delocalizes():
    # subtracting in one EPR mode makes the *other* mode non-Gaussian
    V = change_basis(
        covariance_from_squeeze([(2.5, -2.5), (2.5, -2.5)]), builtin_basis("EPR", 2)
    )
    rho = gaussian_to_fock(V, cutoff=12)
    out = apply_channel(rho, ideal_spec([1.0, 0.0]))
    k_same = excess_kurtosis_fock(out, mode=[1.0, 0.0])
    k_other = excess_kurtosis_fock(out, mode=[0.0, 1.0])
    k_in = excess_kurtosis_fock(rho, mode=[0.0, 1.0])
    assert k_other < -0.4
    assert abs(k_same - k_in) < abs(k_other - k_in) / 5.0


def test_partial_trace_product_state():
    V = covariance_from_squeeze([(3.0, -3.0), (1.0, -1.0)])
    rho = gaussian_to_fock(V, cutoff=(14, 8))
    m0 = partial_trace(rho, [0])
    ref0 = gaussian_to_fock(covariance_from_squeeze([(3.0, -3.0)]), cutoff=14)
    assert np.abs(m0.matrix - ref0.matrix).max() < 1e-10
    assert np.isclose(np.trace(m0.matrix).real, 1.0, atol=1e-12)


def test_partial_trace_epr_reduction_is_thermal():
    V = change_basis(
        covariance_from_squeeze([(3.0103, -3.0103)] * 2), builtin_basis("EPR", 2)
    )
    rho = gaussian_to_fock(V, cutoff=12)
    red = partial_trace(rho, [0])
    # reduced mode has <n> = (Vx + Vp - 2)/4 = 0.125 and thermal ratios
    diag = np.diag(red.matrix).real
    nbar = 0.125
    expected = (nbar / (nbar + 1)) ** np.arange(12) / (nbar + 1)
    assert np.allclose(diag, expected, atol=1e-4)
    off = red.matrix - np.diag(np.diag(red.matrix))
    assert np.abs(off).max() < 1e-8
    assert np.isclose(parity_w0(red), 1.0 / (2 * nbar + 1), atol=1e-4)


def test_partial_trace_keep_order_and_validation():
    rho = gaussian_to_fock(covariance_from_squeeze([(2, -2), (1, -1)]), cutoff=(6, 5))
    both = partial_trace(rho, [0, 1])
    assert np.allclose(both.matrix, rho.matrix)
    swapped = partial_trace(rho, [1, 0])
    assert swapped.cutoffs == (5, 6)
    with pytest.raises(ValueError):
        partial_trace(rho, [])
    with pytest.raises(ValueError):
        partial_trace(rho, [2])


def test_reduce_to_mode_matches_gaussian_reduction():
    rng = np.random.default_rng(11)
    V = random_covariance(rng, 3)
    rho = gaussian_to_fock(V, cutoff=7)
    u = rng.normal(size=3) + 1j * rng.normal(size=3)
    u /= np.linalg.norm(u)
    red = reduce_to_mode(rho, u)
    m2, _ = mode_quadrature_moments(rho, mode=u)
    m2_red, _ = mode_quadrature_moments(red)
    assert abs(m2 - m2_red) < 2e-3


def test_basis_covariance_of_channel():
    # subtracting in mode c after a basis change U equals subtracting
    # in U^T c before it (oracle check)
    rng = np.random.default_rng(12)
    V = random_covariance(rng, 2)
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    U, _ = np.linalg.qr(z)
    c = rng.normal(size=2) + 1j * rng.normal(size=2)
    c /= np.linalg.norm(c)

    rho_rot = gaussian_to_fock(change_basis(V, U), cutoff=12)
    out_after = apply_channel(rho_rot, ideal_spec(c))
    rho = gaussian_to_fock(V, cutoff=12)
    out_before = apply_channel(rho, ideal_spec(U.T @ c))
    for u_meas in (np.array([1.0, 0.0]), np.array([0.3, 0.7j]) / np.linalg.norm([0.3, 0.7])):
        k_after = excess_kurtosis_fock(out_after, mode=u_meas)
        k_before = excess_kurtosis_fock(out_before, mode=U.T @ u_meas)
        assert np.isclose(k_after, k_before, atol=1e-6)


def test_wigner_vacuum_and_one_photon():
    vac = gaussian_to_fock(vacuum_covariance(1), cutoff=20)
    g = wigner_grid(vac)
    assert np.isclose(g.at_origin(), 1.0 / (2 * np.pi), atol=1e-12)
    assert np.isclose(g.integral(), 1.0, atol=1e-3)

    m = np.zeros((20, 20), dtype=complex)
    m[1, 1] = 1.0
    one = FockDensity(m, (20,))
    g1 = wigner_grid(one)
    assert np.isclose(2 * np.pi * g1.at_origin(), -1.0, atol=1e-9)


def test_wigner_squeezed_one_photon_exact():
    rho = gaussian_to_fock(V_SQ, cutoff=30)
    out = apply_channel(rho, ideal_spec([1.0]))
    xs = np.linspace(-10, 10, 161)
    g = wigner(out, xs, xs)
    X, P = np.meshgrid(xs, xs, indexing="ij")
    u = X**2 / 2.0 + 2.0 * P**2
    exact = (u - 1.0) * np.exp(-u / 2.0) / (2 * np.pi)
    assert np.abs(g.values - exact).max() < 1e-6
    assert np.isclose(2 * np.pi * g.at_origin(), -1.0, atol=1e-7)


def test_wigner_rejects_undersized_grid():
    rho = gaussian_to_fock(np.diag([6.0, 1.0 / 6.0]), cutoff=30)
    with pytest.raises(ValueError):
        wigner(rho, np.linspace(-2, 2, 41), np.linspace(-2, 2, 41))


def test_parity_examples():
    vac = gaussian_to_fock(vacuum_covariance(1), cutoff=10)
    assert np.isclose(parity_w0(vac), 1.0)
    m = np.zeros((10, 10), dtype=complex)
    m[1, 1] = 1.0
    assert np.isclose(parity_w0(FockDensity(m, (10,))), -1.0)
    th = gaussian_to_fock(np.eye(2) * 2.0, cutoff=40)  # nbar = 0.5
    assert np.isclose(parity_w0(th), 0.5, atol=1e-8)


def test_parity_matches_wigner_origin_on_random_state():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(25, 5)) + 1j * rng.normal(size=(25, 5))
    damp = np.exp(-0.4 * np.arange(25))
    mat = damp[:, None] * (A @ A.conj().T) * damp[None, :]
    rho = FockDensity(mat / np.trace(mat).real, (25,))
    g = wigner_grid(rho, half_width=12, points=241)
    assert abs(2 * np.pi * g.at_origin() - parity_w0(rho)) < 1e-4


def test_purity_and_fidelity_basics():
    vac = gaussian_to_fock(vacuum_covariance(1), cutoff=10)
    assert np.isclose(purity(vac), 1.0)
    assert np.isclose(fidelity(vac, vac), 1.0, atol=1e-9)
    th = gaussian_to_fock(np.eye(2) * 2.0, cutoff=40)
    assert np.isclose(purity(th), 0.5, atol=1e-8)


def test_uhlmann_fidelity_thermal_closed_form():
    # commuting states: F = (sum sqrt(p_i q_i))^2
    th1 = gaussian_to_fock(np.eye(2) * 1.6, cutoff=40)
    th2 = gaussian_to_fock(np.eye(2) * 2.4, cutoff=40)
    p = np.diag(th1.matrix).real
    q = np.diag(th2.matrix).real
    expected = np.sum(np.sqrt(p * q)) ** 2
    assert np.isclose(fidelity(th1, th2), expected, atol=1e-9)


def test_fidelity_overlap_equals_uhlmann_for_pure():
    rho = gaussian_to_fock(V_SQ, cutoff=25)
    out = apply_channel(rho, ideal_spec([1.0]))
    assert np.isclose(fidelity(rho, out, kind="overlap"), fidelity(rho, out), atol=1e-7)


def test_fidelity_rejects_non_psd():
    m = np.diag([1.5, -0.5]).astype(complex)
    bad = FockDensity(m, (2,))
    good = FockDensity(np.diag([1.0, 0.0]).astype(complex), (2,))
    with pytest.raises(ValueError):
        fidelity(bad, good)


def test_ideal_subtraction_purities_from_reference_blocks():
    # targets from the reported table, computed from the diagonal blocks
    targets = [0.53, 0.49, 0.50]
    for k, target in enumerate(targets):
        V = covariance_from_squeeze([np.array([(2.8, -1.8), (2.1, -1.6), (1.6, -1.0)])[k]])
        rho = gaussian_to_fock(V, cutoff=30)
        out = apply_channel(rho, ideal_spec([1.0]))
        assert abs(purity(out) - target) < 0.05


def test_loss_channel_matches_gaussian_map():
    rng = np.random.default_rng(14)
    V = random_covariance(rng, 2)
    rho = gaussian_to_fock(V, cutoff=12)
    lossy = apply_loss_fock(rho, [0.8, 0.6])
    expected = apply_loss(V, [0.8, 0.6])
    assert np.abs(covariance_from_fock(lossy) - expected).max() < 1e-4
    assert np.isclose(np.trace(lossy.matrix).real, 1.0, atol=1e-10)


def test_mode_moments_match_analytic():
    rng = np.random.default_rng(15)
    V = random_covariance(rng, 2)
    rho = gaussian_to_fock(V, cutoff=16)
    u = rng.normal(size=2) + 1j * rng.normal(size=2)
    u /= np.linalg.norm(u)
    k_o = excess_kurtosis_fock(rho, mode=u)
    k_a = excess_kurtosis_analytic(V, None, u)
    assert abs(k_o - k_a) < 1e-5
    k_o_eta = excess_kurtosis_fock(rho, mode=u, eta=0.8)
    k_a_eta = excess_kurtosis_analytic(V, None, u, eta=0.8)
    assert abs(k_o_eta - k_a_eta) < 1e-5


def test_validate_accepts_outputs():
    rho = gaussian_to_fock(V_SQ, cutoff=20)
    rho.validate()
    out = apply_channel(rho, ideal_spec([1.0]))
    out.validate()


def test_wigner_grid_serialization(tmp_path):
    rho = gaussian_to_fock(vacuum_covariance(1), cutoff=10)
    g = wigner_grid(rho, half_width=5, points=41)
    csv_path = tmp_path / "grid.csv"
    g.to_csv(csv_path)
    g2 = type(g).from_csv(csv_path)
    assert np.allclose(g2.values, g.values, atol=1e-10)
    bin_path = tmp_path / "grid.bin"
    g.to_binary(bin_path)
    g3 = type(g).from_binary(bin_path)
    assert np.allclose(g3.values, g.values)
    assert np.allclose(g3.xs, g.xs)
