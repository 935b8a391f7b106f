import numpy as np
import pytest

from modesub import (
    REFERENCE_SQUEEZE_DB,
    apply_loss,
    builtin_basis,
    chain_adjacency,
    change_basis,
    covariance_from_json,
    covariance_from_squeeze,
    covariance_to_json,
    duan_value,
    epr_value,
    nullifier_variances,
    reference_covariance,
    ring_adjacency,
    symplectic_eigenvalues,
    validate,
    vacuum_covariance,
    williamson,
)
from modesub.gaussian import omega, symplectic_from_unitary


def random_covariance(rng, n_modes, max_db=3.0, pure=False):
    """Random physical covariance: random squeezing + random passive basis."""
    pairs = []
    for _ in range(n_modes):
        p_db = -rng.uniform(0.2, max_db)
        x_db = -p_db if pure else -p_db + rng.uniform(0.0, 0.5)
        pairs.append((x_db, p_db))
    V = covariance_from_squeeze(pairs)
    z = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    U, _ = np.linalg.qr(z)
    return change_basis(V, U)


def test_vacuum_squeeze_gives_identity():
    assert np.allclose(covariance_from_squeeze([(0, 0), (0, 0)]), np.eye(4))


def test_reference_mode0_variances():
    V = covariance_from_squeeze([REFERENCE_SQUEEZE_DB[0]])
    assert np.isclose(V[0, 0], 10 ** 0.28, atol=1e-12)
    assert np.isclose(V[1, 1], 10 ** -0.18, atol=1e-12)
    # the tabulated 4-decimal values
    assert np.isclose(V[0, 0], 1.9055, atol=5e-5)
    assert np.isclose(V[1, 1], 0.6607, atol=5e-5)


def test_factor_two_squeezing():
    V = covariance_from_squeeze([(3.0103, -3.0103)])
    assert np.allclose(np.diag(V), [2.0, 0.5], atol=1e-4)


def test_unphysical_squeeze_raises():
    with pytest.raises(ValueError):
        covariance_from_squeeze([(1.0, -1.5)])


def test_change_basis_identity_and_vacuum():
    rng = np.random.default_rng(0)
    V = random_covariance(rng, 3)
    assert np.allclose(change_basis(V, np.eye(3)), V)
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    U, _ = np.linalg.qr(z)
    assert np.allclose(change_basis(vacuum_covariance(3), U), np.eye(6), atol=1e-12)


def test_change_basis_is_symplectic():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    U, _ = np.linalg.qr(z)
    S = symplectic_from_unitary(U)
    assert np.linalg.norm(S @ omega(4) @ S.T - omega(4)) < 1e-10
    assert np.linalg.norm(S @ S.T - np.eye(8)) < 1e-10


def test_change_basis_preserves_symplectic_spectrum():
    rng = np.random.default_rng(2)
    V = random_covariance(rng, 3)
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    U, _ = np.linalg.qr(z)
    assert np.allclose(
        symplectic_eigenvalues(V), symplectic_eigenvalues(change_basis(V, U)), atol=1e-9
    )


def test_change_basis_rejects_non_unitary():
    with pytest.raises(ValueError):
        change_basis(np.eye(4), np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_epr_duan_hand_value_balanced():
    # two modes squeezed by a factor 2: x_E0 - x_E1 = sqrt(2) p-type
    # quadrature with variance 0.5, so each Duan term is 2 * 0.5
    V = covariance_from_squeeze([(3.0103, -3.0103)] * 2)
    Ve = change_basis(V, builtin_basis("EPR", 2))
    assert np.isclose(duan_value(Ve), 2.0, atol=1e-3)


def test_loss_examples():
    V = covariance_from_squeeze([REFERENCE_SQUEEZE_DB[0]])
    assert np.allclose(apply_loss(V, 1.0), V)
    lossy = apply_loss(V, 0.875)
    assert np.isclose(lossy[1, 1], 0.875 * (10 ** -0.18) + 0.125, atol=1e-12)
    assert np.isclose(lossy[1, 1], 0.7031, atol=1e-4)
    assert np.allclose(apply_loss(np.eye(6), 0.875), np.eye(6))


def test_loss_cross_blocks():
    rng = np.random.default_rng(5)
    V = random_covariance(rng, 2)
    out = apply_loss(V, [0.9, 0.5])
    expected = V[0:2, 2:4] * np.sqrt(0.9 * 0.5)
    assert np.allclose(out[0:2, 2:4], expected)


def test_loss_rejects_bad_transmission():
    for eta in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            apply_loss(np.eye(2), eta)


def test_duan_vacuum_boundary():
    assert np.isclose(duan_value(vacuum_covariance(2)), 4.0)


def test_duan_reference_epr_value():
    # frozen hand computation: 2*(10**-0.16 + 10**-0.18) = 2.7050488
    V = covariance_from_squeeze(REFERENCE_SQUEEZE_DB[:2])
    Ve = change_basis(V, builtin_basis("EPR", 2))
    assert np.isclose(duan_value(Ve), 2.7050488, atol=1e-6)
    assert duan_value(Ve) < 4.0


def test_duan_is_symmetric():
    rng = np.random.default_rng(6)
    V = random_covariance(rng, 2)
    assert np.isclose(duan_value(V, (0, 1)), duan_value(V, (1, 0)))


def test_epr_vacuum_boundary():
    assert np.isclose(epr_value(vacuum_covariance(2)), 1.0)


def test_epr_reference_value():
    # frozen hand computation: conditional variances 1.0151 * 0.9389
    V = covariance_from_squeeze(REFERENCE_SQUEEZE_DB[:2])
    Ve = change_basis(V, builtin_basis("EPR", 2))
    val = epr_value(Ve, conditioned=1, conditioning=0)
    assert np.isclose(val, 0.9530766, atol=1e-6)
    assert val < 1.0


def test_epr_strong_squeezing_limit():
    V = covariance_from_squeeze([(10.0, -10.0)] * 2)
    Ve = change_basis(V, builtin_basis("EPR", 2))
    val = epr_value(Ve, conditioned=1, conditioning=0)
    # closed form: conditional variance (5.05 - 4.95**2 / 5.05) each
    cv = 5.05 - 4.95**2 / 5.05
    assert np.isclose(val, cv * cv, atol=1e-10)
    assert val < 0.2


def test_epr_zero_conditioning_variance_raises():
    V = np.diag([1.0, 1.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        epr_value(V, conditioned=0, conditioning=1)


def test_nullifiers_vacuum():
    for adj in (chain_adjacency(4), ring_adjacency(4)):
        assert np.allclose(nullifier_variances(vacuum_covariance(4), adj), 1.0)


def independent_nullifier_ratios(V, A):
    """Test-side oracle: explicit loops over the nullifier definition."""
    n = A.shape[0]
    out = []
    for k in range(n):
        coef = np.zeros(2 * n)
        coef[2 * k] = 1.0
        for l in range(n):
            coef[2 * l + 1] -= A[k, l]
        var = coef @ V @ coef
        out.append(var / (1.0 + A[k].sum()))
    return np.array(out)


def test_lc_chain_nullifiers_subvacuum():
    V = change_basis(reference_covariance(), builtin_basis("LC", 4))
    ratios = nullifier_variances(V, chain_adjacency(4))
    assert np.allclose(ratios, independent_nullifier_ratios(V, chain_adjacency(4)))
    assert np.all(ratios < 1.0)
    # frozen values from the diagonal reference state
    assert np.allclose(ratios, [0.739, 0.7002, 0.739, 0.7002], atol=5e-4)


def test_sc_ring_nullifiers_subvacuum():
    V = change_basis(reference_covariance(), builtin_basis("SC", 4))
    ratios = nullifier_variances(V, ring_adjacency(4))
    assert np.allclose(ratios, independent_nullifier_ratios(V, ring_adjacency(4)))
    assert np.all(ratios < 1.0)
    assert np.allclose(ratios, [0.683, 0.7184, 0.683, 0.7184], atol=5e-4)


def test_nullifier_adjacency_validation():
    V = vacuum_covariance(3)
    with pytest.raises(ValueError):
        nullifier_variances(V, np.array([[0, 1], [1, 0]]))
    bad = np.zeros((3, 3))
    bad[0, 1] = 1.0  # not symmetric
    with pytest.raises(ValueError):
        nullifier_variances(V, bad)
    diag = np.eye(3)
    with pytest.raises(ValueError):
        nullifier_variances(V, diag)


def test_loss_moves_nullifiers_toward_vacuum():
    V = change_basis(reference_covariance(), builtin_basis("LC", 4))
    clean = nullifier_variances(V, chain_adjacency(4))
    lossy = nullifier_variances(apply_loss(V, 0.8), chain_adjacency(4))
    assert np.all(lossy >= clean - 1e-12)


def test_validate_identity():
    d = validate(np.eye(4))
    assert d.physical
    assert np.allclose(d.mode_purities, 1.0)


def test_validate_reference_block_purity():
    d = validate(covariance_from_squeeze([REFERENCE_SQUEEZE_DB[0]]))
    assert np.isclose(d.mode_purities[0], 0.8912509, atol=1e-6)


def test_validate_flags_unphysical():
    bad = np.diag([1.0, -0.5])
    assert not validate(bad).physical
    squeezed_both = np.diag([0.5, 0.5])  # violates uncertainty
    assert not validate(squeezed_both).physical


def test_purities_never_exceed_one():
    rng = np.random.default_rng(7)
    for _ in range(20):
        V = random_covariance(rng, 2)
        assert np.all(validate(V).mode_purities <= 1.0 + 1e-9)


def test_williamson_reconstructs_and_is_symplectic():
    rng = np.random.default_rng(8)
    for n in (1, 2, 3):
        V = random_covariance(rng, n)
        nu, S = williamson(V)
        D = np.diag(np.repeat(nu, 2))
        assert np.linalg.norm(S @ D @ S.T - V) < 1e-10
        assert np.linalg.norm(S @ omega(n) @ S.T - omega(n)) < 1e-9
        assert np.all(nu >= 1.0 - 1e-9)
        assert np.allclose(np.sort(nu), np.sort(symplectic_eigenvalues(V)), atol=1e-9)


def test_williamson_rejects_bad_input():
    with pytest.raises(ValueError):
        williamson(np.diag([1.0, -1.0]))


def test_serialization_roundtrip():
    rng = np.random.default_rng(9)
    V = random_covariance(rng, 2)
    assert np.allclose(covariance_from_json(covariance_to_json(V)), V)


def test_serialization_xxpp_ordering():
    V = np.diag([2.0, 0.5, 3.0, 1.0 / 3.0])
    obj = {"ordering": "xxpp", "matrix": np.diag([2.0, 3.0, 0.5, 1.0 / 3.0]).tolist()}
    assert np.allclose(covariance_from_json(obj), V)
    with pytest.raises(ValueError):
        covariance_from_json({"ordering": "weird", "matrix": np.eye(2).tolist()})
