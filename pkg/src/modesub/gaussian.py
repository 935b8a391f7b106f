"""Zero-mean multimode Gaussian states as quadrature covariance matrices.

Conventions: quadratures are ``x = a + a^dag`` and ``p = (a - a^dag)/i``,
so the vacuum covariance is the identity and ``[x, p] = 2i``.  The
2N x 2N covariance matrix is interleaved, ``(x_0, p_0, ..., x_{N-1},
p_{N-1})``, which keeps every per-mode 2x2 block contiguous.  Squeezing
is quoted in decibels relative to vacuum, ``variance = 10**(dB/10)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .modes import ModeTransform

__all__ = [
    "CovarianceDiagnostics",
    "apply_loss",
    "chain_adjacency",
    "change_basis",
    "covariance_from_json",
    "covariance_from_squeeze",
    "covariance_to_json",
    "duan_value",
    "epr_value",
    "nullifier_variances",
    "omega",
    "reduced_covariance",
    "reference_covariance",
    "ring_adjacency",
    "symplectic_eigenvalues",
    "symplectic_from_unitary",
    "validate",
    "vacuum_covariance",
    "williamson",
    "REFERENCE_SQUEEZE_DB",
]

SYMMETRY_TOL = 1e-10
UNCERTAINTY_TOL = 1e-8

#: measured (x, p) squeezing in dB of the four dominant modes of the
#: frequency-comb source this package models, quoted in the internal
#: frame where every mode is p-squeezed
REFERENCE_SQUEEZE_DB = ((2.8, -1.8), (2.1, -1.6), (1.6, -1.0), (1.4, -0.7))


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form for the interleaved quadrature ordering."""
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), w)


def vacuum_covariance(n_modes: int) -> np.ndarray:
    return np.eye(2 * n_modes)


def _as_cov(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise ValueError(f"covariance matrix must be 2N x 2N, got {V.shape}")
    return V


def n_modes_of(V) -> int:
    return _as_cov(V).shape[0] // 2


def covariance_from_squeeze(db_pairs) -> np.ndarray:
    """Diagonal covariance from per-mode (x_dB, p_dB) squeezing values.

    Args:
        db_pairs: sequence of (x_dB, p_dB) pairs, one per mode.

    Returns:
        2N x 2N diagonal covariance, interleaved ordering.

    Raises:
        ValueError: if a mode is unphysical (x_dB + p_dB < 0 beyond
            numerical tolerance, i.e. purity above 1).
    """
    pairs = [(float(x), float(p)) for x, p in db_pairs]
    if not pairs:
        raise ValueError("need at least one mode")
    diag = []
    for k, (x_db, p_db) in enumerate(pairs):
        if x_db + p_db < -2e-8:
            raise ValueError(
                f"mode {k}: x_dB + p_dB = {x_db + p_db:.3g} dB < 0 implies "
                "purity above 1; unphysical squeeze specification"
            )
        diag += [10.0 ** (x_db / 10.0), 10.0 ** (p_db / 10.0)]
    return np.diag(diag)


def reference_covariance() -> np.ndarray:
    """Diagonal four-mode covariance built from :data:`REFERENCE_SQUEEZE_DB`.

    Off-diagonal correlations of the modeled source were not published;
    this diagonal reconstruction is the package-wide default input state.
    """
    return covariance_from_squeeze(REFERENCE_SQUEEZE_DB)


def symplectic_from_unitary(U) -> np.ndarray:
    """Symplectic orthogonal matrix of the passive transform ``b = U a``.

    With ``b_j = sum_k U_jk a_k`` the new quadratures are
    ``x'_j = sum_k Re(U_jk) x_k - Im(U_jk) p_k`` and
    ``p'_j = sum_k Im(U_jk) x_k + Re(U_jk) p_k``.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"unitary must be square, got {U.shape}")
    n = U.shape[0]
    S = np.zeros((2 * n, 2 * n))
    S[0::2, 0::2] = U.real
    S[0::2, 1::2] = -U.imag
    S[1::2, 0::2] = U.imag
    S[1::2, 1::2] = U.real
    return S


def change_basis(V, transform) -> np.ndarray:
    """Covariance of the same state expressed in a new mode basis.

    Args:
        V: covariance matrix.
        transform: :class:`ModeTransform` or plain N x N unitary whose
            rows define the new modes.

    Raises:
        ValueError: on dimension mismatch or a non-unitary matrix.
    """
    V = _as_cov(V)
    U = transform.matrix if isinstance(transform, ModeTransform) else np.asarray(
        transform, dtype=complex
    )
    n = V.shape[0] // 2
    if U.shape != (n, n):
        raise ValueError(f"basis is {U.shape}, state has {n} modes")
    dev = np.linalg.norm(U @ U.conj().T - np.eye(n))
    if dev > 1e-8:
        raise ValueError(f"basis matrix is not unitary (deviation {dev:.2e})")
    S = symplectic_from_unitary(U)
    return S @ V @ S.T


def apply_loss(V, eta) -> np.ndarray:
    """Pure-loss channel with per-mode transmission ``eta``.

    ``V -> eta V + (1 - eta) I`` on each mode block and
    ``sqrt(eta_j eta_k)`` on cross blocks; ``eta`` may be a scalar or a
    length-N sequence with entries in (0, 1].
    """
    V = _as_cov(V)
    n = V.shape[0] // 2
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,))
    if np.any(eta <= 0.0) or np.any(eta > 1.0):
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    d = np.repeat(np.sqrt(eta), 2)
    return d[:, None] * V * d[None, :] + np.diag(1.0 - d * d)


def reduced_covariance(V, modes) -> np.ndarray:
    """Covariance of the reduced state on the given modes (in order)."""
    V = _as_cov(V)
    idx = []
    for m in modes:
        idx += [2 * m, 2 * m + 1]
    return V[np.ix_(idx, idx)]


def duan_value(V, modes=(0, 1)) -> float:
    """Duan inseparability sum for a pair of modes.

    Returns ``Var(x_i - x_j) + Var(p_i + p_j)``; values below 4 witness
    entanglement in this convention (vacuum gives exactly 4).
    """
    i, j = modes
    if i == j:
        raise ValueError("need two distinct modes")
    V = _as_cov(V)
    xi, pi, xj, pj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
    var_x = V[xi, xi] + V[xj, xj] - 2.0 * V[xi, xj]
    var_p = V[pi, pi] + V[pj, pj] + 2.0 * V[pi, pj]
    return float(var_x + var_p)


def epr_value(V, conditioned=1, conditioning=0) -> float:
    """Product of optimal-gain conditional variances (EPR criterion).

    ``Var(x_i - g x_j) Var(p_i - g' p_j)`` with each gain minimizing its
    variance (``g = cov/var``); below 1 witnesses EPR steering of mode
    ``conditioned`` by mode ``conditioning``.  Vacuum gives exactly 1.
    """
    i, j = conditioned, conditioning
    if i == j:
        raise ValueError("need two distinct modes")
    V = _as_cov(V)
    out = []
    for qi, qj in ((2 * i, 2 * j), (2 * i + 1, 2 * j + 1)):
        var_j = V[qj, qj]
        if var_j < 1e-14:
            raise ValueError("conditioning quadrature has zero variance")
        out.append(V[qi, qi] - V[qi, qj] ** 2 / var_j)
    return float(out[0] * out[1])


def nullifier_variances(V, adjacency) -> np.ndarray:
    """Graph-nullifier variances normalized to their vacuum values.

    For adjacency matrix ``A`` the nullifiers are
    ``delta_k = x_k - sum_l A_kl p_l`` with vacuum variance
    ``1 + deg(k)``; ratios below 1 witness cluster-type correlations.

    Raises:
        ValueError: if ``A`` is not symmetric 0/1 with a zero diagonal.
    """
    V = _as_cov(V)
    n = V.shape[0] // 2
    A = np.asarray(adjacency, dtype=float)
    if A.shape != (n, n):
        raise ValueError(f"adjacency is {A.shape}, state has {n} modes")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0.0):
        raise ValueError("adjacency must have a zero diagonal")
    if not np.all(np.isin(A, (0.0, 1.0))):
        raise ValueError("adjacency entries must be 0 or 1")
    T = np.zeros((n, 2 * n))
    for k in range(n):
        T[k, 2 * k] = 1.0
        T[k, 1::2] -= A[k]
    variances = np.diag(T @ V @ T.T)
    vacuum = 1.0 + A.sum(axis=1)
    return variances / vacuum


def chain_adjacency(n: int) -> np.ndarray:
    """Open linear chain 0-1-...-(n-1)."""
    A = np.zeros((n, n))
    for k in range(n - 1):
        A[k, k + 1] = A[k + 1, k] = 1.0
    return A


def ring_adjacency(n: int) -> np.ndarray:
    """Closed ring 0-1-...-(n-1)-0."""
    A = chain_adjacency(n)
    A[0, n - 1] = A[n - 1, 0] = 1.0
    return A


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum (descending); physical states have all >= 1."""
    V = _as_cov(V)
    n = V.shape[0] // 2
    ev = np.linalg.eigvals(1j * omega(n) @ V)
    nu = np.sort(np.abs(ev.real))[::-1]
    return nu[: 2 * n : 2]


def williamson(V):
    """Williamson normal form ``V = S D S^T``.

    Returns:
        (nu, S): symplectic eigenvalues (descending, length N) and the
        symplectic matrix ``S``; ``D = diag(nu_0, nu_0, ..., nu_{N-1},
        nu_{N-1})`` in the interleaved ordering.

    Raises:
        ValueError: if ``V`` is not symmetric positive definite.
    """
    V = _as_cov(V)
    if np.linalg.norm(V - V.T) > SYMMETRY_TOL:
        raise ValueError("covariance matrix is not symmetric")
    n = V.shape[0] // 2
    w, R = np.linalg.eigh(V)
    if w.min() <= 0.0:
        raise ValueError(f"covariance matrix is not positive definite (min eig {w.min():.3g})")
    V_sqrt = (R * np.sqrt(w)) @ R.T
    V_isqrt = (R / np.sqrt(w)) @ R.T
    B = V_isqrt @ omega(n) @ V_isqrt  # antisymmetric
    T, Z = scipy.linalg.schur(B, output="real")
    # enforce positive upper entry in each 2x2 Schur block
    for k in range(n):
        if T[2 * k, 2 * k + 1] < 0.0:
            Z[:, [2 * k, 2 * k + 1]] = Z[:, [2 * k + 1, 2 * k]]
            T[[2 * k, 2 * k + 1], :] = T[[2 * k + 1, 2 * k], :]
            T[:, [2 * k, 2 * k + 1]] = T[:, [2 * k + 1, 2 * k]]
    nu = np.array([1.0 / T[2 * k, 2 * k + 1] for k in range(n)])
    # deterministic mode order: descending symplectic eigenvalue
    order = np.argsort(-nu, kind="stable")
    nu = nu[order]
    col_order = np.concatenate([[2 * k, 2 * k + 1] for k in order])
    Z = Z[:, col_order]
    S = V_sqrt @ Z * np.repeat(1.0 / np.sqrt(nu), 2)[None, :]
    return nu, S


@dataclass(frozen=True)
class CovarianceDiagnostics:
    """Report-only physicality diagnostics of a covariance matrix."""

    symmetry_deviation: float
    min_eigenvalue: float
    min_uncertainty_eigenvalue: float
    physical: bool
    mode_purities: np.ndarray

    def __str__(self):
        status = "physical" if self.physical else "UNPHYSICAL"
        pur = ", ".join(f"{p:.4f}" for p in self.mode_purities)
        return (
            f"{status}: |V - V^T| = {self.symmetry_deviation:.2e}, "
            f"min eig(V) = {self.min_eigenvalue:.4g}, "
            f"min eig(V + i Omega) = {self.min_uncertainty_eigenvalue:.4g}, "
            f"block purities [{pur}]"
        )


def validate(V) -> CovarianceDiagnostics:
    """Check symmetry, positivity and the uncertainty relation.

    The per-mode purities ``1/sqrt(det block)`` refer to the 2x2
    diagonal blocks and equal the reduced-state purities only when the
    matrix is block diagonal.
    """
    V = _as_cov(V)
    n = V.shape[0] // 2
    sym_dev = float(np.linalg.norm(V - V.T))
    Vs = 0.5 * (V + V.T)
    min_eig = float(np.linalg.eigvalsh(Vs).min())
    herm = Vs + 1j * omega(n)
    min_unc = float(np.linalg.eigvalsh(herm).min())
    purities = np.array(
        [1.0 / np.sqrt(max(np.linalg.det(Vs[2 * k : 2 * k + 2, 2 * k : 2 * k + 2]), 1e-300))
         for k in range(n)]
    )
    physical = (
        sym_dev <= SYMMETRY_TOL and min_eig > 0.0 and min_unc >= -UNCERTAINTY_TOL
    )
    return CovarianceDiagnostics(
        symmetry_deviation=sym_dev,
        min_eigenvalue=min_eig,
        min_uncertainty_eigenvalue=min_unc,
        physical=physical,
        mode_purities=purities,
    )


def covariance_to_json(V) -> dict:
    """JSON-serializable form: array-of-arrays plus an ordering tag."""
    V = _as_cov(V)
    return {"ordering": "xpxp", "matrix": V.tolist()}


def covariance_from_json(obj) -> np.ndarray:
    """Inverse of :func:`covariance_to_json`; accepts xpxp or xxpp tags."""
    if not isinstance(obj, dict) or "matrix" not in obj:
        raise ValueError("expected an object with 'matrix' and 'ordering' fields")
    ordering = obj.get("ordering", "xpxp")
    V = np.asarray(obj["matrix"], dtype=float)
    V = _as_cov(V)
    if ordering == "xpxp":
        return V
    if ordering == "xxpp":
        n = V.shape[0] // 2
        perm = np.empty(2 * n, dtype=int)
        perm[0::2] = np.arange(n)
        perm[1::2] = np.arange(n) + n
        return V[np.ix_(perm, perm)]
    raise ValueError(f"unknown quadrature ordering {ordering!r}")
