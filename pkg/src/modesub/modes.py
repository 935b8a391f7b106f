"""Mode bases over the Hermite-Gaussian (HG) reference frame.

The package works in a fixed reference basis of time-frequency modes in
which every default squeezed vacuum is p-squeezed.  Reference mode ``k``
is ``HG_k`` for even ``k`` and ``i * HG_k`` for odd ``k``; the extra
``i`` on odd modes rotates their squeezing ellipse so that the default
covariance matrix is diagonal with a uniform orientation.

Two documented phase conventions connect externally specified modes to
this internal frame:

* Coefficient vectors and basis matrices written over the bare HG modes
  acquire a factor ``-i`` on every odd-index entry/column when imported
  (``hg_to_internal``); the bare-frame form is recovered with the
  inverse map.
* The built-in linear-cluster (LC) and square-cluster (SC) matrices
  additionally carry a global ``i`` on every row.  This fixes the
  quadrature reference of each cluster mode so that the graph
  nullifiers ``x_k - sum_l A_kl p_l`` of the p-squeezed inputs are
  sub-vacuum, matching the measured convention.  The row phase is
  exposed through :func:`ModeTransform.from_hg_matrix` for custom
  bases.

A coefficient vector ``c`` always addresses the annihilation-operator
combination ``sum_k c_k a_k`` of the internal modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModeTransform",
    "builtin_basis",
    "gate_mode",
    "hg_to_internal",
    "internal_to_hg",
    "normalize_coefficients",
    "superpose",
]

UNITARITY_TOL = 1e-10

#: phase attached to odd-index entries when importing bare-HG data
_ODD_IMPORT_PHASE = -1j

#: global row phase of the built-in cluster bases (quadrature reference)
_CLUSTER_ROW_PHASE = 1j


def normalize_coefficients(c) -> np.ndarray:
    """Return ``c`` as a unit-norm complex vector.

    Raises:
        ValueError: if ``c`` is empty, non-finite or the zero vector.
    """
    c = np.asarray(c, dtype=complex).reshape(-1)
    if c.size == 0:
        raise ValueError("coefficient vector is empty")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficient vector contains non-finite entries")
    norm = np.linalg.norm(c)
    if norm < 1e-14:
        raise ValueError("coefficient vector is zero; no mode is addressed")
    return c / norm


def _odd_phase_vector(n: int, phase: complex) -> np.ndarray:
    v = np.ones(n, dtype=complex)
    v[1::2] = phase
    return v


def hg_to_internal(c) -> np.ndarray:
    """Convert a bare-HG coefficient vector to the internal frame."""
    c = np.asarray(c, dtype=complex).reshape(-1)
    return c * _odd_phase_vector(c.size, _ODD_IMPORT_PHASE)


def internal_to_hg(c) -> np.ndarray:
    """Inverse of :func:`hg_to_internal`."""
    c = np.asarray(c, dtype=complex).reshape(-1)
    return c * _odd_phase_vector(c.size, 1.0 / _ODD_IMPORT_PHASE)


def _polar_project(m: np.ndarray) -> np.ndarray:
    """Closest unitary in Frobenius norm (polar factor)."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


@dataclass(frozen=True)
class ModeTransform:
    """Unitary mode-basis definition over the internal reference frame.

    Row ``j`` of ``matrix`` holds the coefficient vector of basis mode
    ``j``, so the annihilation operator of that mode is
    ``sum_k matrix[j, k] a_k``.

    Attributes:
        matrix: N x N complex unitary, internal frame.
        label: human-readable basis name.
        hg_matrix: the matrix as originally entered over the bare HG
            modes (printed form for the built-ins); kept for
            provenance and round-trip checks.
        unitarity_correction: Frobenius distance between the entered
            matrix and its polar projection.  Entered matrices are
            typically rounded to a few decimals and are cleaned up to
            exact unitarity; the applied deviation is recorded here.
    """

    matrix: np.ndarray
    label: str = "custom"
    hg_matrix: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    unitarity_correction: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"basis matrix must be square and non-empty, got {m.shape}")
        dev = np.linalg.norm(m @ m.conj().T - np.eye(m.shape[0]))
        if dev > UNITARITY_TOL:
            raise ValueError(
                f"basis matrix is not unitary (deviation {dev:.2e}); "
                "use ModeTransform.from_hg_matrix to clean up rounded entries"
            )
        object.__setattr__(self, "matrix", m)
        if self.hg_matrix is None:
            n = m.shape[0]
            object.__setattr__(
                self, "hg_matrix", m * _odd_phase_vector(n, 1.0 / _ODD_IMPORT_PHASE)
            )

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_hg_matrix(cls, matrix, label="custom", row_phase=1.0) -> "ModeTransform":
        """Build a transform from a matrix written over the bare HG modes.

        Odd columns acquire the documented ``-i`` import phase, every row
        is multiplied by ``row_phase`` (scalar or length-N sequence), and
        the result is projected to the closest exact unitary.
        """
        raw = np.asarray(matrix, dtype=complex)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
            raise ValueError(f"basis matrix must be square, got {raw.shape}")
        n = raw.shape[0]
        converted = raw * _odd_phase_vector(n, _ODD_IMPORT_PHASE)
        converted = (np.asarray(row_phase, dtype=complex) * converted.T).T
        projected = _polar_project(converted)
        correction = float(np.linalg.norm(projected - converted))
        return cls(
            matrix=projected,
            label=label,
            hg_matrix=raw,
            unitarity_correction=correction,
        )


# Printed entries of the built-in bases, written over the bare HG modes.
_EPR_HG = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)

_LC_HG = np.array(
    [
        [-0.344j, -0.421j, 0.531j, 0.650j],
        [0.344, -0.765, -0.531, 0.119],
        [-0.765j, -0.344j, -0.119j, -0.531j],
        [0.421, -0.344, 0.650, -0.531],
    ]
)

_SC_HG = np.array(
    [
        [-0.316, 0.632, 0.707, 0.000],
        [0.632j, 0.316j, 0.000, -0.707j],
        [-0.316, 0.632, -0.707, 0.000],
        [0.632j, 0.316j, 0.000, 0.707j],
    ]
)


def builtin_basis(name: str, n_modes: int) -> ModeTransform:
    """Return a named built-in basis.

    Supported: ``HG`` (identity, any N), ``EPR`` (N=2), ``LC`` and
    ``SC`` (N=4).  The EPR modes are the balanced sum/difference of the
    first two HG modes; LC and SC are the four-mode linear- and
    square-cluster bases with entries stored exactly as tabulated
    (three decimals) and cleaned up to exact unitarity.

    Raises:
        ValueError: for an unsupported (name, N) combination.
    """
    key = name.strip().upper()
    if key == "HG":
        if n_modes < 1:
            raise ValueError("HG basis needs at least one mode")
        return ModeTransform(np.eye(n_modes, dtype=complex), label="HG")
    if key == "EPR":
        if n_modes != 2:
            raise ValueError(f"EPR basis is defined for N=2, got N={n_modes}")
        return ModeTransform.from_hg_matrix(_EPR_HG, label="EPR")
    if key in ("LC", "SC"):
        if n_modes != 4:
            raise ValueError(f"{key} basis is defined for N=4, got N={n_modes}")
        printed = _LC_HG if key == "LC" else _SC_HG
        return ModeTransform.from_hg_matrix(
            printed, label=key, row_phase=_CLUSTER_ROW_PHASE
        )
    raise ValueError(f"unknown basis name {name!r}; expected HG, EPR, LC or SC")


def superpose(basis: ModeTransform, weights) -> np.ndarray:
    """Coefficients, in the internal frame, of a weighted basis-mode sum.

    The superposed annihilation operator is
    ``sum_j w_j b_j = sum_k (U^T w)_k a_k``, so the result is the
    normalized ``U^T w``.

    Raises:
        ValueError: on a dimension mismatch or zero weight vector.
    """
    w = np.asarray(weights, dtype=complex).reshape(-1)
    if w.size != basis.n_modes:
        raise ValueError(
            f"weight vector has length {w.size}, basis has {basis.n_modes} modes"
        )
    return normalize_coefficients(basis.matrix.T @ w)


def gate_mode(c) -> np.ndarray:
    """Gate-beam coefficient vector realizing subtraction in mode ``c``.

    The sum-frequency interaction picks up an alternating sign across
    the HG ladder, so the gate pulse must be shaped as
    ``v_k = (-1)^k c_k``.  The map is its own inverse.  The alternating
    sign commutes with the odd-index import phase, so the same rule
    applies in the bare-HG and internal frames.
    """
    c = normalize_coefficients(c)
    signs = np.ones(c.size)
    signs[1::2] = -1.0
    return normalize_coefficients(signs * c)
