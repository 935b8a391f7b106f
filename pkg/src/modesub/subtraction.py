"""Heralded single-photon subtraction channel.

The ideal operation removes one photon in a chosen coherent
superposition of modes, ``A = sum_k c_k a_k``.  The realistic heralded
channel mixes three effects: with weight ``w0`` the herald was a false
count and the state passes through unchanged; the remainder splits into
the desired coherent subtraction (modal weight ``p0``) and an
incoherent single-mode background spread evenly over the other modes,

    R[rho] = w0 rho + (1 - w0) * ( (N p0 - 1)/(N - 1) A rho A^dag
             + (1 - p0)/(N - 1) sum_k a_k rho a_k^dag ),

with the heralded output ``R[rho] / tr R[rho]``.  This module only
encodes the decomposition; renormalization by the heralding weight is
left to the consumers (the moment engine and the Fock oracle), because
each term's trace depends on the input state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import normalize_coefficients

__all__ = [
    "ChannelTerm",
    "HeraldingError",
    "SubtractionSpec",
    "channel_terms",
    "ideal_spec",
    "reference_spec",
    "REFERENCE_W0",
    "REFERENCE_P0",
    "REFERENCE_N",
]

#: heralding-channel parameters of the modeled experiment: false-count
#: weight, modal weight of the desired subtraction, background mode count
REFERENCE_W0 = 0.0094
REFERENCE_P0 = 0.95
REFERENCE_N = 4


class HeraldingError(ValueError):
    """Raised when the heralding probability of a channel vanishes."""


@dataclass(frozen=True)
class SubtractionSpec:
    """Parameters of one heralded-subtraction channel.

    Attributes:
        coefficients: normalized subtraction-mode vector (internal frame).
        w0: false-herald (passthrough) weight in [0, 1].
        p0: modal weight of the coherent subtraction in [0, 1].
        num_modes: number of modes carrying the incoherent background;
            must satisfy ``num_modes * p0 >= 1`` so the coherent weight
            is nonnegative.
    """

    coefficients: np.ndarray
    w0: float = 0.0
    p0: float = 1.0
    num_modes: int = 1

    def __post_init__(self):
        c = normalize_coefficients(self.coefficients)
        object.__setattr__(self, "coefficients", c)
        if not 0.0 <= self.w0 <= 1.0:
            raise ValueError(f"w0 must lie in [0, 1], got {self.w0}")
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")
        n = int(self.num_modes)
        object.__setattr__(self, "num_modes", n)
        if n < 1:
            raise ValueError(f"num_modes must be positive, got {n}")
        if n * self.p0 < 1.0 - 1e-12:
            raise ValueError(
                f"N p0 = {n * self.p0:.4g} < 1 gives a negative coherent weight"
            )
        if n < c.size:
            raise ValueError(
                f"num_modes = {n} smaller than the coefficient vector ({c.size})"
            )

    @property
    def coherent_weight(self) -> float:
        """Unnormalized weight of the coherent term, (1-w0)(N p0 - 1)/(N - 1)."""
        if self.num_modes == 1:
            return (1.0 - self.w0) * self.p0
        n = self.num_modes
        return (1.0 - self.w0) * (n * self.p0 - 1.0) / (n - 1.0)

    @property
    def background_weight(self) -> float:
        """Unnormalized weight of each single-mode background term."""
        if self.num_modes == 1:
            return (1.0 - self.w0) * (1.0 - self.p0)
        return (1.0 - self.w0) * (1.0 - self.p0) / (self.num_modes - 1.0)


def ideal_spec(coefficients) -> SubtractionSpec:
    """Pure coherent subtraction in the given mode (w0 = 0, p0 = 1)."""
    c = normalize_coefficients(coefficients)
    return SubtractionSpec(coefficients=c, w0=0.0, p0=1.0, num_modes=c.size)


def reference_spec(coefficients) -> SubtractionSpec:
    """Channel with the modeled experiment's imperfection parameters.

    Uses ``w0 = 0.0094``, ``p0 = 0.95`` and a four-mode incoherent
    background; the coefficient vector must address four modes.
    """
    c = normalize_coefficients(coefficients)
    if c.size != REFERENCE_N:
        raise ValueError(
            f"reference channel is defined on {REFERENCE_N} modes, got {c.size}"
        )
    return SubtractionSpec(
        coefficients=c, w0=REFERENCE_W0, p0=REFERENCE_P0, num_modes=REFERENCE_N
    )


@dataclass(frozen=True)
class ChannelTerm:
    """One term of the unnormalized channel decomposition.

    ``kind`` is ``"passthrough"`` (identity), ``"coherent"``
    (``A rho A^dag`` with ``A`` built from ``coefficients``) or
    ``"single_mode"`` (``a_mode rho a_mode^dag``).
    """

    weight: float
    kind: str
    mode: int | None = None
    coefficients: np.ndarray | None = None


def channel_terms(spec: SubtractionSpec) -> list[ChannelTerm]:
    """Expand a spec into its weighted operator terms.

    Terms with zero weight are omitted, so the ideal spec yields the
    single coherent term with weight 1 and the degenerate case
    ``p0 = 1/N`` yields a uniform single-mode mixture.
    """
    terms: list[ChannelTerm] = []
    if spec.w0 > 0.0:
        terms.append(ChannelTerm(weight=spec.w0, kind="passthrough"))
    if spec.coherent_weight > 1e-15:
        terms.append(
            ChannelTerm(
                weight=spec.coherent_weight,
                kind="coherent",
                coefficients=spec.coefficients,
            )
        )
    if spec.background_weight > 1e-15:
        for k in range(spec.num_modes):
            terms.append(
                ChannelTerm(weight=spec.background_weight, kind="single_mode", mode=k)
            )
    if not terms:
        raise ValueError("channel has no terms with positive weight")
    return terms
