"""Analytic correlation functions of Gaussian and photon-subtracted states.

Every expectation value reduces, via Wick's theorem for zero-mean
Gaussian states, to sums over perfect pairings of two-operator
contractions.  Operator words may mix plain mode operators with
coherent combinations ``b_c = sum_k c_k a_k``, which keeps the cost of
subtracted-state moments independent of the mode count: wrapping a word
as ``A^dag (...) A`` just adds two letters.

Moments of the heralded-subtraction output are ratios of Gaussian
correlators,

    <O>_out = [ w0 <O> + (1-w0) ( alpha <A^dag O A> + beta sum_k <a_k^dag O a_k> ) ]
              / [ the same with O = 1 ],

with the term weights taken from the channel decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import _as_cov
from .modes import normalize_coefficients
from .subtraction import ChannelTerm, HeraldingError, SubtractionSpec, channel_terms

__all__ = [
    "SecondMoments",
    "excess_kurtosis_analytic",
    "gaussian_moment",
    "phase_averaged_moments",
    "subtracted_moment",
    "MAX_WICK_LETTERS",
]

#: longest operator word accepted by the pairing enumeration
MAX_WICK_LETTERS = 12

HERALDING_EPS = 1e-14


@dataclass(frozen=True)
class SecondMoments:
    """Complex second moments ``aa[j,k] = <a_j a_k>``, ``ada[j,k] = <a_j^dag a_k>``."""

    aa: np.ndarray
    ada: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.aa.shape[0]

    @classmethod
    def from_covariance(cls, V) -> "SecondMoments":
        """Convert a quadrature covariance matrix via ``a = (x + i p)/2``."""
        V = _as_cov(V)
        n = V.shape[0] // 2
        vxx = V[0::2, 0::2]
        vpp = V[1::2, 1::2]
        vxp = V[0::2, 1::2]  # vxp[j, k] = V[x_j, p_k]
        aa = (vxx - vpp + 1j * (vxp + vxp.T)) / 4.0
        ada = (vxx + vpp + 1j * (vxp - vxp.T)) / 4.0 - np.eye(n) / 2.0
        return cls(aa=aa, ada=ada)


def _pair_value(m: SecondMoments, letter1, letter2) -> complex:
    """Contraction <L1 L2> in the given order; letters are (vector, dagger)."""
    c, dag1 = letter1
    d, dag2 = letter2
    if not dag1 and not dag2:
        return c @ m.aa @ d
    if dag1 and dag2:
        return np.conj(c @ m.aa @ d)
    if dag1 and not dag2:
        return np.conj(c) @ m.ada @ d
    # <b_c b_d^dag> = <b_d^dag b_c> + [b_c, b_d^dag]
    return np.conj(d) @ m.ada @ c + c @ np.conj(d)


def _pairing_sum(pairs: np.ndarray, active: list[int]) -> complex:
    if not active:
        return 1.0
    first, rest = active[0], active[1:]
    total = 0.0 + 0.0j
    for i, other in enumerate(rest):
        v = pairs[first, other]
        if v != 0.0:
            total += v * _pairing_sum(pairs, rest[:i] + rest[i + 1 :])
    return total


def _wick(m: SecondMoments, letters) -> complex:
    n = len(letters)
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    if n > MAX_WICK_LETTERS:
        raise ValueError(
            f"operator word has {n} letters; pairing enumeration is capped "
            f"at {MAX_WICK_LETTERS}"
        )
    pairs = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            pairs[i, j] = _pair_value(m, letters[i], letters[j])
    return _pairing_sum(pairs, list(range(n)))


def _word_to_letters(word, n_modes: int):
    letters = []
    for mode, dagger in word:
        mode = int(mode)
        if not 0 <= mode < n_modes:
            raise ValueError(f"mode index {mode} out of range for {n_modes} modes")
        e = np.zeros(n_modes, dtype=complex)
        e[mode] = 1.0
        letters.append((e, bool(dagger)))
    return letters


def gaussian_moment(moments: SecondMoments, word) -> complex:
    """Expectation of an ordered operator word under a zero-mean Gaussian state.

    Args:
        moments: second moments of the state.
        word: sequence of ``(mode_index, dagger)`` pairs, applied left
            to right as written.

    Returns:
        The Wick pairing sum; odd-length words give 0 exactly.
    """
    return _wick(moments, _word_to_letters(word, moments.n_modes))


def _term_letters(term: ChannelTerm, n_modes: int):
    """Wrapping letters (left, right) of one channel term, or None."""
    if term.kind == "passthrough":
        return None
    if term.kind == "coherent":
        c = np.asarray(term.coefficients, dtype=complex)
        if c.size != n_modes:
            raise ValueError(
                f"subtraction addresses {c.size} modes, state has {n_modes}"
            )
        return (c, True), (c, False)
    if term.kind == "single_mode":
        e = np.zeros(n_modes, dtype=complex)
        if not 0 <= term.mode < n_modes:
            raise ValueError(
                f"background mode {term.mode} out of range for {n_modes} modes"
            )
        e[term.mode] = 1.0
        return (e, True), (e, False)
    raise ValueError(f"unknown channel term kind {term.kind!r}")


def _subtracted_wick(m: SecondMoments, terms, letters) -> complex:
    num = 0.0 + 0.0j
    den = 0.0 + 0.0j
    for term in terms:
        wrap = _term_letters(term, m.n_modes)
        if wrap is None:
            num += term.weight * _wick(m, letters)
            den += term.weight
        else:
            left, right = wrap
            num += term.weight * _wick(m, [left] + list(letters) + [right])
            den += term.weight * _wick(m, [left, right])
    if abs(den) < HERALDING_EPS:
        raise HeraldingError(
            "heralding probability vanishes; the channel cannot subtract "
            "from this state (e.g. ideal subtraction from vacuum)"
        )
    return num / den


def subtracted_moment(V, spec: SubtractionSpec, word) -> complex:
    """Expectation of a word under the heralded-subtraction output state.

    Raises:
        HeraldingError: when the heralding probability is below 1e-14.
    """
    m = SecondMoments.from_covariance(V)
    letters = _word_to_letters(word, m.n_modes)
    return _subtracted_wick(m, channel_terms(spec), letters)


def _kurtosis_words(u: np.ndarray):
    b = (u, False)
    bd = (u, True)
    words2 = [[b, bd], [bd, b]]
    words4 = [
        [b, b, bd, bd],
        [b, bd, b, bd],
        [b, bd, bd, b],
        [bd, b, b, bd],
        [bd, b, bd, b],
        [bd, bd, b, b],
    ]
    return words2, words4


def phase_averaged_moments(V, spec, mode, eta=1.0):
    """Phase-averaged second and fourth quadrature moments in one mode.

    The quadrature ``x_theta = b e^{-i theta} + b^dag e^{i theta}`` of
    the measurement mode ``b = sum_k u_k a_k`` is averaged analytically
    over a uniformly random phase: only the operator orderings with
    balanced ladder content survive the average, so no numerical theta
    integral is needed.

    Args:
        V: input covariance matrix.
        spec: :class:`SubtractionSpec`, or None for the Gaussian input.
        mode: measurement-mode coefficient vector (internal frame).
        eta: detection transmission; the loss channel commutes onto the
            moments as ``m2 -> eta m2 + (1 - eta)`` and
            ``m4 -> eta^2 m4 + 6 eta (1-eta) m2 + 3 (1-eta)^2``.

    Returns:
        (m2, m4) as floats.
    """
    V = _as_cov(V)
    u = normalize_coefficients(mode)
    m = SecondMoments.from_covariance(V)
    if u.size != m.n_modes:
        raise ValueError(f"mode vector has {u.size} entries, state has {m.n_modes} modes")
    words2, words4 = _kurtosis_words(u)
    if spec is None:
        m2 = sum(_wick(m, w).real for w in words2)
        m4 = sum(_wick(m, w).real for w in words4)
    else:
        terms = channel_terms(spec)
        m2 = sum(_subtracted_wick(m, terms, w).real for w in words2)
        m4 = sum(_subtracted_wick(m, terms, w).real for w in words4)
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    if eta < 1.0:
        m4 = eta**2 * m4 + 6.0 * eta * (1.0 - eta) * m2 + 3.0 * (1.0 - eta) ** 2
        m2 = eta * m2 + (1.0 - eta)
    return float(m2), float(m4)


def excess_kurtosis_analytic(V, spec, mode, eta=1.0) -> float:
    """Infinite-sample excess kurtosis of phase-randomized quadratures.

    Returns ``m4 / m2**2 - 3`` with the pooled phase-averaged moments of
    :func:`phase_averaged_moments`.  Gaussian states give values >= 0;
    negative values witness a non-Gaussian state.
    """
    m2, m4 = phase_averaged_moments(V, spec, mode, eta=eta)
    return m4 / m2**2 - 3.0
