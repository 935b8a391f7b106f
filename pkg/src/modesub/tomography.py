"""Iterative maximum-likelihood reconstruction of a single-mode state.

The fixed-point iteration ``rho <- N[R(rho) rho R(rho)]`` with
``R(rho) = sum_j f_j Pi_j / tr(rho Pi_j)`` maximizes the likelihood of
homodyne records over density matrices while keeping every iterate
positive.  Detector loss is folded into the measurement operators: each
quadrature projector is smeared by the adjoint of the Bernoulli loss
channel, which is numerically far better behaved than inverting the
loss on the reconstructed state afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.special

from .fock import FockDensity, excess_kurtosis_fock, fidelity, parity_w0, purity
from .homodyne import QuadratureDataset, hermite_functions

__all__ = [
    "TomographyConfig",
    "TomographyResult",
    "reconstruct",
    "report_observables",
]


@dataclass(frozen=True)
class TomographyConfig:
    """Reconstruction settings.

    Attributes:
        cutoff: retained Fock levels (>= 5).
        eta: detection transmission assumed in the measurement operators;
            1.0 reconstructs the detected (lossy) state, 0.875 undoes a
            12.5% detection loss.
        max_iters: iteration cap.
        tolerance: stop when the relative log-likelihood gain per
            iteration falls below this (> 0).
        phase_bins: number of phase bins on [0, pi); None disables
            binning and uses one rank-one projector per record.
        x_bin_width: quadrature bin width in vacuum units.
    """

    cutoff: int = 10
    eta: float = 1.0
    max_iters: int = 500
    tolerance: float = 1e-9
    phase_bins: int | None = 30
    x_bin_width: float = 0.05

    def __post_init__(self):
        if self.cutoff < 5:
            raise ValueError(f"cutoff must be at least 5, got {self.cutoff}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.phase_bins is not None and self.phase_bins < 1:
            raise ValueError("phase_bins must be positive or None")


@dataclass
class TomographyResult:
    """Reconstruction output and diagnostics."""

    state: FockDensity
    log_likelihood: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    monotone: bool = True

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihood[-1] if self.log_likelihood else float("nan")


def _fold_phases(thetas, values):
    """Map records to theta in [0, pi) using x_{theta+pi} = -x_theta."""
    th = np.mod(thetas, 2.0 * np.pi)
    flip = th >= np.pi
    return np.where(flip, th - np.pi, th), np.where(flip, -values, values)


def _binned_records(thetas, values, cfg: TomographyConfig):
    th, xv = _fold_phases(thetas, values)
    ti = np.clip((th / np.pi * cfg.phase_bins).astype(int), 0, cfg.phase_bins - 1)
    xi = np.floor(xv / cfg.x_bin_width).astype(int)
    keys = ti.astype(np.int64) * (1 << 32) + (xi - xi.min())
    uniq, counts = np.unique(keys, return_counts=True)
    t_out = (uniq >> 32).astype(float) * np.pi / cfg.phase_bins + 0.5 * np.pi / cfg.phase_bins
    x_out = ((uniq & 0xFFFFFFFF) + xi.min() + 0.5) * cfg.x_bin_width
    return t_out, x_out, counts / counts.sum()


def _loss_kraus(dim: int, eta: float):
    ks = []
    for j in range(dim):
        amp = np.zeros((dim, dim))
        for n in range(j, dim):
            amp[n - j, n] = np.sqrt(
                scipy.special.comb(n, j) * eta ** (n - j) * (1.0 - eta) ** j
            )
        if np.any(amp):
            ks.append(amp)
    return ks


def _measurement_operators(thetas, xs, weights, cfg: TomographyConfig):
    """Projector stack for the (theta, x) list, loss-smeared when eta < 1.

    Returns (vectors, operators): for eta = 1 only rank-one vectors are
    kept (v with Pi = v v^dag); otherwise dense operators.
    """
    d = cfg.cutoff
    psi = hermite_functions(d, xs)  # (d, nbins)
    phase = np.exp(1j * np.outer(np.arange(d), thetas))
    V = (psi * phase).T  # rows v_b, Pi_b = v_b v_b^dag
    if cfg.eta == 1.0:
        return V, None
    ops = np.zeros((V.shape[0], d, d), dtype=complex)
    for K in _loss_kraus(d, cfg.eta):
        KV = V @ K.conj()  # rows K^dag v
        ops += np.einsum("bi,bj->bij", KV, KV.conj())
    return None, ops


def reconstruct(data: QuadratureDataset, cfg: TomographyConfig | None = None) -> TomographyResult:
    """Run the maximum-likelihood fixed point on a quadrature dataset.

    Returns the final state together with the per-iteration
    log-likelihood trace; the trace is checked to be non-decreasing and
    a violation beyond numerical slack stops the iteration with
    ``monotone=False``.
    """
    cfg = cfg or TomographyConfig()
    thetas = np.asarray(data.thetas, dtype=float)
    values = np.asarray(data.values, dtype=float)
    if thetas.size < 1:
        raise ValueError("dataset is empty")

    if cfg.phase_bins is None:
        th, xv = _fold_phases(thetas, values)
        weights = np.full(th.size, 1.0 / th.size)
    else:
        th, xv, weights = _binned_records(thetas, values, cfg)
    V, ops = _measurement_operators(th, xv, weights, cfg)

    d = cfg.cutoff
    rho = np.eye(d, dtype=complex) / d
    lls: list[float] = []
    converged = False
    monotone = True
    iterations = 0

    for iterations in range(1, cfg.max_iters + 1):
        if ops is None:
            probs = np.einsum("bi,ij,bj->b", V.conj(), rho, V).real
        else:
            probs = np.einsum("bij,ji->b", ops, rho).real
        probs = np.maximum(probs, 1e-300)
        ll = float(weights @ np.log(probs))
        if lls and ll < lls[-1] - 1e-10 * max(1.0, abs(lls[-1])):
            monotone = False
            lls.append(ll)
            break
        if lls and abs(ll - lls[-1]) <= cfg.tolerance * max(1.0, abs(lls[-1])):
            lls.append(ll)
            converged = True
            break
        lls.append(ll)
        w = weights / probs
        if ops is None:
            R = (V * w[:, None]).T @ V.conj()
        else:
            R = np.einsum("b,bij->ij", w, ops)
        rho_new = R @ rho @ R
        rho_new = 0.5 * (rho_new + rho_new.conj().T)
        tr = np.trace(rho_new).real
        if tr <= 0.0:
            raise RuntimeError("iteration produced a non-positive trace")
        rho = rho_new / tr

    state = FockDensity(rho, (d,))
    return TomographyResult(
        state=state,
        log_likelihood=lls,
        iterations=iterations,
        converged=converged,
        monotone=monotone,
    )


def report_observables(rho: FockDensity, reference: FockDensity | None = None,
                       fidelity_kind="uhlmann") -> dict:
    """Standard single-mode observables of a (reconstructed) state.

    Returns W0 (parity), purity, the phase-averaged excess kurtosis
    computed from the Fock moments, and the fidelity against
    ``reference`` when one is supplied.
    """
    out = {
        "W0": parity_w0(rho),
        "purity": purity(rho),
        "excess_kurtosis": excess_kurtosis_fock(rho),
    }
    if reference is not None:
        out["fidelity"] = fidelity(rho, reference, kind=fidelity_kind)
    return out
