"""Mode-selective photon subtraction from multimode Gaussian states.

The package simulates heralded single-photon subtraction in a chosen
coherent superposition of modes, starting from multimode squeezed
vacua, and evaluates the observables that certify the resulting
non-Gaussianity: Wigner negativity, purity, fidelity against the ideal
operation, phase-averaged excess kurtosis, and Gaussian entanglement
criteria.  Two independent computation paths are provided and
cross-validated: an analytic Wick-theorem moment engine and a
truncated-Fock-space oracle, plus a homodyne sampler and an iterative
maximum-likelihood tomography reconstructor.
"""

__version__ = "0.1.0"

from .modes import (
    ModeTransform,
    builtin_basis,
    gate_mode,
    hg_to_internal,
    internal_to_hg,
    normalize_coefficients,
    superpose,
)
from .gaussian import (
    REFERENCE_SQUEEZE_DB,
    apply_loss,
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
from .subtraction import (
    ChannelTerm,
    HeraldingError,
    SubtractionSpec,
    channel_terms,
    ideal_spec,
    reference_spec,
)
from .moments import (
    SecondMoments,
    excess_kurtosis_analytic,
    gaussian_moment,
    phase_averaged_moments,
    subtracted_moment,
)
from .fock import (
    FockDensity,
    WignerGrid,
    apply_channel,
    apply_loss_fock,
    covariance_from_fock,
    excess_kurtosis_fock,
    fidelity,
    fock_moment,
    gaussian_to_fock,
    parity_w0,
    partial_trace,
    purity,
    reduce_to_mode,
    wigner,
    wigner_grid,
)
from .homodyne import QuadratureDataset, kurtosis_estimate, quadrature_pdf, sample
from .tomography import TomographyConfig, TomographyResult, reconstruct, report_observables
from .scenarios import ConfigError, preset_config, preset_names, run
