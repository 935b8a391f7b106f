"""Declarative scenario runner with named presets.

A scenario is a JSON-friendly dictionary describing one input state,
one mode basis, at most one subtraction channel, a list of homodyne
measurements and the analyses to report.  Complex numbers are written
as ``[re, im]`` pairs; coefficient vectors and custom basis matrices
default to the bare-HG frame (``"frame": "internal"`` opts out of the
documented import phases).

The runner chooses the analytic Wick path for moment quantities and
the truncated-Fock oracle for state-level observables; with
``cross_validate=True`` both paths are evaluated and their deviation is
reported per measurement.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import __version__
from .fock import (
    apply_channel,
    apply_loss_fock,
    default_cutoff,
    excess_kurtosis_fock,
    fidelity,
    gaussian_to_fock,
    parity_w0,
    purity,
    reduce_to_mode,
    wigner_grid,
)
from .fock import mode_quadrature_moments as _oracle_moments
from .gaussian import (
    REFERENCE_SQUEEZE_DB,
    chain_adjacency,
    change_basis,
    covariance_from_json,
    covariance_from_squeeze,
    duan_value,
    epr_value,
    nullifier_variances,
    reference_covariance,
    ring_adjacency,
    validate,
)
from .homodyne import kurtosis_estimate, sample
from .modes import ModeTransform, builtin_basis, hg_to_internal, normalize_coefficients, superpose
from .moments import excess_kurtosis_analytic, phase_averaged_moments
from .subtraction import SubtractionSpec, channel_terms, ideal_spec, reference_spec
from .tomography import TomographyConfig, reconstruct, report_observables

__all__ = ["ConfigError", "load_config", "preset_names", "preset_config", "run"]

DEFAULT_SEED = 12345
DEFAULT_SAMPLES = 30000
DEFAULT_ETA = 0.875

_ANALYSES = {
    "kurtosis",
    "W0",
    "purity",
    "fidelity",
    "wigner",
    "duan",
    "epr",
    "nullifiers",
    "tomography",
}


class ConfigError(ValueError):
    """Scenario configuration problem with field-level diagnostics."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [("", errors)]
        self.errors = list(errors)
        msg = "; ".join(f"{f or 'config'}: {m}" for f, m in self.errors)
        super().__init__(msg)


def _complex_list(entries, where):
    try:
        out = np.array([complex(re, im) for re, im in entries])
    except (TypeError, ValueError):
        raise ConfigError([(where, "expected a list of [re, im] pairs")])
    return out


def _parse_state(cfg, errors):
    state = cfg.get("state")
    if state is None:
        errors.append(("state", "missing"))
        return None
    if isinstance(state, dict) and "preset" in state:
        if state["preset"] in ("paper-ED3", "reference-4mode"):
            return reference_covariance()
        errors.append(("state.preset", f"unknown state preset {state['preset']!r}"))
        return None
    if isinstance(state, dict) and "squeeze_db" in state:
        try:
            return covariance_from_squeeze(state["squeeze_db"])
        except (TypeError, ValueError) as exc:
            errors.append(("state.squeeze_db", str(exc)))
            return None
    if isinstance(state, dict) and "covariance" in state:
        try:
            return covariance_from_json(state["covariance"])
        except (TypeError, ValueError) as exc:
            errors.append(("state.covariance", str(exc)))
            return None
    errors.append(("state", "expected one of preset / squeeze_db / covariance"))
    return None


def _parse_basis(cfg, n_modes, errors):
    basis = cfg.get("basis", "HG")
    try:
        if isinstance(basis, str):
            return builtin_basis(basis, n_modes)
        if isinstance(basis, dict) and "matrix" in basis:
            rows = [
                _complex_list(row, "basis.matrix") for row in basis["matrix"]
            ]
            matrix = np.array(rows)
            frame = basis.get("frame", "hg")
            label = basis.get("label", "custom")
            row_phase = basis.get("row_phase", 1.0)
            if not np.isscalar(row_phase):
                row_phase = _complex_list(row_phase, "basis.row_phase")
            if frame == "hg":
                return ModeTransform.from_hg_matrix(matrix, label=label, row_phase=row_phase)
            if frame == "internal":
                return ModeTransform(matrix, label=label)
            errors.append(("basis.frame", f"unknown frame {frame!r}"))
            return None
    except (TypeError, ValueError, ConfigError) as exc:
        errors.append(("basis", str(exc)))
        return None
    errors.append(("basis", "expected a name or an object with 'matrix'"))
    return None


def _resolve_mode(entry, basis: ModeTransform, where, errors):
    """Mode entry -> internal coefficient vector over the state's modes."""
    n = basis.n_modes
    try:
        if isinstance(entry, str):
            name = entry.strip().upper()
            prefix = basis.label.upper()
            for p in (prefix, "HG", "EPR", "LC", "SC"):
                tail = name[len(p):].lstrip("_-")
                if name.startswith(p) and tail.isdigit():
                    k = int(tail)
                    if k >= n:
                        raise ValueError(f"mode index {k} out of range")
                    if p == "HG":
                        e = np.zeros(n, dtype=complex)
                        e[k] = 1.0
                        return e
                    if p != prefix:
                        raise ValueError(
                            f"mode {entry!r} does not belong to basis {basis.label!r}"
                        )
                    return normalize_coefficients(basis.matrix[k])
            raise ValueError(f"cannot resolve mode name {entry!r}")
        if isinstance(entry, dict) and "basis_weights" in entry:
            w = _complex_list(entry["basis_weights"], where + ".basis_weights")
            return superpose(basis, w)
        vec = _complex_list(entry if not isinstance(entry, dict) else entry["vector"], where)
        frame = entry.get("frame", "hg") if isinstance(entry, dict) else "hg"
        if vec.size != n:
            raise ValueError(f"vector has {vec.size} entries, state has {n} modes")
        if frame == "hg":
            vec = hg_to_internal(vec)
        elif frame != "internal":
            raise ValueError(f"unknown frame {frame!r}")
        return normalize_coefficients(vec)
    except (TypeError, ValueError, KeyError, ConfigError) as exc:
        errors.append((where, str(exc)))
        return None


def _parse_subtraction(cfg, basis, n_modes, errors):
    sub = cfg.get("subtraction", "none")
    if sub == "none" or sub is None:
        return None
    if sub == "ideal" or sub == "reference":
        errors.append(("subtraction", "need an object with 'mode' to subtract in"))
        return None
    if not isinstance(sub, dict):
        errors.append(("subtraction", "expected 'none' or an object"))
        return None
    mode = _resolve_mode(sub.get("mode"), basis, "subtraction.mode", errors)
    if mode is None:
        return None
    channel = sub.get("channel", "ideal")
    try:
        if channel == "ideal":
            return ideal_spec(mode)
        if channel == "reference":
            return reference_spec(mode)
        if isinstance(channel, dict):
            return SubtractionSpec(
                coefficients=mode,
                w0=float(channel.get("w0", 0.0)),
                p0=float(channel.get("p0", 1.0)),
                num_modes=int(channel.get("num_modes", n_modes)),
            )
    except (TypeError, ValueError) as exc:
        errors.append(("subtraction.channel", str(exc)))
        return None
    errors.append(("subtraction.channel", f"unknown channel {channel!r}"))
    return None


def _parse_adjacency(cfg, n_modes, errors):
    adj = cfg.get("adjacency", "chain")
    if isinstance(adj, str):
        if adj == "chain":
            return chain_adjacency(n_modes)
        if adj == "ring":
            return ring_adjacency(n_modes)
        errors.append(("adjacency", f"unknown adjacency {adj!r}"))
        return None
    A = np.asarray(adj, dtype=float)
    if A.shape != (n_modes, n_modes):
        errors.append(("adjacency", f"matrix is {A.shape}, need ({n_modes}, {n_modes})"))
        return None
    return A


def load_config(cfg: dict):
    """Validate and normalize a scenario configuration.

    Returns a dict of resolved objects; raises :class:`ConfigError`
    listing every offending field.
    """
    if not isinstance(cfg, dict):
        raise ConfigError([("", "configuration must be a JSON object")])
    errors: list = []
    V = _parse_state(cfg, errors)
    n = V.shape[0] // 2 if V is not None else 0
    basis = _parse_basis(cfg, n, errors) if V is not None else None
    spec = _parse_subtraction(cfg, basis, n, errors) if basis is not None else None

    analyses = cfg.get("analyses", ["kurtosis"])
    unknown = sorted(set(analyses) - _ANALYSES)
    if unknown:
        errors.append(("analyses", f"unknown analyses {unknown}; allowed {sorted(_ANALYSES)}"))
    if not analyses:
        errors.append(("analyses", "need at least one analysis"))

    measurements = []
    raw_meas = cfg.get("measurements", [])
    needs_meas = bool(set(analyses) & {"kurtosis", "W0", "purity", "fidelity", "wigner", "tomography"})
    if needs_meas and not raw_meas:
        errors.append(("measurements", "the requested analyses need at least one measurement"))
    for i, m in enumerate(raw_meas):
        where = f"measurements[{i}]"
        if not isinstance(m, dict) or "mode" not in m:
            errors.append((where, "expected an object with 'mode'"))
            continue
        mode = _resolve_mode(m["mode"], basis, where + ".mode", errors) if basis is not None else None
        phases = m.get("phases", "random")
        if not (phases == "random" or isinstance(phases, (list, tuple))):
            errors.append((where + ".phases", "expected 'random' or a list of angles"))
        samples = int(m.get("samples", DEFAULT_SAMPLES))
        if samples < 0:
            errors.append((where + ".samples", "must be >= 0"))
        eta = float(m.get("eta", DEFAULT_ETA))
        if not 0.0 < eta <= 1.0:
            errors.append((where + ".eta", f"must lie in (0, 1], got {eta}"))
        measurements.append(
            {"label": m.get("label", f"mode{i}"), "mode": mode, "phases": phases,
             "samples": samples, "eta": eta}
        )

    adjacency = _parse_adjacency(cfg, n, errors) if (V is not None and "nullifiers" in analyses) else None

    tomo = cfg.get("tomography", {})
    if "tomography" in analyses:
        if not isinstance(tomo, dict):
            errors.append(("tomography", "expected an object"))
        else:
            for eta in tomo.get("etas", [1.0]):
                if not 0.0 < float(eta) <= 1.0:
                    errors.append(("tomography.etas", f"eta {eta} outside (0, 1]"))

    if errors:
        raise ConfigError(errors)
    return {
        "name": cfg.get("name", "scenario"),
        "seed": int(cfg.get("seed", DEFAULT_SEED)),
        "covariance": V,
        "basis": basis,
        "spec": spec,
        "analyses": list(analyses),
        "measurements": measurements,
        "adjacency": adjacency,
        "cutoff": cfg.get("cutoff"),
        "bootstrap": int(cfg.get("bootstrap", 1000)),
        "wigner": cfg.get("wigner", {}),
        "tomography": tomo,
        "raw": cfg,
    }


def _config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _complex_out(vec) -> list:
    return [[float(c.real), float(c.imag)] for c in vec]


def run(config: dict, cross_validate: bool = False) -> dict:
    """Execute a scenario and return a JSON-serializable report.

    The report carries per-measurement observables with uncertainties,
    channel diagnostics, validation flags and provenance (config hash,
    seed, package version); identical config and seed give identical
    reports.
    """
    ctx = load_config(config)
    V = ctx["covariance"]
    basis = ctx["basis"]
    spec = ctx["spec"]
    analyses = set(ctx["analyses"])
    seed = ctx["seed"]
    n = V.shape[0] // 2

    report = {
        "name": ctx["name"],
        "version": __version__,
        "seed": seed,
        "config_hash": _config_hash(ctx["raw"]),
        "n_modes": n,
        "basis": basis.label,
    }

    diag = validate(V)
    report["state"] = {
        "physical": bool(diag.physical),
        "symmetry_deviation": diag.symmetry_deviation,
        "min_uncertainty_eigenvalue": diag.min_uncertainty_eigenvalue,
        "mode_purities": [float(p) for p in diag.mode_purities],
    }

    if spec is not None:
        report["channel"] = {
            "coefficients": _complex_out(spec.coefficients),
            "w0": spec.w0,
            "p0": spec.p0,
            "num_modes": spec.num_modes,
            "terms": [
                {"kind": t.kind, "weight": t.weight, "mode": t.mode}
                for t in channel_terms(spec)
            ],
        }

    # Gaussian-side criteria are evaluated on the input state in the
    # scenario basis (the channel output is no longer Gaussian).
    Vb = change_basis(V, basis)
    criteria = {}
    if "duan" in analyses:
        criteria["duan"] = duan_value(Vb, (0, 1))
    if "epr" in analyses:
        criteria["epr"] = epr_value(Vb, conditioned=1, conditioning=0)
    if "nullifiers" in analyses:
        criteria["nullifiers"] = [float(r) for r in nullifier_variances(Vb, ctx["adjacency"])]
    if criteria:
        report["criteria"] = criteria

    needs_oracle = bool(
        analyses & {"W0", "purity", "fidelity", "wigner", "tomography"}
    ) or cross_validate or any(m["samples"] > 0 for m in ctx["measurements"])
    rho_in = rho_out = rho_ideal = None
    if needs_oracle and n <= 4:
        cutoff = ctx["cutoff"] or default_cutoff(n)
        if cross_validate and ctx["cutoff"] is None and n == 4:
            # verification runs trade memory for a tighter truncation
            cutoff = 8
        rho_in = gaussian_to_fock(V, cutoff=cutoff)
        if spec is not None:
            rho_out = apply_channel(rho_in, spec)
            if "fidelity" in analyses:
                rho_ideal = apply_channel(rho_in, ideal_spec(spec.coefficients))
        report["oracle"] = {
            "cutoff": int(cutoff),
            "truncation_leak": rho_in.leak,
        }
        if rho_out is not None:
            report["oracle"]["heralding_weight"] = rho_out.heralding_weight

    out_measurements = []
    for i, m in enumerate(ctx["measurements"]):
        entry = {"label": m["label"], "mode": _complex_out(m["mode"]),
                 "eta": m["eta"], "samples": m["samples"]}
        u = m["mode"]
        eta = m["eta"]
        if "kurtosis" in analyses:
            kin = excess_kurtosis_analytic(V, None, u, eta=eta)
            entry["kurtosis_input_analytic"] = kin
            if spec is not None:
                entry["kurtosis_analytic"] = excess_kurtosis_analytic(V, spec, u, eta=eta)
            m2, m4 = phase_averaged_moments(V, spec, u, eta=eta)
            entry["moment2"] = m2
            entry["moment4"] = m4

        source = rho_out if rho_out is not None else rho_in
        if rho_in is not None:
            if analyses & {"W0", "purity", "fidelity", "wigner"}:
                red = reduce_to_mode(source, u)
                red_eta = apply_loss_fock(red, eta) if eta < 1.0 else red
                if "W0" in analyses:
                    entry["W0"] = parity_w0(red_eta)
                    red_in = reduce_to_mode(rho_in, u)
                    entry["W0_input"] = parity_w0(
                        apply_loss_fock(red_in, eta) if eta < 1.0 else red_in
                    )
                if "purity" in analyses:
                    entry["purity"] = purity(red_eta)
                if "fidelity" in analyses and rho_ideal is not None:
                    entry["fidelity_vs_ideal"] = fidelity(
                        reduce_to_mode(rho_ideal, u), red
                    )
                if "wigner" in analyses:
                    wg = wigner_grid(
                        red_eta,
                        half_width=ctx["wigner"].get("half_width"),
                        points=int(ctx["wigner"].get("points", 161)),
                    )
                    entry["wigner"] = {
                        "W_origin": wg.at_origin(),
                        "integral": wg.integral(),
                        "xs": [float(x) for x in wg.xs],
                        "ps": [float(p) for p in wg.ps],
                        "values": [[float(v) for v in row] for row in wg.values],
                    }
            if cross_validate and "kurtosis" in analyses:
                k_oracle = excess_kurtosis_fock(source, mode=u, eta=eta)
                k_analytic = entry.get("kurtosis_analytic", entry["kurtosis_input_analytic"])
                entry["cross_validation"] = {
                    "kurtosis_oracle": k_oracle,
                    "deviation": abs(k_oracle - k_analytic),
                }

            if m["samples"] > 0:
                ds = sample(
                    source,
                    mode=u,
                    phases=m["phases"],
                    num_samples=m["samples"],
                    eta=eta,
                    seed=seed + 7919 * (i + 1),
                )
                if "kurtosis" in analyses:
                    k, se = kurtosis_estimate(
                        ds, num_bootstrap=ctx["bootstrap"], seed=seed + 104729 * (i + 1)
                    )
                    entry["kurtosis_sampled"] = k
                    entry["kurtosis_se"] = se
                if "tomography" in analyses:
                    tcfg_raw = ctx["tomography"]
                    tomo_out = []
                    for eta_rec in tcfg_raw.get("etas", [1.0]):
                        tcfg = TomographyConfig(
                            cutoff=int(tcfg_raw.get("cutoff", 10)),
                            eta=float(eta_rec),
                            max_iters=int(tcfg_raw.get("max_iters", 500)),
                            phase_bins=tcfg_raw.get("phase_bins", 30),
                        )
                        res = reconstruct(ds, tcfg)
                        obs = report_observables(res.state)
                        tomo_out.append(
                            {
                                "eta": float(eta_rec),
                                "iterations": res.iterations,
                                "converged": res.converged,
                                "monotone": res.monotone,
                                **obs,
                            }
                        )
                    entry["tomography"] = tomo_out
        out_measurements.append(entry)

    report["measurements"] = out_measurements
    if cross_validate:
        devs = [
            e["cross_validation"]["deviation"]
            for e in out_measurements
            if "cross_validation" in e
        ]
        report["cross_validation_max_deviation"] = max(devs) if devs else None
    return report


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def _db(db_pairs):
    return {"squeeze_db": [list(p) for p in db_pairs]}


_REF_STATE = {"preset": "paper-ED3"}


def _meas(mode, label=None, samples=DEFAULT_SAMPLES, eta=DEFAULT_ETA):
    out = {"mode": mode, "phases": "random", "samples": samples, "eta": eta}
    if label:
        out["label"] = label
    return out


def _epr4_basis():
    s = 1.0 / np.sqrt(2.0)
    rows = [
        [[s, 0], [s, 0], [0, 0], [0, 0]],
        [[s, 0], [-s, 0], [0, 0], [0, 0]],
        [[0, 0], [0, 0], [1, 0], [0, 0]],
        [[0, 0], [0, 0], [0, 0], [1, 0]],
    ]
    return {"matrix": rows, "frame": "hg", "label": "EPR4"}


def _presets() -> dict:
    s2 = 1.0 / np.sqrt(2.0)
    s3 = 1.0 / np.sqrt(3.0)
    p: dict = {}
    p["vacuum"] = {
        "name": "vacuum",
        "state": _db([(0.0, 0.0)]),
        "basis": "HG",
        "subtraction": "none",
        "measurements": [_meas("HG0", samples=0, eta=1.0)],
        "analyses": ["wigner", "W0", "purity"],
        "seed": 7,
    }
    for k in range(3):
        p[f"fig2a-subtract-HG{k}"] = {
            "name": f"fig2a-subtract-HG{k}",
            "state": _REF_STATE,
            "basis": "HG",
            "subtraction": {"mode": f"HG{k}", "channel": "reference"},
            "measurements": [_meas(f"HG{m}", label=f"HG{m}") for m in range(3)],
            "analyses": ["kurtosis", "W0", "purity", "fidelity"],
            "seed": DEFAULT_SEED,
        }
    p["fig2a-input"] = {
        "name": "fig2a-input",
        "state": _REF_STATE,
        "basis": "HG",
        "subtraction": "none",
        "measurements": [_meas(f"HG{m}", label=f"HG{m}") for m in range(3)],
        "analyses": ["kurtosis", "W0", "purity"],
        "seed": DEFAULT_SEED,
    }
    sup01 = [[1 * s2, 0], [0, -s2], [0, 0], [0, 0]]  # HG0 - i HG1
    p["fig2b-superpose-01"] = {
        "name": "fig2b-superpose-01",
        "state": _REF_STATE,
        "basis": "HG",
        "subtraction": {"mode": sup01, "channel": "reference"},
        "measurements": [_meas(sup01, label="HG0-iHG1")],
        "analyses": ["kurtosis", "W0", "purity", "fidelity"],
        "seed": DEFAULT_SEED,
    }
    sup012 = [[s3, 0], [0, s3], [s3, 0], [0, 0]]  # HG0 + i HG1 + HG2
    p["fig2b-superpose-012"] = {
        "name": "fig2b-superpose-012",
        "state": _REF_STATE,
        "basis": "HG",
        "subtraction": {"mode": sup012, "channel": "reference"},
        "measurements": [_meas(sup012, label="HG0+iHG1+HG2")],
        "analyses": ["kurtosis", "W0", "purity", "fidelity"],
        "seed": DEFAULT_SEED,
    }
    p["fig2b-epr"] = {
        "name": "fig2b-epr",
        "state": _REF_STATE,
        "basis": _epr4_basis(),
        "subtraction": {"mode": "EPR4_0", "channel": "reference"},
        "measurements": [_meas("EPR4_0", label="EPR0"), _meas("EPR4_1", label="EPR1")],
        "analyses": ["kurtosis", "duan", "epr", "W0", "purity"],
        "seed": DEFAULT_SEED,
    }
    for name, sub, extra in [
        ("fig3a-lc-input", "none", {}),
        ("fig3a-subtract-LC3", {"mode": "LC3", "channel": "reference"}, {}),
        ("fig3a-subtract-LC2", {"mode": "LC2", "channel": "reference"}, {}),
        (
            "fig3a-subtract-superposition",
            {
                "mode": {"basis_weights": [[0, -0.4], [-0.4, 0], [0, 0.8], [0.2, 0]]},
                "channel": "reference",
            },
            {},
        ),
    ]:
        p[name] = {
            "name": name,
            "state": _REF_STATE,
            "basis": "LC",
            "subtraction": sub,
            "measurements": [_meas(f"LC{m}", label=f"LC{m}") for m in range(4)],
            "analyses": ["kurtosis", "nullifiers"],
            "adjacency": "chain",
            "seed": DEFAULT_SEED,
            **extra,
        }
    for name, sub in [("fig3b-sc-input", "none"), ("fig3b-subtract-SC0", {"mode": "SC0", "channel": "reference"})]:
        p[name] = {
            "name": name,
            "state": _REF_STATE,
            "basis": "SC",
            "subtraction": sub,
            "measurements": [_meas(f"SC{m}", label=f"SC{m}") for m in range(4)],
            "analyses": ["kurtosis", "nullifiers"],
            "adjacency": "ring",
            "seed": DEFAULT_SEED,
        }
    p["ed1-loss-correction"] = {
        "name": "ed1-loss-correction",
        "state": _REF_STATE,
        "basis": "HG",
        "subtraction": {"mode": "HG0", "channel": "reference"},
        "measurements": [_meas("HG0", label="HG0", eta=0.875)],
        "analyses": ["kurtosis", "W0", "purity", "tomography"],
        "tomography": {"etas": [1.0, 0.875], "cutoff": 10},
        "seed": DEFAULT_SEED,
    }
    p["ed2-mode-mismatch"] = {
        "name": "ed2-mode-mismatch",
        "state": _REF_STATE,
        "basis": "HG",
        "subtraction": {"mode": sup01, "channel": "reference"},
        "measurements": [
            _meas(sup01, label="full-match"),
            _meas([[0, 0], [0, 1], [0, 0], [0, 0]], label="partial-match"),
            _meas([[s2, 0], [0, s2], [0, 0], [0, 0]], label="no-match"),
        ],
        "analyses": ["kurtosis", "W0", "purity", "fidelity"],
        "seed": DEFAULT_SEED,
    }
    return p


def preset_names() -> list:
    return sorted(_presets().keys())


def preset_config(name: str) -> dict:
    presets = _presets()
    if name not in presets:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(presets))}"
        )
    return presets[name]
