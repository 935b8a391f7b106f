"""Command-line interface.

Subcommands:
    simulate CONFIG      run a scenario (JSON file or preset name)
    tomography DATASET   maximum-likelihood reconstruction from a CSV dataset
    criteria CONFIG      Gaussian entanglement criteria of the input state
    wigner CONFIG        write the Wigner grid of one basis mode
    presets list|show    enumerate or print the shipped scenarios

Exit codes: 0 on success, 2 for a malformed configuration (with field
diagnostics), 1 for runtime failures tagged with the failing stage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fock import (
    apply_channel,
    default_cutoff,
    gaussian_to_fock,
    reduce_to_mode,
    wigner_grid,
)
from .homodyne import QuadratureDataset
from .scenarios import ConfigError, load_config, preset_config, preset_names, run
from .tomography import TomographyConfig, reconstruct, report_observables


class _StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")


def _load_scenario(arg: str, seed=None) -> dict:
    path = Path(arg)
    if path.exists():
        try:
            with path.open() as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                [(str(path), f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")]
            )
    else:
        try:
            cfg = json.loads(json.dumps(preset_config(arg)))
        except KeyError as exc:
            raise ConfigError([("config", str(exc.args[0]))])
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _emit(report: dict, args) -> None:
    if getattr(args, "format", "json") == "csv":
        text = _report_csv(report)
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out_dir = getattr(args, "out_dir", None)
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        suffix = "csv" if getattr(args, "format", "json") == "csv" else "json"
        target = out_dir / f"{report.get('name', 'report')}.{suffix}"
        target.write_text(text)
        print(str(target))
    else:
        sys.stdout.write(text)


def _report_csv(report: dict) -> str:
    """Flatten per-measurement scalar observables into CSV rows."""
    rows = []
    keys: list = []
    for m in report.get("measurements", []):
        row = {"scenario": report.get("name", "")}
        for k, v in m.items():
            if isinstance(v, (int, float, str)) and not isinstance(v, bool):
                row[k] = v
        rows.append(row)
        for k in row:
            if k not in keys:
                keys.append(k)
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(str(row.get(k, "")) for k in keys))
    return "\n".join(lines) + "\n"


def _cmd_simulate(args) -> int:
    cfg = _load_scenario(args.config, seed=args.seed)
    try:
        report = run(cfg, cross_validate=args.cross_validate)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - tag the failing stage
        raise _StageError("simulate", exc)
    _emit(report, args)
    return 0


def _cmd_criteria(args) -> int:
    cfg = _load_scenario(args.config, seed=args.seed)
    cfg = dict(cfg)
    cfg["analyses"] = [a for a in ("duan", "epr", "nullifiers") if _criteria_applicable(cfg, a)]
    if not cfg["analyses"]:
        raise ConfigError([("analyses", "state has fewer than 2 modes; no criteria apply")])
    cfg["measurements"] = []
    try:
        report = run(cfg)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise _StageError("criteria", exc)
    _emit(report, args)
    return 0


def _criteria_applicable(cfg, analysis) -> bool:
    state = cfg.get("state", {})
    n = None
    if isinstance(state, dict):
        if "squeeze_db" in state:
            n = len(state["squeeze_db"])
        elif "preset" in state:
            n = 4
        elif "covariance" in state and isinstance(state["covariance"], dict):
            m = state["covariance"].get("matrix")
            n = len(m) // 2 if m else None
    if n is None:
        return True
    return n >= 2


def _cmd_wigner(args) -> int:
    cfg = _load_scenario(args.config, seed=args.seed)
    ctx = load_config(cfg)
    try:
        V = ctx["covariance"]
        n = V.shape[0] // 2
        cutoff = ctx["cutoff"] or default_cutoff(n)
        rho = gaussian_to_fock(V, cutoff=cutoff)
        if ctx["spec"] is not None:
            rho = apply_channel(rho, ctx["spec"])
        mode_vec = ctx["basis"].matrix[args.mode]
        red = reduce_to_mode(rho, mode_vec)
        grid = wigner_grid(red, half_width=args.half_width, points=args.points)
    except IndexError:
        raise ConfigError([("--mode", f"basis has no mode {args.mode}")])
    except Exception as exc:  # noqa: BLE001
        raise _StageError("wigner", exc)
    out = Path(args.out)
    if args.format == "binary":
        grid.to_binary(out)
    else:
        grid.to_csv(out)
    print(f"{out} W(0,0)={grid.at_origin():.6g} integral={grid.integral():.6g}")
    return 0


def _cmd_tomography(args) -> int:
    try:
        data = QuadratureDataset.load_csv(args.dataset)
    except OSError as exc:
        raise ConfigError([(args.dataset, str(exc))])
    try:
        cfg = TomographyConfig(
            cutoff=args.cutoff,
            eta=args.eta,
            max_iters=args.max_iters,
            phase_bins=None if args.unbinned else 30,
        )
        result = reconstruct(data, cfg)
        obs = report_observables(result.state)
    except Exception as exc:  # noqa: BLE001
        raise _StageError("tomography", exc)
    report = {
        "name": "tomography",
        "version": __version__,
        "dataset": str(args.dataset),
        "records": int(len(data)),
        "eta": args.eta,
        "cutoff": args.cutoff,
        "iterations": result.iterations,
        "converged": result.converged,
        "monotone": result.monotone,
        "log_likelihood_final": result.final_log_likelihood,
        "measurements": [obs],
        "density_matrix": {
            "re": np.round(result.state.matrix.real, 12).tolist(),
            "im": np.round(result.state.matrix.imag, 12).tolist(),
        },
    }
    _emit(report, args)
    return 0


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(name)
        return 0
    if not args.name:
        raise ConfigError([("presets show", "needs a preset name")])
    print(json.dumps(preset_config(args.name), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modesub",
        description="Mode-selective photon subtraction simulator",
    )
    parser.add_argument("--version", action="version", version=f"modesub {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out-dir", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")

    ps = sub.add_parser("simulate", parents=[common], help="run a scenario config or preset")
    ps.add_argument("config", help="JSON config path or preset name")
    ps.add_argument(
        "--cross-validate",
        action="store_true",
        help="evaluate the Fock oracle alongside the analytic path and report deviations",
    )
    ps.set_defaults(func=_cmd_simulate)

    pc = sub.add_parser("criteria", parents=[common], help="entanglement criteria of the input state")
    pc.add_argument("config", help="JSON config path or preset name")
    pc.set_defaults(func=_cmd_criteria)

    pw = sub.add_parser("wigner", help="write a Wigner grid for one basis mode")
    pw.add_argument("config", help="JSON config path or preset name")
    pw.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    pw.add_argument("--mode", type=int, default=0, help="basis mode index")
    pw.add_argument("--out", required=True, help="output path")
    pw.add_argument("--points", type=int, default=161)
    pw.add_argument("--half-width", type=float, default=None)
    pw.add_argument(
        "--format", choices=["csv", "binary"], default="csv", help="grid file format"
    )
    pw.set_defaults(func=_cmd_wigner)

    pt = sub.add_parser("tomography", parents=[common], help="reconstruct a state from a dataset")
    pt.add_argument("dataset", help="CSV file of theta,x records")
    pt.add_argument("--eta", type=float, default=1.0, help="detection transmission in the POVM")
    pt.add_argument("--cutoff", type=int, default=10)
    pt.add_argument("--max-iters", type=int, default=500)
    pt.add_argument("--unbinned", action="store_true", help="one projector per record")
    pt.set_defaults(func=_cmd_tomography)

    pp = sub.add_parser("presets", help="list or show shipped scenarios")
    pp.add_argument("action", choices=["list", "show"])
    pp.add_argument("name", nargs="?", default=None)
    pp.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for fieldname, message in exc.errors:
            print(f"config error: {fieldname or 'config'}: {message}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
