"""Command line front end.

Subcommands: ``analytic``, ``transfer``, ``sweep``, ``capacitor``, ``map``.
Parameters come from flags or from a flat JSON file given with ``--config``;
flags win over file values. Exit status is 0 on success, 1 on a domain error
(or a failed ``--check``) and 2 on a usage or config parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .capacitor import (
    CapacitorCircuit,
    capacitor_energy_breakdown,
    dissipated_closed_form,
    electrical_to_mechanical,
    mechanical_to_electrical,
    rc_transient_numeric,
)
from .core import DomainError, SpringBoxParams, TransferPlan, energy_breakdown
from .transfer import audit_ledger, convergence_slope, convergence_sweep, simulate_transfer

log = logging.getLogger(__name__)

FORMATS = ("csv", "json", "both")

# flat config key -> argparse dest
CONFIG_KEYS = {
    "mass": "mass",
    "stiffness": "stiffness",
    "gravity": "gravity",
    "drops": "drops",
    "photon_energy": "photon_energy",
    "capacitance": "capacitance",
    "charge": "charge",
    "resistance": "resistance",
    "step_fraction": "step_fraction",
    "horizon_multiplier": "horizon_multiplier",
    "sweep": "sweep",
    "out": "out",
    "output_dir": "out",
    "format": "format",
    "jobs": "jobs",
}

DEFAULTS = {"format": "both", "out": ".", "jobs": 1, "step_fraction": 0.01, "horizon_multiplier": 20.0}


class ConfigParseError(Exception):
    """The config file could not be read as a flat JSON object."""


@dataclass(frozen=True)
class ScenarioConfig:
    params: Optional[SpringBoxParams]
    plan: Optional[TransferPlan]
    circuit: Optional[CapacitorCircuit]
    output_dir: Path
    format: str = "both"
    sweep: Optional[tuple] = None
    rc: Optional[tuple] = None  # (resistance, step_fraction, horizon_multiplier)
    jobs: int = 1
    gravity: Optional[float] = None


def _number(values: dict, key: str) -> Optional[float]:
    v = values.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DomainError(f"{key} must be a number, got {v!r}")
    return float(v)


def _even_int(key: str, v) -> int:
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if isinstance(v, bool) or not isinstance(v, int) or v < 2 or v % 2:
        raise DomainError(f"{key} must be an even integer >= 2 (N/2 drops are transferred), got {v!r}")
    return v


def build_config(values: dict, require=("mass", "stiffness", "gravity")) -> ScenarioConfig:
    """Validate a flat mapping of config keys into a :class:`ScenarioConfig`."""
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise DomainError(f"unknown config field(s): {', '.join(unknown)}")
    values = {CONFIG_KEYS[k]: v for k, v in values.items() if v is not None}
    for key in require:
        if key not in values:
            raise DomainError(f"missing required field {key!r}")

    params = None
    if all(k in values for k in ("mass", "stiffness", "gravity")):
        try:
            params = SpringBoxParams(_number(values, "mass"), _number(values, "stiffness"), _number(values, "gravity"))
        except DomainError as exc:
            raise DomainError(f"mass/stiffness/gravity: {exc}") from None

    plan = None
    drops = values.get("drops")
    if isinstance(drops, (list, tuple)):
        values.setdefault("sweep", drops)
        drops = None
    if drops is not None and values.get("photon_energy") is not None:
        raise DomainError("give either drops or photon_energy, not both")
    if drops is not None:
        drops = _even_int("drops", drops)
        if params is not None:
            plan = TransferPlan.from_drops(params, drops)
    elif values.get("photon_energy") is not None and params is not None:
        plan = TransferPlan.from_photon(params, _number(values, "photon_energy"))

    sweep = values.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, (list, tuple)) or not sweep:
            raise DomainError(f"sweep must be a non-empty list of drop counts, got {sweep!r}")
        sweep = tuple(_even_int("sweep", n) for n in sweep)

    circuit = None
    rc = None
    if "capacitance" in values or "charge" in values:
        cap, q0 = _number(values, "capacitance"), _number(values, "charge")
        if cap is None or q0 is None:
            raise DomainError("capacitance and charge must be given together")
        r = _number(values, "resistance") or 0.0
        circuit = CapacitorCircuit(cap, q0, r)
        if r > 0:
            rc = (
                r,
                _number(values, "step_fraction") or DEFAULTS["step_fraction"],
                _number(values, "horizon_multiplier") or DEFAULTS["horizon_multiplier"],
            )

    fmt = values.get("format", DEFAULTS["format"])
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    jobs = values.get("jobs", DEFAULTS["jobs"])
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise DomainError(f"jobs must be a positive integer, got {jobs!r}")

    return ScenarioConfig(
        params=params,
        plan=plan,
        circuit=circuit,
        output_dir=Path(values.get("out", DEFAULTS["out"])),
        format=fmt,
        sweep=sweep,
        rc=rc,
        jobs=jobs,
        gravity=_number(values, "gravity"),
    )


def read_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"config {path} must hold a flat JSON object")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigParseError(f"config {path}: field {key!r} is nested; the config must be flat")
    return data


def load_config(path) -> ScenarioConfig:
    return build_config(read_config_file(path))


# ------------------------------------------------------------------ parsing


def _drop_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _int_or_float(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scenario")
    g.add_argument("--mass", type=float, help="total liquid mass M [kg]")
    g.add_argument("--stiffness", type=float, help="spring constant k [N/m]")
    g.add_argument("--gravity", type=float, help="gravitational acceleration g [m/s^2]")
    g.add_argument("--photon-energy", dest="photon_energy", type=float, help="transfer photons of this energy [J]")
    g.add_argument("--capacitance", type=float, help="capacitance of each capacitor [F]")
    g.add_argument("--charge", type=float, help="initial charge on capacitor 1 [C]")
    g.add_argument("--resistance", type=float, help="series resistance [ohm]")
    g.add_argument("--step-fraction", dest="step_fraction", type=float, help="RK4 step as a fraction of RC/2")
    g.add_argument("--horizon-multiplier", dest="horizon_multiplier", type=float, help="horizon in units of RC/2")
    g.add_argument("--jobs", type=int, help="worker processes for sweeps (default 1)")
    g.add_argument("--out", help="output directory (default: current directory)")
    g.add_argument("--format", choices=FORMATS, help="which files to write (default both)")
    g.add_argument("--config", help="flat JSON config file; flags override its values")
    g.add_argument("--check", action="store_true", help="audit the ledger and fail on any violated check")

    parser = argparse.ArgumentParser(prog="twobox", description="Two spring-box analog of the two-capacitor paradox.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("analytic", parents=[common], help="closed-form energies")
    p = sub.add_parser("transfer", parents=[common], help="drop-by-drop ledger")
    p.add_argument("--drops", type=_int_or_float, help="drop count N (even)")
    p = sub.add_parser("sweep", parents=[common], help="convergence of the large-n approximation")
    p.add_argument("--drops", type=_drop_list, help="comma separated even drop counts")
    sub.add_parser("capacitor", parents=[common], help="two-capacitor energies and RC transient")
    p = sub.add_parser("map", parents=[common], help="mechanical <-> electrical parameter map")
    p.add_argument("--to", choices=("electrical", "mechanical"), help="direction (inferred by default)")
    return parser


# ------------------------------------------------------------------- output


def _dump_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _wants(cfg: ScenarioConfig, kind: str) -> bool:
    return cfg.format in (kind, "both")


def _prepare_out(cfg: ScenarioConfig) -> Path:
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DomainError(f"output directory {cfg.output_dir} is not writable: {exc}") from None
    return cfg.output_dir


def _print_breakdown(b, out) -> None:
    for name, value in b.to_dict().items():
        unit = "" if name == "domain" else " J"
        print(f"{name}: {value!r}{unit}" if unit else f"{name}: {value}", file=out)


def _cmd_analytic(cfg, args, out) -> int:
    _print_breakdown(energy_breakdown(cfg.params), out)
    return 0


def _cmd_transfer(cfg, args, out) -> int:
    if cfg.plan is None:
        raise DomainError("transfer needs --drops (an even integer) or --photon-energy")
    summary = simulate_transfer(cfg.params, cfg.plan)
    report = audit_ledger(summary, cfg.params, cfg.plan)
    dest = _prepare_out(cfg)
    if _wants(cfg, "csv"):
        if summary.records is None:
            log.warning("ledger not retained for N=%d; no CSV written", cfg.plan.drop_count)
        else:
            with open(dest / "ledger.csv", "w", encoding="utf-8", newline="\n") as fh:
                summary.records.write_csv(fh)
    if _wants(cfg, "json"):
        doc = {"drop_count": cfg.plan.drop_count, "mass_source": cfg.plan.mass_source, **summary.to_dict()}
        _dump_json(dest / "summary.json", doc)
        _dump_json(dest / "audit.json", report.to_dict())

    for name, value in summary.to_dict().items():
        if name != "record_count":
            print(f"{name}: {value!r} J", file=out)
    print(f"audit: {'pass' if report.passed else 'FAIL'} ({len(report.checks)} checks)", file=out)
    for c in report.failures:
        print(f"  failed {c.name}: residual {c.residual!r}, relative {c.relative_residual!r}", file=out)
    if args.check and not report.passed:
        return 1
    return 0


def _cmd_sweep(cfg, args, out) -> int:
    if cfg.sweep is None:
        raise DomainError("sweep needs --drops as a comma separated list of even integers")
    rows = convergence_sweep(cfg.params, cfg.sweep, jobs=cfg.jobs)
    header = ("drop_count", "relative_error_delta1", "relative_error_delta2", "relative_error_total")
    lines = [",".join(header)]
    lines += [
        f"{r.drop_count},{r.relative_error_delta1!r},{r.relative_error_delta2!r},{r.relative_error_total!r}"
        for r in rows
    ]
    dest = _prepare_out(cfg)
    if _wants(cfg, "csv"):
        (dest / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    slope = convergence_slope(rows) if len(rows) > 1 else None
    if _wants(cfg, "json"):
        _dump_json(
            dest / "sweep.json",
            {"rows": [dict(zip(header, l.split(","))) for l in lines[1:]], "slope_delta2": slope},
        )
    print("\n".join(lines), file=out)
    if slope is not None:
        print(f"log-log slope of relative_error_delta2: {slope:.4f}", file=out)
    return 0


def _cmd_capacitor(cfg, args, out) -> int:
    if cfg.circuit is None:
        raise DomainError("capacitor needs --capacitance and --charge")
    b = capacitor_energy_breakdown(cfg.circuit)
    _print_breakdown(b, out)
    dest = _prepare_out(cfg)
    doc = b.to_dict()
    if cfg.rc is not None:
        r, frac, mult = cfg.rc
        tau = cfg.circuit.time_constant
        series = rc_transient_numeric(cfg.circuit, frac * tau, mult * tau)
        dissipated = float(series.cumulative_dissipated[-1])
        doc.update(
            resistance=r,
            time_constant=tau,
            dissipated_numeric=dissipated,
            dissipated_closed_form=dissipated_closed_form(cfg.circuit),
        )
        print(f"dissipated_numeric: {dissipated!r} J", file=out)
        print(f"dissipated_closed_form: {dissipated_closed_form(cfg.circuit)!r} J", file=out)
        if _wants(cfg, "csv"):
            with open(dest / "transient.csv", "w", encoding="utf-8", newline="\n") as fh:
                series.write_csv(fh)
    if _wants(cfg, "json"):
        _dump_json(dest / "capacitor.json", doc)
    return 0


def _cmd_map(cfg, args, out) -> int:
    direction = args.to
    if direction is None:
        direction = "electrical" if cfg.params is not None else "mechanical"
    if direction == "electrical":
        if cfg.params is None:
            raise DomainError("map to electrical needs --mass, --stiffness and --gravity")
        c = mechanical_to_electrical(cfg.params)
        doc = {"direction": direction, "capacitance": c.capacitance, "charge": c.initial_charge, "resistance": 0.0}
    else:
        if cfg.circuit is None or cfg.gravity is None:
            raise DomainError("map to mechanical needs --capacitance, --charge and --gravity")
        p = electrical_to_mechanical(cfg.circuit, cfg.gravity)
        doc = {"direction": direction, "mass": p.total_mass, "stiffness": p.stiffness, "gravity": p.gravity}
    for k, v in doc.items():
        print(f"{k}: {v!r}" if k != "direction" else f"{k}: {v}", file=out)
    if _wants(cfg, "json"):
        _dump_json(_prepare_out(cfg) / "map.json", doc)
    return 0


_HANDLERS = {
    "analytic": (_cmd_analytic, ("mass", "stiffness", "gravity")),
    "transfer": (_cmd_transfer, ("mass", "stiffness", "gravity")),
    "sweep": (_cmd_sweep, ("mass", "stiffness", "gravity")),
    "capacitor": (_cmd_capacitor, ("capacitance", "charge")),
    "map": (_cmd_map, ()),
}


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2

    handler, required = _HANDLERS[args.command]
    try:
        values = read_config_file(args.config) if args.config else {}
    except ConfigParseError as exc:
        print(f"twobox: error: {exc}", file=stderr)
        return 2

    flags = {k: v for k, v in vars(args).items() if k in set(CONFIG_KEYS.values()) and v is not None}
    if args.command == "sweep" and "drops" in flags:
        flags["sweep"] = flags.pop("drops")
        values.pop("drops", None)
    values = {CONFIG_KEYS.get(k, k): v for k, v in values.items()}
    values.update(flags)
    try:
        cfg = build_config(values, require=required)
        return handler(cfg, args, stdout)
    except (DomainError, OverflowError) as exc:
        print(f"twobox: error: {exc}", file=stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run_cli())
