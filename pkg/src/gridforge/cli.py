"""``gridforge`` command-line front end.

Exit codes: 0 success, 2 validation failure, 3 numerical divergence,
4 infeasible synthesis.  Set ``GRIDFORGE_LOG`` (e.g. ``INFO``) for logs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ConfigError, ScenarioBundle, bundle_to_dict, parse_scenario, validate_bundle
from .sim import DivergenceError, MissingCertificateError, lyapunov_trace, run_scenario
from .synthesize import SynthesisError, synthesize_controller

__all__ = ["RunConfig", "main", "write_outputs", "cmd_validate", "parse_scenario",
           "EXIT_OK", "EXIT_INVALID", "EXIT_DIVERGED", "EXIT_INFEASIBLE"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4

logger = logging.getLogger("gridforge")


@dataclass
class RunConfig:
    command: str
    input: Path
    out: Path = Path("gridforge-out")
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input = Path(self.input)
        self.out = Path(self.out)
        if self.command not in ("certify", "synthesize", "simulate", "validate"):
            raise ValueError(f"unknown command {self.command!r}")
        if not self.input.is_file():
            raise FileNotFoundError(f"input file not found: {self.input}")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def scenario_hash(bundle: ScenarioBundle) -> str:
    canon = json.dumps(bundle_to_dict(bundle), sort_keys=True, default=_json_default)
    return hashlib.sha256(canon.encode()).hexdigest()


def write_outputs(results: dict[str, dict | Callable[[Path], None]], out_dir) -> dict:
    """Write artifacts and a ``manifest.json`` with sizes and SHA-256 hashes.

    Values are either JSON-serializable objects or callables that write the
    file themselves.  IO errors propagate unchanged.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, payload in results.items():
        path = out / name
        if callable(payload):
            payload(path)
        else:
            path.write_text(_dump(payload))
        data = path.read_bytes()
        files.append({"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {"files": files}
    (out / "manifest.json").write_text(_dump(manifest))
    return manifest


def _apply_overrides(bundle: ScenarioBundle, ov: dict) -> ScenarioBundle:
    if ov.get("dt") is not None:
        if ov["dt"] <= 0:
            raise ConfigError("--dt must be positive")
        bundle.dt = ov["dt"]
    if ov.get("seed") is not None:
        bundle.synthesis = dataclasses.replace(bundle.synthesis, seed=ov["seed"])
    if ov.get("grid") is not None:
        try:
            bundle.grid = dataclasses.replace(bundle.grid, points=ov["grid"])
        except ValueError as exc:
            raise ConfigError(f"--grid: {exc}") from exc
    return bundle


def _certificate_payload(rep) -> dict:
    d = rep.to_dict()
    d["certified"] = rep.all_ok
    return d


def cmd_certify(bundle: ScenarioBundle, out: Path) -> int:
    reports = bundle.certify_all()
    main_rep = reports[bundle.inverter.key()]
    payload = {"inverter": _certificate_payload(main_rep),
               "buses": {str(j): _certificate_payload(reports[s.key()])
                         for j, s in bundle.inverter_specs().items()}}
    write_outputs({"certificate.json": payload}, out)
    rho = main_rep.certified_rho
    print(f"certified={main_rep.all_ok} rho*={rho if rho is None else f'{rho:.4f}'} "
          f"lmi={main_rep.lmi_status}")
    return EXIT_OK if main_rep.all_ok else EXIT_INVALID


def cmd_synthesize(bundle: ScenarioBundle, out: Path) -> int:
    plant = bundle.inverter.plant(bundle.frame)
    try:
        res = synthesize_controller(plant, bundle.synthesis)
    except SynthesisError as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    cfg = dataclasses.asdict(bundle.synthesis)
    payload = {**res.to_dict(), "config": cfg}
    files = {"gains.json": payload}
    if res.feasible:
        files["certificate.json"] = _certificate_payload(res.report)
    write_outputs(files, out)
    print(f"feasible={res.feasible} rho*={res.report.certified_rho} start={res.start_index}")
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_simulate(bundle: ScenarioBundle, out: Path) -> int:
    errors, _ = validate_bundle(bundle, certify=False)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    reports = bundle.certify_all()
    for j, s in bundle.inverter_specs().items():
        if not reports[s.key()].all_ok:
            print(f"warning: bus {j}: inverter controller is not certified", file=sys.stderr)
    scenario = bundle.to_scenario(reports)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ts = run_scenario(scenario)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    meta = ts.metadata(scenario_hash(bundle))
    try:
        lt = lyapunov_trace(ts)
        meta["lyapunov"] = lt.to_dict()
    except MissingCertificateError as exc:
        meta["lyapunov"] = {"skipped": str(exc)}
    meta["final_derivative_norm"] = float(ts.segments[-1].derivative_norm()[-1])
    write_outputs({"timeseries.csv": ts.write_csv, "run.json": meta}, out)
    print(f"simulated {meta['records']} records to t={meta['t_end']:g} s; "
          f"lyapunov={meta['lyapunov']}")
    return EXIT_OK


def cmd_validate(path, certify: bool = True) -> int:
    """Print diagnostics for a scenario file; 0 iff there are no errors."""
    try:
        bundle = parse_scenario(path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    errors, warns = validate_bundle(bundle, certify=certify)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    for w in warns:
        print(f"warning: {w}", file=sys.stderr)
    if not errors:
        print(f"{path}: ok ({bundle.network.bus_count} buses, {len(bundle.events)} events)")
    return EXIT_INVALID if errors else EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridforge", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["certify", "synthesize", "simulate", "validate"])
    p.add_argument("file", type=Path, help="scenario JSON file")
    p.add_argument("--out", type=Path, default=Path("gridforge-out"), help="output directory")
    p.add_argument("--seed", type=int, help="synthesis seed")
    p.add_argument("--dt", type=float, help="integration step in seconds")
    p.add_argument("--grid", type=int, help="frequency grid points")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = os.environ.get("GRIDFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return cmd_validate(args.file)
    try:
        rc = RunConfig(args.command, args.file, args.out,
                       {"seed": args.seed, "dt": args.dt, "grid": args.grid})
        bundle = _apply_overrides(parse_scenario(rc.input), rc.overrides)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    handler = {"certify": cmd_certify, "synthesize": cmd_synthesize,
               "simulate": cmd_simulate}[rc.command]
    return handler(bundle, rc.out)


if __name__ == "__main__":
    sys.exit(main())
