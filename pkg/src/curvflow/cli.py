"""Command line entry point: ``curvflow run | verify | shape-preview``.

Exit codes: 0 all applicable checks pass, 1 some check failed, 2 the config
could not be parsed or validated (nothing is written), 3 the run aborted
(partial outputs are kept).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from .errors import CurvFlowError
from .flow import FlowConfig, fit_decay_rate, run
from .geometry import area, compute_geometry, enclosed_volume
from .outputs import write_geometry, write_json_atomic, write_plots, write_scalar_field, write_timeseries, write_verdicts
from .shapes import build_initial_shape

log = logging.getLogger("curvflow")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

FLOW_KEYS = tuple(f.name for f in dataclasses.fields(FlowConfig))
RUNNER_DEFAULTS = {"output_dir": "curvflow_output", "emit_plots": True, "emit_snapshots_every": 0}
REQUIRED = ("space_form",)


class ConfigParseError(Exception):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    flow: FlowConfig
    output_dir: str = RUNNER_DEFAULTS["output_dir"]
    emit_plots: bool = True
    emit_snapshots_every: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self.flow)
        d.update(output_dir=self.output_dir, emit_plots=self.emit_plots,
                 emit_snapshots_every=self.emit_snapshots_every)
        return d


def _expect(key, value, kinds, what):
    # bool is an int subclass; never accept it where a number is wanted
    if isinstance(value, bool) and bool not in kinds or not isinstance(value, kinds):
        raise ConfigParseError(f"{key} must be {what}, got {value!r}")
    return value


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a flat config dict. Any problem raises ConfigParseError."""
    if not isinstance(raw, dict):
        raise ConfigParseError("config must be a JSON object")
    unknown = sorted(set(raw) - set(FLOW_KEYS) - set(RUNNER_DEFAULTS))
    if unknown:
        raise ConfigParseError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigParseError(f"missing required config keys: {', '.join(missing)}")
    flow_kw = {k: raw[k] for k in FLOW_KEYS if k in raw}
    for key in ("dim", "n_theta", "n_phi", "m", "record_every", "seed"):
        if key in flow_kw:
            _expect(key, flow_kw[key], (int,), "an integer")
    for key in ("cfl_factor", "t_end", "grad_tol"):
        if key in flow_kw:
            flow_kw[key] = float(_expect(key, flow_kw[key], (int, float), "a number"))
    for key in ("space_form", "formulation", "integrator"):
        if key in flow_kw:
            _expect(key, flow_kw[key], (str,), "a string")
    if "initial_shape" in flow_kw:
        _expect("initial_shape", flow_kw["initial_shape"], (dict, str), "an object or a string")
    try:
        flow = FlowConfig(**flow_kw)
    except ValueError as exc:
        raise ConfigParseError(str(exc)) from None
    out = ExperimentConfig(flow)
    if "output_dir" in raw:
        out.output_dir = _expect("output_dir", raw["output_dir"], (str,), "a string")
    if "emit_plots" in raw:
        out.emit_plots = _expect("emit_plots", raw["emit_plots"], (bool,), "a boolean")
    if "emit_snapshots_every" in raw:
        every = _expect("emit_snapshots_every", raw["emit_snapshots_every"], (int,), "an integer")
        if every < 0:
            raise ConfigParseError("emit_snapshots_every must be >= 0")
        out.emit_snapshots_every = every
    return out


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def _initial_rho(cfg: ExperimentConfig):
    flow = cfg.flow
    grid = flow.make_grid()
    try:
        rho = build_initial_shape(flow.initial_shape, grid, flow.sf, seed=flow.seed)
    except (CurvFlowError, ValueError) as exc:
        raise ConfigParseError(f"initial_shape rejected: {exc}") from None
    return grid, rho


def grid_summary(grid) -> dict:
    if grid.dim == 1:
        return {"dim": 1, "m": grid.n_theta, "h": grid.h}
    return {"dim": 2, "n_theta": grid.n_theta, "n_phi": grid.n_phi, "h": grid.h}


def execute(cfg: ExperimentConfig, output_dir=None) -> int:
    """Run one experiment and write its outputs. Returns the exit status."""
    grid, rho0 = _initial_rho(cfg)
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    every = cfg.emit_snapshots_every
    sf = cfg.flow.sf

    def observer(state):
        if every and state.step_count % every == 0:
            snap_dir.mkdir(exist_ok=True)
            write_geometry(snap_dir / f"step_{state.step_count:06d}.csv", compute_geometry(sf, grid, state.rho))

    t0 = time.perf_counter()
    result = run(cfg.flow, rho0, observer=observer if every else None)
    wall = time.perf_counter() - t0

    write_timeseries(out / "timeseries.csv", result.records, grid.dim)
    traj = result.trajectory()
    verdicts = dg.evaluate_all(traj)
    fit = fit_decay_rate(result.records)
    aborted = result.verdict.endswith("_abort")
    if aborted:
        snap_dir.mkdir(exist_ok=True)
        write_scalar_field(snap_dir / "abort_state.csv", grid, result.final.rho)
        verdicts.append(dg.Verdict("run_completed", dg.FAIL, result.final.t, cfg.flow.t_end, result.message))
    write_verdicts(out / "verdicts.json", verdicts, {
        "run_verdict": result.verdict,
        "t_final": result.final.t,
        "steps": result.final.step_count,
        "r_inf": result.r_inf,
        "decay_fit": dataclasses.asdict(fit),
    })
    if cfg.emit_plots and len(result.records) >= 2:
        write_plots(out / "plots", result.records, fit)
    counts = {s: sum(v.status == s for v in verdicts) for s in (dg.PASS, dg.FAIL, dg.INDETERMINATE)}
    write_json_atomic(out / "manifest.json", {
        "config": cfg.to_dict(),
        "version": __version__,
        "grid": grid_summary(grid),
        "wall_clock_s": wall,
        "verdict_summary": {"run_verdict": result.verdict, **counts,
                            "failing": [v.name for v in verdicts if v.status == dg.FAIL]},
    })
    for v in verdicts:
        log.info("%-32s %-13s residual=%.4g tol=%.4g", v.name, v.status, v.residual, v.tolerance)
    print(f"{result.verdict}: t={result.final.t:.6g} steps={result.final.step_count} "
          f"pass={counts[dg.PASS]} fail={counts[dg.FAIL]} indeterminate={counts[dg.INDETERMINATE]} -> {out}")
    if aborted:
        print(f"run aborted: {result.message}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK if dg.all_passed(verdicts) else EXIT_FAIL


def preview(cfg: ExperimentConfig, output_dir=None) -> int:
    grid, rho = _initial_rho(cfg)
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    geom = compute_geometry(cfg.flow.sf, grid, rho)
    write_geometry(out / "initial_geometry.csv", geom)
    print(f"V={enclosed_volume(geom.sf, grid, rho):.10g} A={area(geom):.10g} "
          f"min_u={float(np.min(geom.u)):.6g} min_kappa={float(np.min(geom.kappa[0])):.6g} "
          f"max_grad_gamma2={float(np.max(geom.grad_gamma_sq)):.6g} -> {out / 'initial_geometry.csv'}")
    return EXIT_OK


def verify(scales, canary: bool = False, output_dir=None, json_path=None) -> int:
    from . import suite

    t0 = time.perf_counter()
    rows = suite.run_suite(scales, canary=canary, out_dir=output_dir)
    print(suite.format_table(rows))
    bad = suite.failing(rows)
    print(f"\n{len(rows)} rows, {len(bad)} failing, {time.perf_counter() - t0:.1f} s")
    if json_path:
        write_json_atomic(json_path, {"rows": suite.rows_to_dicts(rows), "canary": canary, "scales": list(scales)})
    if bad:
        print("failing checks:")
        for r in bad:
            print(f"  {r.case} / {r.check} (scale {r.scale:g}): residual {r.residual:.4g} > tolerance {r.tolerance:.4g}")
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvflow", description="Volume-preserving curvature flow of radial graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-check results")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="flow one configuration and write outputs")
    r.add_argument("config", help="flat JSON config file")
    r.add_argument("--output-dir", help="override output_dir from the config")

    s = sub.add_parser("shape-preview", help="write the initial geometry only")
    s.add_argument("config")
    s.add_argument("--output-dir")

    v = sub.add_parser("verify", help="run the fixed verification matrix")
    v.add_argument("--scale", type=float, nargs="+", default=[1.0, 0.5],
                   help="resolution scales relative to the default grid (default: 1 0.5)")
    v.add_argument("--canary", action="store_true",
                   help="flip the sign of the gradient term in the divergence form; the suite must then fail")
    v.add_argument("--output-dir", help="write per-case time series and verdicts here")
    v.add_argument("--json", dest="json_path", help="also write the table as JSON")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            if any(s <= 0 for s in args.scale):
                raise ConfigParseError("scales must be positive")
            return verify(args.scale, args.canary, args.output_dir, args.json_path)
        cfg = load_config(args.config)
        if args.command == "run":
            return execute(cfg, args.output_dir)
        return preview(cfg, args.output_dir)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
