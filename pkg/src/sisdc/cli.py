"""Command-line benchmark interface.

Subcommands:

* ``run``: advance one case with one scheme, report errors and cost.
* ``sweep``: a schemes x CFL-numbers grid on one case (robustness
  tables); failed runs become rows, not crashes.
* ``eoc``: temporal convergence study by repeated CFL halving.
* ``stability``: amplification-factor scans, neutral curves, and the
  real-part stability margin of a scheme.

Configuration comes from a YAML file; a few common settings have
command-line overrides. Exit codes: 0 on success, 2 when a requested
run fails to reach its final time (or another runtime error occurs),
3 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .bench import (
    resolve_scheme,
    run_case,
    run_eoc,
    run_sweep,
    write_eoc_csv,
    write_runs_csv,
)
from .cases import CASE_NAMES, build_case
from .dg import GridFunction, write_gridfunction_csv
from .errors import ConfigError, InvalidArgumentError, SisdcError
from .sdc import SdcConfig
from .stability import (
    amplification_for,
    extract_neutral,
    find_zr_max,
    scan_domain,
    write_grid_csv,
    write_neutral_csv,
)

EXIT_OK = 0
EXIT_RUN_FAILED = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    """Argument errors map to the config exit code, not argparse's."""

    def error(self, message):
        raise ConfigError(message)


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return data


def _check_keys(cfg, allowed, where):
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} option(s): {', '.join(sorted(unknown))}")


def _out_dir(cfg, args):
    out = args.out or cfg.get("output", {}).get("dir", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scheme_spec(cfg, args):
    if args.scheme is not None:
        return args.scheme
    if "scheme" not in cfg:
        raise ConfigError("no scheme given (config key 'scheme' or --scheme)")
    return cfg["scheme"]


def _stability_fn(spec):
    """Amplification function + label for a stability scheme spec."""
    if isinstance(spec, str):
        return spec, amplification_for(spec)
    if isinstance(spec, dict) and "kind" in spec:
        spec = dict(spec)
        kind = spec.pop("kind")
        if kind == "sdc-si":
            cfg = SdcConfig.tuned(int(spec.pop("M")))
        elif kind == "sdc-eu":
            cfg = SdcConfig.euler(int(spec.pop("M")))
        elif kind == "sdc":
            cfg = SdcConfig(M=int(spec.pop("M")), K=int(spec.pop("K")),
                            s1=int(spec.pop("s1", 1)), s2=int(spec.pop("s2", 1)),
                            corrector=spec.pop("corrector", "si"))
        else:
            return kind, amplification_for(kind)
        if spec:
            raise ConfigError(f"unknown scheme parameter(s): {', '.join(sorted(spec))}")
        return cfg.label, amplification_for(cfg)
    raise ConfigError(f"cannot interpret stability scheme {spec!r}")


def _slug(label):
    return "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in str(label))


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_run(args):
    cfg = _load_config(args.config)
    _check_keys(cfg, {"case", "overrides", "scheme", "cfl", "dt", "n_steps", "output"}, "run")
    case_name = args.case or cfg.get("case")
    if case_name is None:
        raise ConfigError(f"no case given; available: {', '.join(CASE_NAMES)}")
    overrides = cfg.get("overrides", {}) or {}
    case = build_case(case_name, **overrides)
    spec = _scheme_spec(cfg, args)
    cfl = args.cfl if args.cfl is not None else cfg.get("cfl")
    dt = args.dt if args.dt is not None else cfg.get("dt")
    n_steps = args.n_steps if args.n_steps is not None else cfg.get("n_steps")
    res = run_case(case, spec, cfl=cfl, dt=dt, n_steps=n_steps)
    out = _out_dir(cfg, args)
    stem = f"run-{case.name}-{_slug(res.scheme)}"
    write_runs_csv(out / f"{stem}.csv", [res])
    (out / f"{stem}.json").write_text(json.dumps(res.row(), indent=2) + "\n")
    if cfg.get("output", {}).get("solution") and res.final_values is not None:
        gf = GridFunction(case.mesh, case.ops.P, res.final_values)
        write_gridfunction_csv(case.ops, gf, out / f"{stem}-solution.csv",
                               names=case.var_names)
    _print_run_line(res)
    return EXIT_OK if res.ok else EXIT_RUN_FAILED


def _print_run_line(res):
    bits = [f"{res.case} [{res.scheme}]", res.status,
            f"N_t={res.n_steps}", f"dt={res.dt:.6e}", f"CFL={res.cfl_measured:.3f}"]
    if res.errors is not None:
        kind = res.errors.kind
        err = res.errors.headline()
        bits.append(f"{kind} L2({res.errors.var_names[0]})={err:.6e}")
    if res.failure:
        bits.append(res.failure)
    print("  ".join(bits))


def cmd_sweep(args):
    cfg = _load_config(args.config)
    _check_keys(cfg, {"case", "overrides", "schemes", "cfls", "output"}, "sweep")
    case_name = args.case or cfg.get("case")
    if case_name is None:
        raise ConfigError("no case given")
    schemes = cfg.get("schemes")
    cfls = cfg.get("cfls")
    if not schemes or not cfls:
        raise ConfigError("sweep needs non-empty 'schemes' and 'cfls' lists")
    results = run_sweep(case_name, cfg.get("overrides", {}) or {}, schemes, cfls)
    out = _out_dir(cfg, args)
    path = write_runs_csv(out / f"sweep-{case_name}.csv", results)
    for res in results:
        _print_run_line(res)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_eoc(args):
    cfg = _load_config(args.config)
    _check_keys(cfg, {"case", "overrides", "scheme", "cfl_start", "halvings",
                      "component", "output"}, "eoc")
    case_name = args.case or cfg.get("case")
    if case_name is None:
        raise ConfigError("no case given")
    spec = _scheme_spec(cfg, args)
    label, _ = resolve_scheme(spec)
    rows, _results = run_eoc(
        case_name, cfg.get("overrides", {}) or {}, spec,
        cfl_start=float(cfg.get("cfl_start", 2.0)),
        halvings=int(cfg.get("halvings", 4)),
        component=int(cfg.get("component", 0)),
    )
    out = _out_dir(cfg, args)
    path = write_eoc_csv(out / f"eoc-{case_name}-{_slug(label)}.csv", rows)
    print(f"{'CFL':>10} {'N_t':>8} {'dt':>14} {'error':>14} {'rate':>8}")
    for r in rows:
        rate = f"{r.rate:8.3f}" if np.isfinite(r.rate) else "       -"
        print(f"{r.cfl:10.4f} {r.n_steps:8d} {r.dt:14.6e} {r.error:14.6e} {rate}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_stability(args):
    cfg = _load_config(args.config)
    _check_keys(cfg, {"scheme", "grid", "neutral", "zr_max", "output"}, "stability")
    spec = cfg.get("scheme") if args.scheme is None else args.scheme
    if spec is None:
        raise ConfigError("no scheme given")
    label, fn = _stability_fn(spec)
    out = _out_dir(cfg, args)
    wrote = []
    grid = None
    if "grid" in cfg:
        g = cfg["grid"] or {}
        _check_keys(g, {"zr", "zi", "n_zr", "n_zi"}, "stability.grid")
        zr = g.get("zr", [-15.0, 1.0])
        zi = g.get("zi", [0.0, 15.0])
        grid = scan_domain(fn, (float(zr[0]), float(zr[1])), (float(zi[0]), float(zi[1])),
                           n_zr=int(g.get("n_zr", 201)), n_zi=int(g.get("n_zi", 201)))
        path = out / f"stability-{_slug(label)}-grid.csv"
        write_grid_csv(path, grid)
        wrote.append(path)
        if cfg.get("neutral"):
            curves = extract_neutral(fn, grid)
            path = out / f"stability-{_slug(label)}-neutral.csv"
            write_neutral_csv(path, curves)
            wrote.append(path)
            print(f"{label}: {len(curves)} neutral curve(s)")
    if "zr_max" in cfg:
        zcfg = cfg["zr_max"] or {}
        _check_keys(zcfg, {"zi_max", "zr_floor"}, "stability.zr_max")
        result = find_zr_max(fn, zi_max=float(zcfg.get("zi_max", 60.0)),
                             zr_floor=float(zcfg.get("zr_floor", -1e-2)))
        payload = {"scheme": str(label), "zr_max": result.zr_max,
                   "zi_peak": result.zi_peak, "sup_abs_R": result.sup_abs_R}
        path = out / f"stability-{_slug(label)}-zrmax.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        wrote.append(path)
        print(f"{label}: zr_max = {result.zr_max:.6e} (peak z_i = {result.zi_peak:.4f})")
    if not wrote:
        raise ConfigError("stability config requests nothing: add 'grid' and/or 'zr_max'")
    for p in wrote:
        print(f"wrote {p}")
    return EXIT_OK


# ----------------------------------------------------------------------

def _build_parser():
    parser = _Parser(prog="sisdc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_scheme=True, with_steps=False):
        p.add_argument("-c", "--config", help="YAML configuration file")
        p.add_argument("-o", "--out", help="output directory (default: config or '.')")
        p.add_argument("--case", help=f"case name ({', '.join(CASE_NAMES)})")
        if with_scheme:
            p.add_argument("--scheme", help="scheme name (overrides config)")
        if with_steps:
            p.add_argument("--cfl", type=float, help="target CFL number")
            p.add_argument("--dt", type=float, help="step size (rounded to hit t_end)")
            p.add_argument("--n-steps", type=int, dest="n_steps", help="step count")

    p_run = sub.add_parser("run", help="run one case with one scheme")
    common(p_run, with_steps=True)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="schemes x CFL grid on one case")
    common(p_sweep, with_scheme=False)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_eoc = sub.add_parser("eoc", help="temporal convergence study")
    common(p_eoc)
    p_eoc.set_defaults(fn=cmd_eoc)

    p_st = sub.add_parser("stability", help="amplification scans and margins")
    p_st.add_argument("-c", "--config", help="YAML configuration file")
    p_st.add_argument("-o", "--out", help="output directory")
    p_st.add_argument("--scheme", help="scheme name (overrides config)")
    p_st.set_defaults(fn=cmd_stability)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SisdcError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
