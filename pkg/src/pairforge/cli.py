"""Command line entry point: ``python -m pairforge <subcommand>``.

On failure the last line on stderr is a single JSON object
``{"error": <type>, "message": ..., ["line": n]}`` and the exit code is 2.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

from . import config as cfgmod
from .calibration import calibrate_cw, calibrate_pulsed, cw_observables, pulsed_observables
from .crow import band_table
from .errors import CalibrationError, ClickFileError, ConfigError, PairforgeError
from .experiments import (herald_center_offset, mc_window_probabilities, run_experiment, run_sweep,
                          sweep_table)
from .io import write_clicks, write_csv
from .offline import analyze_offline
from .oracle import OBSERVABLES, OracleInstance, window_click_probabilities
from .tcspc import CAR_CSV_HEADER, G2_CSV_HEADER

ORACLE_HEADER = ["instance_id", "observable", "predicted", "mc_value", "mc_sigma", "z_score"]
GRID_MU = (1e-3, 1e-2, 1e-1)
GRID_ETA = (0.02, 0.1, 0.3)
GRID_DARK = (0.0, 1e-4, 1e-3)


def oracle_grid():
    """The 27 (mu, eta, dark) instances; the HBT arms each get half of eta."""
    out = []
    for mu, eta, d in itertools.product(GRID_MU, GRID_ETA, GRID_DARK):
        out.append(OracleInstance(mu=mu, eta_s=eta, eta_i=eta, eta_b=eta / 2, eta_c=eta / 2,
                                  d_a=d, d_b=d, d_c=d, d_s=d, d_i=d))
    return out


def _load(args, default):
    cfg = cfgmod.load(args.config) if args.config else default()
    if args.seed is not None:
        cfg = cfgmod.set_param(cfg, "seed", args.seed)
    return cfg


def _out(args):
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _report(msg):
    print(msg, file=sys.stderr)


def cmd_sweep(args, experiment):
    default = cfgmod.default_cw_config if experiment == "cw" else cfgmod.default_pulsed_config
    cfg = _load(args, default)
    if cfg.experiment != experiment:
        raise ConfigError(f"sweep-{'car' if experiment == 'cw' else 'g2'} needs a {experiment} config")
    rows = run_sweep(cfg, threads=args.threads)
    for r in rows:
        _report(f"value={r.value!r} wall_clock_s={r.wall_clock_s:.2f}" + (f" error={r.error}" if r.error else ""))
    header = CAR_CSV_HEADER if experiment == "cw" else G2_CSV_HEADER
    name = "car_sweep.csv" if experiment == "cw" else "g2_sweep.csv"
    path = _out(args) / name
    write_csv(path, header, sweep_table(rows, experiment), cfgmod.dumps(cfg))
    failed = [r for r in rows if r.error]
    if len(failed) == len(rows):
        raise PairforgeError(f"every sweep row failed; first: {failed[0].error}")
    print(path)


def cmd_run(args):
    default = cfgmod.default_pulsed_config if args.experiment == "pulsed" else cfgmod.default_cw_config
    cfg = _load(args, default)
    run = run_experiment(cfg, keep_streams=args.clicks)
    out = _out(args)
    power = cfg.pump.average_power_w
    if cfg.experiment == "cw":
        path = out / "car.csv"
        write_csv(path, CAR_CSV_HEADER, [run.result.csv_row(power)], cfgmod.dumps(cfg))
        if args.clicks:
            write_clicks(out / "live.clicks", list(run.streams.values()))
            write_clicks(out / "dark.clicks", list(run.dark_streams.values()))
    else:
        path = out / "g2.csv"
        write_csv(path, G2_CSV_HEADER, [run.g2.csv_row(power, run.herald_rate_output_hz)], cfgmod.dumps(cfg))
        if args.clicks:
            write_clicks(out / "heralded.clicks", list(run.streams.values()))
    print(path)


def cmd_analyze(args):
    cfg = cfgmod.load(args.config) if args.config else None
    kw = {}
    if cfg is not None:
        kw = dict(bin_width_ps=cfg.bin_width_ps, zero_offset_ps=cfg.zero_offset_ps,
                  triple_bin_ps=cfg.triple_bin_ps)
        if cfg.experiment == "pulsed":
            kw["center_offset_ps"] = herald_center_offset(cfg)
        kw["integration_time_s"] = cfg.integration_time_s
    for name in ("bin_width_ps", "zero_offset_ps", "triple_bin_ps", "center_offset_ps", "integration_time_s"):
        v = getattr(args, name)
        if v is not None:
            kw[name] = v
    res = analyze_offline(args.files, args.protocol, args.dark or (), **kw)
    out = _out(args)
    echo = cfgmod.dumps(cfg) if cfg is not None else None
    if args.protocol == "car":
        path = out / "car.csv"
        write_csv(path, CAR_CSV_HEADER, [res.csv_row(args.power_w)], echo)
    else:
        path = out / "g2.csv"
        write_csv(path, G2_CSV_HEADER, [res.csv_row(args.power_w, math.nan)], echo)
    print(path)


def oracle_rows(n_windows, seed):
    rows = []
    for k, inst in enumerate(oracle_grid()):
        exact = window_click_probabilities(inst).as_dict()
        mc = mc_window_probabilities(inst, n_windows, seed, key=f"grid:{k}")
        for obs in OBSERVABLES:
            p = exact[obs]
            se = math.sqrt(p * (1 - p) / n_windows)
            z = (mc[obs] - p) / se if se > 0 else (0.0 if mc[obs] == p else math.inf)
            rows.append([k, obs, p, mc[obs], se, z])
    return rows


def cmd_oracle(args):
    seed = 0 if args.seed is None else args.seed
    path = _out(args) / "oracle.csv"
    write_csv(path, ORACLE_HEADER, oracle_rows(args.windows, seed))
    print(path)


def cmd_calibrate(args):
    default = cfgmod.default_pulsed_config if args.experiment == "pulsed" else cfgmod.default_cw_config
    cfg = _load(args, default)
    try:
        cal = calibrate_cw(cfg) if cfg.experiment == "cw" else calibrate_pulsed(cfg)
    except CalibrationError as exc:
        _report(f"best={exc.best} residuals={exc.residuals}")
        raise
    out = _out(args)
    path = out / f"calibrated_{cfg.experiment}.ini"
    cfgmod.dump(cal.config, path)
    for name, value in cal.fit.params.items():
        _report(f"{name}={value:.6g}")
    for name, value in cal.fit.residuals.items():
        _report(f"residual {name}={value:+.3g}")
    obs = cw_observables(cal.config) if cfg.experiment == "cw" else pulsed_observables(cal.config)
    for name, value in obs.items():
        _report(f"predicted {name}={value:.6g}")
    print(path)


def cmd_bands(args):
    cfg = _load(args, cfgmod.default_cw_config)
    path = _out(args) / "bands.csv"
    write_csv(path, ["wavelength_nm", "slowing_factor", "transmission_db"], band_table(cfg.crow),
              cfgmod.dumps(cfg) if args.config else None)
    print(path)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config (defaults built in)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")

    p = argparse.ArgumentParser(prog="pairforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep-car", parents=[common], help="CW CAR sweep -> car_sweep.csv")
    sub.add_parser("sweep-g2", parents=[common], help="pulsed g2 sweep -> g2_sweep.csv")

    r = sub.add_parser("run", parents=[common], help="single experiment run")
    r.add_argument("--experiment", choices=("cw", "pulsed"), default="cw", help="used without --config")
    r.add_argument("--clicks", action="store_true", help="also write ClickStream files")

    a = sub.add_parser("analyze", parents=[common], help="estimators on ClickStream files")
    a.add_argument("files", nargs="+")
    a.add_argument("--protocol", choices=("car", "g2"), required=True)
    a.add_argument("--dark", nargs="*", help="matched dark-run click files (car)")
    a.add_argument("--bin-width-ps", dest="bin_width_ps", type=int)
    a.add_argument("--zero-offset-ps", dest="zero_offset_ps", type=int, help="zero-delay bin offset (car)")
    a.add_argument("--triple-bin-ps", dest="triple_bin_ps", type=int)
    a.add_argument("--center-offset-ps", dest="center_offset_ps", type=int)
    a.add_argument("--integration-s", dest="integration_time_s", type=float)
    a.add_argument("--power-w", dest="power_w", type=float, default=math.nan)

    o = sub.add_parser("oracle", parents=[common], help="Monte Carlo vs exact enumeration on the 27-instance grid")
    o.add_argument("--windows", type=int, default=10**7)

    c = sub.add_parser("calibrate", parents=[common], help="fit free constants against the oracle")
    c.add_argument("--experiment", choices=("cw", "pulsed"), default="cw", help="used without --config")

    sub.add_parser("bands", parents=[common], help="CROW passband table -> bands.csv")
    return p


def _error_line(exc):
    info = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ClickFileError) and exc.line is not None:
        info["line"] = exc.line
    return json.dumps(info)


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "sweep-car": lambda: cmd_sweep(args, "cw"),
        "sweep-g2": lambda: cmd_sweep(args, "pulsed"),
        "run": lambda: cmd_run(args),
        "analyze": lambda: cmd_analyze(args),
        "oracle": lambda: cmd_oracle(args),
        "calibrate": lambda: cmd_calibrate(args),
        "bands": lambda: cmd_bands(args),
    }
    try:
        handlers[args.command]()
    except (PairforgeError, ValueError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
