"""``oamgbsm`` command line: generate, synthesize, estimate, stats, pathloss, capacity.

Errors are reported on stderr as one JSON object per line
(``{"error": ..., "message": ..., "field": ...}``) with a nonzero exit status:
2 for usage errors, 1 for everything else.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio, statistics
from .config import LINK_DEFAULTS, ConfigError, bundled_config_path, load_config, load_scenario
from .core import mode_index_map
from .estimation import SageConfig, sage_estimate
from .generator import generate_channel
from .propagation import NullDepthError, path_loss_db
from .synthesis import synthesize_ctf


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind: str, message: str, field=None, stream=None) -> None:
    record = {"error": kind, "message": message}
    if field:
        record["field"] = field
    print(json.dumps(record, sort_keys=True), file=stream or sys.stderr)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _ext(fmt_name: str) -> str:
    return ".json" if fmt_name == "json" else ".csv"


def _with_ext(name: str, fmt_name: str) -> str:
    return str(Path(name).with_suffix(_ext(fmt_name)))


def _out(args, name: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _config(args, require_seed: bool):
    path = args.config if args.config else bundled_config_path()
    return load_config(path, seed=args.seed, require_seed=require_seed)


# --- subcommands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _config(args, require_seed=True)
    n = args.ensemble if args.ensemble is not None else cfg.ensemble
    if n < 1:
        raise UsageError("--ensemble must be >= 1")

    def run(r):
        return generate_channel(cfg.scenario, cfg.link, cfg.distance_m, cfg.seed, realization=r)

    if n == 1:
        results = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=args.workers or min(8, os.cpu_count() or 1)) as pool:
            results = list(pool.map(run, range(n)))  # map keeps realization order

    outputs = cfg.outputs
    for r, ch in enumerate(results):
        suffix = "" if n == 1 else f"_r{r:04d}"

        def name(key):
            p = Path(_with_ext(outputs[key], args.format))
            return p.with_name(p.stem + suffix + p.suffix).name

        fileio.write_ctf(_out(args, name("ctf")), ch.ctf_final, seed=cfg.seed)
        fileio.write_ctf(_out(args, name("ctf_normalized")), ch.ctf_normalized, seed=cfg.seed)
        fileio.write_mpcs(_out(args, name("mpcs")), ch.mpcs)
        draws = Path(outputs["draws"])
        draws_name = draws.with_name(draws.stem + suffix + ".json").name
        audit = {"realization": r, "path_loss_db": ch.path_loss_db.tolist(), **ch.draws.to_dict()}
        _out(args, draws_name).write_text(json.dumps(audit, indent=1, sort_keys=True) + "\n",
                                          encoding="utf-8")
    resolved = dict(cfg.resolved, ensemble=n)
    _out(args, "resolved_config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")
    return 0


def cmd_synthesize(args) -> int:
    cfg = _config(args, require_seed=False)
    mpcs = fileio.read_mpcs(args.mpcs)
    ctf = synthesize_ctf(mpcs, cfg.link)
    fileio.write_ctf(_out(args, args.out or ("ctf" + _ext(args.format))), ctf, seed=cfg.seed)
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args, require_seed=False)
    ctf = fileio.read_ctf(args.ctf)
    link = cfg.link
    if ctf.grid != link.grid or ctf.tx_modes != link.tx_modes or ctf.rx_modes != link.rx_modes:
        raise ValueError("CTF grid or mode sets do not match the configured link")
    sage = SageConfig(n_paths=args.n_paths, max_iter=args.max_iter,
                      delay_grid=args.delay_grid_ns * 1e-9,
                      angle_grid_rad=math.radians(args.angle_grid_deg),
                      refine_steps=args.refine_steps)
    est = sage_estimate(ctf, link, sage)
    fileio.write_mpcs(_out(args, args.out or ("mpcs" + _ext(args.format))), est.mpcs)
    summary = {"residual_power": est.residual_power, "iterations_run": est.iterations_run,
               "converged": est.converged, "n_paths": len(est.mpcs)}
    _out(args, "estimate_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n",
                                                   encoding="utf-8")
    return 0


def cmd_stats(args) -> int:
    if not args.mpcs and not args.ctf:
        raise UsageError("stats needs at least one --mpcs or --ctf file")
    fmt_name = args.format
    if args.mpcs:
        sets = [fileio.read_mpcs(p) for p in args.mpcs]
        rows = []
        for p, mpcs in zip(args.mpcs, sets):
            rep = statistics.rms_angle_spreads(mpcs, denominator=args.denominator)
            rows.append([Path(p).name, rep.tau_rms_s, rep.theta_t_rms, rep.phi_t_rms,
                         rep.theta_r_rms, rep.phi_r_rms])
        fileio.write_table(_out(args, "spreads" + _ext(fmt_name)),
                           ["file", "tau_rms_s", "theta_t_rms", "phi_t_rms", "theta_r_rms", "phi_r_rms"],
                           rows, fmt_name)
        ds = [r[1] for r in rows if r[1] > 0]
        if ds:
            cdf = statistics.empirical_cdf(np.log10(ds))
            fileio.write_table(_out(args, "cdf_log10_ds" + _ext(fmt_name)), ["log10_ds", "probability"],
                               cdf, fmt_name)
        # PSDs of the first file
        mpcs = sets[0]
        if mpcs:
            taus = [m.tau for m in mpcs]
            step = args.delay_bin_ns * 1e-9
            top = (math.floor(max(taus) / step) + 1) * step
            edges = np.arange(0.0, top + step / 2, step)
            psd = statistics.delay_psd(mpcs, edges)
            fileio.write_table(_out(args, "delay_psd" + _ext(fmt_name)),
                               ["delay_lo_s", "delay_hi_s", "power", "power_db"],
                               [[a, b, p, d] for a, b, p, d in
                                zip(edges[:-1], edges[1:], psd.power, psd.power_db)], fmt_name)
            recs = statistics.angular_psd(mpcs)
            fileio.write_table(_out(args, "angular_psd" + _ext(fmt_name)),
                               ["theta_t", "phi_t", "theta_r", "phi_r", "power_db"],
                               [[r.theta_t, r.phi_t, r.theta_r, r.phi_r, r.power_db] for r in recs],
                               fmt_name)
    if args.ctf:
        ctfs = [fileio.read_ctf(p) for p in args.ctf]
        corr = statistics.mode_correlation(ctfs)
        rows = []
        for i, m1 in enumerate(corr.modes):
            for j, m2 in enumerate(corr.modes):
                v = corr.rho[i, j]
                rows.append([m1, m2, v.real, v.imag, abs(v)])
        fileio.write_table(_out(args, "correlation" + _ext(fmt_name)),
                           ["mode_1", "mode_2", "re", "im", "abs"], rows, fmt_name)
    return 0


def cmd_pathloss(args) -> int:
    if args.config:
        cfg = load_config(args.config, seed=args.seed, require_seed=False)
        scenario = cfg.scenario
        n = cfg.link.tx_geometry.n_elements
        r_t, r_r = cfg.link.tx_geometry.radius_m, cfg.link.rx_geometry.radius_m
        f_default = cfg.link.grid.center_hz / 1e9
    else:
        scenario, _ = load_scenario(args.scenario)
        n = LINK_DEFAULTS["n_elements"]
        r_t = r_r = LINK_DEFAULTS["radius_m"]
        f_default = LINK_DEFAULTS["center_hz"] / 1e9
    if args.radius_m is not None:
        r_t = r_r = args.radius_m
    modes = args.modes if args.modes is not None else list(mode_index_map(n).modes)
    freqs = args.freq_ghz if args.freq_ghz is not None else [f_default]
    fit = scenario.pathloss_fit
    rows = []
    for f in freqs:
        for d in args.distances:
            for m_t in modes:
                for m_r in (modes if args.cross_modes else [m_t]):
                    kind = "fitted" if m_t == m_r else "extrapolated"
                    try:
                        pl = path_loss_db(fit, m_t, m_r, f, d, r_t, r_r)
                    except NullDepthError:
                        pl, kind = math.inf, "null"
                    rows.append([d, f, m_t, m_r, pl, kind])
    fileio.write_table(_out(args, "pathloss" + _ext(args.format)),
                       ["d_m", "f_ghz", "m_t", "m_r", "pl_db", "kind"], rows, args.format)
    return 0


def cmd_capacity(args) -> int:
    ctf = fileio.read_ctf(args.ctf)
    rows = []
    for snr_db in args.snr_db:
        snr = 10.0 ** (snr_db / 10.0)
        rows.append([snr_db, snr, statistics.capacity_bits(ctf, snr, args.normalization)])
    fileio.write_table(_out(args, "capacity" + _ext(args.format)),
                       ["snr_db", "snr_linear", "capacity_bits"], rows, args.format)
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress):
        # subcommand copies must not reset values given before the subcommand
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = _Parser(add_help=False)
        g.add_argument("--seed", type=int, default=d(None), help="random seed (overrides OAM_SIM_SEED)")
        g.add_argument("--config", default=d(None), help="JSON run configuration (default: bundled indoor LOS)")
        g.add_argument("--out-dir", default=d("."), help="output directory")
        g.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="output file format")
        return g

    common = global_flags(suppress=True)
    parser = _Parser(prog="oamgbsm", description="OAM-mode channel simulator",
                     parents=[global_flags(suppress=False)])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="stochastic realizations: MPCs and CTFs")
    p.add_argument("--ensemble", type=int, default=None, help="number of realizations")
    p.add_argument("--workers", type=int, default=None, help="threads for ensembles")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("synthesize", parents=[common], help="MPC file + link -> CTF")
    p.add_argument("--mpcs", required=True, help="MPC file (csv or json)")
    p.add_argument("--out", default=None, help="CTF file name inside --out-dir")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("estimate", parents=[common], help="CTF -> MPC file via SAGE")
    p.add_argument("--ctf", required=True, help="CTF file (csv or json)")
    p.add_argument("--n-paths", type=int, required=True, help="number of paths to fit")
    p.add_argument("--max-iter", type=int, default=20, help="maximum SAGE sweeps")
    p.add_argument("--delay-grid-ns", type=float, default=1.0, help="delay search cell")
    p.add_argument("--angle-grid-deg", type=float, default=2.0, help="angle search cell")
    p.add_argument("--refine-steps", type=int, default=3, help="sub-cell refinement halvings")
    p.add_argument("--out", default=None, help="MPC file name inside --out-dir")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("stats", parents=[common], help="spreads, CDF, PSDs and mode correlation")
    p.add_argument("--mpcs", nargs="*", default=[], help="MPC files, one per realization")
    p.add_argument("--ctf", nargs="*", default=[], help="CTF snapshots for mode correlation")
    p.add_argument("--delay-bin-ns", type=float, default=5.0, help="delay PSD bin width")
    p.add_argument("--denominator", choices=statistics.DENOMINATORS, default="standard")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pathloss", parents=[common], help="path-loss table over distance and modes")
    p.add_argument("--scenario", default="indoor_los_5g8", help="bundled scenario name or JSON file")
    p.add_argument("--distances", type=_floats, default=[4.0, 6.0, 8.0, 10.0, 12.0],
                   help="comma-separated distances in m")
    p.add_argument("--freq-ghz", type=_floats, default=None, help="comma-separated GHz (default: grid centre)")
    p.add_argument("--modes", type=_ints, default=None, help="comma-separated modes (default: all)")
    p.add_argument("--radius-m", type=float, default=None, help="UCA radius (default: from config)")
    p.add_argument("--cross-modes", action="store_true",
                   help="also tabulate m_t != m_r pairs (outside the fitted same-mode data)")
    p.set_defaults(func=cmd_pathloss)

    p = sub.add_parser("capacity", parents=[common], help="capacity over an SNR list")
    p.add_argument("--ctf", required=True, help="CTF file (csv or json)")
    p.add_argument("--snr-db", type=_floats, default=[0.0, 10.0, 20.0], help="comma-separated SNRs in dB")
    p.add_argument("--normalization", choices=statistics.CAPACITY_NORMALIZATIONS, default="per_point")
    p.set_defaults(func=cmd_capacity)
    return parser


def cli_dispatch(argv=None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("a subcommand is required: generate, synthesize, estimate, stats, "
                             "pathloss or capacity")
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    except ConfigError as exc:
        _emit_error("config", str(exc), exc.field)
        return 1
    except fileio.FormatError as exc:
        _emit_error("format", str(exc))
        return 1
    except NullDepthError as exc:
        _emit_error("null_depth", str(exc))
        return 1
    except (OSError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
