"""Command-line interface.

Subcommands: ``verify``, ``keyrate``, ``simulate``, ``stabilize``,
``sweep``, ``optimize``, ``preset list|show``.  Exit codes: 0 success
(including zero-rate runs), 1 verification failure, 2 configuration
error.
"""
from __future__ import annotations

import argparse
import sys

from . import bench
from .config import ConfigError, load_config, serialize_config
from .counts import CATEGORIES, CountsTable
from .engine import expected_counts, simulate
from .postproc import ProcessedRun, process
from .presets import ExperimentConfig, get_preset, preset_names, with_run
from .ratecore import key_rate, plob_bound, rate_per_second
from .servo import LoopConfig, run_stabilization


def _resolve_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        name = getattr(args, "preset", None) or "sym546"
        try:
            cfg = get_preset(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    updates = {}
    if getattr(args, "windows", None):
        updates["n_windows"] = float(args.windows)
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "chunks", None):
        updates["chunk_count"] = args.chunks
    if updates:
        cfg = with_run(cfg, **updates)
    if getattr(args, "mode", None):
        import dataclasses
        cfg = dataclasses.replace(
            cfg, security=dataclasses.replace(cfg.security, mode=args.mode))
    return cfg


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def format_run_report(cfg: ExperimentConfig, table: CountsTable,
                      run: ProcessedRun, skr: float) -> str:
    lines = [
        f"n_windows\t{table.n_windows}",
        f"mode\t{cfg.security.mode}",
    ]
    for cat in CATEGORIES:
        lines.append(f"windows[{cat}]\t{table.windows[cat]}")
        lines.append(f"heralds[{cat}]\t{table.heralds[cat]}")
    lines += [
        f"x11_total\t{table.x11_total}",
        f"x11_errors\t{table.x11_errors}",
        f"x22_total\t{table.x22_total}",
        f"x22_errors\t{table.x22_errors}",
        f"y1a_lower\t{run.decoy.y1a_lower:.6e}",
        f"y1b_lower\t{run.decoy.y1b_lower:.6e}",
        f"n1\t{run.decoy.n1:.6e}",
        f"e1_upper\t{run.decoy.e1_upper:.6e}",
        f"z_qber\t{run.z_stats.qber:.6e}",
        f"pairs\t{run.pairing.pairs:.6e}",
        f"nt_prime\t{run.pairing.nt_prime:.6e}",
        f"n1_prime\t{run.pairing.n1_prime:.6e}",
        f"e_bit_prime\t{run.pairing.e_bit_prime:.6e}",
        f"e1_ph_prime\t{run.e1_ph_prime:.6e}",
        f"skr_bit_per_signal\t{skr:.6e}",
        f"skr_bit_per_s\t{rate_per_second(skr):.6e}",
    ]
    return "\n".join(lines) + "\n"


def _cmd_verify(args) -> int:
    ok, report = bench.verify()
    _emit(report, args.out)
    return 0 if ok else 1


def _cmd_keyrate(args) -> int:
    cfg = _resolve_config(args)
    skr, run = bench.analytic_keyrate(cfg)
    table = expected_counts(bench.engine_settings(cfg), cfg.run.n_windows)
    _emit(format_run_report(cfg, table, run, skr), args.out)
    return 0


def _cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    table = simulate(bench.engine_settings(cfg), int(cfg.run.n_windows),
                     seed=cfg.run.seed, chunk_count=cfg.run.chunk_count)
    run = process(table, cfg.party_a, cfg.party_b, cfg.security)
    skr = key_rate(run.inputs, cfg.security)
    _emit(format_run_report(cfg, table, run, skr), args.out)
    return 0


def _cmd_stabilize(args) -> int:
    cfg = _resolve_config(args)
    summary, series = run_stabilization(args.duration, cfg.noise,
                                        LoopConfig(), stages=args.stages,
                                        seed=cfg.run.seed)
    lines = [
        f"stages\t{args.stages}",
        f"duration_s\t{args.duration}",
        f"free_drift_std_rad_per_s\t{summary.free_drift_std_rad_per_s:.6e}",
        f"fast_locked_drift_std_rad_per_s\t"
        f"{summary.fast_locked_drift_std_rad_per_s:.6e}",
        f"residual_phase_std_c_rad\t{summary.residual_phase_std_c_rad:.6e}",
        f"residual_phase_std_q_rad\t{summary.residual_phase_std_q_rad:.6e}",
        f"reduction_factor\t{summary.reduction_factor:.6e}",
        f"freq_readout_hz\t{summary.freq_readout_hz:.6e}",
    ]
    text = "\n".join(lines) + "\n"
    if args.series_out:
        cols = ("t_s", "phiC_rad", "phiQ_rad", "pm_rad", "fs_rad", "dc_counts")
        with open(args.series_out, "w") as fh:
            fh.write("\t".join(cols) + "\n")
            n = len(series["t_s"])
            for i in range(n):
                fh.write("\t".join(f"{series[c][i]:.9e}" for c in cols) + "\n")
    _emit(text, args.out)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    distances = [float(x) for x in args.distances.split(",") if x.strip()]
    rows = bench.sweep(cfg, distances)
    _emit(bench.format_sweep(rows), args.out)
    return 0


def _cmd_optimize(args) -> int:
    cfg = _resolve_config(args)
    result = bench.optimize(cfg, budget=args.budget)
    text = (f"skr_bit_per_signal\t{result.skr:.6e}\n"
            f"evaluations\t{result.evaluations}\n"
            f"budget_exhausted\t{str(result.budget_exhausted).lower()}\n"
            + serialize_config(result.config))
    _emit(text, args.out)
    return 0


def _cmd_preset(args) -> int:
    if args.action == "list":
        _emit("\n".join(preset_names()) + "\n", args.out)
        return 0
    if not args.name:
        raise ConfigError("preset show requires a name")
    try:
        cfg = get_preset(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(serialize_config(cfg), args.out)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file path")
    p.add_argument("--preset", help="built-in preset name")
    p.add_argument("--windows", help="window count override")
    p.add_argument("--seed", type=int, help="RNG seed override")
    p.add_argument("--chunks", type=int, help="chunk count override")
    p.add_argument("--mode", choices=("asymptotic", "finite"),
                   help="security accounting mode")
    p.add_argument("--out", help="write the report to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfqkd",
        description="Twin-field QKD link simulator and key-rate toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the built-in identity suite")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("keyrate", help="analytic key rate (no Monte Carlo)")
    _add_common(p)
    p.set_defaults(func=_cmd_keyrate)

    p = sub.add_parser("simulate", help="Monte Carlo session")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stabilize", help="servo-loop simulation")
    _add_common(p)
    p.add_argument("--duration", type=float, default=2.0,
                   help="simulated seconds")
    p.add_argument("--stages", choices=("none", "fastOnly", "full"),
                   default="full")
    p.add_argument("--series-out", help="write the time series to this path")
    p.set_defaults(func=_cmd_stabilize)

    p = sub.add_parser("sweep", help="key rate vs distance table")
    _add_common(p)
    p.add_argument("--distances", required=True,
                   help="comma-separated distances in km")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("optimize", help="source-parameter search")
    _add_common(p)
    p.add_argument("--budget", type=int, default=200,
                   help="evaluation budget")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("preset", help="list or show built-in presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_preset)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
