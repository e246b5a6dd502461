"""Command-line entry point: one subcommand per experiment, one CSV each."""

import argparse
import csv
from dataclasses import dataclass, field
import math
import os
import sys
import tempfile

import numpy as np

from .config import ConfigError, apply_values, parse_config, parse_override, reference_config
from .core_math import OutOfSupportError, SingularAngleError
from .optimizer import APPROX_P2, CLOSED_FORM_P1, SearchSpec, condition_map, objective_grid
from .rates import SlotContext
from .simulation import SCHEMES, run_many, sweep_power, trajectory_midpoint, validate_snr_convergence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COLUMNS = {
    "simulate": ("slot", "x_m", "scheme", "eta", "beta_r", "rate_sc", "rate_c", "rate_avg",
                 "snr_echo_db", "sigma2_tracked_phi"),
    "validate-snr": ("lx", "snr_mc", "snr_closed", "rel_err", "stderr"),
    "optimize-slot": ("eta", "beta_r", "rate"),
    "sweep-power": ("p_max_w", "scheme", "mean_rate"),
    "condition-map": ("ratio_x", "ratio_y", "condition_lhs", "needed_pred", "eta_star"),
}


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str = None
    seed: int = None
    out: str = None
    overrides: tuple = field(default_factory=tuple)


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.12g}"


def write_csv(path, header, rows):
    """Write atomically: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(manifest):
    cfg = reference_config() if manifest.config_path is None else parse_config(manifest.config_path)
    if manifest.overrides:
        values = {}
        for text in manifest.overrides:
            key, value = parse_override(text)
            values[key] = value
        cfg = apply_values(cfg, values)
    if manifest.seed is not None:
        cfg = cfg.with_(seed=manifest.seed)
    return cfg


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _position(cfg, x_m):
    if x_m is None:
        return None
    _, y0, z0 = cfg.vehicle_position
    return (x_m, y0, z0)


def cmd_validate_snr(cfg, args):
    x_m = trajectory_midpoint(cfg)[0] if args.x_m is None else args.x_m
    rows = validate_snr_convergence(cfg, [int(v) for v in args.lx], args.trials, cfg.seed,
                                    _position(cfg, x_m))
    return rows


def cmd_optimize_slot(cfg, args):
    spec = SearchSpec(args.grid_step, args.grid_step, args.objective)
    ctx = SlotContext.at_position(cfg, _position(cfg, args.x_m))
    etas, betas, rates = objective_grid(ctx, spec)
    return [(e, b, rates[i, j]) for i, e in enumerate(etas) for j, b in enumerate(betas)]


def cmd_simulate(cfg, args):
    spec = SearchSpec(args.grid_step, args.grid_step)
    runs = run_many(cfg, args.schemes, (cfg.seed,), spec)
    rows = []
    for scheme in args.schemes:
        for s in runs[(scheme, cfg.seed)].slots:
            snr_db = 10 * math.log10(s.snr_echo) if s.snr_echo > 0 else -math.inf
            rows.append((s.slot, s.x_m, scheme, s.eta, s.beta_r, s.rate_sc, s.rate_c, s.rate_avg,
                         snr_db, s.sigma2_tracked_phi))
    return rows


def cmd_sweep_power(cfg, args):
    spec = SearchSpec(args.grid_step, args.grid_step)
    seeds = tuple(range(cfg.seed, cfg.seed + args.n_seeds))
    return sweep_power(cfg, args.p_values, args.schemes, seeds=seeds, spec=spec)


def cmd_condition_map(cfg, args):
    ratios = args.ratios if args.ratios else list(np.linspace(0.1, 4.0, 20))
    ctx = SlotContext.at_position(cfg, _position(cfg, args.x_m))
    spec = SearchSpec(args.grid_step, args.grid_step, APPROX_P2)
    return condition_map(ctx, ratios, ratios, spec)


COMMANDS = {
    "validate-snr": cmd_validate_snr,
    "optimize-slot": cmd_optimize_slot,
    "simulate": cmd_simulate,
    "sweep-power": cmd_sweep_power,
    "condition-map": cmd_condition_map,
}


def _schemes(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SCHEMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"schemes must be drawn from {', '.join(SCHEMES)}")
    return names


def build_parser():
    parser = argparse.ArgumentParser(prog="isac-sim",
                                     description="IOS-assisted sensing and communication simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (default: built-in reference)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output CSV path (default: <command>.csv)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key; repeatable")
    common.add_argument("--grid-step", type=float, default=0.01, help="(eta, beta_R) grid step")
    common.add_argument("--x-m", type=float, default=None,
                        help="vehicle x coordinate for single-slot commands")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate-snr", parents=[common], help="Monte Carlo vs closed-form echo SNR")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--lx", type=_floats, default=[10, 20, 40, 80], help="comma-separated L_x values")

    p = sub.add_parser("optimize-slot", parents=[common], help="full (eta, beta_R) rate grid")
    p.add_argument("--objective", choices=(CLOSED_FORM_P1, APPROX_P2), default=CLOSED_FORM_P1)

    p = sub.add_parser("simulate", parents=[common], help="per-slot trajectory traces")
    p.add_argument("--schemes", type=_schemes, default=list(SCHEMES))

    p = sub.add_parser("sweep-power", parents=[common], help="mean rate against P_max")
    p.add_argument("--p-values", type=_floats, default=[0.001, 0.005, 0.01, 0.05, 0.1])
    p.add_argument("--schemes", type=_schemes, default=list(SCHEMES))
    p.add_argument("--n-seeds", type=int, default=1)

    p = sub.add_parser("condition-map", parents=[common], help="condition vs optimizer grid")
    p.add_argument("--ratios", type=_floats, default=None, help="comma-separated sigma2/A ratios")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    manifest = RunManifest(args.command, args.config, args.seed,
                           args.out or f"{args.command}.csv", tuple(args.overrides))
    try:
        cfg = load_config(manifest)
        rows = COMMANDS[args.command](cfg, args)
        write_csv(manifest.out, COLUMNS[args.command], rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, SingularAngleError, OutOfSupportError,
            ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
