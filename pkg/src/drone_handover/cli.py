"""Command line entry point: ``drone-handover {handover,density,validate}``.

Settings come from built-in defaults, then an optional ``--preset``, then an
optional ``--config`` INI file, then individual flags, each layer
overriding the previous one.  Output goes to ``--output``; a relative path
is resolved against ``$DRONE_HANDOVER_OUTPUT_DIR`` when that is set.
Without ``--output`` the artefact is written to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .experiments import (
    PRESETS,
    ConfigError,
    load_config,
    run_density_experiment,
    run_handover_experiment,
    run_validation,
)

OUTPUT_DIR_ENV = "DRONE_HANDOVER_OUTPUT_DIR"

CONFIG_HELP = """\
config file keys (INI, one flat section each):
  [network]    scenario = ssm|dsm|both, lambda0 (number, optional unit
               suffix per_m2|per_km2), lambda0_unit, height (m, unused:
               the nearest drone does not depend on altitude)
  [speed]      speed (number, optional suffix m_s|km_h), speed_unit,
               dsm_law = rayleigh_mean|uniform_mean
  [time]       t_start, t_stop, t_step (s) or t_list (space or comma list)
  [run]        engine = analytic|montecarlo|both, n_trials, master_seed,
               workers, z (interval half-width in standard errors), output
  [quadrature] rel_tol, abs_tol, max_subdivisions, tail_mass_epsilon
  [density]    u_star (m), density_times (s list), ux_max (m), ux_step (m),
               bin_width (m, Monte Carlo histogram)

environment:
  DRONE_HANDOVER_OUTPUT_DIR  directory for relative --output paths

The speed is the common speed for scenario ssm and the mean speed for dsm.
"""


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings (override the config file)")
    g.add_argument("--config", type=Path, help="INI config file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    g.add_argument("--scenario", choices=["ssm", "dsm", "both"], help="same speed, different speeds, or both")
    g.add_argument("--lambda0", help="drone density, e.g. 1per_km2 or 1e-6per_m2 (default unit: --lambda0-unit)")
    g.add_argument("--lambda0-unit", dest="lambda0_unit", choices=["per_m2", "per_km2"])
    g.add_argument("--speed", help="speed, e.g. 45km_h or 12.5m_s (default unit: --speed-unit)")
    g.add_argument("--speed-unit", dest="speed_unit", choices=["m_s", "km_h"])
    g.add_argument("--dsm-law", dest="dsm_law", choices=["rayleigh_mean", "uniform_mean"])
    g.add_argument("--t", dest="t_list", nargs="+", type=float, metavar="T", help="explicit times in s")
    g.add_argument("--t-start", dest="t_start", type=float)
    g.add_argument("--t-stop", dest="t_stop", type=float)
    g.add_argument("--t-step", dest="t_step", type=float)
    g.add_argument("--engine", choices=["analytic", "montecarlo", "both"])
    g.add_argument("--n-trials", dest="n_trials", type=int, help="Monte Carlo trials (realisations)")
    g.add_argument("--seed", dest="master_seed", type=int, help="master seed of the random streams")
    g.add_argument("--workers", type=int, help="worker processes; results do not depend on it")
    g.add_argument("--z", type=float, help="confidence interval half-width in standard errors")
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--max-subdivisions", dest="max_subdivisions", type=int)
    g.add_argument("--tail-mass-epsilon", dest="tail_mass_epsilon", type=float)
    g.add_argument("--u-star", dest="u_star", type=float, help="initial serving distance in m")
    g.add_argument("--density-times", dest="density_times", nargs="+", type=float, metavar="T")
    g.add_argument("--ux-max", dest="ux_max", type=float)
    g.add_argument("--ux-step", dest="ux_step", type=float)
    g.add_argument("--bin-width", dest="bin_width", type=float)
    g.add_argument("-o", "--output", help="output file (relative paths go under $%s)" % OUTPUT_DIR_ENV)

    parser = argparse.ArgumentParser(
        prog="drone-handover",
        description="Handover probability in drone cellular networks.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("handover", "handover probability curve(s) as CSV"),
        ("density", "non-serving drone density profile(s) as CSV"),
        ("validate", "cross-check analytic and Monte Carlo engines; exit 1 on failure"),
    ]:
        sub.add_parser(name, parents=[common], help=text, description=text, epilog=CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


OVERRIDE_KEYS = [
    "scenario", "lambda0", "lambda0_unit", "speed", "speed_unit", "dsm_law", "t_list", "t_start",
    "t_stop", "t_step", "engine", "n_trials", "master_seed", "workers", "z", "rel_tol", "abs_tol",
    "max_subdivisions", "tail_mass_epsilon", "u_star", "density_times", "ux_max", "ux_step",
    "bin_width", "output",
]


def _resolve_output(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS}
    try:
        cfg = load_config(args.config, args.preset, overrides)
        if args.command == "handover":
            text, ok = run_handover_experiment(cfg), True
        elif args.command == "density":
            text, ok = run_density_experiment(cfg), True
        else:
            ok, text = run_validation(cfg)
    except (ConfigError, OSError) as exc:
        print(f"drone-handover: error: {exc}", file=sys.stderr)
        return 2
    out = _resolve_output(cfg.output)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
