"""Command-line interface.

Every subcommand builds one ScenarioConfig (from an optional INI file
plus flag overrides), runs it, and writes CSV artifacts with a manifest.
Exit codes: 0 ok, 1 configuration error, 2 fit failure, 3 solver
instability or non-convergence, 4 acceptance-target violation.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import fields

from .errors import (
    CheckFailure,
    ConfigError,
    ExpansionFitError,
    FitConvergenceError,
    FrequencyExtractionError,
    MissingSnapshotError,
    QuadratureError,
    SolverInstabilityError,
    TopologySizeError,
)
from .scenarios import METHODS, SCENARIOS, ScenarioConfig, check_scenario, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FIT = 2
EXIT_SOLVER = 3
EXIT_ACCEPTANCE = 4

_EPILOG = """\
exit codes:
  0  success
  1  configuration error (bad flags, config file, or parameter ranges)
  2  bath-fit failure (target error or term count unreachable)
  3  solver failure (hierarchy instability, quadrature non-convergence)
  4  acceptance violation in --check mode

configuration file: INI sections [bath], [heom], [run] with the same
keys as the flags (e.g. kappa_2pi under [bath], n_max under [heom],
outdir under [run]); flags override file values.  All frequencies are
in units of the qubit splitting, times in its inverse (hbar = 1).
"""

_FLOAT_KEYS = {
    "s", "kappa_2pi", "omega_c", "beta", "omega_ph",
    "fit_tol", "dt", "t_final", "t_eq", "record_dt",
}
_INT_KEYS = {"K", "n_max", "workers"}
_SECTION_OF = {
    "s": "bath", "kappa_2pi": "bath", "omega_c": "bath", "beta": "bath",
    "omega_ph": "bath",
    "K": "heom", "fit_tol": "heom", "n_max": "heom", "dt": "heom",
    "t_final": "heom", "t_eq": "heom", "record_dt": "heom",
    "integrator": "heom",
    "method": "run", "outdir": "run", "expansion_path": "run",
    "workers": "run",
}


def _read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")
    out = {}
    for section in parser.sections():
        if section not in ("bath", "heom", "run"):
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in _SECTION_OF:
                raise ConfigError(f"unknown key {key!r} in [{section}] of {path}")
            if _SECTION_OF[key] != section:
                raise ConfigError(
                    f"key {key!r} belongs in [{_SECTION_OF[key]}], "
                    f"found in [{section}]"
                )
            if key in _FLOAT_KEYS:
                out[key] = float(raw)
            elif key in _INT_KEYS:
                out[key] = int(raw)
            else:
                out[key] = raw
    return out


def _add_common(sub: argparse.ArgumentParser):
    bath = sub.add_argument_group("bath")
    bath.add_argument("--s", type=float, help="spectral exponent (1 = Ohmic)")
    bath.add_argument("--kappa", dest="kappa_2pi", type=float,
                      help="dimensionless coupling 2*pi*hbar*kappa")
    bath.add_argument("--omega-c", dest="omega_c", type=float,
                      help="cutoff frequency")
    bath.add_argument("--beta", type=float, help="inverse temperature")
    bath.add_argument("--omega-ph", dest="omega_ph", type=float,
                      help="unit-fixing frequency")
    heom = sub.add_argument_group("hierarchy")
    heom.add_argument("--K", type=int, help="number of expansion terms")
    heom.add_argument("--fit-tol", dest="fit_tol", type=float,
                      help="certified fit tolerance (alternative to --K)")
    heom.add_argument("--nmax", dest="n_max", type=int, help="hierarchy depth")
    heom.add_argument("--dt", type=float, help="integrator step")
    heom.add_argument("--t-final", dest="t_final", type=float, help="end time")
    heom.add_argument("--t-eq", dest="t_eq", type=float,
                      help="equilibration time for pi-pulse initial states")
    heom.add_argument("--record-dt", dest="record_dt", type=float,
                      help="sampling step of recorded channels (default 0.1)")
    heom.add_argument("--integrator", choices=("etdrk4", "rk4"),
                      help="time stepper (default etdrk4)")
    run = sub.add_argument_group("run")
    run.add_argument("--method", choices=METHODS, help="le, ule, or heom")
    run.add_argument("--config", help="INI file with [bath]/[heom]/[run]")
    run.add_argument("--outdir", help="artifact directory (default ./runs)")
    run.add_argument("--expansion", dest="expansion_path",
                     help="reuse a saved expansion file")
    run.add_argument("--workers", type=int,
                     help="thread count (default: SPINBOSON_WORKERS or all cores)")
    run.add_argument("--fresh", action="store_true",
                     help="ignore cached artifacts and recompute")
    run.add_argument("--check", action="store_true",
                     help="compare derived scalars with the registered targets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinboson",
        description="Dissipative two-level dynamics: Lindblad-form solvers, "
                    "exact hierarchy propagation, and Ramsey-type protocols.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    descriptions = {
        "fit-bath": "fit the bath correlation function as a sum of exponentials",
        "relax": "population relaxation from the excited state",
        "ramsey": "pi/2 Ramsey protocol: delta_p, fringe frequency, quantifier",
        "pipulse": "pi-pulse protocol from the equilibrium state",
        "blp": "trace-distance non-Markovianity quantifier",
        "lambshift": "frequency renormalisation and rates",
        "spectrum": "tabulate spectral density, noise power, jump correlator",
    }
    for name in SCENARIOS:
        s = parser_sub = sub.add_parser(
            name, help=descriptions[name],
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        _add_common(parser_sub)
    return parser


def _config_from_args(args) -> ScenarioConfig:
    values = {}
    if args.config:
        values.update(_read_config_file(args.config))
    allowed = {f.name for f in fields(ScenarioConfig)}
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["scenario"] = args.scenario
    if args.fresh:
        values["reuse"] = False
    values = {k: v for k, v in values.items() if k in allowed}
    return ScenarioConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.check:
            result = check_scenario(config)
        else:
            result = run_scenario(config)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExpansionFitError, FitConvergenceError) as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (SolverInstabilityError, QuadratureError, TopologySizeError,
            MissingSnapshotError, FrequencyExtractionError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CheckFailure as exc:
        print(f"acceptance violation: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE

    print(json.dumps(result.scalars, sort_keys=True, indent=1, default=str))
    if result.directory.exists():
        print(f"artifacts: {result.directory}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
