"""Command-line drivers: one subcommand per experiment, CSV on stdout or to ``--output``.

Settings come from flags, an optional TOML file (``--config``), and defaults, in
that order of precedence. The worker count is ``--threads``, else the
``ERGOVOLUME_THREADS`` environment variable, else the config file, else 1.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys

import numpy as np

from . import __version__, experiments
from .ergotropy import NegativeGapError
from .freefermion import DEFAULT_TRUNC, TruncationError
from .models import ConvergenceError, CutoffError
from .qcircuit import NoiseSpec
from .unitary_opt import OptimizationError, OptimizerConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (ArithmeticError, ConvergenceError, CutoffError, OptimizationError,
                    TruncationError, NegativeGapError, np.linalg.LinAlgError)

# name -> (type, default, help); shared by flags and config-file keys
COMMON = {
    "output": (str, None, "CSV path (default: stdout)"),
    "threads": (int, None, "worker processes for grid points"),
    "seed": (int, 0, "optimizer / noise seed"),
}
OPTIMIZER = {
    "restarts": (int, 8, "optimizer restarts"),
    "max_iterations": (int, 5000, "iteration cap per restart"),
    "tolerance": (float, 1e-9, "objective-improvement threshold"),
}
EXPERIMENTS = {
    "tc-dressed": {
        "spins": (int, 100, "number of two-level atoms N"),
        "nph": (int, 50, "photon cutoff N_ph"),
        "omega_c": (float, 1.0, "cavity frequency"),
        "omega_a": (float, 1.0, "atomic splitting"),
        "subspace": (bool, False, "symmetric-subspace degeneracies instead of full space"),
    },
    "dicke3-phase": {
        "atoms": (int, 5, "number of three-level atoms"),
        "grid": (str, "0:1.3#40", "coupling grid used for both g1 and g2"),
        "nmax": (int, 12, "initial photon cutoff (raised automatically if the tail is too heavy)"),
        "omega_c": (float, 1.0, "cavity frequency"),
        "omega_a": (float, 1.0, "atomic splitting"),
    },
    "tfim-ground": {
        "spins": (int, 20, "chain length N (even)"),
        "g_grid": (str, "0:2:0.02", "coupling grid"),
        "backend": (str, "freefermion", "freefermion or both (adds an exact column)"),
        "trunc": (float, DEFAULT_TRUNC, "RDM eigenvalue truncation"),
    },
    "tfim-dynamics": {
        "spins": (int, 6, "chain length N"),
        "g": (float, 2.0, "coupling"),
        "t_grid": (str, "0:2:0.1", "time grid"),
        "depth": (int, 6, "ansatz depth d"),
        "dt": (float, 0.02, "Trotter step for the ideal circuit"),
        "noise_p1": (float, 0.0, "one-qubit depolarizing probability"),
        "noise_p2": (float, 0.0, "two-qubit depolarizing probability"),
        "trajectories": (int, 32, "noise trajectories"),
        "noise_dt": (float, 0.1, "Trotter step for the noisy circuit"),
        **OPTIMIZER,
        "restarts": (int, 2, "optimizer restarts per partition"),
    },
    "appendix-a": {
        "g_grid": (str, "0:3:0.1", "coupling grid"),
        "nmax": (int, 4, "photon cutoff of the Jaynes-Cummings cavity"),
        **OPTIMIZER,
    },
    "benchmark-compare": {
        "source": (str, "tc", "tc (dressed-state sweep) or dynamics (quench time series)"),
        "spins": (int, 10, "atoms (tc) or chain length (dynamics)"),
        "nph": (int, 5, "photon cutoff (tc)"),
        "g": (float, 2.0, "coupling (dynamics)"),
        "t_grid": (str, "0:2:0.1", "time grid (dynamics)"),
        "rescale": (bool, False, "append min-max rescaled columns"),
    },
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ergovolume", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ergovolume {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, options in EXPERIMENTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML file of settings; flags win on conflict")
        for key, (kind, _, text) in {**COMMON, **options}.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                p.add_argument(flag, action=argparse.BooleanOptionalAction, default=None, help=text)
            else:
                p.add_argument(flag, type=kind, default=None, help=text)
    return parser


def resolve(args: argparse.Namespace) -> tuple[dict, str]:
    """Merge defaults, config file and flags; returns settings and the raw config text."""
    options = {**COMMON, **EXPERIMENTS[args.experiment]}
    raw, from_file = "", {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = fh.read()
            raw = data.decode()
            from_file = tomllib.loads(raw)
        except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        from_file = {k.replace("-", "_"): v for k, v in from_file.items()}
        from_file.pop("experiment", None)
        unknown = set(from_file) - set(options)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    settings = {}
    for key, (kind, default, _) in options.items():
        value = getattr(args, key)
        if value is None and key == "threads" and os.environ.get("ERGOVOLUME_THREADS"):
            value = os.environ["ERGOVOLUME_THREADS"]
        if value is None:
            value = from_file.get(key, default)
        try:
            settings[key] = value if value is None or kind is bool else kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    if settings["threads"] is None:
        settings["threads"] = 1
    if settings["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return settings, raw


def _optimizer(s: dict) -> OptimizerConfig:
    return OptimizerConfig(restarts=s["restarts"], max_iterations=s["max_iterations"],
                           tolerance=s["tolerance"], seed=s["seed"])


def dispatch(experiment: str, s: dict):
    if experiment == "tc-dressed":
        return experiments.tc_dressed(s["spins"], s["nph"], s["omega_c"], s["omega_a"],
                                      s["subspace"], s["threads"])
    if experiment == "dicke3-phase":
        return experiments.dicke3_phase(s["atoms"], s["grid"], s["nmax"], s["omega_c"],
                                        s["omega_a"], s["threads"])
    if experiment == "tfim-ground":
        return experiments.tfim_ground(s["spins"], s["g_grid"], s["backend"], s["trunc"],
                                       s["threads"])
    if experiment == "tfim-dynamics":
        noise = None
        if s["noise_p1"] or s["noise_p2"]:
            noise = NoiseSpec(s["noise_p1"], s["noise_p2"], s["trajectories"], s["seed"])
        return experiments.tfim_dynamics(s["spins"], s["g"], s["t_grid"], s["depth"],
                                         _optimizer(s), noise, s["dt"], s["noise_dt"])
    if experiment == "appendix-a":
        return experiments.appendix_a(s["g_grid"], s["nmax"], _optimizer(s), s["threads"])
    if experiment == "benchmark-compare":
        return experiments.benchmark_compare(s["source"], s["spins"], s["nph"], s["g"],
                                             s["t_grid"], s["rescale"], s["threads"])
    raise ConfigError(f"unknown experiment {experiment!r}")


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def render(experiment: str, settings: dict, raw_config: str, columns, rows, meta) -> str:
    out = io.StringIO()
    out.write(f"# ergovolume {__version__}\n")
    out.write(f"# experiment: {experiment}\n")
    out.write(f"# settings: {json.dumps(settings, sort_keys=True)}\n")
    for line in raw_config.splitlines():
        out.write(f"# config| {line}\n")
    out.write(f"# metadata: {json.dumps(meta, sort_keys=True, default=str)}\n")
    out.write(f"# rows: {len(rows)}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")
    return out.getvalue()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings, raw = resolve(args)
        columns, rows, meta = dispatch(args.experiment, settings)
    except (ConfigError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"error: numerical: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render(args.experiment, settings, raw, columns, rows, meta)
    if settings["output"]:
        with open(settings["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
