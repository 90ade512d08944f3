"""Configuration loading, result emission, and the command-line interface.

Config files are YAML with optional sections network / library / run /
quadrature / experiments; an empty file runs the reference scenario
(sigma = 50 m, 40 clusters per km^2, 8 devices per cluster, alpha = 4,
0 dB SIR threshold, 100 files, Zipf 0.5, cache budget 5). Dimensioned
values accept unit suffixes: "50 m", "0 dB" (to linear), "40 per km2"
(to per-m^2). Results are written as CSV or JSON lines with numbers at 12
significant digits, parameter columns before metric columns, and are byte
identical for a fixed config, seed, and trial count.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field, replace

import yaml

from .analytic import NumericalError, QuadratureSpec
from .experiments import EXPERIMENTS, ExperimentSpec, policy_entropy, run_experiment
from .model import ContentLibrary, NetworkConfig
from .optimizer import solve_p1

__all__ = [
    "WORKERS_ENV_VAR",
    "parse_quantity",
    "RunSettings",
    "load_config",
    "emit_results",
    "main",
]

WORKERS_ENV_VAR = "D2DCACHE_WORKERS"

_QUANTITY_RE = re.compile(
    r"^\s*(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(?P<unit>.*?)\s*$"
)

# multiplicative units; dB is handled separately
_UNIT_SCALE = {
    "": 1.0,
    "m": 1.0,
    "meter": 1.0,
    "meters": 1.0,
    "km": 1e3,
    "per m2": 1.0,
    "per m^2": 1.0,
    "/m2": 1.0,
    "per km2": 1e-6,
    "per km^2": 1e-6,
    "/km2": 1e-6,
    "bps/hz": 1.0,
}


def parse_quantity(value) -> float:
    """Parse a number with an optional unit suffix to base units.

    Plain numbers pass through; "50 m" -> 50.0, "2 km" -> 2000.0,
    "40 per km2" -> 4.0e-05, "0 dB" -> 1.0 (decibels to linear power).
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a quantity, got boolean {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number or string quantity, got {value!r}")
    match = _QUANTITY_RE.match(value)
    if not match:
        raise ValueError(f"cannot parse quantity {value!r}")
    number = float(match.group("num"))
    unit = match.group("unit").lower()
    if unit in ("db",):
        return 10.0 ** (number / 10.0)
    if unit in _UNIT_SCALE:
        return number * _UNIT_SCALE[unit]
    raise ValueError(f"unknown unit {match.group('unit')!r} in {value!r}")


_DEFAULT_NETWORK = dict(lambda_p=40e-6, n_bar=8.0, sigma=50.0, alpha=4.0,
                        gamma_d=1.0, theta=1.0)
_DEFAULT_LIBRARY = dict(n_files=100, beta=0.5, cache_size=5)


@dataclass(frozen=True)
class RunSettings:
    """Fully resolved configuration for one CLI invocation."""

    network: NetworkConfig
    library: ContentLibrary
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    trials: int = 20_000
    seed: int = 0
    experiment: str = "coverage-vs-sigma"
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    experiment_params: dict = field(default_factory=dict)


def _require_mapping(section, name):
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ValueError(f"config section {name!r} must be a mapping")
    return dict(section)


def _network_from(section: dict) -> NetworkConfig:
    kwargs = dict(_DEFAULT_NETWORK)
    if "rho" in section and "theta" not in section:
        kwargs.pop("theta")
    for key in ("lambda_p", "n_bar", "sigma", "alpha", "gamma_d", "theta", "rho"):
        if key in section:
            kwargs[key] = parse_quantity(section.pop(key))
    if section:
        raise ValueError(f"unknown network settings: {sorted(section)}")
    return NetworkConfig(**kwargs)


def _library_from(section: dict) -> ContentLibrary:
    kwargs = dict(_DEFAULT_LIBRARY)
    for key in ("n_files", "cache_size"):
        if key in section:
            kwargs[key] = int(section.pop(key))
    if "beta" in section:
        kwargs["beta"] = float(section.pop("beta"))
    if section:
        raise ValueError(f"unknown library settings: {sorted(section)}")
    return ContentLibrary.from_zipf(kwargs["n_files"], kwargs["beta"],
                                    kwargs["cache_size"])


def _quadrature_from(section: dict) -> QuadratureSpec:
    known = ("rel_tol", "abs_tol", "v_max_sigma_mult", "k_max_tail_mass",
             "mc_integration_samples", "qmc_seed")
    kwargs = {}
    for key in known:
        if key in section:
            value = section.pop(key)
            kwargs[key] = (
                int(value) if key in ("mc_integration_samples", "qmc_seed")
                else float(value)
            )
    if section:
        raise ValueError(f"unknown quadrature settings: {sorted(section)}")
    return QuadratureSpec(**kwargs)


_EXPERIMENT_PARAM_KEYS = {
    "coverage-vs-sigma": {"sigma_m", "lambda_p_per_m2", "lambda_p_per_km2", "c"},
    "offload-vs-beta": {"beta"},
    "policy-histogram": {"pairs"},
    "validate-bounds": {"decades", "points"},
    "custom-sweep": {"parameter", "values", "metric", "c", "policy"},
}


def _parse_experiment_params(name: str, raw: dict) -> dict:
    params = dict(raw)
    unknown = set(params) - _EXPERIMENT_PARAM_KEYS[name]
    if unknown:
        raise ValueError(
            f"unknown settings for experiment {name!r}: {sorted(unknown)}"
        )
    if name == "coverage-vs-sigma":
        if "sigma_m" in params:
            params["sigma_m"] = [parse_quantity(v) for v in params["sigma_m"]]
        if "lambda_p_per_km2" in params:
            params["lambda_p_per_m2"] = [
                float(v) * 1e-6 for v in params.pop("lambda_p_per_km2")
            ]
        elif "lambda_p_per_m2" in params:
            params["lambda_p_per_m2"] = [
                parse_quantity(v) for v in params["lambda_p_per_m2"]
            ]
    elif name == "policy-histogram" and "pairs" in params:
        params["pairs"] = [
            {"sigma": parse_quantity(p["sigma"]),
             "lambda_p": parse_quantity(p["lambda_p"])}
            for p in params["pairs"]
        ]
    elif name == "custom-sweep" and "values" in params:
        params["values"] = [parse_quantity(v) for v in params["values"]]
    return params


def load_config(path: str) -> RunSettings:
    """Read a YAML config file into resolved settings.

    Missing sections and an entirely empty file fall back to the reference
    scenario defaults. Worker count comes from the run section but is
    overridden by the environment variable named by WORKERS_ENV_VAR.
    """
    with open(path, "r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError("top-level config must be a mapping")

    network = _network_from(_require_mapping(raw.pop("network", None), "network"))
    library = _library_from(_require_mapping(raw.pop("library", None), "library"))
    quadrature = _quadrature_from(
        _require_mapping(raw.pop("quadrature", None), "quadrature")
    )
    run = _require_mapping(raw.pop("run", None), "run")
    experiments_raw = _require_mapping(raw.pop("experiments", None), "experiments")
    if raw:
        raise ValueError(f"unknown config sections: {sorted(raw)}")

    experiment = str(run.pop("experiment", "coverage-vs-sigma"))
    trials = int(run.pop("trials", 20_000))
    seed = int(run.pop("seed", 0))
    out = run.pop("out", None)
    fmt = str(run.pop("format", "csv"))
    workers = int(run.pop("workers", 1))
    if run:
        raise ValueError(f"unknown run settings: {sorted(run)}")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
    if trials < 1:
        raise ValueError("trials must be positive")

    env_workers = os.environ.get(WORKERS_ENV_VAR)
    if env_workers is not None:
        workers = int(env_workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")

    params = {
        name: _parse_experiment_params(name, _require_mapping(section, name))
        for name, section in experiments_raw.items()
        if name in EXPERIMENTS
    }
    unknown = set(experiments_raw) - set(EXPERIMENTS)
    if unknown:
        raise ValueError(f"unknown experiments configured: {sorted(unknown)}")

    return RunSettings(
        network=network, library=library, quadrature=quadrature,
        trials=trials, seed=seed, experiment=experiment, out=out, fmt=fmt,
        workers=workers, experiment_params=params,
    )


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "%.12g" % value
    if value is None:
        return ""
    return str(value)


def _json_value(value):
    if isinstance(value, float):
        return float("%.12g" % value)
    return value


def emit_results(columns, rows, out: str | None = None, fmt: str = "csv") -> str:
    """Render rows to CSV or JSON lines at 12 significant digits.

    Column order is taken from `columns`; the text is returned and also
    written to the path `out` when given, otherwise to stdout.
    """
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_format_cell(row.get(col)) for col in columns))
        text = "\n".join(lines) + "\n"
    elif fmt == "jsonl":
        lines = [
            json.dumps({col: _json_value(row.get(col)) for col in columns})
            for row in rows
        ]
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")

    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    return text


def _cmd_run(args) -> int:
    settings = load_config(args.config)
    if args.experiment is not None:
        settings = replace(settings, experiment=args.experiment)
    if args.seed is not None:
        settings = replace(settings, seed=args.seed)
    if args.trials is not None:
        settings = replace(settings, trials=args.trials)
    if args.out is not None:
        settings = replace(settings, out=args.out)
    if args.format is not None:
        settings = replace(settings, fmt=args.format)

    spec = ExperimentSpec(
        name=settings.experiment,
        network=settings.network,
        library=settings.library,
        trials=settings.trials,
        seed=settings.seed,
        quadrature=settings.quadrature,
        params=settings.experiment_params.get(settings.experiment, {}),
        workers=settings.workers,
    )
    columns, rows = run_experiment(spec)
    emit_results(columns, rows, out=settings.out, fmt=settings.fmt)
    return 0


def _cmd_solve(args) -> int:
    settings = load_config(args.config)
    solution = solve_p1(settings.library, settings.network)
    probs = solution.policy.probs
    q = settings.library.popularity
    labels = solution.diagnostics["labels"]
    print("file_index,popularity,caching_probability,label")
    for m in range(probs.size):
        print(f"{m},{q[m]:.12g},{probs[m]:.12g},{labels[m]}")
    print(f"# objective = {solution.objective:.12g}")
    print(f"# multiplier = {solution.multiplier:.12g}")
    print(f"# entropy = {policy_entropy(solution.policy):.12g}")
    print(f"# sum_residual = {solution.diagnostics['sum_residual']:.12g}")
    for warning in solution.diagnostics["concavity_warnings"]:
        print(f"# note: {warning}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="d2dcache",
        description=(
            "Clustered D2D caching: coverage analysis, Monte Carlo "
            "simulation, and cache-placement optimization."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run a named experiment")
    run_parser.add_argument("--config", required=True, help="YAML config path")
    run_parser.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    run_parser.add_argument("--seed", type=int, default=None)
    run_parser.add_argument("--trials", type=int, default=None)
    run_parser.add_argument("--out", default=None)
    run_parser.add_argument("--format", choices=("csv", "jsonl"), default=None)
    run_parser.set_defaults(func=_cmd_run)

    solve_parser = sub.add_parser(
        "solve", help="solve the cache-placement problem for the config"
    )
    solve_parser.add_argument("--config", required=True, help="YAML config path")
    solve_parser.set_defaults(func=_cmd_solve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
