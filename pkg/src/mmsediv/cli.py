"""``mdl`` command-line runner.

Usage::

    mdl formula --spec exp.json
    mdl sweep   --spec exp.json --out results/ --threads 4 --seed 7
    mdl ser     --spec exp.json --out results/
    mdl slope   --spec exp.json --out results/
    mdl verify  [--spec exp.json] --out results/
    mdl figure  fig1 [--spec overrides.json] --out results/

Exit codes: 0 success, 1 invalid spec (message names the field), 2 numeric
failure at run time, 3 a verification suite or slope verdict failed.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import formulas, simkit, verification
from .channels import ConfigError, SystemConfig
from .fitters import InsufficientDataError, compare, estimate_slope
from .simkit import atomic_write

__all__ = ["ExperimentSpec", "load_spec", "snr_grid", "FIGURES", "run", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

DEFAULT_TRIALS = 100_000
DEFAULT_GRID = {"start_db": 0.0, "stop_db": 30.0, "step_db": 2.0}
DEFAULT_TOLERANCE = 0.3


def snr_grid(start_db, stop_db, step_db):
    """Inclusive arithmetic grid ``start, start+step, ..., <= stop``."""
    if not step_db > 0:
        raise ConfigError("snr.step_db", "must be positive")
    if stop_db < start_db:
        raise ConfigError("snr.stop_db", "must not be below start_db")
    n = int(math.floor((stop_db - start_db) / step_db + 1e-9)) + 1
    return [round(start_db + i * step_db, 10) for i in range(n)]


@dataclass
class ExperimentSpec:
    """One parsed JSON experiment document."""

    config: SystemConfig
    grid: List[float]
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    window: Optional[tuple] = None
    tolerance: float = DEFAULT_TOLERANCE
    min_hits: Optional[int] = None
    max_trials: Optional[int] = None
    predicted: Optional[float] = None
    raw: dict = field(default_factory=dict)


def _number(data, key, kind, default=None):
    if key not in data:
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(key, "must be an integer")
        return int(value)
    return float(value)


def parse_spec(data):
    """Validate a spec mapping into an :class:`ExperimentSpec`."""
    if not isinstance(data, dict):
        raise ConfigError("spec", "top level must be a JSON object")
    config = SystemConfig.from_mapping(data)
    snr = data.get("snr", DEFAULT_GRID)
    if not isinstance(snr, dict):
        raise ConfigError("snr", "must be an object with start_db, stop_db, step_db")
    parts = {}
    for key in ("start_db", "stop_db", "step_db"):
        if key not in snr:
            raise ConfigError(f"snr.{key}", "missing required field")
        parts[key] = _number(snr, key, float)
    grid = snr_grid(**parts)
    trials = _number(data, "trials", int, DEFAULT_TRIALS)
    if trials < 1:
        raise ConfigError("trials", "must be at least 1")
    seed = _number(data, "master_seed", int, 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("master_seed", "must be an unsigned 64-bit integer")
    window = data.get("window")
    if window is not None:
        if not isinstance(window, (list, tuple)) or len(window) != 2:
            raise ConfigError("window", "must be [low_db, high_db]")
        window = (float(window[0]), float(window[1]))
        if window[1] < window[0]:
            raise ConfigError("window", "low edge exceeds high edge")
    tol = _number(data, "tolerance", float, DEFAULT_TOLERANCE)
    if not tol > 0:
        raise ConfigError("tolerance", "must be positive")
    min_hits = _number(data, "min_hits", int)
    max_trials = _number(data, "max_trials", int)
    predicted = _number(data, "predicted", float)
    return ExperimentSpec(config, grid, trials, seed, window, tol, min_hits,
                          max_trials, predicted, dict(data))


def load_spec(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("spec", f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("spec", f"not valid JSON ({exc})")
    return parse_spec(data)


def _write_json(directory, name, payload):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _predicted(spec):
    if spec.predicted is not None:
        return spec.predicted
    return formulas.formulas_for(spec.config)[0]


# ---------------------------------------------------------------------------
# figure recipes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FigureRecipe:
    description: str
    links: tuple
    rates: tuple
    receivers: tuple = ("mmse",)
    events: tuple = ("outage",)
    grid: tuple = (0.0, 40.0, 2.0)


FIGURES = {
    "fig1": FigureRecipe("MMSE outage, M=N=3", ((3, 3),), (1, 1.5, 2, 3, 4.5, 4.8, 5, 10)),
    "fig2": FigureRecipe("MMSE outage with Jensen bounds, M=N=2", ((2, 2),), (1, 4, 10),
                         events=("outage", "jensen_upper", "jensen_lower")),
    "fig3": FigureRecipe("MMSE outage, M=2, N=3", ((2, 3),), (1.5, 2.5, 4)),
    "fig4": FigureRecipe("MMSE outage, N>M against M>N", ((2, 3), (3, 2)), (1.8, 4, 10)),
    "fig5": FigureRecipe("ML against MMSE outage, M=N=2", ((2, 2),), (1, 4, 10),
                         receivers=("ml", "mmse")),
}


def run_figure(name, out, trials, seed, workers, overrides=None):
    if name not in FIGURES:
        raise ConfigError("figure", f"unknown recipe {name!r}; choose from {sorted(FIGURES)}")
    recipe = FIGURES[name]
    overrides = overrides or {}
    grid = overrides.get("grid") or snr_grid(*recipe.grid)
    curves = []
    k = 0
    for M, N in recipe.links:
        for R in recipe.rates:
            for receiver in recipe.receivers:
                for event in recipe.events:
                    cfg = SystemConfig(M=M, N=N, R=float(R), receiver=receiver)
                    res = simkit.outage_sweep(cfg, grid, trials, simkit.trial_seed(seed, k),
                                              workers=workers, event=event)
                    stem = f"{name}_M{M}_N{N}_R{R:g}_{receiver}"
                    if event != "outage":
                        stem += f"_{event}"
                    res.meta["predicted"] = formulas.diversity_flat(R, M, N).value
                    res.write(out, stem)
                    curves.append({"csv": stem + ".csv", "json": stem + ".json", "M": M, "N": N,
                                   "R": float(R), "receiver": receiver, "event": event,
                                   "predicted_d": res.meta["predicted"]})
                    k += 1
    manifest = {"figure": name, "description": recipe.description, "trials": trials,
                "master_seed": seed, "snr_db": grid, "curves": curves}
    _write_json(out, f"{name}_manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_formula(spec, args):
    values = formulas.formulas_for(spec.config)
    payload = {"config": spec.config.to_dict(), "d": values[0].value,
               "formulas": [v.to_dict() for v in values]}
    if spec.config.scheme == "flat":
        payload["thresholds"] = [
            {"R": r, "d_below": lo, "d_at_or_above": hi}
            for r, lo, hi in formulas.flat_rate_thresholds(spec.config.M, spec.config.N)
        ]
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        _write_json(args.out, "formula.json", payload)
    return EXIT_OK


def _sweep(spec, args, kind):
    fn = simkit.ser_sweep if kind == "ser" else simkit.outage_sweep
    res = fn(spec.config, spec.grid, spec.trials, spec.master_seed, workers=args.threads,
             min_hits=spec.min_hits, max_trials=spec.max_trials)
    flagged = res.monotonicity_violations()
    if flagged:
        res.meta["monotonicity_flags"] = flagged
        print(f"warning: p_hat rises beyond CI after points {flagged}", file=sys.stderr)
    return res


def _cmd_sweep(spec, args, kind="sweep"):
    res = _sweep(spec, args, kind)
    paths = res.write(args.out or ".", kind)
    sys.stdout.write(res.to_csv())
    print(f"wrote {', '.join(paths)}", file=sys.stderr)
    return EXIT_OK


def _cmd_slope(spec, args):
    res = _sweep(spec, args, "sweep")
    res.write(args.out or ".", "sweep")
    window = spec.window or (spec.grid[0], spec.grid[-1])
    est = estimate_slope(res, window)
    verdict = compare(est, _predicted(spec), spec.tolerance)
    payload = verdict.to_dict()
    payload["points_used"] = est.points_used
    _write_json(args.out or ".", "verdict.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if verdict.passed else EXIT_VERIFY


def _cmd_verify(spec, args):
    config = spec.config if spec else None
    seed = spec.master_seed if spec else 0
    results = verification.run_all(config=config, seed=seed)
    ok = all(r.passed for r in results)
    for r in results:
        line = f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.checked} checks, {r.violations} violations"
        print(line + (f" ({r.detail})" if r.detail else ""))
    if args.out:
        _write_json(args.out, "verify.json", {"passed": ok, "suites": [r.to_dict() for r in results]})
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_figure(spec, args):
    trials = spec.trials if spec else DEFAULT_TRIALS
    seed = spec.master_seed if spec else 0
    overrides = {"grid": spec.grid} if spec and "snr" in spec.raw else None
    manifest = run_figure(args.name, args.out or ".", trials, seed, args.threads, overrides)
    print(f"wrote {len(manifest['curves'])} curves for {args.name}", file=sys.stderr)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="mdl", description="Diversity of linear MMSE receivers: formulas, sweeps, checks.")
    p.add_argument("command", choices=["formula", "sweep", "ser", "slope", "verify", "figure"])
    p.add_argument("name", nargs="?", help="figure recipe (fig1 ... fig5)")
    p.add_argument("--spec", help="JSON experiment spec")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (default: $MDL_THREADS or 1)")
    p.add_argument("--seed", type=int, help="override master_seed (unsigned 64-bit)")
    return p


def run(argv=None):
    """Parse ``argv`` and execute; returns the exit code."""
    args = build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = simkit.default_workers()
    try:
        if args.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        optional = args.command in ("verify", "figure")
        if args.spec is None and not optional:
            raise ConfigError("spec", f"command {args.command!r} needs --spec")
        spec = load_spec(args.spec) if args.spec else None
        if spec is not None and args.seed is not None:
            spec.master_seed = args.seed
        if args.command == "figure":
            if not args.name:
                raise ConfigError("figure", "name a recipe, e.g. 'mdl figure fig1'")
            if spec is None and args.seed is not None:
                spec = parse_spec({"M": 1, "N": 1, "R": 1.0, "master_seed": args.seed})
        handler = {
            "formula": _cmd_formula,
            "sweep": _cmd_sweep,
            "ser": lambda s, a: _cmd_sweep(s, a, "ser"),
            "slope": _cmd_slope,
            "verify": _cmd_verify,
            "figure": _cmd_figure,
        }[args.command]
        return handler(spec, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, InsufficientDataError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
