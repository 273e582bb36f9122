"""Command-line experiment runner.

Configuration comes from an optional flat key=value file plus command
line flags; flags override file values.  Exit status: 0 on success, 1
when the configuration fails validation, 2 when the run itself fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .evaluation import aggregate_reports
from .experiment import ExperimentConfig, run_experiment, validate_config
from .quantile import ForestConfig, PinballConfig

__all__ = ["main", "parse_config_file", "build_config"]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text, key):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"{key}: expected a boolean, got {text!r}")


def _parse_optional_int(text, key):
    low = text.strip().lower()
    if low in ("none", ""):
        return None
    return int(text)


def parse_config_file(path):
    """Read a flat ``key = value`` config file into a dict.

    Blank lines and ``#`` comments are ignored.  Unknown keys raise,
    except ``scenario_<param>`` keys which collect into scenario
    parameters.
    """
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in stripped.split("=", 1))
            raw[key] = value

    out = {"scenario_params": {}}
    casters = {
        "dataset": str,
        "scenario": str,
        "response_column": str,
        "out": str,
        "boundary": str,
        "baseline_model": str,
        "alpha": float,
        "K": int,
        "n": int,
        "reps": int,
        "seed": int,
        "methods": lambda v: tuple(m.strip() for m in v.split(",") if m.strip()),
        "standardize": lambda v: _parse_bool(v, "standardize"),
        "fallback_shortest": lambda v: _parse_bool(v, "fallback_shortest"),
        "forest_trees": int,
        "forest_max_depth": lambda v: _parse_optional_int(v, "forest_max_depth"),
        "forest_min_leaf": int,
        "forest_max_features": float,
        "forest_jobs": int,
        "pinball_hidden": lambda v: tuple(int(h) for h in v.split(",") if h.strip()),
        "pinball_lr": float,
        "pinball_epochs": int,
        "pinball_batch": lambda v: _parse_optional_int(v, "pinball_batch"),
    }
    for key, value in raw.items():
        if key.startswith("scenario_") and key != "scenario":
            out["scenario_params"][key[len("scenario_") :]] = float(value)
        elif key in casters:
            out[key] = casters[key](value)
        else:
            raise ValueError(f"{path}: unknown config key {key!r}")
    return out


def build_config(file_values, args):
    """Merge config-file values and CLI flags into an ExperimentConfig."""
    merged = dict(file_values)
    for key, attr in [
        ("dataset", "dataset"),
        ("scenario", "scenario"),
        ("alpha", "alpha"),
        ("K", "K"),
        ("reps", "reps"),
        ("seed", "seed"),
        ("out", "out"),
        ("boundary", "boundary"),
        ("n", "n"),
        ("response_column", "response_column"),
    ]:
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "methods", None):
        merged["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())

    forest_kwargs = {}
    for key, target in [
        ("forest_trees", "n_trees"),
        ("forest_max_depth", "max_depth"),
        ("forest_min_leaf", "min_leaf"),
        ("forest_max_features", "max_features_frac"),
        ("forest_jobs", "n_jobs"),
    ]:
        if key in merged:
            forest_kwargs[target] = merged.pop(key)
    pinball_kwargs = {}
    for key, target in [
        ("pinball_hidden", "hidden"),
        ("pinball_lr", "learning_rate"),
        ("pinball_epochs", "epochs"),
        ("pinball_batch", "batch_size"),
    ]:
        if key in merged:
            pinball_kwargs[target] = merged.pop(key)

    return ExperimentConfig(
        dataset=merged.get("dataset"),
        scenario=merged.get("scenario"),
        scenario_params=merged.get("scenario_params", {}),
        n=merged.get("n", 2000),
        response_column=merged.get("response_column", "y"),
        alpha=merged.get("alpha", 0.1),
        n_intervals=merged.get("K", 40),
        methods=merged.get("methods", ("cti-forest",)),
        boundary=merged.get("boundary", "clamp"),
        repetitions=merged.get("reps", 10),
        seed=merged.get("seed", 0),
        out_dir=merged.get("out", "results"),
        standardize_y=merged.get("standardize"),
        fallback_shortest=merged.get("fallback_shortest", False),
        baseline_model=merged.get("baseline_model", "forest"),
        forest=ForestConfig(**forest_kwargs),
        pinball=PinballConfig(**pinball_kwargs),
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cti",
        description="Benchmark thresholded-interval conformal regression against "
        "split conformal and CQR on CSV datasets or synthetic scenarios.",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--dataset", help="CSV dataset path")
    parser.add_argument("--scenario", help="synthetic scenario name")
    parser.add_argument("--response-column", dest="response_column", help="response header name")
    parser.add_argument("--alpha", type=float, help="miscoverage level in (0, 1)")
    parser.add_argument("--K", type=int, help="number of interquantile intervals")
    parser.add_argument("--methods", help="comma-separated method list")
    parser.add_argument("--reps", type=int, help="number of repetitions")
    parser.add_argument("--seed", type=int, help="root seed (64-bit unsigned)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--boundary", choices=["clamp", "infinite"], help="boundary policy")
    parser.add_argument("--n", type=int, help="synthetic samples per repetition")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        config = build_config(file_values, args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    problems = validate_config(config)
    if problems:
        for problem in problems:
            print(f"invalid config - {problem}", file=sys.stderr)
        return 1

    try:
        result = run_experiment(config)
    except Exception as exc:  # validation passed, so this is a runtime failure
        logging.getLogger("cti").error("run failed: %s", exc)
        return 2

    for method, report in result["reports"].items():
        if report.n_reps == 0:
            print(f"{method}: no successful repetitions")
            continue
        summary = aggregate_reports(report)
        cov = summary["coverage"][2]
        size = summary["size"][2]
        print(f"{method}: coverage {cov}  size {size}  reps {report.n_reps}")
    print(f"summary: {result['summary_path']}")
    print(f"manifest: {result['manifest_path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
