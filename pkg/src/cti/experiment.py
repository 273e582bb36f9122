"""Benchmark runner: repeated split/fit/calibrate/predict/evaluate cycles.

One run executes every requested method on every repetition, each
repetition using a fresh seeded split (and, for synthetic scenarios, a
fresh draw).  Per-repetition prediction files, a summary table, length
histograms for the thresholded-interval methods, and a manifest echoing
the configuration, library versions and consumed seeds are written to
the output directory.  Identical configurations produce byte-identical
report files.
"""

from __future__ import annotations

import csv
import logging
import platform
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import (
    calibrate_threshold,
    cqr,
    harmonic_batch_scores,
    harmonic_predict_set,
    predict_set,
    split_conformal,
)
from .data import Dataset, load_csv, split_indices, standardize
from .evaluation import (
    MethodReport,
    coverage,
    length_histograms,
    mean_size,
    write_histogram_csv,
    write_report_csv,
)
from .intervals import BOUNDARY_POLICIES, batch_scores, build_partition
from .quantile import ForestConfig, JointQuantileNetwork, PinballConfig, QuantileForest, QuantileLevels
from .synthetic import SCENARIOS, generate, make_scenario

__all__ = ["METHODS", "ExperimentConfig", "validate_config", "run_experiment"]

logger = logging.getLogger("cti")

METHODS = ("cti-forest", "cti-pinball", "cti-harmonic", "split", "cqr")
_CTI_METHODS = ("cti-forest", "cti-pinball", "cti-harmonic")


@dataclass
class ExperimentConfig:
    """Everything one benchmark run depends on.

    Exactly one of ``dataset`` (CSV path) or ``scenario`` (synthetic
    family name) must be set.  ``n_intervals`` is the number of
    interquantile intervals; ``seed`` is the root seed and repetition
    ``r`` consumes ``seed + r``.
    """

    dataset: str | None = None
    scenario: str | None = None
    scenario_params: dict = field(default_factory=dict)
    n: int = 2000  # synthetic draw size per repetition
    response_column: str = "y"
    alpha: float = 0.1
    n_intervals: int = 40
    methods: tuple = ("cti-forest",)
    boundary: str = "clamp"
    repetitions: int = 10
    seed: int = 0
    out_dir: str = "results"
    standardize_y: bool | None = None  # None: standardize CSV data only
    fallback_shortest: bool = False
    baseline_model: str = "forest"  # model family behind split/cqr
    forest: ForestConfig = field(default_factory=ForestConfig)
    pinball: PinballConfig = field(default_factory=PinballConfig)

    @property
    def name(self):
        if self.dataset is not None:
            return Path(self.dataset).stem
        return self.scenario or "run"


def validate_config(config):
    """List every reason the run could not start (empty = runnable)."""
    problems = []
    if not 0.0 < config.alpha < 1.0:
        problems.append(f"alpha: must be in (0, 1), got {config.alpha}")
    if config.n_intervals < 2:
        problems.append(f"K: must be >= 2, got {config.n_intervals}")
    if config.repetitions < 1:
        problems.append(f"reps: must be >= 1, got {config.repetitions}")
    if (config.dataset is None) == (config.scenario is None):
        problems.append("dataset/scenario: exactly one of them must be set")
    if config.dataset is not None and not Path(config.dataset).is_file():
        problems.append(f"dataset: file not found: {config.dataset}")
    if config.scenario is not None and config.scenario not in SCENARIOS:
        problems.append(
            f"scenario: unknown {config.scenario!r}, expected one of {sorted(SCENARIOS)}"
        )
    if config.scenario is not None and config.n < 10:
        problems.append(f"n: need at least 10 synthetic samples, got {config.n}")
    if not config.methods:
        problems.append("methods: must name at least one method")
    for m in config.methods:
        if m not in METHODS:
            problems.append(f"methods: unknown {m!r}, expected from {METHODS}")
    if config.boundary not in BOUNDARY_POLICIES:
        problems.append(
            f"boundary: unknown {config.boundary!r}, expected one of {BOUNDARY_POLICIES}"
        )
    if config.baseline_model not in ("forest", "pinball"):
        problems.append(
            f"baseline_model: unknown {config.baseline_model!r}, expected forest or pinball"
        )
    if config.seed < 0:
        problems.append(f"seed: must be >= 0, got {config.seed}")
    return problems


def _fit_models(config, levels, X_train, y_train, rep_seed):
    """Fit only the model families the requested methods need."""
    need_forest = (
        any(m in ("cti-forest", "cti-harmonic") for m in config.methods)
        or (config.baseline_model == "forest" and any(m in ("split", "cqr") for m in config.methods))
    )
    need_pinball = (
        any(m in ("cti-pinball", "cti-harmonic") for m in config.methods)
        or (config.baseline_model == "pinball" and any(m in ("split", "cqr") for m in config.methods))
    )
    models = {}
    if need_forest:
        fc = ForestConfig(**{**_asdict_shallow(config.forest), "seed": rep_seed})
        models["forest"] = QuantileForest(levels, fc).fit(X_train, y_train)
    if need_pinball:
        pc = PinballConfig(**{**_asdict_shallow(config.pinball), "seed": rep_seed})
        models["pinball"] = JointQuantileNetwork(levels, pc).fit(X_train, y_train)
    return models


def _asdict_shallow(dc):
    return {f.name: getattr(dc, f.name) for f in fields(dc)}


def _cti_outputs(config, grids_cal, grids_test, y_cal, y_test, second_grids=None):
    """Calibrate and predict for one thresholded-interval variant."""
    if second_grids is None:
        cal_scores, cal_clamped = batch_scores(grids_cal, y_cal, config.boundary)
    else:
        cal_scores, cal_clamped = harmonic_batch_scores(
            grids_cal, second_grids[0], y_cal, config.boundary
        )
    threshold = calibrate_threshold(cal_scores, config.alpha)
    sets = []
    for i in range(grids_test.shape[0]):
        part = build_partition(grids_test[i])
        if second_grids is None:
            sets.append(predict_set(part, threshold, config.fallback_shortest))
        else:
            sets.append(
                harmonic_predict_set(
                    part, build_partition(second_grids[1][i]), threshold, config.boundary
                )
            )
    return threshold, sets, float(cal_clamped.mean())


def _serialize_components(pset):
    return ";".join(f"{lo:.6f}:{hi:.6f}" for lo, hi in pset.components)


def _write_rep_file(path, sets_or_intervals, y_test, covered):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y", "covered", "size", "n_components", "components"])
        if isinstance(sets_or_intervals, tuple):
            lo, hi = sets_or_intervals
            for i, yv in enumerate(y_test):
                writer.writerow(
                    [i, f"{yv:.6f}", int(covered[i]), f"{hi[i] - lo[i]:.6f}", 1,
                     f"{lo[i]:.6f}:{hi[i]:.6f}"]
                )
        else:
            for i, (pset, yv) in enumerate(zip(sets_or_intervals, y_test)):
                writer.writerow(
                    [i, f"{yv:.6f}", int(covered[i]), f"{pset.size:.6f}",
                     pset.n_components, _serialize_components(pset)]
                )


def _run_repetition(config, rep, dataset, levels, out_dir):
    rep_seed = config.seed + rep
    if config.scenario is not None:
        scenario = make_scenario(config.scenario, **config.scenario_params)
        X, y = generate(scenario, config.n, rep_seed)
    else:
        X, y = dataset.X, dataset.y

    split = split_indices(X.shape[0], rep_seed)
    do_std = config.standardize_y
    if do_std is None:
        do_std = config.dataset is not None
    if do_std:
        full = Dataset(X=X, y=y, feature_names=(), provenance=config.name)
        scaled, _ = standardize(full, split)
        X, y = scaled.X, scaled.y

    X_train, y_train = X[split.train], y[split.train]
    X_cal, y_cal = X[split.cal], y[split.cal]
    X_test, y_test = X[split.test], y[split.test]

    models = _fit_models(config, levels, X_train, y_train, rep_seed)
    grids = {
        fam: (m.predict_grid(X_cal), m.predict_grid(X_test)) for fam, m in models.items()
    }

    results = {}
    for method in config.methods:
        if method in _CTI_METHODS:
            if method == "cti-harmonic":
                g_f, g_p = grids["forest"], grids["pinball"]
                threshold, sets, clamp_rate = _cti_outputs(
                    config, g_f[0], g_f[1], y_cal, y_test, second_grids=(g_p[0], g_p[1])
                )
                hist_grids = g_f[1]
            else:
                fam = "forest" if method == "cti-forest" else "pinball"
                g = grids[fam]
                threshold, sets, clamp_rate = _cti_outputs(
                    config, g[0], g[1], y_cal, y_test
                )
                hist_grids = g[1]
            covered = np.array([s.contains(v) for s, v in zip(sets, y_test)])
            cov = float(covered.mean())
            size = mean_size(sets)
            n_comp = float(np.mean([s.n_components for s in sets]))
            rep_path = out_dir / f"{config.name}_{method}_rep{rep}.csv"
            _write_rep_file(rep_path, sets, y_test, covered)
            hist = length_histograms(hist_grids, y_test, policy=config.boundary)
            write_histogram_csv(out_dir / f"{config.name}_{method}_rep{rep}_hist.csv", hist)
            results[method] = dict(
                coverage=cov, size=size, n_components=n_comp, clamp_rate=clamp_rate
            )
        else:
            model = models[config.baseline_model]
            fn = split_conformal if method == "split" else cqr
            res = fn(model, X_cal, y_cal, X_test, config.alpha)
            covered = (res.lo <= y_test) & (y_test <= res.hi)
            cov = float(covered.mean())
            size = float(np.mean(res.hi - res.lo))
            rep_path = out_dir / f"{config.name}_{method}_rep{rep}.csv"
            _write_rep_file(rep_path, (res.lo, res.hi), y_test, covered)
            results[method] = dict(coverage=cov, size=size)
    return results


def _config_lines(config):
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name in ("forest", "pinball"):
            for k, v in _asdict_shallow(value).items():
                lines.append(f"{f.name}_{k} = {v}")
        elif f.name == "methods":
            lines.append(f"methods = {','.join(value)}")
        elif f.name == "scenario_params":
            for k, v in sorted(value.items()):
                lines.append(f"scenario_{k} = {v}")
        else:
            lines.append(f"{f.name} = {value}")
    return lines


def _write_manifest(path, config, rep_seeds):
    import pandas
    import scipy
    import sklearn

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# run manifest\n[config]\n")
        for line in _config_lines(config):
            fh.write(line + "\n")
        fh.write("[versions]\n")
        fh.write(f"python = {platform.python_version()}\n")
        fh.write(f"cti = {__version__}\n")
        fh.write(f"numpy = {np.__version__}\n")
        fh.write(f"scipy = {scipy.__version__}\n")
        fh.write(f"pandas = {pandas.__version__}\n")
        fh.write(f"scikit-learn = {sklearn.__version__}\n")
        fh.write("[seeds]\n")
        fh.write(f"root = {config.seed}\n")
        for rep, seed in enumerate(rep_seeds):
            fh.write(f"rep{rep} = {seed}\n")


def run_experiment(config):
    """Execute all repetitions and write report files.

    Returns
    -------
    dict with keys "reports" (method -> MethodReport), "summary_path",
    "manifest_path" and "out_dir".

    Raises
    ------
    ValueError if the configuration is invalid, RuntimeError if every
    repetition fails.
    """
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    levels = QuantileLevels(config.n_intervals)

    dataset = None
    if config.dataset is not None:
        dataset = load_csv(config.dataset, config.response_column)

    reports = {m: MethodReport(method=m) for m in config.methods}
    rep_seeds = []
    failures = 0
    for rep in range(config.repetitions):
        rep_seeds.append(config.seed + rep)
        try:
            results = _run_repetition(config, rep, dataset, levels, out_dir)
        except Exception:
            failures += 1
            logger.exception("repetition %d failed", rep)
            continue
        for method, metrics in results.items():
            reports[method].add(
                metrics["coverage"],
                metrics["size"],
                metrics.get("n_components"),
                metrics.get("clamp_rate"),
            )
    if failures == config.repetitions:
        raise RuntimeError(f"all {failures} repetitions failed")

    summary_path = out_dir / f"{config.name}_summary.csv"
    write_report_csv(summary_path, config.name, [reports[m] for m in config.methods])
    manifest_path = out_dir / f"{config.name}_manifest.txt"
    _write_manifest(manifest_path, config, rep_seeds)
    return {
        "reports": reports,
        "summary_path": summary_path,
        "manifest_path": manifest_path,
        "out_dir": out_dir,
    }
