"""Seeded Monte Carlo experiments over the clustering pipeline.

Every experiment returns a :class:`Table`; ``Table.write`` emits a CSV whose
first line records the package version and a hash of the configuration,
plus a gnuplot script next to it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import BmcError, TrimClampWarning, ValidationError
from .improve import improve
from .info import information_quantity, two_cluster_p
from .metrics import misclassification
from .model import BmcModel, PRESETS
from .simulate import simulate_counts
from .spectral import spectral_cluster, spectral_noise_norm

log = logging.getLogger(__name__)

T_RULES = {
    "nlogn": lambda n: n * math.log(n),
    "nlog1.5n": lambda n: n * math.log(n) ** 1.5,
    "nlog2n": lambda n: n * math.log(n) ** 2,
    "n1.025logn": lambda n: n**1.025 * math.log(n),
    "n2": lambda n: float(n) ** 2,
    "n3": lambda n: float(n) ** 3,
}


def trajectory_lengths(rule, n):
    """Trajectory lengths for ``n`` states: a named rule gives one value, a list is used as is."""
    if isinstance(rule, str):
        if rule not in T_RULES:
            raise ValidationError(f"unknown T rule {rule!r}; choose from {sorted(T_RULES)}", field="t_rule")
        return [int(math.floor(T_RULES[rule](n)))]
    return [int(t) for t in rule]


def trial_seed(seed_base, trial):
    return (int(seed_base) ^ int(trial)) & 0xFFFFFFFFFFFFFFFF


def ci95(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(1.96 * values.std(ddof=1) / math.sqrt(values.size))


class TrialError(BmcError):
    def __init__(self, message, seed):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


@dataclass
class ExperimentConfig:
    model: BmcModel = field(default_factory=lambda: PRESETS["spectral"])
    n_grid: list = field(default_factory=lambda: [300])
    t_rule: object = "nlogn"
    trials: int = 20
    seed_base: int = 0
    improvement_iters: int = 2
    outputs: Path | None = None
    workers: int = 1
    spectral_method: str = "kmeans"
    grid_resolution: int = 10

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1", field="trials")
        if self.improvement_iters < 0:
            raise ValidationError("improvement_iters must be >= 0", field="improvement_iters")
        for n in self.n_grid:
            if n < 2 * self.model.K:
                raise ValidationError(f"n={n} is below 2K={2 * self.model.K}", field="n_grid")
            for T in trajectory_lengths(self.t_rule, n):
                if T <= n:
                    raise ValidationError(f"T={T} must exceed n={n}", field="t_rule")

    def digest(self):
        # only fields that affect results
        payload = {
            "model": self.model.to_dict(),
            "n_grid": list(self.n_grid),
            "t_rule": self.t_rule if isinstance(self.t_rule, str) else list(self.t_rule),
            "trials": self.trials,
            "seed_base": self.seed_base,
            "improvement_iters": self.improvement_iters,
            "spectral_method": self.spectral_method,
            "grid_resolution": self.grid_resolution,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    config: ExperimentConfig | None = None
    xlabel: str = ""
    ylabel: str = ""

    def to_csv(self):
        digest = self.config.digest() if self.config is not None else "none"
        lines = [f"# bmcluster {__version__} config={digest}", ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{self.name}.csv"
        csv_path.write_text(self.to_csv())
        (directory / f"{self.name}.gp").write_text(self.gnuplot(csv_path.name))
        return csv_path

    def gnuplot(self, csv_name):
        head = (
            "set datafile separator ','\n"
            "set datafile commentschars '#'\n"
            "set key autotitle columnhead\n"
        )
        if self.columns[:2] == ["p12", "p21"]:
            z = self.columns.index("final_error" if "final_error" in self.columns else "I") + 1
            return head + (
                "set xlabel 'p12'\nset ylabel 'p21'\nset view map\n"
                f"splot '{csv_name}' using 1:2:{z} with points pointtype 5 palette\n"
            )
        x, y = self.columns[0], self.columns[2]
        using = "1:3"
        style = "points"
        if "ci95" in self.columns:
            using += f":{self.columns.index('ci95') + 1}"
            style = "yerrorbars"
        return head + (
            f"set xlabel '{self.xlabel or x}'\n"
            f"set ylabel '{self.ylabel or y}'\n"
            f"plot '{csv_name}' using {using} with {style}\n"
        )


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.10g}"


@dataclass
class PipelineResult:
    seed: int
    errors: list
    timings: dict
    trace: object = None

    @property
    def error_rates(self):
        return [e.rate for e in self.errors]

    def rates_through(self, steps):
        """Error after 0..steps improvement steps, repeating the last value once iteration stopped."""
        rates = self.error_rates
        return [rates[min(i, len(rates) - 1)] for i in range(steps + 1)]


def run_pipeline(model, n, T, seed, improvement_iters, spectral_method="kmeans"):
    """Simulate, count, cluster spectrally and refine; errors are measured against the truth."""
    try:
        timings = {}
        t0 = time.perf_counter()
        part = model.partition(n)
        kernel = model.kernel(n)
        counts = simulate_counts(kernel, T, seed)
        timings["simulate"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TrimClampWarning)
            spectral = spectral_cluster(counts, model.K, method=spectral_method, random_state=seed % 2**32)
        timings["spectral"] = time.perf_counter() - t0
        errors = [misclassification(part, spectral.clusters)]
        trace = None
        if improvement_iters > 0 and spectral.clusters.is_complete:
            t0 = time.perf_counter()
            trace = improve(counts, spectral.clusters, improvement_iters)
            errors.extend(misclassification(part, q) for q in trace.partitions)
            timings["improve"] = time.perf_counter() - t0
        return PipelineResult(seed, errors, timings, trace)
    except BmcError as exc:
        raise TrialError(f"pipeline failed at n={n}, T={T}: {exc}", seed) from exc


def _map(func, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks))
    return [func(t) for t in tasks]


def _spectral_task(args):
    model, n, T, seed, method = args
    return run_pipeline(model, n, T, seed, 0, method).error_rates[0]


def exp_spectral_error_vs_n(config):
    """Spectral-stage error rate for each ``n`` in the grid."""
    rows = []
    for n in config.n_grid:
        for T in trajectory_lengths(config.t_rule, n):
            tasks = [(config.model, n, T, trial_seed(config.seed_base, i), config.spectral_method) for i in range(config.trials)]
            errs = _map(_spectral_task, tasks, config.workers)
            rows.append({"n": n, "T": T, "mean_error": float(np.mean(errs)), "ci95": ci95(errs), "trials": config.trials})
            log.info("n=%d T=%d mean_error=%.4f", n, T, rows[-1]["mean_error"])
    return Table("exp_spectral", ["n", "T", "mean_error", "ci95", "trials"], rows, config, "n", "fraction misclassified")


def _pipeline_task(args):
    model, n, T, seed, iters, method = args
    return run_pipeline(model, n, T, seed, iters, method).rates_through(iters)


def exp_improvement_vs_T(config):
    """Error after 0, 1, ..., ``improvement_iters`` refinement steps for each trajectory length."""
    n = config.n_grid[0]
    steps = config.improvement_iters
    rows = []
    for T in trajectory_lengths(config.t_rule, n):
        tasks = [(config.model, n, T, trial_seed(config.seed_base, i), steps, config.spectral_method) for i in range(config.trials)]
        rates = np.array(_map(_pipeline_task, tasks, config.workers))
        for s in range(steps + 1):
            rows.append({"T": T, "steps": s, "mean_error": float(rates[:, s].mean()), "ci95": ci95(rates[:, s])})
        log.info("T=%d errors=%s", T, np.round(rates.mean(axis=0), 4).tolist())
    return Table("exp_improve", ["T", "steps", "mean_error", "ci95"], rows, config, "T", "fraction misclassified")


def exp_feasibility(config):
    """Two equal clusters on a raster of ``(p12, p21)``; mean errors next to the theoretical ``I``."""
    alpha = config.model.alpha if config.model.K == 2 else np.array([0.5, 0.5])
    n = config.n_grid[0]
    T = int(math.floor(n * math.log(n)))
    axis = (np.arange(config.grid_resolution) + 0.5) / config.grid_resolution
    rows = []
    for p12 in axis:
        for p21 in axis:
            model = BmcModel(alpha, two_cluster_p(p12, p21))
            tasks = [(model, n, T, trial_seed(config.seed_base, i), config.improvement_iters, config.spectral_method) for i in range(config.trials)]
            rates = np.array(_map(_pipeline_task, tasks, config.workers))
            rows.append(
                {
                    "p12": p12,
                    "p21": p21,
                    "I": information_quantity(alpha, model.p).I,
                    "spectral_error": float(rates[:, 0].mean()),
                    "final_error": float(rates[:, -1].mean()),
                    "trials": config.trials,
                }
            )
    return Table("exp_feasibility", ["p12", "p21", "I", "spectral_error", "final_error", "trials"], rows, config, "p12", "p21")


def _norm_task(args):
    model, n, T, seed = args
    kernel = model.kernel(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrimClampWarning)
        return spectral_noise_norm(simulate_counts(kernel, T, seed), kernel)


@dataclass(frozen=True)
class LinearFit:
    intercept: float
    slope: float
    r2: float


def fit_sqrt_scaling(x, y):
    """Least-squares fit ``y ~ c1 + c2 x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / total if total > 0 else 1.0
    return LinearFit(float(coef[0]), float(coef[1]), float(r2))


def exp_spectral_norm(config):
    """Mean noise norm per ``n`` and its fit against ``sqrt(T/n)``."""
    rows = []
    for n in config.n_grid:
        for T in trajectory_lengths(config.t_rule, n):
            tasks = [(config.model, n, T, trial_seed(config.seed_base, i)) for i in range(config.trials)]
            norms = _map(_norm_task, tasks, config.workers)
            rows.append(
                {"n": n, "T": T, "sqrt_T_over_n": math.sqrt(T / n), "mean_norm": float(np.mean(norms)), "ci95": ci95(norms), "trials": config.trials}
            )
    fit = fit_sqrt_scaling([r["sqrt_T_over_n"] for r in rows], [r["mean_norm"] for r in rows])
    table = Table("exp_norm", ["n", "T", "mean_norm", "ci95", "trials", "sqrt_T_over_n"], rows, config, "n", "spectral norm")
    return table, fit


def raster_table(alpha, resolution, threshold=1.0):
    from .info import feasibility_raster

    axis, values, mask = feasibility_raster(alpha, resolution, threshold)
    rows = [
        {"p12": axis[i], "p21": axis[j], "I": values[i, j], "feasible": bool(mask[i, j])}
        for i in range(axis.size)
        for j in range(axis.size)
    ]
    return Table("raster", ["p12", "p21", "I", "feasible"], rows, None, "p12", "p21")
