"""Prediction quality metrics (R-squared, Gaussian KDE) and runtime reports."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EvalError
from .nn.models import ModelConfig, model_forward_infer
from .preprocess import Standardizer, make_windows, unwindow_aligned
from .traceio import SampleTable

KDE_BANDWIDTH_FLOOR = 1e-9


def r_squared(pred: np.ndarray, actual: np.ndarray) -> float:
    """1 - SS_res / SS_tot on original-scale values; negative is legal."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or actual.size < 2:
        raise EvalError("pred and actual must have equal length >= 2")
    ss_tot = float(((actual - actual.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise EvalError("actual values are constant; R-squared denominator undefined")
    ss_res = float(((actual - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def silverman_bandwidth(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    std = values.std()
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(std, (q75 - q25) / 1.34)
    return max(0.9 * spread * len(values) ** (-0.2), KDE_BANDWIDTH_FLOOR)


def kde(values: np.ndarray, grid: np.ndarray, bandwidth: float | None = None) -> np.ndarray:
    """Gaussian-kernel density of `values` evaluated on `grid`."""
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if values.size < 2:
        raise EvalError("kde needs at least 2 values")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(values)
    elif bandwidth <= 0:
        raise EvalError("bandwidth must be positive")
    z = (grid[:, None] - values[None, :]) / bandwidth
    return np.exp(-0.5 * z**2).sum(axis=1) / (values.size * bandwidth * np.sqrt(2 * np.pi))


def default_grid(values: np.ndarray, n_points: int = 256) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    bw = silverman_bandwidth(values)
    lo = values.min() - 6 * bw
    hi = values.max() + 6 * bw
    return np.linspace(lo, hi, n_points)


@dataclass
class KdeCurve:
    grid: np.ndarray
    target_density: np.ndarray
    predicted_density: np.ndarray


@dataclass
class EvalReport:
    scenario: str
    r2: dict[str, float]
    kde_curves: dict[str, KdeCurve]
    surrogate_seconds: float
    n_rows: int
    config: dict = field(default_factory=dict)
    seed: int = 0


def predict_rows(config: ModelConfig, params: dict[str, np.ndarray],
                 table: SampleTable, feature_std: Standardizer,
                 target_std: Standardizer) -> tuple[np.ndarray, float]:
    """Original-scale predictions aligned with table rows, plus wall-clock."""
    t0 = time.perf_counter()
    scaled = SampleTable(
        scenario=table.scenario,
        simulation_ids=table.simulation_ids,
        job_indices=table.job_indices,
        features=feature_std.transform(table.features),
        targets=np.zeros_like(table.targets),
        feature_names=table.feature_names,
        target_names=table.target_names,
    )
    batch = make_windows(scaled, config.window_size, config.window_overlap)
    preds = np.empty((len(batch), config.window_size, config.output_dim))
    # outputs are per-window, so inference may batch wider than training did
    step = max(256, config.batch_size)
    for start in range(0, len(batch), step):
        ix = np.arange(start, min(start + step, len(batch)))
        sub = batch.select(ix)
        preds[ix] = model_forward_infer(config, params, sub.windows, sub.mask)
    out = unwindow_aligned(preds, batch.provenance,
                           table.simulation_ids, table.job_indices)
    out = target_std.inverse_transform(out)
    return out, time.perf_counter() - t0


def evaluate_model(config: ModelConfig, params: dict[str, np.ndarray],
                   table: SampleTable, feature_std: Standardizer,
                   target_std: Standardizer, seed: int = 0) -> EvalReport:
    preds, seconds = predict_rows(config, params, table, feature_std, target_std)
    r2: dict[str, float] = {}
    curves: dict[str, KdeCurve] = {}
    for j, name in enumerate(table.target_names):
        actual = table.targets[:, j]
        predicted = preds[:, j]
        r2[name] = r_squared(predicted, actual)
        grid = default_grid(actual)
        curves[name] = KdeCurve(
            grid=grid,
            target_density=kde(actual, grid),
            predicted_density=kde(predicted, grid),
        )
    return EvalReport(
        scenario=table.scenario,
        r2=r2,
        kde_curves=curves,
        surrogate_seconds=seconds,
        n_rows=len(table),
        config=config.to_dict(),
        seed=seed,
    )


def speedup_report(sim_rows: list[dict], surrogate_rows: list[dict]) -> list[dict]:
    """Merge simulator and surrogate timings keyed by (scenario, n_jobs)."""
    if not sim_rows or not surrogate_rows:
        raise EvalError("both timing sets must be nonempty")
    sim = {(r["scenario"], int(r["n_jobs"])): float(r["seconds"]) for r in sim_rows}
    sur = {(r["scenario"], int(r["n_jobs"])): float(r["seconds"]) for r in surrogate_rows}
    missing = sorted(set(sim) ^ set(sur))
    if missing:
        raise EvalError(f"timing key mismatch: {missing[:10]}")
    return [
        {
            "scenario": scenario,
            "n_jobs": n_jobs,
            "simulator_seconds": sim[(scenario, n_jobs)],
            "surrogate_seconds": sur[(scenario, n_jobs)],
            "speedup": sim[(scenario, n_jobs)] / sur[(scenario, n_jobs)],
        }
        for (scenario, n_jobs) in sorted(sim)
    ]


def write_report(outdir: str | Path, report: EvalReport) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "r2.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "r_squared"])
        for name, value in report.r2.items():
            w.writerow([name, repr(value)])
    for name, curve in report.kde_curves.items():
        with open(outdir / f"kde_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["grid", "target_density", "predicted_density"])
            for g, t, p in zip(curve.grid, curve.target_density, curve.predicted_density):
                w.writerow([repr(float(g)), repr(float(t)), repr(float(p))])
    summary = {
        "scenario": report.scenario,
        "r2": report.r2,
        "surrogate_seconds": report.surrogate_seconds,
        "n_rows": report.n_rows,
        "config": report.config,
        "seed": report.seed,
    }
    (outdir / "report.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")


def write_speedup_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n_jobs", "simulator_seconds", "surrogate_seconds", "speedup"])
        for r in rows:
            w.writerow([r["scenario"], r["n_jobs"], repr(r["simulator_seconds"]),
                        repr(r["surrogate_seconds"]), repr(r["speedup"])])
