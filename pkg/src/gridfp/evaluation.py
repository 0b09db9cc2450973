"""Test-set metrics: magnitude RMSE, wrapped-angle RMSE, error distributions.

The magnitude metric compares |v| against |v_hat| entrywise, which is a
different quantity from the complex-residual training loss; both exist so
accuracy can be reported the way operators read voltages (magnitude and
angle) while training sees the full phasor.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .errors import DegenerateVoltage, ValidationError
from .loadflow import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE
from .surrogate import SurrogateParams, predict

DEFAULT_HISTOGRAM_BUCKETS = 20


@dataclass(frozen=True)
class EvalReport:
    """Aggregated prediction-accuracy metrics over a test dataset.

    magnitude_errors and angle_errors keep the raw per-sample, per-entry
    deviations (signed magnitude difference, wrapped angle difference) for
    plotting and CSV export; the JSON export carries the summary only.
    """

    rmse_magnitude: float
    rmse_angle: float
    per_bus_max_abs_error: np.ndarray
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    mean_predict_ms: float
    n_samples: int
    n_excluded: int
    magnitude_errors: np.ndarray
    angle_errors: np.ndarray


def error_histogram(errors, n_buckets: int, log_scale: bool = False):
    """Bucket a list of nonnegative errors; returns (counts, edges).

    Linear buckets span [0, max]; log buckets span the positive error
    range, with zeros folded into the lowest bucket. Counts always sum to
    the input length.
    """
    if n_buckets < 1:
        raise ValidationError("n_buckets must be >= 1")
    errors = np.asarray(errors, dtype=np.float64).ravel()
    if errors.size == 0:
        return np.zeros(n_buckets, dtype=np.int64), np.linspace(0.0, 1.0, n_buckets + 1)
    if log_scale:
        positive = errors[errors > 0]
        if positive.size == 0:
            counts = np.zeros(n_buckets, dtype=np.int64)
            counts[0] = errors.size
            return counts, np.logspace(-16, -16 + n_buckets, n_buckets + 1)
        lo, hi = float(positive.min()), float(positive.max())
        if hi <= lo:
            hi = lo * 10.0
        edges = np.logspace(np.log10(lo), np.log10(hi), n_buckets + 1)
        counts, _ = np.histogram(np.clip(errors, lo, hi), bins=edges)
        return counts.astype(np.int64), edges
    hi = float(errors.max())
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(errors, bins=n_buckets, range=(0.0, hi))
    return counts.astype(np.int64), edges


def evaluate(
    params: SurrogateParams,
    test: Dataset,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    n_buckets: int = DEFAULT_HISTOGRAM_BUCKETS,
    log_scale_histogram: bool = False,
) -> EvalReport:
    """Predict every test sample and aggregate accuracy metrics.

    Samples whose prediction degenerates are excluded from the metrics and
    counted in n_excluded. Angle differences are wrapped to (-pi, pi].
    """
    if test.n_samples == 0:
        raise ValidationError("test dataset must be non-empty")
    if 3 * params.n_buses != test.voltages.shape[1]:
        raise ValidationError("parameter and dataset sizes differ")
    mag_rows, ang_rows = [], []
    elapsed = 0.0
    excluded = 0
    for j in range(test.n_samples):
        inj, v_true = test.sample(j)
        t0 = time.perf_counter()
        try:
            tape = predict(params, inj, tolerance, max_iterations)
        except DegenerateVoltage:
            excluded += 1
            continue
        elapsed += time.perf_counter() - t0
        v_hat = tape.prediction
        mag_rows.append(np.abs(v_true) - np.abs(v_hat))
        ang_rows.append(np.angle(v_true * np.conj(v_hat)))
    if not mag_rows:
        raise ValidationError("every test sample was excluded as degenerate")
    mag = np.array(mag_rows)
    ang = np.array(ang_rows)
    counts, edges = error_histogram(np.abs(mag), n_buckets, log_scale_histogram)
    return EvalReport(
        rmse_magnitude=float(np.sqrt(np.mean(mag**2))),
        rmse_angle=float(np.sqrt(np.mean(ang**2))),
        per_bus_max_abs_error=np.abs(mag).max(axis=0),
        histogram_counts=counts,
        histogram_edges=edges,
        mean_predict_ms=1e3 * elapsed / len(mag_rows),
        n_samples=test.n_samples,
        n_excluded=excluded,
        magnitude_errors=mag,
        angle_errors=ang,
    )


def save_report(report: EvalReport, path) -> None:
    """Write the metric summary as JSON (raw error matrices go to CSV)."""
    payload = {
        "rmse_magnitude": report.rmse_magnitude,
        "rmse_angle": report.rmse_angle,
        "per_bus_max_abs_error": report.per_bus_max_abs_error.tolist(),
        "histogram_counts": report.histogram_counts.tolist(),
        "histogram_edges": report.histogram_edges.tolist(),
        "mean_predict_ms": report.mean_predict_ms,
        "n_samples": report.n_samples,
        "n_excluded": report.n_excluded,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def write_entry_errors_csv(report: EvalReport, path) -> None:
    """Flat per-entry error table: one row per (sample, entry)."""
    with open(path, "w") as fh:
        fh.write("sample,entry,magnitude_error,angle_error\n")
        for s in range(report.magnitude_errors.shape[0]):
            for e in range(report.magnitude_errors.shape[1]):
                fh.write(
                    f"{s},{e},{report.magnitude_errors[s, e]!r},"
                    f"{report.angle_errors[s, e]!r}\n"
                )
