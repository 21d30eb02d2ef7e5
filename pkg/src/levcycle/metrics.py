"""Run summary statistics: coefficient of variation, run classification,
boom-crash cycle detection and asset/leverage co-movement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError

CV_BANKRUPT = 1.0e4        # substitution value when the bank went bankrupt
CV_UNSTABLE = 1.0e5        # substitution value when the dynamics blew up
STABLE_CV_THRESHOLD = 10.0 ** -1.5


def coefficient_of_variation(series: np.ndarray, burn_in: float = 0.2) -> float:
    """Population sigma/mu of the series after dropping the first burn_in fraction."""
    if not 0.0 <= burn_in < 1.0:
        raise MetricError(f"burn-in fraction {burn_in} outside [0, 1)")
    series = np.asarray(series, dtype=float)
    tail = series[int(burn_in * series.shape[0]):]
    if tail.shape[0] < 2:
        raise MetricError("need at least two points after burn-in")
    mean = float(tail.mean())
    if mean <= 0.0 or not np.isfinite(mean):
        raise MetricError(f"series mean {mean} is not usable")
    return float(tail.std()) / mean


@dataclass
class Classification:
    label: str      # stable | cyclic | bankrupt | unstable
    cv: float       # reported CV, substitution values included


def classify_run(status: str, price_series: np.ndarray,
                 burn_in: float = 0.2) -> Classification:
    """Map a finished or flagged run to the four-way classification.

    Unstable runs report CV 1e5, bankrupt runs 1e4; otherwise the computed CV
    with the stable/cyclic split at 10^-1.5.
    """
    if status == "unstable":
        return Classification("unstable", CV_UNSTABLE)
    if status == "bankrupt":
        return Classification("bankrupt", CV_BANKRUPT)
    try:
        cv = coefficient_of_variation(price_series, burn_in)
    except MetricError:
        return Classification("unstable", CV_UNSTABLE)
    label = "stable" if cv < STABLE_CV_THRESHOLD else "cyclic"
    return Classification(label, cv)


@dataclass
class CycleSummary:
    peak_count: int
    mean_amplitude: float     # mean peak-to-trough drop
    mean_period: float        # mean spacing between detected peaks
    peak_times: np.ndarray
    peak_heights: np.ndarray


def cycle_detect(series: np.ndarray, threshold: float = 0.25) -> CycleSummary:
    """Count boom-crash cycles: local maxima exceeding (1 + threshold) times the
    subsequent local minimum. Plateaus collapse to single extrema."""
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 10:
        raise MetricError("need at least ten points for cycle detection")
    keep = np.concatenate(([True], np.diff(series) != 0.0))
    values = series[keep]
    times = np.arange(series.shape[0])[keep]

    ext_t, ext_v, ext_kind = [], [], []
    for k in range(1, values.shape[0] - 1):
        if values[k] > values[k - 1] and values[k] > values[k + 1]:
            ext_t.append(times[k]); ext_v.append(values[k]); ext_kind.append(1)
        elif values[k] < values[k - 1] and values[k] < values[k + 1]:
            ext_t.append(times[k]); ext_v.append(values[k]); ext_kind.append(-1)

    peak_t, peak_v, amplitudes = [], [], []
    for k, kind in enumerate(ext_kind):
        if kind != 1:
            continue
        for j in range(k + 1, len(ext_kind)):
            if ext_kind[j] == -1:
                if ext_v[k] > (1.0 + threshold) * ext_v[j]:
                    peak_t.append(ext_t[k])
                    peak_v.append(ext_v[k])
                    amplitudes.append(ext_v[k] - ext_v[j])
                break

    peak_times = np.asarray(peak_t, dtype=int)
    return CycleSummary(
        peak_count=len(peak_t),
        mean_amplitude=float(np.mean(amplitudes)) if amplitudes else 0.0,
        mean_period=float(np.mean(np.diff(peak_times))) if len(peak_t) > 1 else 0.0,
        peak_times=peak_times,
        peak_heights=np.asarray(peak_v, dtype=float),
    )


def asset_leverage_correlation(assets: np.ndarray, leverage: np.ndarray) -> float:
    """Pearson correlation of log changes in assets vs log changes in leverage."""
    assets = np.asarray(assets, dtype=float)
    leverage = np.asarray(leverage, dtype=float)
    valid = (assets > 0.0) & (leverage > 0.0)
    ok = valid[:-1] & valid[1:]
    if ok.sum() < 10:
        raise MetricError("need at least ten valid steps")
    d_log_a = np.diff(np.log(assets))[ok]
    d_log_l = np.diff(np.log(leverage))[ok]
    if d_log_a.std() == 0.0 or d_log_l.std() == 0.0:
        raise MetricError("degenerate variance in log changes")
    return float(np.corrcoef(d_log_a, d_log_l)[0, 1])


def rank_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation with average ranks for ties."""
    return float(np.corrcoef(_ranks(np.asarray(x, dtype=float)),
                             _ranks(np.asarray(y, dtype=float)))[0, 1])


def _ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0])
    ranks[order] = np.arange(1, x.shape[0] + 1, dtype=float)
    # average ranks within tied groups
    sorted_x = x[order]
    i = 0
    while i < sorted_x.shape[0]:
        j = i
        while j + 1 < sorted_x.shape[0] and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def peak_height_trend(series: np.ndarray, threshold: float = 0.25,
                      skip: int = 0) -> tuple[float, float]:
    """Least-squares slope of detected peak heights over time and its t-statistic."""
    summary = cycle_detect(np.asarray(series, dtype=float)[skip:], threshold)
    if summary.peak_count < 3:
        raise MetricError("need at least three peaks for a trend")
    t = summary.peak_times.astype(float)
    h = summary.peak_heights
    design = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, h, rcond=None)
    resid = h - design @ coef
    dof = t.shape[0] - 2
    if dof <= 0:
        raise MetricError("not enough peaks for a standard error")
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((t - t.mean()) ** 2))
    if sxx == 0.0 or s2 == 0.0:
        return float(coef[0]), np.inf if coef[0] != 0 else 0.0
    se = np.sqrt(s2 / sxx)
    return float(coef[0]), float(coef[0] / se)
