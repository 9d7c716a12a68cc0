"""Signal diagnostics for multi-station series and fusion-stage activations.

Spectral content is summarised by a periodogram rebinned to whole-day
periods with a LOESS overlay; daily and mid-term bands are isolated with
zero-phase Butterworth filters whose Hilbert envelopes track amplitude;
serial structure is read from the sample autocorrelation; volatility is
monitored with a trailing rolling window. Fusion probes are summarised as
channel correlation matrices and activation grids.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import signal
from statsmodels.nonparametric.smoothers_lowess import lowess
from statsmodels.tsa.stattools import acf as _sm_acf

SAMPLES_PER_DAY = 6.0
BANDS = {"daily": (0.8, 1.2), "midterm": (1 / 20, 1 / 10)}


# -- spectrum ---------------------------------------------------------------


def raw_periodogram(x, fs: float = SAMPLES_PER_DAY) -> tuple[np.ndarray, np.ndarray]:
    """One-sided ``|FFT|^2 / N`` with non-edge bins doubled, so ``power.sum() == sum(x**2)``.

    Returns frequencies in cycles per day and the power at each.
    """
    x = np.asarray(x, dtype=np.float64)
    N = len(x)
    X = np.fft.rfft(x)
    power = np.abs(X) ** 2 / N
    if N % 2 == 0:
        power[1:-1] *= 2
    else:
        power[1:] *= 2
    return np.fft.rfftfreq(N, d=1.0 / fs), power


@dataclass
class Periodogram:
    period_days: np.ndarray  # bin centres 0, 1, ..., max_days
    power: np.ndarray  # mean raw power of the frequencies falling in each bin (nan if none)
    loess: np.ndarray  # smoothed power at each bin centre (nan where power is nan)
    counts: np.ndarray  # frequencies per bin


def periodogram(x, fs: float = SAMPLES_PER_DAY, max_days: int = 30, span: float = 0.3) -> Periodogram:
    """Periodogram rebinned to 1-day period resolution over ``[0, max_days]`` days.

    Bin ``j`` collects every positive frequency whose period lies in
    ``[j - 0.5, j + 0.5)`` days and reports their mean power, so bins with
    many frequencies are not favoured. A LOESS curve (tricube weights, local
    linear, ``span`` of the points, one robustness pass) is fitted over the
    non-empty bins.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 64:
        raise ValueError(f"periodogram needs at least 64 samples, got {len(x)}")
    freqs, power = raw_periodogram(x, fs)
    if np.allclose(x, x[0]):
        warnings.warn("constant series: all power sits at zero frequency", RuntimeWarning, stacklevel=2)
    periods = 1.0 / freqs[1:]
    bins = np.floor(periods + 0.5).astype(np.int64)
    keep = bins <= max_days
    counts = np.bincount(bins[keep], minlength=max_days + 1)
    sums = np.bincount(bins[keep], weights=power[1:][keep], minlength=max_days + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        binned = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centers = np.arange(max_days + 1, dtype=np.float64)
    smooth = np.full_like(binned, np.nan)
    ok = np.isfinite(binned)
    if ok.sum() >= 3:
        smooth[ok] = lowess(binned[ok], centers[ok], frac=span, it=1, return_sorted=False)
    return Periodogram(centers, binned, smooth, counts)


# -- band-pass and envelope ---------------------------------------------------


def butterworth_bandpass(x, low_cpd: float, high_cpd: float, order: int = 4, fs: float = SAMPLES_PER_DAY) -> np.ndarray:
    """Zero-phase (forward-backward) Butterworth band-pass; band edges in cycles per day."""
    if not 0 < low_cpd < high_cpd < fs / 2:
        raise ValueError(f"band [{low_cpd}, {high_cpd}] must satisfy 0 < low < high < Nyquist ({fs / 2})")
    x = np.asarray(x, dtype=np.float64)
    sos = signal.butter(order, [low_cpd, high_cpd], btype="bandpass", fs=fs, output="sos")
    return signal.sosfiltfilt(sos, x)


def hilbert_envelope(x) -> np.ndarray:
    """Instantaneous amplitude ``|x + i H(x)|`` of the FFT-based analytic signal."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 16:
        raise ValueError(f"envelope needs at least 16 samples, got {len(x)}")
    return np.abs(signal.hilbert(x))


# -- serial dependence --------------------------------------------------------


@dataclass
class ACFResult:
    lags: np.ndarray
    values: np.ndarray
    bound: float  # 1.96 / sqrt(N), the white-noise 95% band


def acf(x, max_lag: int = 25) -> ACFResult:
    """Biased sample autocorrelation for lags ``1..max_lag`` with the white-noise 95% bound."""
    x = np.asarray(x, dtype=np.float64)
    N = len(x)
    if N <= max_lag:
        raise ValueError(f"series of length {N} is too short for max_lag={max_lag}")
    if np.var(x) == 0:
        raise ValueError("autocorrelation is undefined for a zero-variance series")
    r = _sm_acf(x, nlags=max_lag, adjusted=False, fft=True)
    return ACFResult(np.arange(1, max_lag + 1), r[1:], 1.96 / np.sqrt(N))


# -- volatility -------------------------------------------------------------


@dataclass
class VolatilityReport:
    rolling_std: np.ndarray  # nan for the first window - 1 steps
    anomalies: np.ndarray  # indices flagged
    hist_counts: np.ndarray
    hist_edges: np.ndarray

    @property
    def anomaly_count(self) -> int:
        return len(self.anomalies)


def rolling_anomalies(x, window: int = 48, k_sigma: float = 3.0, bins: int = 20) -> VolatilityReport:
    """Flag ``|x_t - mean_t| > k_sigma * std_t`` over trailing windows ``x[t - window + 1 .. t]``.

    Population (``ddof=0``) moments are used. Steps whose window has zero
    spread are skipped, and the first ``window - 1`` steps have no estimate.
    """
    x = np.asarray(x, dtype=np.float64)
    N = len(x)
    if window >= N:
        raise ValueError(f"window {window} must be shorter than the series ({N})")
    if window < 2:
        raise ValueError("window must hold at least two points")
    win = np.lib.stride_tricks.sliding_window_view(x, window)
    mean = win.mean(axis=1)
    std = win.std(axis=1)
    dev = np.abs(x[window - 1 :] - mean)
    flagged = (std > 0) & (dev > k_sigma * std)
    rolling = np.full(N, np.nan)
    rolling[window - 1 :] = std
    counts, edges = np.histogram(std, bins=bins)
    return VolatilityReport(rolling, np.flatnonzero(flagged) + window - 1, counts, edges)


# -- fusion probes ------------------------------------------------------------


@dataclass
class StageSummary:
    corr: np.ndarray  # d x d Pearson correlation across time
    degenerate: np.ndarray  # per channel: True if zero variance (its entries are set to 0)
    activation: np.ndarray  # T x d absolute activations for one sample


def channel_correlation(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation between the channels of ``z [T, d]``; zero-variance channels get 0."""
    z = np.asarray(z, dtype=np.float64)
    zc = z - z.mean(axis=0)
    norm = np.sqrt((zc * zc).sum(axis=0))
    degenerate = norm == 0
    safe = np.where(degenerate, 1.0, norm)
    corr = (zc.T @ zc) / np.outer(safe, safe)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    return np.clip(corr, -1.0, 1.0), degenerate


def feature_evolution(probes: Mapping[str, np.ndarray], sample: int = 0) -> dict[str, StageSummary]:
    """Summaries per stage from probe arrays shaped ``[B, T, d]`` or ``[T, d]``.

    The correlation pools every sample's time steps; the activation grid is
    ``|z|`` for the chosen sample.
    """
    out = {}
    for stage, z in probes.items():
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 2:
            z = z[None]
        corr, degenerate = channel_correlation(z.reshape(-1, z.shape[-1]))
        out[stage] = StageSummary(corr, degenerate, np.abs(z[sample]))
    return out


# -- writers --------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def stage_file_label(stage: str) -> str:
    return {"A_t<->i": "A_cross", "S_f": "S_f", "Z_hat": "Z_hat"}.get(stage, stage)


def write_feature_evolution(out_dir: str | Path, summaries: Mapping[str, StageSummary], level: int | None = None) -> list[Path]:
    """``stage_corr_<stage>.csv`` (row, col, corr, degenerate) and ``stage_act_<stage>.csv`` grids."""
    out_dir = Path(out_dir)
    written = []
    suffix = "" if level is None else f"_l{level}"
    for stage, s in summaries.items():
        label = stage_file_label(stage) + suffix
        d = s.corr.shape[0]
        rows = [
            (stage, i, j, s.corr[i, j], int(s.degenerate[i] or s.degenerate[j])) for i in range(d) for j in range(d)
        ]
        written.append(write_csv(out_dir / f"stage_corr_{label}.csv", ["stage", "row", "col", "corr", "degenerate"], rows))
        T = s.activation.shape[0]
        act_rows = [(stage, t, *s.activation[t]) for t in range(T)]
        header = ["stage", "t"] + [f"c{c}" for c in range(d)]
        written.append(write_csv(out_dir / f"stage_act_{label}.csv", header, act_rows))
    return written


# -- minimal SVG ---------------------------------------------------------------


def svg_lines(path: str | Path, x, series: Mapping[str, np.ndarray], title: str = "", width: int = 640, height: int = 320) -> Path:
    """Write a bare-bones SVG line chart (no external plotting library)."""
    x = np.asarray(x, dtype=np.float64)
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    finite = [np.asarray(v, dtype=np.float64) for v in series.values()]
    ys = np.concatenate([v[np.isfinite(v)] for v in finite]) if finite else np.zeros(1)
    y_lo, y_hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(np.nanmin(x)), float(np.nanmax(x))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 40

    def px(v):
        return pad + (v - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{pad}" y="20" font-size="14">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#999"/>',
    ]
    for i, (name, v) in enumerate(series.items()):
        v = np.asarray(v, dtype=np.float64)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, v) if np.isfinite(b))
        colour = colours[i % len(colours)]
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 120}" y="{pad + 16 * (i + 1)}" font-size="12" fill="{colour}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return Path(path)


# -- full report ---------------------------------------------------------------


def diagnose_series(series: np.ndarray, out_dir: str | Path, fs: float = SAMPLES_PER_DAY, svg: bool = False) -> list[Path]:
    """Run every diagnostic on each column of ``series [T, M]`` and write the CSV set."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    M = series.shape[1]
    written = []

    pg_rows, acf_rows, vol_rows, anomaly_rows = [], [], [], []
    band_rows = {name: [] for name in BANDS}
    for m in range(M):
        x = series[:, m]
        pg = periodogram(x - x.mean(), fs)
        pg_rows += [(m + 1, p, pw, lo, c) for p, pw, lo, c in zip(pg.period_days, pg.power, pg.loess, pg.counts)]
        for name, (lo, hi) in BANDS.items():
            env = hilbert_envelope(butterworth_bandpass(x, lo, hi, fs=fs))
            band_rows[name] += [(m + 1, t, v) for t, v in enumerate(env)]
        if np.var(x) > 0:
            r = acf(x)
            acf_rows += [(m + 1, lag, v, r.bound) for lag, v in zip(r.lags, r.values)]
        vol = rolling_anomalies(x)
        for b in range(len(vol.hist_counts)):
            vol_rows.append((m + 1, vol.hist_edges[b], vol.hist_edges[b + 1], vol.hist_counts[b], vol.anomaly_count))
        anomaly_rows += [(m + 1, t, x[t], vol.rolling_std[t]) for t in vol.anomalies]

    written.append(write_csv(out_dir / "periodogram.csv", ["station", "period_days", "power", "loess", "n_freqs"], pg_rows))
    for name, rows in band_rows.items():
        written.append(write_csv(out_dir / f"envelope_{name}.csv", ["station", "t", "envelope"], rows))
    written.append(write_csv(out_dir / "acf.csv", ["station", "lag", "acf", "bound_95_white_noise"], acf_rows))
    written.append(
        write_csv(out_dir / "volatility.csv", ["station", "std_lo", "std_hi", "count", "anomalies"], vol_rows)
    )
    written.append(write_csv(out_dir / "anomalies.csv", ["station", "t", "value", "rolling_std"], anomaly_rows))
    if svg:
        pg = periodogram(series[:, 0] - series[:, 0].mean(), fs)
        written.append(svg_lines(out_dir / "periodogram.svg", pg.period_days, {"power": pg.power, "loess": pg.loess}, "station 1 periodogram"))
    return written
