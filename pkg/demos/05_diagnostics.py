"""
Signal diagnostics for a station series
=======================================

Periodogram with a LOESS trend line, band-pass envelopes for the daily and
mid-term bands, autocorrelation with white-noise bounds, and rolling
volatility anomalies.
"""

# %%
import numpy as np

from xfmnet.diagnostics import BANDS, acf, butterworth_bandpass, hilbert_envelope, periodogram, rolling_anomalies
from xfmnet.synthetic import synthetic_generate

data = synthetic_generate(0)
x = data.series[:, 0]

pg = periodogram(x - x.mean())
top = np.argsort(np.nan_to_num(pg.power, nan=-1))[::-1][:3]
print("strongest period bins (days):", pg.period_days[top].astype(int))
print("true mid-term period of station 1 (days):", round(data.components["midterm_period"][0] / 6, 2))

# %%
for name, (lo, hi) in BANDS.items():
    env = hilbert_envelope(butterworth_bandpass(x, lo, hi))
    print(f"{name:8s} band {lo:.3f}-{hi:.3f} cycles/day: median envelope {np.median(env):.3f}")

# %%
r = acf(x)
print("lag-6 autocorrelation (one day):", round(float(r.values[5]), 3), "bound", round(r.bound, 4))

rep = rolling_anomalies(x)
print(f"{rep.anomaly_count} anomalies in {len(x)} steps; first few at", rep.anomalies[:5])
rain_near = [int(data.rain[max(0, t - 40) : t].sum() > 0) for t in rep.anomalies]
print(f"share of anomalies preceded by rain within 40 steps: {np.mean(rain_near):.2f}")
