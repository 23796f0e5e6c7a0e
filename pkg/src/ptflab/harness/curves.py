"""Learning curves over seeds: mean, 95% band, option-switch trend."""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from ..errors import ConfigurationError
from .metrics import read_metrics
from .policyfile import atomic_write

DEFAULT_WINDOW = 100
PLOT_SUFFIXES = (".png", ".svg", ".pdf")


def smooth(series, window):
    """Trailing moving average; the first entries average what exists so far."""
    x = np.asarray(series, dtype=np.float64)
    if window <= 1 or len(x) == 0:
        return x.copy()
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def mean_band(rows, level=0.95):
    """Column-wise mean and Student-t confidence half-width over ``rows``."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    mean = rows.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    sem = rows.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, stats.t.ppf(0.5 + level / 2, n - 1) * sem


def trend_slope(series):
    """Least-squares slope of ``series`` against its index."""
    y = np.asarray(series, dtype=np.float64)
    if len(y) < 2:
        return 0.0
    x = np.arange(len(y), dtype=np.float64)
    x -= x.mean()
    return float((x * (y - y.mean())).sum() / (x * x).sum())


@dataclass
class Curves:
    seeds: list
    episodes: int
    window: int
    mean: np.ndarray
    half: np.ndarray
    switch_mean: np.ndarray
    switch_half: np.ndarray
    weight_mean: np.ndarray
    switch_slope: float


def aggregate(runs, window=DEFAULT_WINDOW):
    """``runs`` maps seed -> list of MetricsRecord."""
    if not runs:
        raise ConfigurationError("no metrics to aggregate")
    seeds = sorted(runs)
    lengths = {s: len(runs[s]) for s in seeds}
    n = min(lengths.values())
    if n == 0:
        raise ConfigurationError("a metrics file holds no episodes")
    if len(set(lengths.values())) > 1:
        warnings.warn(f"episode counts differ across seeds {lengths}; truncating to {n}",
                      stacklevel=2)
    ret = [smooth([r.discounted_return for r in runs[s][:n]], window) for s in seeds]
    sw_raw = np.array([[r.switches for r in runs[s][:n]] for s in seeds], dtype=np.float64)
    sw = [smooth(row, window) for row in sw_raw]
    wt = np.array([[r.mean_weight for r in runs[s][:n]] for s in seeds])
    mean, half = mean_band(ret)
    sm, sh = mean_band(sw)
    return Curves(seeds, n, window, mean, half, sm, sh, wt.mean(axis=0),
                  trend_slope(sw_raw.mean(axis=0)))


def format_curves(c):
    buf = io.StringIO()
    buf.write("# ptflab curves\n")
    buf.write(f"# seeds = {','.join(str(s) for s in c.seeds)}\n")
    buf.write(f"# episodes = {c.episodes}\n")
    buf.write(f"# smoothing_window = {c.window}\n")
    buf.write("# band = 95% Student-t interval over seeds\n")
    buf.write(f"# switch_slope = {c.switch_slope!r}\n")
    buf.write("episode,mean_return,band_low,band_high,mean_switches,switches_low,"
              "switches_high,mean_weight\n")
    for i in range(c.episodes):
        vals = (c.mean[i], c.mean[i] - c.half[i], c.mean[i] + c.half[i], c.switch_mean[i],
                c.switch_mean[i] - c.switch_half[i], c.switch_mean[i] + c.switch_half[i],
                c.weight_mean[i])
        buf.write(f"{i + 1}," + ",".join(repr(float(v)) for v in vals) + "\n")
    return buf.getvalue()


def load_runs(in_dir):
    files = sorted(Path(in_dir).glob("metrics_*.csv"))
    if not files:
        raise ConfigurationError(f"no metrics_*.csv files in {in_dir}")
    runs = {}
    for f in files:
        _, records = read_metrics(f)
        if not records:
            continue
        seed = records[0].seed
        if seed in runs:
            raise ConfigurationError(f"seed {seed} appears in more than one metrics file")
        runs[seed] = records
    if not runs:
        raise ConfigurationError(f"metrics files in {in_dir} hold no episodes")
    return runs


def plot_curves(c, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.arange(1, c.episodes + 1)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(x, c.mean, lw=1.2)
    ax1.fill_between(x, c.mean - c.half, c.mean + c.half, alpha=0.3, lw=0)
    ax1.set_ylabel("discounted return")
    ax1.set_title(f"{len(c.seeds)} seeds, smoothing {c.window}")
    ax2.plot(x, c.switch_mean, lw=1.2, color="tab:orange")
    ax2.fill_between(x, c.switch_mean - c.switch_half, c.switch_mean + c.switch_half,
                     alpha=0.3, lw=0, color="tab:orange")
    ax2.set_ylabel("option switches")
    ax2.set_xlabel("episode")
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format=Path(path).suffix[1:], metadata=_plot_metadata(path))
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def _plot_metadata(path):
    # Strip timestamps/software tags so repeated plots are byte-identical.
    suffix = Path(path).suffix
    if suffix == ".png":
        return {"Software": None}
    if suffix == ".svg":
        return {"Date": None}
    return {"CreationDate": None, "Producer": None}


def emit_curves(in_dir, out, window=DEFAULT_WINDOW):
    """Aggregate every metrics file in ``in_dir``.

    ``out`` ending in .png/.svg/.pdf gets the plot and a sibling .csv; any
    other name gets the CSV and a sibling .png.  Returns both paths.
    """
    out = Path(out)
    curves = aggregate(load_runs(in_dir), window)
    if out.suffix in PLOT_SUFFIXES:
        plot_path, csv_path = out, out.with_suffix(".csv")
    else:
        csv_path, plot_path = out, out.with_suffix(".png")
    atomic_write(csv_path, format_curves(curves))
    plot_curves(curves, plot_path)
    return csv_path, plot_path, curves
