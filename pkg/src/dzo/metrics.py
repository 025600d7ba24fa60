"""Performance functionals, traces and empirical rate fits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, FitError

__all__ = [
    "TRACE_COLUMNS",
    "Trace",
    "RateFit",
    "mean_iterate",
    "consensus_error",
    "update_regret",
    "update_average",
    "loglog_fit",
    "fit_rate",
    "fit_rate_columns",
    "aggregate_traces",
    "format_float",
]

TRACE_COLUMNS = ("t", "eta", "h", "f_mean_err", "f_avg_err", "cum_regret", "consensus_e")


def mean_iterate(states) -> np.ndarray:
    """Average of the agent states over the agent axis (second to last)."""
    return np.asarray(states, dtype=float).mean(axis=-2)


def consensus_error(states) -> np.ndarray:
    """``sum_i |x^i - xbar|^2``."""
    x = np.asarray(states, dtype=float)
    dev = x - x.mean(axis=-2, keepdims=True)
    return np.einsum("...ij,...ij->...", dev, dev)


def update_regret(acc, f_mean_err):
    return acc + f_mean_err


def update_average(avg, xbar, t: int):
    """Running average ``xhat <- xhat + (xbar - xhat) / t``."""
    if t < 1:
        raise ConfigError("running averages start at t = 1")
    return avg + (np.asarray(xbar) - avg) / t


def format_float(v: float) -> str:
    # shortest round-trip decimal
    return repr(float(v))


@dataclass
class Trace:
    """Time-indexed record of one run; columns as float arrays keyed by name."""

    columns: dict = field(default_factory=dict)
    config_hash: str = ""
    seed: int = 0

    def __post_init__(self):
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns.get("t", ()))

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i in range(len(self)):
            row = [str(int(self.columns["t"][i]))]
            row += [format_float(self.columns[c][i]) for c in TRACE_COLUMNS[1:]]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, config_hash: str = "", seed: int = 0) -> "Trace":
        return cls(read_csv_columns(text), config_hash, seed)

    def equals(self, other: "Trace") -> bool:
        return (self.columns.keys() == other.columns.keys()
                and all(np.array_equal(self.columns[k], other.columns[k]) for k in self.columns))


def read_csv_columns(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ConfigError("empty CSV")
    header, body = rows[0], rows[1:]
    cols = {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
    return cols


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    window: tuple[float, float]
    r_squared: float
    n_points: int

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "window": list(self.window),
                "r_squared": self.r_squared, "n_points": self.n_points}


def loglog_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``log y = slope * log x + intercept``; returns ``(slope, intercept, r^2)``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise FitError("need at least two points for a log-log fit")
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def fit_rate_columns(t, values, tail_fraction: float = 0.5, min_points: int = 5) -> RateFit:
    """Fit ``values ~ t^slope`` over the last ``tail_fraction`` of the records.

    Nonpositive values in the window are dropped.
    """
    if not (0.0 < tail_fraction <= 1.0):
        raise FitError("tail_fraction must lie in (0, 1]")
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    n = t.size
    start = n - max(1, int(math.ceil(tail_fraction * n)))
    tw, vw = t[start:], v[start:]
    keep = (vw > 0) & np.isfinite(vw) & (tw > 0)
    tw, vw = tw[keep], vw[keep]
    if tw.size < min_points:
        raise FitError(f"only {tw.size} positive samples in the fit window (need {min_points})")
    slope, intercept, r2 = loglog_fit(tw, vw)
    return RateFit(slope, intercept, (float(tw[0]), float(tw[-1])), r2, int(tw.size))


def fit_rate(trace, column: str, tail_fraction: float = 0.5) -> RateFit:
    """Rate fit of one trace column against ``t``."""
    cols = trace.columns if isinstance(trace, Trace) else trace
    if column not in cols:
        raise ConfigError(f"column {column!r} not in trace (have {sorted(cols)})")
    return fit_rate_columns(cols["t"], cols[column], tail_fraction)


def aggregate_traces(traces: Sequence[Trace]) -> dict:
    """Per-``t`` mean and standard error (sample SD / sqrt(k)) of every column."""
    k = len(traces)
    if k < 1:
        raise ConfigError("nothing to aggregate")
    t = traces[0].t
    for tr in traces[1:]:
        if not np.array_equal(tr.t, t):
            raise ConfigError("traces must share the same t grid")
    out = {"t": t}
    for c in TRACE_COLUMNS[1:]:
        stack = np.vstack([tr[c] for tr in traces])
        # mean as first row plus mean deviation: exact when all rows agree
        dev = stack - stack[0]
        mean = stack[0] + dev.mean(axis=0)
        out[f"{c}_mean"] = mean
        out[f"{c}_stderr"] = (dev.std(axis=0, ddof=1) / math.sqrt(k)) if k > 1 else np.zeros_like(t)
    return out


def aggregate_to_csv(agg: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(agg)
    w.writerow(names)
    for i in range(len(agg["t"])):
        w.writerow([str(int(agg["t"][i]))] + [format_float(agg[n][i]) for n in names[1:]])
    return buf.getvalue()
