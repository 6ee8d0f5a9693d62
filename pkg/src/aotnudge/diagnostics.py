"""Error bookkeeping, exponential decay fits and the reverse-triangle check."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedFitError
from .spectral import ModeProjection, l2_norm, project

FIT_FLOOR = 1e-15


@dataclass
class ErrorSeries:
    """Time-indexed error channels plus a free-form metadata echo."""

    times: np.ndarray
    channels: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("ErrorSeries times must be strictly increasing")
        for name, v in self.channels.items():
            if v.shape != self.times.shape:
                raise ValueError(f"channel {name!r} has {v.size} samples, expected {self.times.size}")

    def __getitem__(self, name):
        return self.channels[name]

    def __len__(self):
        return self.times.size

    def to_csv(self, path, columns=None) -> None:
        columns = list(columns or self.channels)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + columns)
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(self.channels[c][i])) for c in columns])

    @classmethod
    def from_csv(cls, path, metadata=None) -> "ErrorSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        channels = {name: body[:, i] for i, name in enumerate(header) if i > 0}
        return cls(body[:, 0], channels, dict(metadata or {}))


@dataclass(frozen=True)
class DecayFit:
    channel: str
    rate: float
    intercept: float
    window: tuple
    residual: float
    window_t: tuple

    def as_dict(self) -> dict:
        return {
            "channel": self.channel,
            "rate": self.rate,
            "intercept": self.intercept,
            "residual": self.residual,
            "window": list(self.window),
            "window_t0": self.window_t[0],
            "window_t1": self.window_t[1],
        }


def split_error(u, v, P: ModeProjection):
    """``(||P(u-v)||, ||(I-P)(u-v)||, ||u-v||)`` for two fields on one grid."""
    d = u - v
    low = project(P, d)
    return l2_norm(low), l2_norm(d - low), l2_norm(d)


def fit_decay_rate(series: ErrorSeries, channel: str, window_len: int = 500, floor: float = FIT_FLOOR) -> DecayFit:
    """Least-squares slope of ``log(err)`` against ``t`` over the last ``window_len`` samples.

    Samples at or below ``floor`` are dropped so the machine-precision plateau
    does not bend the fit.
    """
    y = series[channel]
    n = y.size
    start = max(0, n - int(window_len))
    t = series.times[start:]
    w = y[start:]
    keep = w > floor
    if np.count_nonzero(keep) < 2:
        raise UndefinedFitError(f"channel {channel!r} has fewer than two samples above {floor:g} in the fit window")
    t, w = t[keep], np.log(w[keep])
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, w, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - w) ** 2)))
    return DecayFit(channel, float(slope), float(intercept), (start, n - 1), resid, (float(t[0]), float(t[-1])))


@dataclass(frozen=True)
class LowerBoundReport:
    passed: bool
    n_checked: int
    first_violation: int = None
    worst_margin: float = 0.0

    def __bool__(self):
        return self.passed


def lower_bound_check(series: ErrorSeries, norm_u, norm_v, tol: float = 1e-12) -> LowerBoundReport:
    """Check ``err_total(t) >= | ||u(t)|| - ||v(t)|| | - tol`` at every sample.

    ``norm_u`` / ``norm_v`` may be scalars (conserved norms) or per-sample arrays.
    """
    err = series["err_total"]
    gap = np.abs(np.broadcast_to(np.asarray(norm_u, float), err.shape) - np.broadcast_to(np.asarray(norm_v, float), err.shape))
    margin = err - gap
    bad = np.flatnonzero(margin < -tol)
    return LowerBoundReport(
        passed=bad.size == 0,
        n_checked=int(err.size),
        first_violation=int(bad[0]) if bad.size else None,
        worst_margin=float(margin.min()) if margin.size else 0.0,
    )


def parseval_defect(series: ErrorSeries) -> float:
    """Largest relative mismatch of ``low^2 + high^2`` against ``total^2``."""
    lo, hi, tot = series["err_low"], series["err_high"], series["err_total"]
    t2 = tot**2
    d = np.abs(lo**2 + hi**2 - t2)
    scale = np.where(t2 > 0, t2, 1.0)
    return float(np.max(np.where(t2 > 0, d / scale, d), initial=0.0))
