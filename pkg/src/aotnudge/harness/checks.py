"""
Named post-run assertions.

A check is looked up by name, called with the loaded run and its literal
arguments, and returns a :class:`CheckResult`. Catalog entries list their
checks in the ``checks`` config key, e.g.
``final_error_below(1e-9, 'err_x'); lower_bound()``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diagnostics import fit_decay_rate, lower_bound_check, parseval_defect
from ..errors import ConfigError, UndefinedFitError
from ..spectral import ModeProjection, half_weights

PARSEVAL_TOL = 1e-10
DIVERGENCE_TOL = 1e-12
TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: float = None

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail, "value": self.value}

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


_REGISTRY = {}


def check(fn):
    _REGISTRY[fn.__name__] = fn
    return fn


def available_checks() -> list:
    return sorted(_REGISTRY)


def run_check(spec, data) -> CheckResult:
    fn = _REGISTRY.get(spec.name)
    label = f"{spec.name}({', '.join(map(repr, spec.args))})"
    if fn is None:
        raise ConfigError(f"unknown check {spec.name!r}; known: {', '.join(available_checks())}", "checks")
    try:
        passed, detail, value = fn(data, *spec.args)
    except (KeyError, UndefinedFitError, ValueError) as e:
        return CheckResult(label, False, f"could not evaluate: {e}")
    return CheckResult(label, bool(passed), detail, None if value is None else float(value))


def _tail(series, channel):
    t = series.times
    return series[channel][t >= t[0] + (1 - TAIL_FRACTION) * (t[-1] - t[0])]


def _all_series(data):
    if data.sweep:
        return [s for _, s in data.sweep]
    return [data.series]


# ---------------------------------------------------------------------------
# generic


@check
def final_error_below(data, tol, *channels):
    vals = {c: float(data.series[c][-1]) for c in channels}
    worst = max(vals.values())
    detail = ", ".join(f"{c}={v:.3e}" for c, v in vals.items()) + f" (limit {tol:g})"
    return worst <= tol, detail, worst


@check
def error_below(data, channel, tol):
    worst = float(np.max(data.series[channel]))
    return worst <= tol, f"max {channel} = {worst:.3e} (limit {tol:g})", worst


@check
def tail_mean_within(data, channel, lo, hi):
    m = float(np.mean(_tail(data.series, channel)))
    return lo <= m <= hi, f"mean {channel} over the final 10% = {m:.4g} (band [{lo:g}, {hi:g}])", m


@check
def final_error_at_least(data, channel, bound):
    v = float(data.series[channel][-1])
    return v >= bound, f"final {channel} = {v:.4g} (lower limit {bound:.4g})", v


@check
def min_error_at_least(data, channel, bound):
    v = float(np.min(data.series[channel]))
    return v >= bound, f"min {channel} = {v:.6g} (lower limit {bound:.6g})", v


@check
def error_drops(data, channel, factor=0.5):
    y = data.series[channel]
    ratio = float(y[-1] / y[0]) if y[0] > 0 else float("inf")
    return ratio <= factor, f"{channel} final/initial = {ratio:.3e} (limit {factor:g})", ratio


@check
def error_constant(data, tol, channel="err_total"):
    y = data.series[channel]
    dev = float(np.max(np.abs(y - y[0])) / y[0]) if y[0] > 0 else float(np.max(np.abs(y)))
    return dev <= tol, f"max relative deviation of {channel} from t=0 = {dev:.3e} (limit {tol:g})", dev


@check
def error_strictly_decreasing(data, rel_floor, channel="err_total"):
    """Strict decrease until the error reaches ``rel_floor`` times its start value, then stays below it."""
    y = data.series[channel]
    floor = rel_floor * y[0]
    above = y > floor
    if not above[0]:
        return False, f"{channel} starts at or below the floor", float(y[0])
    k = int(np.argmin(above)) if not above.all() else y.size
    strict = bool(np.all(np.diff(y[:k]) < 0)) if k > 1 else True
    stays = bool(np.all(y[k:] <= floor))
    detail = f"strictly decreasing over {k} samples, then {y.size - k} samples at or below {floor:.2e}"
    return strict and stays, detail, float(y[-1])


@check
def error_trend_decreasing(data, channel="err_total"):
    """Least-squares slope of the error over the run is negative and the run ends lower than it starts."""
    t, y = data.series.times, data.series[channel]
    slope = float(np.polyfit(t, y, 1)[0])
    head = float(np.mean(y[: max(1, y.size // 10)]))
    tail = float(np.mean(_tail(data.series, channel)))
    ok = slope < 0 and tail < head
    return ok, f"slope {slope:.3e}/time, mean first 10% {head:.6g}, mean last 10% {tail:.6g}", slope


@check
def decay_rate_within(data, channel, lo, hi, window=500):
    fit = fit_decay_rate(data.series, channel, int(window))
    return lo <= fit.rate <= hi, f"fitted rate {fit.rate:.5f} over samples {fit.window} (band [{lo}, {hi}])", fit.rate


@check
def parseval(data):
    if "err_low" not in data.series.channels:
        return True, "not applicable (no low/high split)", None
    d = parseval_defect(data.series)
    return d <= PARSEVAL_TOL, f"max |low^2 + high^2 - total^2| / total^2 = {d:.2e}", d


@check
def lower_bound(data):
    worst = np.inf
    n = 0
    for s in _all_series(data):
        rep = lower_bound_check(s, s["norm_u"], s["norm_v"])
        n += rep.n_checked
        worst = min(worst, rep.worst_margin)
        if not rep.passed:
            return False, f"violated at sample {rep.first_violation} (margin {rep.worst_margin:.3e})", rep.worst_margin
    return True, f"err_total >= |norm_u - norm_v| at all {n} samples (min margin {worst:.3e})", worst


@check
def error_equals_norm_gap(data, rtol=1e-14):
    s = data.series
    gap = np.abs(s["norm_u"] - s["norm_v"])
    scale = max(float(np.max(s["norm_u"])), float(np.max(s["norm_v"])), 1e-300)
    dev = float(np.max(np.abs(s["err_total"] - gap)) / scale)
    return dev <= rtol, f"max |err_total - |norm_u - norm_v|| / norm = {dev:.2e}", dev


@check
def assim_identically_zero(data):
    first = data.metadata["info"].get("assim_first_nonzero_step")
    norm_max = float(np.max(data.series["norm_v"]))
    ok = first is None and norm_max == 0.0
    detail = "nudged state bitwise zero at every step" if ok else f"first nonzero at step {first}, max norm {norm_max:.3e}"
    return ok, detail, norm_max


@check
def band_energy_below(data, which, k_lo, k_hi, tol):
    t, spec = data.final_spectrum()
    col = {"u": "abs_uhat", "v": "abs_vhat"}[which]
    k = spec["k"].astype(int)
    N = 2 * (k.size - 1)
    e = data.metadata["config"].get("L", 2.0)
    e = float(e) * half_weights(N) * spec[col] ** 2
    sel = (k >= k_lo) & (k <= k_hi)
    worst = float(np.max(e[sel]))
    return worst <= tol, f"max shell energy of {which} for {k_lo} <= k <= {k_hi} at t={t:g} is {worst:.2e} (limit {tol:g})", worst


@check
def plateau_proportional(data, factor):
    worst = 1.0
    parts = []
    for z, s in data.sweep:
        late = float(np.mean(_tail(s, "err_l2")))
        r = late / z
        worst = max(worst, r, 1.0 / r)
        parts.append(f"{z:.0e}:{r:.3g}")
    return worst <= factor, f"late error / offset per run: {' '.join(parts)} (within x{factor:g})", worst


# ---------------------------------------------------------------------------
# Euler specific


@check
def steady_reference(data, tol):
    drift = float(np.max(data.series["ref_drift"]))
    return drift < tol, f"max ||u(t) - u(0)|| / ||u(0)|| = {drift:.2e} (limit {tol:g})", drift


@check
def divergence_free(data):
    info = data.metadata["info"]
    worst = float(info["divergence_ratio_max"])
    ok = bool(info["divergence_free"]) and worst <= DIVERGENCE_TOL
    return ok, f"max_k |k . u_hat| / ||u|| over every step = {worst:.2e} (limit {DIVERGENCE_TOL:g})", worst


def _annulus(data, k1, k2):
    M = int(data.metadata["config"]["M"])
    return M, ModeProjection(M, 2).contains(k1, k2), k1 * k1 + k2 * k2


@check
def annulus_excludes(data, k1, k2):
    M, inside, r2 = _annulus(data, k1, k2)
    return not inside, f"|k|^2 = {r2} vs M^2 = {M * M}: mode {'observed' if inside else 'not observed'}", r2


@check
def annulus_contains(data, k1, k2):
    M, inside, r2 = _annulus(data, k1, k2)
    return inside, f"|k|^2 = {r2} vs M^2 = {M * M}: mode {'observed' if inside else 'not observed'}", r2
