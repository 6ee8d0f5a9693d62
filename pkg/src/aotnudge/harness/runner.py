"""Dispatch a config to its solver, persist the results and evaluate the checks."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import euler2d, kdv, lorenz
from ..diagnostics import ErrorSeries, fit_decay_rate
from ..errors import UndefinedFitError
from ..spectral import write_full_spectrum_csv, write_spectrum_csv
from .checks import CheckResult, run_check
from .config import ExperimentConfig, build_field_1d, build_field_2d, build_triple, parse_call

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "AOTNUDGE_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

ERROR_COLUMNS = {
    "lorenz": ("err_x", "err_y", "err_z", "err_l2"),
    "kdv": ("err_low", "err_high", "err_total"),
    "euler2d": ("err_low", "err_high", "err_total"),
}
NORM_COLUMNS = {"kdv": ("norm_u", "norm_v"), "euler2d": ("norm_u", "norm_v", "ref_drift")}


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def _family(system: str) -> str:
    return "kdv" if system in ("kdv", "kdv_damped") else system


@dataclass
class RunRecord:
    config: ExperimentConfig
    run_dir: Path
    started: float
    finished: float
    files: dict
    info: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def wall_time(self) -> float:
        return self.finished - self.started


@dataclass
class RunData:
    """A run reloaded from disk, as seen by the checks."""

    run_dir: Path
    metadata: dict
    series: ErrorSeries = None
    sweep: list = field(default_factory=list)

    def final_spectrum(self):
        snaps = self.metadata["files"].get("spectra", {})
        if not snaps:
            raise KeyError("run has no spectrum snapshots")
        t = max(snaps, key=float)
        with open(self.run_dir / snaps[t], newline="") as fh:
            rows = list(csv.reader(fh))
        body = np.array(rows[1:], dtype=float)
        return float(t), {name: body[:, i] for i, name in enumerate(rows[0])}


# ---------------------------------------------------------------------------
# solvers


def _run_lorenz(cfg, out: Path, files: dict) -> dict:
    p = cfg.lorenz_params()
    variant = cfg.variant()
    dt = cfg.get("dt", 1e-4)
    stride = cfg.get("output_stride", 100)
    ref = build_triple(cfg.init_spec("ref_init"), "ref_init")
    assim = build_triple(cfg.init_spec("assim_init"), "assim_init", ref)
    offsets = cfg.z_offsets
    runs = []
    if offsets:
        for z in offsets:
            runs.append((z, (assim[0], assim[1], assim[2] + z)))
    else:
        runs.append((None, assim))
    sweep_rows = []
    for i, (z, a) in enumerate(runs):
        s = lorenz.run_twin(ref, a, variant, p, dt=dt, T=cfg.T, stride=stride, record_states=True)
        tag = f"_z{i + 1:02d}" if z is not None else ""
        err_path = out / f"errors{tag}.csv"
        s.to_csv(err_path, ERROR_COLUMNS["lorenz"])
        st_path = out / f"states{tag}.csv"
        s.to_csv(st_path, ("X", "Y", "Z", "x", "y", "z"))
        files.setdefault("errors", []).append(err_path.name)
        files.setdefault("states", []).append(st_path.name)
        if z is not None:
            tail = s["err_l2"][s.times >= 0.9 * s.times[-1]]
            sweep_rows.append((z, err_path.name, st_path.name, float(np.mean(tail))))
    if sweep_rows:
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z_offset", "errors_file", "states_file", "late_err_l2"])
            for z, ef, sf, late in sweep_rows:
                w.writerow([repr(z), ef, sf, repr(late)])
        files["sweep"] = "sweep.csv"
    return {"runs": len(runs), "dt": dt, "output_stride": stride}


def _write_pde_outputs(result, family, out: Path, files: dict, full_spectrum=False):
    s = result.series
    s.to_csv(out / "errors.csv", ERROR_COLUMNS[family])
    s.to_csv(out / "norms.csv", NORM_COLUMNS[family])
    files["errors"] = ["errors.csv"]
    files["norms"] = "norms.csv"
    if family == "euler2d":
        s.to_csv(out / "divergence.csv", ("div_u", "div_v"))
        files["divergence"] = "divergence.csv"
    spectra = {}
    for snap in result.snapshots:
        name = f"spectrum_t{snap.t:g}.csv"
        write_spectrum_csv(out / name, snap.u, snap.v)
        spectra[repr(float(snap.t))] = name
        if full_spectrum:
            for who, fld in (("u", snap.u), ("v", snap.v)):
                full = f"spectrum_full_{who}_t{snap.t:g}.csv"
                write_full_spectrum_csv(out / full, fld)
                files.setdefault("full_spectra", []).append(full)
    files["spectra"] = spectra


def _run_kdv(cfg, out: Path, files: dict) -> dict:
    p = cfg.kdv_params()
    ref = build_field_1d(cfg.init_spec("ref_init"), p.N, p.L, "ref_init")
    assim = build_field_1d(cfg.init_spec("assim_init"), p.N, p.L, "assim_init", ref)
    forcing = None
    if "forcing" in cfg.values:
        forcing = build_field_1d(parse_call(cfg.values["forcing"], "forcing"), p.N, p.L, "forcing")
    res = kdv.run_twin_kdv(
        ref, assim, p, forcing=forcing, T=cfg.T, stride=cfg.get("output_stride"),
        snapshot_times=cfg.snapshot_times, resolution=cfg.resolution,
    )
    _write_pde_outputs(res, "kdv", out, files)
    return dict(res.info, dt=p.dt)


def _run_euler(cfg, out: Path, files: dict) -> dict:
    p = cfg.euler_params()
    ref = build_field_2d(cfg.ref_spec_2d(), p.N, "ref_init")
    assim = build_field_2d(cfg.init_spec("assim_init"), p.N, "assim_init", ref)
    res = euler2d.run_twin_euler(
        ref, assim, p, T=cfg.T, stride=cfg.get("output_stride", 1),
        snapshot_times=cfg.snapshot_times, resolution=cfg.resolution,
        allow_long=cfg.get("allow_long", False),
    )
    _write_pde_outputs(res, "euler2d", out, files, cfg.get("full_spectrum", False))
    return dict(res.info)


_DISPATCH = {"lorenz": _run_lorenz, "kdv": _run_kdv, "euler2d": _run_euler}


# ---------------------------------------------------------------------------
# loading and fitting


def _read_series(path: Path) -> ErrorSeries:
    return ErrorSeries.from_csv(path)


def _merge(*parts: ErrorSeries) -> ErrorSeries:
    base = parts[0]
    channels = dict(base.channels)
    for p in parts[1:]:
        if not np.array_equal(p.times, base.times):
            raise ValueError("CSV files of one run disagree on their time stamps")
        channels.update(p.channels)
    return ErrorSeries(base.times, channels)


def _lorenz_series(err: ErrorSeries, states: ErrorSeries) -> ErrorSeries:
    ch = dict(err.channels)
    ch["err_total"] = err["err_l2"]
    ch["norm_u"] = np.sqrt(states["X"] ** 2 + states["Y"] ** 2 + states["Z"] ** 2)
    ch["norm_v"] = np.sqrt(states["x"] ** 2 + states["y"] ** 2 + states["z"] ** 2)
    return ErrorSeries(err.times, ch)


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    with open(run_dir / "metadata.json") as fh:
        meta = json.load(fh)
    files = meta["files"]
    data = RunData(run_dir, meta)
    if _family(meta["config"]["system"]) == "lorenz":
        pairs = [
            _lorenz_series(_read_series(run_dir / e), _read_series(run_dir / s))
            for e, s in zip(files["errors"], files["states"])
        ]
        if "sweep" in files:
            with open(run_dir / files["sweep"], newline="") as fh:
                offsets = [float(r["z_offset"]) for r in csv.DictReader(fh)]
            data.sweep = list(zip(offsets, pairs))
        data.series = pairs[0]
    else:
        parts = [_read_series(run_dir / files["errors"][0]), _read_series(run_dir / files["norms"])]
        if "divergence" in files:
            parts.append(_read_series(run_dir / files["divergence"]))
        data.series = _merge(*parts)
    return data


def _fits(data: RunData) -> list:
    out = []
    channels = ("err_l2",) if "err_l2" in data.series.channels else ("err_high", "err_total")
    for s in [s for _, s in data.sweep] or [data.series]:
        for ch in channels:
            try:
                out.append(fit_decay_rate(s, ch).as_dict())
            except UndefinedFitError as e:
                out.append({"channel": ch, "rate": None, "note": str(e)})
    return out


def evaluate(data: RunData, config: ExperimentConfig) -> list:
    return [run_check(spec, data) for spec in config.checks]


# ---------------------------------------------------------------------------
# public entry points


def run(config: ExperimentConfig, run_dir=None) -> RunRecord:
    """Run one experiment, write its CSVs and metadata, and evaluate its checks."""
    out = Path(run_dir) if run_dir is not None else output_root() / config.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config.to_ini())
    files = {"config": "config.ini"}
    started = time.time()
    info = _DISPATCH[_family(config.system)](config, out, files)
    finished = time.time()
    meta = {
        "name": config.name,
        "config": dict(config.values),
        "info": _jsonable(info),
        "files": files,
        "started": started,
        "finished": finished,
        "wall_time": finished - started,
    }
    _write_meta(out, meta)
    data = load_run(out)
    fits = _fits(data)
    checks = evaluate(data, config)
    meta["decay_fits"] = fits
    meta["checks"] = [c.as_dict() for c in checks]
    meta["passed"] = all(c.passed for c in checks)
    _write_meta(out, meta)
    return RunRecord(config, out, started, finished, files, meta["info"], fits, checks)


@dataclass
class VerifyReport:
    name: str
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list:
        return [r.line() for r in self.results]


def verify(target) -> VerifyReport:
    """Re-evaluate the checks of a finished run (a :class:`RunRecord` or a run directory)."""
    run_dir = target.run_dir if isinstance(target, RunRecord) else Path(target)
    data = load_run(run_dir)
    config = ExperimentConfig.from_mapping(data.metadata["config"])
    return VerifyReport(config.name, evaluate(data, config))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write_meta(out: Path, meta: dict) -> None:
    with open(out / "metadata.json", "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)


__all__ = ["RunRecord", "RunData", "VerifyReport", "run", "verify", "load_run", "output_root", "CheckResult"]
