"""Built-in experiments fig1 to fig12, as validated configs."""

from __future__ import annotations

import math

from .config import ExperimentConfig

_DX2_64 = (2.0 / 64) ** 2

_LORENZ = {
    "system": "lorenz",
    "sigma": 10.0,
    "r": 28.0,
    "b": 8.0 / 3.0,
    "mu": 10.0,
    "dt": 1e-4,
    "T": 20.0,
    "variant": "nudge_xy",
    "output_stride": 100,
}

_KDV = {
    "system": "kdv",
    "delta": 0.075,
    "mu": 100.0,
    "filter_tol": 1e-15,
    "resolution": "error",
}

_EULER = {
    "system": "euler2d",
    "N": 256,
    "dt": 1e-3,
    "mu": 100.0,
    "T": 1.0,
    "tg_k": 15,
    "tg_c": 1e-4,
    "filter_tol": 1e-15,
    "resolution": "error",
}

_PDE_CHECKS = "lower_bound(); parseval()"

_ENTRIES = {
    "fig1": dict(
        _LORENZ,
        description="Lorenz nudging on x and y, dissipative b = 8/3",
        ref_init="(30, 40, 50)",
        assim_init="(20, 30, 40)",
        checks="final_error_below(1e-9, 'err_x', 'err_y', 'err_z'); lower_bound()",
    ),
    "fig2": dict(
        _LORENZ,
        description="Lorenz nudging on x and y, partially dissipative b = 0",
        b=0.0,
        ref_init="(30, 40, 50)",
        assim_init="(20, 30, 40)",
        checks="final_error_below(1e-9, 'err_x', 'err_y'); tail_mean_within('err_z', 3, 30); lower_bound()",
    ),
    "fig3": dict(
        _LORENZ,
        description="Lorenz b = 0: plateau height against the initial z offset",
        b=0.0,
        ref_init="(20, 30, 50)",
        assim_init="ref",
        z_offsets=" ".join(f"1e-{i}" for i in range(1, 13)),
        checks="plateau_proportional(10)",
    ),
    "fig4": dict(
        _KDV,
        description="KdV, reference cos(6 pi x), nudged from zero with M = 5",
        M=5,
        N=256,
        T=10.0,
        ref_init="single_mode(1, 6)",
        assim_init="zero",
        snapshot_times="10",
        checks="assim_identically_zero(); error_equals_norm_gap(); error_below('err_low', 1e-12); " + _PDE_CHECKS,
    ),
    "fig5": dict(
        _KDV,
        description="KdV, roles swapped: zero reference, nudged from cos(6 pi x)",
        M=5,
        N=256,
        T=10.0,
        ref_init="zero",
        assim_init="single_mode(1, 6)",
        snapshot_times="10",
        checks="error_equals_norm_gap(); error_below('err_low', 1e-12); " + _PDE_CHECKS,
    ),
    "fig6": dict(
        _KDV,
        description="KdV, M = 50 with a renormalized spike at k = 100",
        M=50,
        N=2048,
        T=1.0,
        T_long=10.0,
        ref_init="shifted_profile(single_mode(1, 1), 50, 0)",
        assim_init="zero",
        snapshot_times="1 10",
        checks=(
            f"error_drops('err_low'); final_error_at_least('err_total', {0.5 / math.sqrt(2.0)!r}); "
            "band_energy_below('v', 95, 105, 1e-14); " + _PDE_CHECKS
        ),
    ),
    "fig7": dict(
        _KDV,
        description="KdV, delta = 1, M = 10, reference cos(pi x) + 0.001 cos(12 pi x)",
        delta=1.0,
        M=10,
        N=64,
        dt=0.1 * _DX2_64,
        T=100.0,
        T_long=1000.0,
        ref_init="cosines((1, 1.0), (12, 0.001))",
        assim_init="zero",
        checks="min_error_at_least('err_high', 0.00099); " + _PDE_CHECKS,
    ),
    "fig8": dict(
        _KDV,
        description="KdV, delta = 1, M = 5, reference cos(3 pi x)",
        delta=1.0,
        M=5,
        N=64,
        dt=0.1 * _DX2_64,
        T=100.0,
        T_long=1000.0,
        ref_init="single_mode(1, 3)",
        assim_init="zero",
        checks="error_trend_decreasing('err_total'); decay_rate_within('err_total', -1.0, -1e-6); " + _PDE_CHECKS,
    ),
    "fig9": dict(
        _KDV,
        description="damped and driven KdV, gamma = 0.1, f = cos(8 pi x), M = 10",
        system="kdv_damped",
        delta=1.0,
        gamma=0.1,
        M=10,
        N=64,
        dt=0.25 * _DX2_64,
        T=300.0,
        forcing="single_mode(1, 8)",
        ref_init="single_mode(1, 12)",
        assim_init="zero",
        snapshot_times="10 300",
        checks="decay_rate_within('err_high', -0.13, -0.07); " + _PDE_CHECKS,
    ),
    "fig10": dict(
        _EULER,
        description="Euler, Taylor-Green steady state k = 15, identical twin",
        M=21,
        assim_init="ref",
        checks="steady_reference(1e-12); error_below('err_total', 1e-16); divergence_free(); " + _PDE_CHECKS,
    ),
    "fig11": dict(
        _EULER,
        description="Euler, Taylor-Green k = 15 nudged from zero with M = 21",
        M=21,
        assim_init="zero",
        checks=(
            "assim_identically_zero(); error_constant(1e-12); annulus_excludes(15, 15); divergence_free(); "
            + _PDE_CHECKS
        ),
    ),
    "fig12": dict(
        _EULER,
        description="Euler, Taylor-Green k = 15 nudged from zero with M = 22",
        M=22,
        assim_init="zero",
        checks=(
            "error_strictly_decreasing(1e-14); annulus_contains(15, 15); divergence_free(); " + _PDE_CHECKS
        ),
    ),
}


def catalog_names() -> list:
    return list(_ENTRIES)


def catalog(long: bool = False) -> dict:
    """Fresh, validated configs keyed by name; ``long`` switches to the opt-in horizons."""
    out = {}
    for name, values in _ENTRIES.items():
        v = dict(values, name=name)
        if long and "T_long" in v:
            v["T"] = v["T_long"]
        out[name] = ExperimentConfig.from_mapping(v)
    return out


def lookup(name: str, long: bool = False) -> ExperimentConfig:
    if name not in _ENTRIES:
        raise KeyError(f"unknown catalog entry {name!r}; valid names: {', '.join(_ENTRIES)}")
    return catalog(long)[name]
