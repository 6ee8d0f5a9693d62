"""
2D incompressible Euler on [0, 2pi)^2 and its nudged companion.

    u_t + B(u, u) = 0
    v_t + B(v, v) = mu P_sigma P_M (u - v)

with ``B(a, b) = P_sigma (a . grad b)``. The nonlinearity is evaluated in
rotational form, ``P_sigma(omega z x u)`` with ``omega = d1 u2 - d2 u1``, which
differs from the advective form by a gradient and therefore agrees after the
Leray projection. It needs three inverse and two forward transforms.

Time stepping is explicit Euler for both systems, the feedback using the
observation taken at the start of the step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .diagnostics import ErrorSeries
from .errors import CFLError, ConfigError, DivergenceError, ResolutionError
from .spectral import (
    ModeProjection,
    SpectralVectorField2D,
    dealias_mask_2d,
    roundoff_filter,
    set_mode_2d,
    sq_norm_2d,
    wavenumbers_2d,
)

log = logging.getLogger(__name__)

RESOLUTION_LIMIT = 10 * np.finfo(float).eps
DIVERGENCE_TOL = 1e-12
DEFAULT_MAX_T = 1.0


@dataclass(frozen=True)
class EulerParams:
    N: int = 256
    dt: float = 1e-3
    mu: float = 100.0
    M: int = 21
    filter_tol: float = 0.0

    def __post_init__(self):
        N = int(self.N)
        if N < 8 or N & (N - 1):
            raise ConfigError(f"N must be a power of two, got {self.N}", "N")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", "dt")
        if self.mu < 0:
            raise ConfigError("mu must be nonnegative", "mu")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}", "M")
        if self.mu * self.dt >= 2.0:
            raise CFLError(
                f"mu*dt={self.mu * self.dt:g} >= 2; explicit nudging needs μ ≲ 2/Δt", "mu"
            )

    @property
    def projection(self) -> ModeProjection:
        return ModeProjection(int(self.M), 2)


@dataclass(frozen=True)
class TaylorGreenSpec:
    """``u1 = c sin(k x1) cos(k x2)``, ``u2 = -c cos(k x1) sin(k x2)``."""

    k: int
    c: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"Taylor-Green frequency must be a positive integer, got {self.k}", "tg_k")


def taylor_green(spec: TaylorGreenSpec, N: int = 256) -> SpectralVectorField2D:
    """Exact four-mode representation of the Taylor-Green vortex."""
    k, c = int(spec.k), float(spec.c)
    if k > N // 3:
        raise ConfigError(f"Taylor-Green frequency {k} exceeds the dealias cutoff N/3 = {N // 3}", "tg_k")
    f = SpectralVectorField2D.zeros(N)
    q = 0.25j * c
    # stored half: (k, k) and (-k, k); (k, -k), (-k, -k) follow by symmetry
    set_mode_2d(f.coeffs, k, k, (-q, q))
    set_mode_2d(f.coeffs, -k, k, (q, q))
    return f


class _Grid:
    """Precomputed wavenumber tables for one resolution."""

    _cache: dict = {}

    def __new__(cls, N: int):
        g = cls._cache.get(N)
        if g is None:
            g = super().__new__(cls)
            K1, K2 = wavenumbers_2d(N)
            g.N = N
            g.K1 = K1.astype(float)
            g.K2 = K2.astype(float)
            k2 = g.K1**2 + g.K2**2
            k2[0, 0] = 1.0
            g.inv_k2 = 1.0 / k2
            g.mask = dealias_mask_2d(N)
            cls._cache[N] = g
        return g


def _leray(c: np.ndarray, g: _Grid) -> np.ndarray:
    kdot = g.K1 * c[..., 0, :, :] + g.K2 * c[..., 1, :, :]
    out = np.empty_like(c)
    out[..., 0, :, :] = c[..., 0, :, :] - g.K1 * kdot * g.inv_k2
    out[..., 1, :, :] = c[..., 1, :, :] - g.K2 * kdot * g.inv_k2
    out[..., 0, 0] = 0.0
    return out


def leray_project(f: SpectralVectorField2D) -> SpectralVectorField2D:
    """``u - k (k . u) / |k|^2`` with the mean removed."""
    return SpectralVectorField2D(_leray(f.coeffs, _Grid(f.N)))


def divergence_max(coeffs: np.ndarray) -> np.ndarray:
    """``max_k |k . u_hat(k)|`` over the trailing three axes."""
    g = _Grid(coeffs.shape[-2])
    kdot = g.K1 * coeffs[..., 0, :, :] + g.K2 * coeffs[..., 1, :, :]
    return np.max(np.abs(kdot), axis=(-2, -1))


def _nonlinear(c: np.ndarray, g: _Grid) -> np.ndarray:
    N = g.N
    lead = c.shape[:-3]
    stack = np.empty(lead + (3, N, N // 2 + 1), dtype=complex)
    stack[..., 0:2, :, :] = c
    stack[..., 2, :, :] = 1j * (g.K1 * c[..., 1, :, :] - g.K2 * c[..., 0, :, :])
    phys = sfft.irfft2(stack, s=(N, N), norm="forward")
    u1, u2, w = phys[..., 0, :, :], phys[..., 1, :, :], phys[..., 2, :, :]
    prod = np.stack([-w * u2, w * u1], axis=-3)
    out = sfft.rfft2(prod, norm="forward") * g.mask
    return _leray(out, g)


def euler_nonlinear(u: SpectralVectorField2D) -> SpectralVectorField2D:
    """``B(u, u)`` in rotational form, dealiased and Leray-projected."""
    return SpectralVectorField2D(_nonlinear(u.coeffs, _Grid(u.N)))


def euler_nonlinear_advective(u: SpectralVectorField2D) -> SpectralVectorField2D:
    """``P_sigma (u . grad u)`` evaluated directly; slower, kept as a cross-check."""
    g = _Grid(u.N)
    N = u.N
    c = u.coeffs
    grads = np.stack([1j * g.K1 * c, 1j * g.K2 * c])  # [d_j, comp]
    pu = sfft.irfft2(c, s=(N, N), norm="forward")
    pg = sfft.irfft2(grads, s=(N, N), norm="forward")
    adv = pu[0] * pg[0] + pu[1] * pg[1]
    out = sfft.rfft2(adv, norm="forward") * g.mask
    return SpectralVectorField2D(_leray(out, g))


def _check_finite(a, what, step):
    if not np.isfinite(a).all():
        raise DivergenceError(f"{what} became non-finite at step {step}", step)


def step_euler_2d(u_hat, p: EulerParams):
    """``u - dt B(u, u)``; accepts a field or a coefficient array."""
    c = u_hat.coeffs if isinstance(u_hat, SpectralVectorField2D) else np.asarray(u_hat, complex)
    g = _Grid(c.shape[-2])
    out = _leray(c - p.dt * _nonlinear(c, g), g)
    _check_finite(out, "Euler step", 1)
    return SpectralVectorField2D(out) if isinstance(u_hat, SpectralVectorField2D) else out


def nudge_step_2d(v_hat, u_hat_obs, p: EulerParams):
    """``v - dt B(v, v) + dt mu P_sigma P_M (u - v)``."""
    wrap = isinstance(v_hat, SpectralVectorField2D)
    c = v_hat.coeffs if wrap else np.asarray(v_hat, complex)
    obs = u_hat_obs.coeffs if isinstance(u_hat_obs, SpectralVectorField2D) else np.asarray(u_hat_obs, complex)
    g = _Grid(c.shape[-2])
    P = p.projection.mask(g.N)
    out = _leray(c - p.dt * _nonlinear(c, g) + p.dt * p.mu * _leray(P * (obs - c), g), g)
    _check_finite(out, "nudged Euler step", 1)
    return SpectralVectorField2D(out) if wrap else out


def resolution_ratio_2d(coeffs: np.ndarray) -> float:
    """Largest coefficient in the outer tenth of the dealiased square, relative to the peak.

    Stacked arrays are measured against their joint peak.
    """
    N = coeffs.shape[-2]
    K1, K2 = wavenumbers_2d(N)
    kc = N // 3
    kmax = np.maximum(np.abs(K1), np.abs(K2))
    band = (kmax >= math.ceil(0.9 * kc)) & (kmax <= kc)
    a = np.abs(coeffs)
    top = a.max()
    if top == 0:
        return 0.0
    return float(a[..., band].max() / top)


@dataclass
class Snapshot2D:
    t: float
    u: SpectralVectorField2D
    v: SpectralVectorField2D


@dataclass
class EulerRun:
    series: ErrorSeries
    snapshots: list
    u_final: SpectralVectorField2D
    v_final: SpectralVectorField2D
    info: dict = field(default_factory=dict)


def run_twin_euler(
    ref_init: SpectralVectorField2D,
    assim_init: SpectralVectorField2D,
    p: EulerParams,
    T: float = 1.0,
    stride: int = 1,
    snapshot_times=(),
    resolution: str = "warn",
    allow_long: bool = False,
) -> EulerRun:
    """Co-integrate the reference and the nudged Euler systems.

    Channels: ``err_low, err_high, err_total, norm_u, norm_v``, the per-sample
    divergence ratios ``div_u, div_v`` (``max |k . u_hat| / ||u||``) and
    ``ref_drift = ||u(t) - u(0)|| / ||u(0)||``. The
    divergence check runs on every step; its worst value is kept in ``info``.
    Horizons beyond ``T = 1`` need ``allow_long`` since a fixed grid cannot
    represent the long-time dynamics faithfully.
    """
    if not T > 0:
        raise ConfigError("T must be positive", "T")
    if T > DEFAULT_MAX_T and not allow_long:
        raise ConfigError(f"Euler runs beyond T={DEFAULT_MAX_T:g} need allow_long", "T")
    if ref_init.N != p.N or assim_init.N != p.N:
        raise ConfigError("initial data must live on the solver grid", "N")
    g = _Grid(p.N)
    P = p.projection.mask(p.N)
    unobs = ~P
    nsteps = int(round(T / p.dt))
    stride = max(1, int(stride))
    snap_steps = {int(round(t / p.dt)) for t in snapshot_times if 0 <= t <= T}
    snap_steps.add(nsteps)
    tol = p.filter_tol

    U = _leray(np.stack([ref_init.coeffs, assim_init.coeffs]).astype(complex), g)
    if tol:
        roundoff_filter(U, tol, axes=(-3, -2, -1))

    rows, snaps = [], []
    worst_div = 0.0
    div_ok = True
    first_nonzero_v = None if not U[1].any() else 0

    def div_ratio():
        d = divergence_max(U)
        n = np.sqrt(sq_norm_2d(U))
        return d, n

    U0 = U[0].copy()
    norm0 = math.sqrt(sq_norm_2d(U0)) or 1.0

    def record(n, d, norms):
        diff = U[0] - U[1]
        drift = math.sqrt(sq_norm_2d(U[0] - U0)) / norm0
        lo = math.sqrt(sq_norm_2d(diff * P))
        hi = math.sqrt(sq_norm_2d(diff * unobs))
        tot = math.sqrt(sq_norm_2d(diff))
        ratio = np.where(norms > 0, d / np.where(norms > 0, norms, 1.0), d)
        rows.append((n * p.dt, lo, hi, tot, norms[0], norms[1], ratio[0], ratio[1], drift))

    d, norms = div_ratio()
    record(0, d, norms)
    if 0 in snap_steps:
        snaps.append(Snapshot2D(0.0, SpectralVectorField2D(U[0].copy()), SpectralVectorField2D(U[1].copy())))
    fb = p.dt * p.mu
    for n in range(1, nsteps + 1):
        kick = fb * _leray(P * (U[0] - U[1]), g)
        U = U - p.dt * _nonlinear(U, g)
        U[1] += kick
        U = _leray(U, g)
        if tol:
            roundoff_filter(U, tol, axes=(-3, -2, -1))
        _check_finite(U, "Euler twin run", n)
        if first_nonzero_v is None and U[1].any():
            first_nonzero_v = n
        d, norms = div_ratio()
        # v identically zero gives 0 <= 0, hence the non-strict comparison
        if np.any(d > DIVERGENCE_TOL * norms):
            div_ok = False
        worst_div = max(worst_div, float(np.max(np.where(norms > 0, d / np.where(norms > 0, norms, 1.0), d))))
        if n % stride == 0 or n == nsteps:
            record(n, d, norms)
        if n in snap_steps:
            snaps.append(Snapshot2D(n * p.dt, SpectralVectorField2D(U[0].copy()), SpectralVectorField2D(U[1].copy())))

    data = np.array(rows)
    keep = np.concatenate([[True], np.diff(data[:, 0]) > 0])
    data = data[keep]
    names = ("err_low", "err_high", "err_total", "norm_u", "norm_v", "div_u", "div_v", "ref_drift")
    ratio = resolution_ratio_2d(U)
    info = {
        "steps": nsteps,
        "output_stride": stride,
        "resolution_ratio": ratio,
        "resolved": ratio <= RESOLUTION_LIMIT,
        "assim_first_nonzero_step": first_nonzero_v,
        "divergence_free": div_ok,
        "divergence_ratio_max": worst_div,
        "dealias_cutoff": p.N // 3,
        "observation_cutoff": int(p.M),
    }
    meta = {"system": "euler2d", "N": p.N, "dt": p.dt, "mu": p.mu, "M": int(p.M), "T": T, "filter_tol": tol, **info}
    series = ErrorSeries(data[:, 0], {nm: data[:, i + 1] for i, nm in enumerate(names)}, meta)
    if not info["resolved"]:
        msg = f"reference spectrum near the dealias cutoff is {ratio:.2e} of its peak; increase N"
        if resolution == "error":
            raise ResolutionError(msg)
        if resolution == "warn":
            log.warning(msg)
    return EulerRun(series, snaps, SpectralVectorField2D(U[0]), SpectralVectorField2D(U[1]), info)
