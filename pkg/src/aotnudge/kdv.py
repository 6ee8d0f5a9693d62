"""
Periodic KdV and its nudged companion, integrated with an integrating-factor RK4.

    u_t + u u_x + delta^2 u_xxx + gamma u = f
    v_t + v v_x + delta^2 v_xxx + gamma v = f + mu P_M (u - v)

In Fourier space ``u_hat' = -Lin(k) u_hat + Nl(u_hat)`` with
``Lin(k) = -i delta^2 q_k^3 + gamma`` handled exactly by ``exp(-Lin dt)`` and
``Nl(u) = -(1/2) d/dx (u^2) + f`` evaluated pseudo-spectrally with 2/3
dealiasing. The feedback term is added explicitly after the RK4 update, using
the observation from the start of the step.

State arrays passed to the steppers are half-spectrum coefficient arrays as
stored by :class:`~aotnudge.spectral.SpectralField1D`; a leading axis may be
used to advance several systems at once.
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
    TWO_PI,
    ModeProjection,
    SpectralField1D,
    dealias_mask_1d,
    l2_norm,
    roundoff_filter,
    sq_norm_1d,
)

log = logging.getLogger(__name__)

RESOLUTION_LIMIT = 10 * np.finfo(float).eps


@dataclass(frozen=True)
class KdvParams:
    """Solver configuration. ``dt`` defaults to ``(L/N)^2``."""

    delta: float
    gamma: float = 0.0
    mu: float = 0.0
    M: int = 5
    N: int = 256
    dt: float = None
    L: float = 2.0
    filter_tol: float = 0.0

    def __post_init__(self):
        N = int(self.N)
        if N < 8 or N & (N - 1):
            raise ConfigError(f"N must be a power of two, got {self.N}", "N")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative", "gamma")
        if self.mu < 0:
            raise ConfigError("mu must be nonnegative", "mu")
        if int(self.M) != self.M or not 1 <= self.M <= N // 2:
            raise ConfigError(f"M must be an integer in 1..N/2, got {self.M}", "M")
        if self.L <= 0:
            raise ConfigError("L must be positive", "L")
        dx2 = (self.L / N) ** 2
        if self.dt is None:
            object.__setattr__(self, "dt", dx2)
        if not self.dt > 0:
            raise ConfigError("dt must be positive", "dt")
        if self.dt > dx2 * (1 + 1e-9):
            raise CFLError(
                f"dt={self.dt:g} exceeds dx^2={dx2:g}; the dispersive step needs Δt ≲ Δx²", "dt"
            )
        if self.mu * self.dt >= 2.0:
            raise CFLError(
                f"mu*dt={self.mu * self.dt:g} >= 2; explicit nudging needs μ ≲ 2/Δt", "mu"
            )

    @property
    def projection(self) -> ModeProjection:
        return ModeProjection(int(self.M), 1)


def linear_symbol(k, p: KdvParams):
    """``-i delta^2 q_k^3 + gamma`` with ``q_k = 2 pi k / L``."""
    q = TWO_PI * np.asarray(k, dtype=float) / p.L
    return -1j * p.delta**2 * q**3 + p.gamma


def _nl_factor(N: int, L: float) -> np.ndarray:
    k = np.arange(N // 2 + 1)
    return -0.5j * (TWO_PI * k / L) * dealias_mask_1d(N)


def nonlinear_term(u: SpectralField1D) -> SpectralField1D:
    """``-(1/2) d/dx (u^2)`` with the product formed on the grid and then dealiased."""
    uu = sfft.irfft(u.coeffs, n=u.N, norm="forward")
    return SpectralField1D(_nl_factor(u.N, u.L) * sfft.rfft(uu * uu, norm="forward"), u.L)


def _as_forcing(forcing, p: KdvParams):
    if forcing is None:
        return None
    f = forcing.coeffs if isinstance(forcing, SpectralField1D) else np.asarray(forcing, complex)
    if f.shape != (p.N // 2 + 1,):
        raise ConfigError("forcing lives on a different grid", "forcing")
    if abs(f[0]) > 0:
        raise ConfigError("forcing must have zero spatial mean", "forcing")
    return f * dealias_mask_1d(p.N)


class IFRK4:
    """Integrating-factor RK4 stepper with precomputed propagators."""

    def __init__(self, p: KdvParams, forcing=None, nonlinear: bool = True):
        self.p = p
        N = p.N
        self.N = N
        k = np.arange(N // 2 + 1)
        self.symbol = linear_symbol(k, p)
        self.E = np.exp(-self.symbol * p.dt)
        self.E2 = np.exp(-self.symbol * p.dt / 2)
        self.g = _nl_factor(N, p.L)
        self.f_hat = _as_forcing(forcing, p)
        self.nonlinear = nonlinear
        self.obs = p.projection.mask(N)
        self.feedback = self.E * p.mu * p.dt * self.obs

    def rhs(self, u_hat: np.ndarray) -> np.ndarray:
        if self.nonlinear:
            u = sfft.irfft(u_hat, n=self.N, axis=-1, norm="forward")
            r = self.g * sfft.rfft(u * u, axis=-1, norm="forward")
        else:
            r = np.zeros_like(u_hat)
        if self.f_hat is not None:
            r = r + self.f_hat
        return r

    def step(self, u_hat: np.ndarray) -> np.ndarray:
        dt, E, E2 = self.p.dt, self.E, self.E2
        k1 = self.rhs(u_hat)
        k2 = self.rhs(E2 * (u_hat + 0.5 * dt * k1))
        k3 = self.rhs(E2 * u_hat + 0.5 * dt * k2)
        k4 = self.rhs(E * u_hat + E2 * (dt * k3))
        return E * u_hat + (dt / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)

    def nudge_step(self, v_hat: np.ndarray, u_hat_obs: np.ndarray) -> np.ndarray:
        return self.step(v_hat) + self.feedback * (u_hat_obs - v_hat)


def _unwrap(x):
    if isinstance(x, SpectralField1D):
        return x.coeffs, x.L
    return np.asarray(x, dtype=complex), None


def ifrk4_step(u_hat, p: KdvParams, forcing=None):
    """One integrating-factor RK4 step; accepts a field or a coefficient array."""
    c, L = _unwrap(u_hat)
    out = IFRK4(p, forcing).step(c)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("IFRK4 step produced non-finite coefficients", 1)
    return SpectralField1D(out, L) if L is not None else out


def nudge_step(v_hat, u_hat_obs, p: KdvParams, forcing=None):
    """One step of the nudged system with the feedback taken from ``u_hat_obs``."""
    c, L = _unwrap(v_hat)
    obs, _ = _unwrap(u_hat_obs)
    out = IFRK4(p, forcing).nudge_step(c, obs)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("nudged step produced non-finite coefficients", 1)
    return SpectralField1D(out, L) if L is not None else out


# ---------------------------------------------------------------------------
# initial data


def init_single_mode(c: float, k0: int, N: int, L: float = 2.0) -> SpectralField1D:
    """``c cos(2 pi k0 x / L)`` (``c cos(k0 pi x)`` on the default period)."""
    if k0 == 0 or c == 0:
        raise ValueError("single-mode data needs k0 != 0 and c != 0")
    return init_cosines([(abs(int(k0)), c)], N, L)


def init_cosines(modes, N: int, L: float = 2.0) -> SpectralField1D:
    """Sum of ``a cos(2 pi k x / L)`` over ``(k, a)`` pairs."""
    f = SpectralField1D.zeros(N, L)
    for k, a in modes:
        k = abs(int(k))
        if k == 0:
            raise ValueError("mean-free data cannot include k = 0")
        if k > N // 3:
            raise ValueError(f"mode {k} lies beyond the dealias cutoff N/3 = {N // 3}")
        f.coeffs[k] += a / 2.0
    return f


def init_shifted_profile(u_in: SpectralField1D, M: int, k_offset: int = 0) -> SpectralField1D:
    """Add a unit cosine at wavenumber ``2M + k_offset`` and rescale to ``||u_in||``."""
    if k_offset < 0:
        raise ValueError("k_offset must be nonnegative")
    K = l2_norm(u_in)
    if K == 0:
        raise ValueError("u_in must be nonzero")
    spiked = u_in + init_cosines([(2 * M + k_offset, 1.0)], u_in.N, u_in.L)
    return spiked * (K / l2_norm(spiked))


def choose_M(u_series, eps: float) -> int:
    """Smallest ``M`` with ``||P_M u||^2 >= ||u||^2 - eps`` at every sample (supremum over time)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    best = 1
    for u in u_series:
        e = u.L * (np.abs(u.coeffs) ** 2) * np.where(np.arange(u.coeffs.size) == 0, 1.0, 2.0)
        if u.N // 2 < u.coeffs.size:
            e[-1] *= 0.5
        total = e.sum()
        if total == 0:
            continue
        cum = np.cumsum(e)
        M = int(np.argmax(cum >= total - eps))
        best = max(best, M)
    return best


# ---------------------------------------------------------------------------
# twin experiment


def resolution_ratio(coeffs: np.ndarray) -> float:
    """Largest ``|c_k|`` over the top tenth of retained modes, relative to ``max |c_k|``.

    A stacked array is measured against its joint peak, so a system holding only
    round-off next to a resolved one does not count as unresolved.
    """
    N = 2 * (coeffs.shape[-1] - 1)
    kc = N // 3
    a = np.abs(coeffs)
    top = a.max()
    if top == 0:
        return 0.0
    return float(a[..., int(math.ceil(0.9 * kc)) : kc + 1].max() / top)


@dataclass
class Snapshot:
    t: float
    u: SpectralField1D
    v: SpectralField1D


@dataclass
class KdvRun:
    series: ErrorSeries
    snapshots: list
    u_final: SpectralField1D
    v_final: SpectralField1D
    info: dict = field(default_factory=dict)


def run_twin_kdv(
    ref_init: SpectralField1D,
    assim_init: SpectralField1D,
    p: KdvParams,
    forcing=None,
    T: float = 10.0,
    stride: int = None,
    snapshot_times=(),
    resolution: str = "warn",
) -> KdvRun:
    """Co-integrate the reference and the nudged system.

    Records ``err_low, err_high, err_total`` (observed / unobserved / total L2
    error) and the norms ``norm_u, norm_v`` every ``stride`` steps, plus
    spectrum snapshots at the requested times and at the end. ``resolution``
    is ``"error"``, ``"warn"`` or ``"off"`` and governs what happens when a
    final spectrum (reference or nudged) is not at round-off level near the
    dealias line.
    """
    if not T > 0:
        raise ConfigError("T must be positive", "T")
    if ref_init.N != p.N or assim_init.N != p.N:
        raise ConfigError("initial data must live on the solver grid", "N")
    for name, f0 in (("ref_init", ref_init), ("assim_init", assim_init)):
        if abs(f0.coeffs[0]) > 0:
            raise ConfigError(f"{name} must have zero spatial mean", name)
    stepper = IFRK4(p, forcing)
    nsteps = int(round(T / p.dt))
    stride = int(stride) if stride else max(1, nsteps // 2000)
    snap_steps = {int(round(t / p.dt)): float(t) for t in snapshot_times if 0 <= t <= T}
    snap_steps[nsteps] = nsteps * p.dt

    obs = stepper.obs
    unobs = ~obs
    fb = stepper.feedback
    tol = p.filter_tol
    L = p.L

    U = np.stack([ref_init.coeffs, assim_init.coeffs]).astype(complex)
    if tol:
        roundoff_filter(U, tol)

    rows = []
    snaps = []
    first_nonzero_v = None if not U[1].any() else 0

    def record(n):
        d = U[0] - U[1]
        lo = math.sqrt(sq_norm_1d(d * obs, L))
        hi = math.sqrt(sq_norm_1d(d * unobs, L))
        tot = math.sqrt(sq_norm_1d(d, L))
        nu, nv = np.sqrt(sq_norm_1d(U, L))
        rows.append((n * p.dt, lo, hi, tot, nu, nv))

    def snapshot(n):
        snaps.append(Snapshot(n * p.dt, SpectralField1D(U[0].copy(), L), SpectralField1D(U[1].copy(), L)))

    record(0)
    if 0 in snap_steps:
        snapshot(0)
    for n in range(1, nsteps + 1):
        kick = fb * (U[0] - U[1])
        U = stepper.step(U)
        U[1] += kick
        if tol:
            roundoff_filter(U, tol)
        if not np.isfinite(U).all():
            raise DivergenceError(f"KdV twin run became non-finite at step {n}", n)
        if first_nonzero_v is None and U[1].any():
            first_nonzero_v = n
        if n % stride == 0 or n == nsteps:
            record(n)
        if n in snap_steps:
            snapshot(n)

    data = np.array(rows)
    # a final partial stride can repeat the last time stamp
    keep = np.concatenate([[True], np.diff(data[:, 0]) > 0])
    data = data[keep]
    names = ("err_low", "err_high", "err_total", "norm_u", "norm_v")
    ratio = resolution_ratio(U)
    info = {
        "steps": nsteps,
        "output_stride": stride,
        "resolution_ratio": ratio,
        "resolved": ratio <= RESOLUTION_LIMIT,
        "assim_first_nonzero_step": first_nonzero_v,
        "dealias_cutoff": p.N // 3,
        "observation_cutoff": int(p.M),
    }
    meta = {
        "system": "kdv" if forcing is None and p.gamma == 0 else "kdv_damped",
        "delta": p.delta,
        "gamma": p.gamma,
        "mu": p.mu,
        "M": int(p.M),
        "N": p.N,
        "dt": p.dt,
        "L": p.L,
        "T": T,
        "filter_tol": p.filter_tol,
        **info,
    }
    series = ErrorSeries(data[:, 0], {nm: data[:, i + 1] for i, nm in enumerate(names)}, meta)
    if not info["resolved"]:
        msg = (
            f"reference spectrum near the dealias cutoff is {ratio:.2e} of its peak "
            f"(limit {RESOLUTION_LIMIT:.2e}); increase N"
        )
        if resolution == "error":
            raise ResolutionError(msg)
        if resolution == "warn":
            log.warning(msg)
    return KdvRun(series, snaps, SpectralField1D(U[0], L), SpectralField1D(U[1], L), info)
