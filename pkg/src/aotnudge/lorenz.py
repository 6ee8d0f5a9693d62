"""
Lorenz 1963 twin experiments: direct-insertion synchronization and nudging.

The reference system is the shifted form

    X' = -sigma X + sigma Y
    Y' = -sigma X - Y - X Z
    Z' = -b Z + X Y - b (r + sigma)

(the classical form after ``Z -> Z + r + sigma``). Both systems share one
explicit Euler step of size ``dt`` and observations are taken every step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .diagnostics import ErrorSeries
from .errors import ConfigError, DivergenceError


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    mu: float = 10.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}", "sigma")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}", "r")
        if not self.b >= 0:
            raise ConfigError(f"b must be nonnegative, got {self.b}", "b")
        if not self.mu >= 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}", "mu")


class LorenzState(NamedTuple):
    X: float
    Y: float
    Z: float


class CouplingVariant(enum.Enum):
    OBSERVE_X = "observe_x"
    OBSERVE_Y = "observe_y"
    OBSERVE_Z = "observe_z"
    OBSERVE_XY = "observe_xy"
    NUDGE_XY = "nudge_xy"

    @property
    def observed(self) -> tuple:
        """Component indices copied verbatim from the reference (direct insertion)."""
        return _OBSERVED[self]


_OBSERVED = {
    CouplingVariant.OBSERVE_X: (0,),
    CouplingVariant.OBSERVE_Y: (1,),
    CouplingVariant.OBSERVE_Z: (2,),
    CouplingVariant.OBSERVE_XY: (0, 1),
    CouplingVariant.NUDGE_XY: (),
}


def lorenz_rhs(s, p: LorenzParams) -> LorenzState:
    X, Y, Z = s
    sig, b = p.sigma, p.b
    return LorenzState(
        -sig * X + sig * Y,
        -sig * X - Y - X * Z,
        -b * Z + X * Y - b * (p.r + sig),
    )


def coupled_rhs(ref, assim, variant: CouplingVariant, p: LorenzParams) -> LorenzState:
    """Time derivative of the assimilating state.

    For the direct-insertion variants the observed components of ``assim`` are
    replaced by the reference values before evaluating the equations, so the
    returned derivative of an observed component equals the reference one.
    """
    if variant is CouplingVariant.NUDGE_XY:
        X, Y, _ = ref
        x, y, z = assim
        sig, b = p.sigma, p.b
        return LorenzState(
            -sig * x + sig * y + p.mu * (X - x),
            -sig * x - y - x * z + p.mu * (Y - y),
            -b * z + x * y - b * (p.r + sig),
        )
    merged = list(assim)
    for i in variant.observed:
        merged[i] = ref[i]
    return lorenz_rhs(merged, p)


def step_euler(s, p: LorenzParams, dt: float, step_index: int = 0) -> LorenzState:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    d = lorenz_rhs(s, p)
    out = LorenzState(s[0] + dt * d[0], s[1] + dt * d[1], s[2] + dt * d[2])
    if not all(math.isfinite(v) for v in out):
        raise DivergenceError(f"Lorenz state became non-finite at step {step_index}", step_index)
    return out


def hayden_J(p: LorenzParams) -> float:
    """Asymptotic bound on Y^2 used in the synchronization estimate.

    ``r^2`` for ``b <= 2`` and ``b^2 r^2 / (4 (b - 1))`` for ``b >= 2``; the two
    branches agree at ``b = 2``.
    """
    if p.b <= 2:
        return p.r**2
    return p.b**2 * p.r**2 / (4.0 * (p.b - 1.0))


def run_twin(
    ref_init,
    assim_init,
    variant: CouplingVariant,
    p: LorenzParams,
    dt: float = 1e-4,
    T: float = 20.0,
    stride: int = 100,
    record_states: bool = False,
) -> ErrorSeries:
    """Integrate reference and assimilating systems side by side.

    Channels ``err_x, err_y, err_z`` (absolute component errors) and ``err_l2``
    are recorded at ``t = 0`` and every ``stride`` steps. With
    ``record_states`` the raw trajectories ``X, Y, Z, x, y, z`` are kept too.
    """
    if not T > 0:
        raise ConfigError("T must be positive", "T")
    if not dt > 0:
        raise ConfigError("dt must be positive", "dt")
    variant = CouplingVariant(variant)
    nsteps = int(round(T / dt))
    stride = max(1, int(stride))
    observed = variant.observed

    ref = LorenzState(*map(float, ref_init))
    assim = list(map(float, assim_init))
    for i in observed:
        assim[i] = ref[i]
    assim = LorenzState(*assim)

    rows = []
    states = []

    def record(n):
        ex, ey, ez = abs(ref.X - assim.X), abs(ref.Y - assim.Y), abs(ref.Z - assim.Z)
        rows.append((n * dt, ex, ey, ez, math.sqrt(ex * ex + ey * ey + ez * ez)))
        if record_states:
            states.append(tuple(ref) + tuple(assim))

    record(0)
    for n in range(1, nsteps + 1):
        dr = lorenz_rhs(ref, p)
        da = coupled_rhs(ref, assim, variant, p)
        ref = LorenzState(ref.X + dt * dr.X, ref.Y + dt * dr.Y, ref.Z + dt * dr.Z)
        nxt = [assim.X + dt * da.X, assim.Y + dt * da.Y, assim.Z + dt * da.Z]
        for i in observed:
            nxt[i] = ref[i]
        assim = LorenzState(*nxt)
        if not math.isfinite(ref.X + ref.Y + ref.Z + assim.X + assim.Y + assim.Z):
            raise DivergenceError(f"Lorenz twin run became non-finite at step {n}", n)
        if n % stride == 0:
            record(n)

    data = np.array(rows)
    channels = {name: data[:, i + 1] for i, name in enumerate(("err_x", "err_y", "err_z", "err_l2"))}
    if record_states:
        st = np.array(states)
        channels.update({name: st[:, i] for i, name in enumerate(("X", "Y", "Z", "x", "y", "z"))})
    meta = {
        "system": "lorenz",
        "variant": variant.value,
        "sigma": p.sigma,
        "r": p.r,
        "b": p.b,
        "mu": p.mu,
        "dt": dt,
        "T": T,
        "output_stride": stride,
        "ref_init": list(map(float, ref_init)),
        "assim_init": list(map(float, assim_init)),
    }
    return ErrorSeries(data[:, 0], channels, meta)
