"""
Periodic field algebra shared by the KdV and Euler solvers.

Fields are stored by their expansion coefficients,

    f(x) = sum_k c_k exp(i q_k x),    q_k = 2 pi k / L,

so ``c_k = rfft(f) / N``. Only the non-negative half of the last axis is kept
(numpy real-FFT layout); negative wavenumbers are implied by conjugate
symmetry. With this normalization ``||f||^2 = L^d * sum_k |c_k|^2`` over the
full spectrum, which is the only place the Parseval constant appears.

1D layout: ``coeffs[k]`` for ``k = 0 .. N/2``.
2D layout: ``coeffs[comp, i1, k2]`` with ``k1 = fftfreq(N)*N[i1]`` and
``k2 = 0 .. N/2``; the period is fixed at 2 pi in both directions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.fft as sfft

from .errors import MalformedFieldError

SYMMETRY_TOL = 1e-12
TWO_PI = 2.0 * np.pi


def _check_grid_size(N: int) -> int:
    N = int(N)
    if N < 4 or N & (N - 1):
        raise ValueError(f"grid size must be a power of two >= 4, got {N}")
    return N


def half_weights(N: int) -> np.ndarray:
    """Multiplicity of each stored half-spectrum column (1 for k=0 and Nyquist, else 2)."""
    w = np.full(N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


# ---------------------------------------------------------------------------
# field types


@dataclass(frozen=True, eq=False)
class SpectralField1D:
    """Real L-periodic scalar field held as half-spectrum coefficients."""

    coeffs: np.ndarray
    L: float = 2.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1:
            raise MalformedFieldError("1D field needs a 1D coefficient array")
        _check_grid_size(2 * (c.size - 1))
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return 2 * (self.coeffs.size - 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.N // 2 + 1)

    @property
    def q(self) -> np.ndarray:
        return TWO_PI * self.wavenumbers / self.L

    def grid(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    def coeff(self, k: int) -> complex:
        """Coefficient of wavenumber ``k`` (negative ``k`` via conjugate symmetry)."""
        if abs(k) > self.N // 2:
            return 0j
        return self.coeffs[k] if k >= 0 else np.conj(self.coeffs[-k])

    @classmethod
    def zeros(cls, N: int, L: float = 2.0) -> "SpectralField1D":
        return cls(np.zeros(_check_grid_size(N) // 2 + 1, dtype=complex), L)

    @classmethod
    def from_modes(cls, N: int, modes: dict, L: float = 2.0) -> "SpectralField1D":
        """Build from ``{k: c_k}`` with ``k >= 0``; the ``-k`` partner is implied."""
        f = cls.zeros(N, L)
        for k, c in modes.items():
            if not 0 <= k <= N // 2:
                raise ValueError(f"wavenumber {k} outside 0..{N // 2}")
            f.coeffs[k] += c
        return f

    @classmethod
    def from_physical(cls, samples, L: float = 2.0) -> "SpectralField1D":
        return to_spectral(samples, L)

    def copy(self) -> "SpectralField1D":
        return SpectralField1D(self.coeffs.copy(), self.L)

    def _like(self, coeffs) -> "SpectralField1D":
        return SpectralField1D(coeffs, self.L)

    def __add__(self, other):
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, a):
        return self._like(a * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.coeffs)


@dataclass(frozen=True, eq=False)
class SpectralVectorField2D:
    """Real two-component vector field on [0, 2pi)^2 (half-spectrum planes)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] != 2:
            raise MalformedFieldError("2D vector field needs coefficients of shape (2, N, N//2+1)")
        N = _check_grid_size(c.shape[1])
        if c.shape[2] != N // 2 + 1:
            raise MalformedFieldError(f"expected last axis of length {N // 2 + 1}, got {c.shape[2]}")
        object.__setattr__(self, "coeffs", c)

    L = TWO_PI

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    @property
    def wavenumbers(self):
        return wavenumbers_2d(self.N)

    def coeff(self, k1: int, k2: int) -> np.ndarray:
        """Coefficient pair ``(c1, c2)`` at ``(k1, k2)``."""
        N = self.N
        if k2 < 0:
            return np.conj(self.coeff(-k1, -k2))
        if k2 > N // 2 or abs(k1) > N // 2:
            return np.zeros(2, dtype=complex)
        return self.coeffs[:, k1 % N, k2]

    @classmethod
    def zeros(cls, N: int) -> "SpectralVectorField2D":
        N = _check_grid_size(N)
        return cls(np.zeros((2, N, N // 2 + 1), dtype=complex))

    @classmethod
    def from_physical(cls, samples) -> "SpectralVectorField2D":
        return to_spectral_2d(samples)

    def copy(self) -> "SpectralVectorField2D":
        return SpectralVectorField2D(self.coeffs.copy())

    def __add__(self, other):
        return SpectralVectorField2D(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralVectorField2D(self.coeffs - other.coeffs)

    def __mul__(self, a):
        return SpectralVectorField2D(a * self.coeffs)

    __rmul__ = __mul__


Field = Union[SpectralField1D, SpectralVectorField2D]


def set_mode_2d(coeffs: np.ndarray, k1: int, k2: int, value) -> None:
    """Write ``value`` (per component) at ``(k1, k2)`` into half-spectrum storage, in place.

    Entries on the self-conjugate columns (``k2 = 0`` or Nyquist) also get the
    conjugate partner so the field stays real.
    """
    N = coeffs.shape[-2]
    value = np.asarray(value, dtype=complex)
    if k2 < 0:
        k1, k2, value = -k1, -k2, np.conj(value)
    coeffs[..., k1 % N, k2] = value
    if k2 == 0 or k2 == N // 2:
        coeffs[..., (-k1) % N, k2] = np.conj(value)


# ---------------------------------------------------------------------------
# wavenumbers and masks


def wavenumbers_2d(N: int):
    """Integer wavenumber meshes ``(K1, K2)`` of shape ``(N, N//2+1)``."""
    k1 = np.rint(sfft.fftfreq(N) * N).astype(np.int64)
    k2 = np.arange(N // 2 + 1, dtype=np.int64)
    return np.meshgrid(k1, k2, indexing="ij")


def dealias_mask_1d(N: int) -> np.ndarray:
    return np.arange(N // 2 + 1) <= N // 3


def dealias_mask_2d(N: int) -> np.ndarray:
    K1, K2 = wavenumbers_2d(N)
    cut = N // 3
    return (np.abs(K1) <= cut) & (np.abs(K2) <= cut)


@dataclass(frozen=True)
class ModeProjection:
    """Orthogonal projection onto the observed low modes.

    ``ndim=1`` keeps ``0 < |k| <= M``; ``ndim=2`` keeps the disc
    ``0 < k1^2 + k2^2 <= M^2`` (integer test, no floating point boundary).
    """

    M: int
    ndim: int = 1

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"cutoff M must be a positive integer, got {self.M}")
        if self.ndim not in (1, 2):
            raise ValueError("ndim must be 1 or 2")

    def mask(self, N: int) -> np.ndarray:
        M = int(self.M)
        if self.ndim == 1:
            k = np.arange(N // 2 + 1)
            return (k >= 1) & (k <= M)
        K1, K2 = wavenumbers_2d(N)
        r2 = K1 * K1 + K2 * K2
        return (r2 >= 1) & (r2 <= M * M)

    def contains(self, *k: int) -> bool:
        r2 = sum(int(ki) * int(ki) for ki in k)
        return 0 < r2 <= int(self.M) ** 2


# ---------------------------------------------------------------------------
# transforms


def _check_symmetry_1d(c: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    bad = max(abs(c[0].imag), abs(c[-1].imag))
    if bad > SYMMETRY_TOL * scale:
        raise MalformedFieldError(
            f"self-conjugate coefficients carry imaginary part {bad:.3e}; field is not real"
        )


def _check_symmetry_2d(c: np.ndarray) -> None:
    N = c.shape[-2]
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    idx = (-np.arange(N)) % N
    for col in (0, N // 2):
        plane = c[..., col]
        bad = np.max(np.abs(plane - np.conj(plane[..., idx])))
        if bad > SYMMETRY_TOL * scale:
            raise MalformedFieldError(
                f"column k2={col} violates conjugate symmetry by {bad:.3e}; field is not real"
            )


def to_physical(f: Field) -> np.ndarray:
    """Grid samples of a field; 1D returns ``(N,)``, 2D returns ``(2, N, N)``."""
    if isinstance(f, SpectralField1D):
        _check_symmetry_1d(f.coeffs)
        return sfft.irfft(f.coeffs, n=f.N, norm="forward")
    _check_symmetry_2d(f.coeffs)
    return sfft.irfft2(f.coeffs, s=(f.N, f.N), norm="forward")


def to_spectral(samples, L: float = 2.0) -> SpectralField1D:
    samples = np.asarray(samples, dtype=float)
    return SpectralField1D(sfft.rfft(samples, norm="forward"), L)


def to_spectral_2d(samples) -> SpectralVectorField2D:
    samples = np.asarray(samples, dtype=float)
    return SpectralVectorField2D(sfft.rfft2(samples, norm="forward"))


# ---------------------------------------------------------------------------
# operators


def ddx(f: SpectralField1D, order: int = 1) -> SpectralField1D:
    """Spectral derivative: multiplies ``c_k`` by ``(i q_k)^order``."""
    if order not in (1, 3):
        raise ValueError(f"derivative order must be 1 or 3, got {order}")
    sym = (1j * f.q) ** order
    # the Nyquist mode has no real derivative
    sym[-1] = 0.0
    return SpectralField1D(sym * f.coeffs, f.L)


def dealias_23(f: Field) -> Field:
    """Zero every mode above floor(N/3) (per direction in 2D)."""
    if isinstance(f, SpectralField1D):
        return SpectralField1D(f.coeffs * dealias_mask_1d(f.N), f.L)
    return SpectralVectorField2D(f.coeffs * dealias_mask_2d(f.N))


def project(P: ModeProjection, f: Field) -> Field:
    if isinstance(f, SpectralField1D):
        if P.ndim != 1:
            raise ValueError("2D projection applied to a 1D field")
        return SpectralField1D(f.coeffs * P.mask(f.N), f.L)
    if P.ndim != 2:
        raise ValueError("1D projection applied to a 2D field")
    return SpectralVectorField2D(f.coeffs * P.mask(f.N))


def roundoff_filter(coeffs: np.ndarray, tol: float, axes=(-1,)) -> np.ndarray:
    """Zero coefficients below ``tol`` times the largest one (Krasny-type filter).

    The maximum is taken over ``axes`` so stacked systems are filtered
    independently. Operates in place and returns the array.
    """
    if tol <= 0:
        return coeffs
    a = np.abs(coeffs)
    cut = tol * np.max(a, axis=axes, keepdims=True)
    coeffs[a < cut] = 0.0
    return coeffs


# ---------------------------------------------------------------------------
# norms


def sq_norm_1d(coeffs: np.ndarray, L: float = 2.0) -> np.ndarray:
    """Squared L2 norm of half-spectrum coefficients along the last axis."""
    N = 2 * (coeffs.shape[-1] - 1)
    return L * np.sum(half_weights(N) * (coeffs.real**2 + coeffs.imag**2), axis=-1)


def sq_norm_2d(coeffs: np.ndarray) -> np.ndarray:
    """Squared L2 norm of ``(..., 2, N, N//2+1)`` vector coefficients."""
    N = coeffs.shape[-2]
    e = (coeffs.real**2 + coeffs.imag**2) * half_weights(N)
    return TWO_PI**2 * np.sum(e, axis=(-3, -2, -1))


def l2_norm(f: Field) -> float:
    if isinstance(f, SpectralField1D):
        return float(np.sqrt(sq_norm_1d(f.coeffs, f.L)))
    return float(np.sqrt(sq_norm_2d(f.coeffs)))


def l2_norm_split(f: Field, P: ModeProjection):
    """``(||P f||, ||(I - P) f||)``."""
    low = project(P, f)
    return l2_norm(low), l2_norm(f - low)


# ---------------------------------------------------------------------------
# spectra


def spectrum_1d(f: SpectralField1D):
    """Wavenumbers ``k = 0..N/2`` and ``|c_k|``."""
    return f.wavenumbers, np.abs(f.coeffs)


def shell_energy_1d(coeffs: np.ndarray, L: float = 2.0) -> np.ndarray:
    """Energy ``L * (|c_k|^2 + |c_-k|^2)`` per shell ``|k|``; sums to ``||f||^2``."""
    N = 2 * (coeffs.shape[-1] - 1)
    return L * half_weights(N) * np.abs(coeffs) ** 2


def radial_spectrum_2d(f: SpectralVectorField2D):
    """Energy per integer shell ``round(|k|)``; sums to ``||f||^2``."""
    N = f.N
    K1, K2 = wavenumbers_2d(N)
    shell = np.rint(np.sqrt(K1 * K1 + K2 * K2)).astype(np.int64)
    e = TWO_PI**2 * half_weights(N) * np.sum(np.abs(f.coeffs) ** 2, axis=0)
    energy = np.bincount(shell.ravel(), weights=e.ravel())
    return np.arange(energy.size), energy


def write_spectrum_csv(path, f: Field, g: Field = None) -> None:
    """Spectrum snapshot CSV.

    1D: ``k, abs_uhat[, abs_vhat]``. 2D: radially binned ``shell, energy_u[, energy_v]``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(f, SpectralField1D):
            w.writerow(["k", "abs_uhat"] + (["abs_vhat"] if g is not None else []))
            cols = [f.wavenumbers, np.abs(f.coeffs)] + ([np.abs(g.coeffs)] if g is not None else [])
        else:
            w.writerow(["shell", "energy_u"] + (["energy_v"] if g is not None else []))
            s, e = radial_spectrum_2d(f)
            cols = [s, e] + ([radial_spectrum_2d(g)[1]] if g is not None else [])
        for row in zip(*cols):
            w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def write_full_spectrum_csv(path, f: SpectralVectorField2D) -> None:
    """Full 2D dump: ``k1, k2, abs_coeff`` with ``abs = sqrt(|c1|^2 + |c2|^2)``, k2 >= 0."""
    K1, K2 = wavenumbers_2d(f.N)
    a = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "abs_coeff"])
        for k1, k2, v in zip(K1.ravel(), K2.ravel(), a.ravel()):
            w.writerow([int(k1), int(k2), repr(float(v))])
