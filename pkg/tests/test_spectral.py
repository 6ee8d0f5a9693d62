"""Tests for the shared field algebra."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aotnudge.errors import MalformedFieldError
from aotnudge.spectral import (
    ModeProjection,
    SpectralField1D,
    SpectralVectorField2D,
    ddx,
    dealias_23,
    l2_norm,
    l2_norm_split,
    project,
    radial_spectrum_2d,
    roundoff_filter,
    set_mode_2d,
    shell_energy_1d,
    to_physical,
    to_spectral,
    to_spectral_2d,
    write_full_spectrum_csv,
    write_spectrum_csv,
)


def random_field(seed, N=64, L=2.0, kmax=None):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(N // 2 + 1) + 1j * rng.standard_normal(N // 2 + 1)
    c[0] = 0.0
    c[-1] = c[-1].real
    if kmax is not None:
        c[kmax + 1 :] = 0.0
    return SpectralField1D(c, L)


def random_field_2d(seed, N=16):
    rng = np.random.default_rng(seed)
    return to_spectral_2d(rng.standard_normal((2, N, N)))


def grid(N, L=2.0):
    return np.arange(N) * L / N


class TestSpectralField1D:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            SpectralField1D(np.zeros(13, complex))

    def test_from_modes_builds_cosine(self):
        f = SpectralField1D.from_modes(16, {1: 0.5})
        np.testing.assert_allclose(to_physical(f), np.cos(np.pi * grid(16)), atol=1e-15)

    def test_negative_wavenumber_is_conjugate(self):
        f = random_field(3, N=16)
        assert f.coeff(-3) == np.conj(f.coeff(3))

    def test_arithmetic(self):
        f, g = random_field(1), random_field(2)
        np.testing.assert_allclose((2.0 * f - g + f).coeffs, 3.0 * f.coeffs - g.coeffs, rtol=1e-15, atol=1e-15)
        np.testing.assert_array_equal((-f).coeffs, -f.coeffs)


class TestTransforms:
    def test_zero_field(self):
        assert not to_physical(SpectralField1D.zeros(32)).any()

    def test_single_mode_is_cosine(self):
        f = SpectralField1D.zeros(32)
        f.coeffs[1] = 0.5
        np.testing.assert_allclose(to_physical(f), np.cos(np.pi * grid(32)), atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), logN=st.integers(3, 9))
    def test_round_trip(self, seed, logN):
        N = 2**logN
        f = random_field(seed, N)
        back = to_spectral(to_physical(f))
        assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-13 * np.max(np.abs(f.coeffs))

    def test_symmetry_violation_raises(self):
        f = SpectralField1D.zeros(16)
        f.coeffs[0] = 1j
        with pytest.raises(MalformedFieldError):
            to_physical(f)

    def test_2d_round_trip(self):
        f = random_field_2d(7)
        back = to_spectral_2d(to_physical(f))
        np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-14)

    def test_2d_symmetry_violation_raises(self):
        f = SpectralVectorField2D.zeros(8)
        f.coeffs[0, 1, 0] = 1.0
        f.coeffs[0, 7, 0] = 2.0
        with pytest.raises(MalformedFieldError):
            to_physical(f)

    def test_set_mode_2d_keeps_field_real(self):
        c = np.zeros((2, 16, 9), complex)
        set_mode_2d(c, 3, 0, (1 + 2j, 0.5j))
        phys = to_physical(SpectralVectorField2D(c))
        x = np.arange(16) * 2 * np.pi / 16
        X1 = np.meshgrid(x, x, indexing="ij")[0]
        np.testing.assert_allclose(phys[0], 2 * np.real((1 + 2j) * np.exp(3j * X1)), atol=1e-14)


class TestDerivatives:
    def test_first_derivative_of_cosine(self):
        f = SpectralField1D.from_modes(64, {1: 0.5})
        np.testing.assert_allclose(to_physical(ddx(f, 1)), -np.pi * np.sin(np.pi * grid(64)), atol=1e-13)

    def test_third_derivative_of_cosine(self):
        f = SpectralField1D.from_modes(64, {1: 0.5})
        np.testing.assert_allclose(to_physical(ddx(f, 3)), np.pi**3 * np.sin(np.pi * grid(64)), atol=1e-12)

    @pytest.mark.parametrize("order", [1, 3])
    def test_zero_field(self, order):
        assert not ddx(SpectralField1D.zeros(16), order).coeffs.any()

    def test_rejects_other_orders(self):
        with pytest.raises(ValueError):
            ddx(SpectralField1D.zeros(16), 2)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3), order=st.sampled_from([1, 3]))
    def test_linearity(self, seed, a, b, order):
        f, g = random_field(seed), random_field(seed + 1)
        lhs = ddx(a * f + b * g, order).coeffs
        rhs = a * ddx(f, order).coeffs + b * ddx(g, order).coeffs
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(rhs)))

    def test_period_scaling(self):
        f = SpectralField1D.from_modes(32, {1: 0.5}, L=2 * np.pi)
        x = np.arange(32) * 2 * np.pi / 32
        np.testing.assert_allclose(to_physical(ddx(f)), -np.sin(x), atol=1e-14)


class TestDealias:
    def test_mode_above_cutoff_is_zeroed(self):
        f = SpectralField1D.from_modes(128, {50: 1.0})
        assert not dealias_23(f).coeffs.any()

    def test_mode_at_cutoff_is_kept(self):
        f = SpectralField1D.from_modes(128, {42: 1.0})
        np.testing.assert_array_equal(dealias_23(f).coeffs, f.coeffs)

    def test_zero_field(self):
        assert not dealias_23(SpectralField1D.zeros(32)).coeffs.any()

    def test_2d_uses_max_norm(self):
        f = SpectralVectorField2D.zeros(64)
        set_mode_2d(f.coeffs, 21, 21, (1.0, 1.0))  # |k| = 29.7 but max(|k1|,|k2|) = 21 <= 21
        set_mode_2d(f.coeffs, 22, 1, (1.0, 1.0))
        out = dealias_23(f)
        assert out.coeff(21, 21)[0] == 1.0
        assert not out.coeff(22, 1).any()


class TestProjection:
    def test_1d_band_excludes_higher_mode(self):
        f = SpectralField1D.from_modes(64, {6: 0.5})
        assert not project(ModeProjection(5), f).coeffs.any()

    def test_1d_mask_support(self):
        m = ModeProjection(5).mask(32)
        assert list(np.flatnonzero(m)) == [1, 2, 3, 4, 5]

    def test_2d_annulus_threshold(self):
        f = SpectralVectorField2D.zeros(64)
        set_mode_2d(f.coeffs, 15, 15, (1.0, -1.0))
        assert not project(ModeProjection(21, 2), f).coeffs.any()
        np.testing.assert_array_equal(project(ModeProjection(22, 2), f).coeffs, f.coeffs)

    def test_contains_uses_integer_arithmetic(self):
        assert 15**2 + 15**2 == 450
        assert not ModeProjection(21, 2).contains(15, 15)
        assert ModeProjection(22, 2).contains(15, 15)
        assert not ModeProjection(3, 2).contains(0, 0)

    def test_zero_mode_always_excluded(self):
        f = SpectralField1D.zeros(16)
        f.coeffs[0] = 1.0
        assert not project(ModeProjection(3), f).coeffs.any()

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 40))
    def test_idempotent(self, seed, M):
        P = ModeProjection(M)
        once = project(P, random_field(seed))
        np.testing.assert_array_equal(project(P, once).coeffs, once.coeffs)

    def test_self_adjoint(self):
        P = ModeProjection(7)
        f, g = random_field(10), random_field(11)

        def inner(a, b):
            return np.sum(to_physical(a) * to_physical(b))

        assert inner(project(P, f), g) == pytest.approx(inner(f, project(P, g)), rel=1e-12)

    def test_rejects_bad_cutoff(self):
        with pytest.raises(ValueError):
            ModeProjection(0)
        with pytest.raises(ValueError):
            ModeProjection(2.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            project(ModeProjection(3, 2), SpectralField1D.zeros(16))


class TestNorms:
    def test_zero_field(self):
        assert l2_norm_split(SpectralField1D.zeros(16), ModeProjection(3)) == (0.0, 0.0)

    def test_cosine_has_unit_norm(self):
        # oracle: the integral of cos^2(pi x) over one period of length 2
        x = np.linspace(0.0, 2.0, 200001)
        oracle = np.sqrt(np.trapezoid(np.cos(np.pi * x) ** 2, x))
        f = SpectralField1D.from_modes(32, {1: 0.5})
        assert l2_norm(f) == pytest.approx(oracle, rel=1e-9)
        assert l2_norm(f) == pytest.approx(1.0, rel=1e-15)

    def test_matches_quadrature_on_grid(self):
        f = random_field(5, N=64, kmax=20)
        u = to_physical(f)
        assert l2_norm(f) ** 2 == pytest.approx(np.sum(u**2) * 2.0 / 64, rel=1e-13)

    def test_support_above_cutoff(self):
        f = SpectralField1D.from_modes(64, {9: 0.3})
        low, high = l2_norm_split(f, ModeProjection(8))
        assert low == 0.0
        assert high == l2_norm(f)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 32))
    def test_parseval_split(self, seed, M):
        f = random_field(seed)
        low, high = l2_norm_split(f, ModeProjection(M))
        assert low**2 + high**2 == pytest.approx(l2_norm(f) ** 2, rel=1e-12)

    def test_2d_norm_matches_quadrature(self):
        f = random_field_2d(4, N=16)
        u = to_physical(f)
        assert l2_norm(f) ** 2 == pytest.approx(np.sum(u**2) * (2 * np.pi / 16) ** 2, rel=1e-13)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 12))
    def test_2d_parseval_split(self, seed, M):
        f = random_field_2d(seed)
        low, high = l2_norm_split(f, ModeProjection(M, 2))
        assert low**2 + high**2 == pytest.approx(l2_norm(f) ** 2, rel=1e-12)


class TestSpectra:
    def test_shell_energy_sums_to_norm(self):
        f = random_field(8)
        assert shell_energy_1d(f.coeffs).sum() == pytest.approx(l2_norm(f) ** 2, rel=1e-13)

    def test_radial_spectrum_sums_to_norm(self):
        f = random_field_2d(9)
        _, e = radial_spectrum_2d(f)
        assert e.sum() == pytest.approx(l2_norm(f) ** 2, rel=1e-13)

    def test_roundoff_filter_per_system(self):
        c = np.array([[1.0, 1e-17, 0.5], [1e-20, 1e-36, 0.0]], dtype=complex)
        roundoff_filter(c, 1e-15)
        np.testing.assert_array_equal(c, [[1.0, 0.0, 0.5], [1e-20, 0.0, 0.0]])

    def test_roundoff_filter_disabled(self):
        c = np.array([1.0, 1e-30], dtype=complex)
        roundoff_filter(c, 0.0)
        assert c[1] == 1e-30

    def test_write_1d_csv(self, tmp_path):
        f = SpectralField1D.from_modes(16, {2: 0.25})
        write_spectrum_csv(tmp_path / "s.csv", f, SpectralField1D.zeros(16))
        rows = list(csv.reader(open(tmp_path / "s.csv")))
        assert rows[0] == ["k", "abs_uhat", "abs_vhat"]
        assert len(rows) == 1 + 9
        assert float(rows[3][1]) == 0.25 and float(rows[3][2]) == 0.0

    def test_write_2d_csvs(self, tmp_path):
        f = random_field_2d(1, N=8)
        write_spectrum_csv(tmp_path / "r.csv", f)
        write_full_spectrum_csv(tmp_path / "full.csv", f)
        radial = list(csv.reader(open(tmp_path / "r.csv")))
        full = list(csv.reader(open(tmp_path / "full.csv")))
        assert radial[0] == ["shell", "energy_u"]
        assert full[0] == ["k1", "k2", "abs_coeff"]
        assert len(full) == 1 + 8 * 5
