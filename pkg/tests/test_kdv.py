"""Tests for the KdV solver, its nudged companion and the counterexample data."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aotnudge.errors import CFLError, ConfigError, DivergenceError, ResolutionError
from aotnudge.kdv import (
    IFRK4,
    KdvParams,
    choose_M,
    ifrk4_step,
    init_cosines,
    init_shifted_profile,
    init_single_mode,
    linear_symbol,
    nonlinear_term,
    nudge_step,
    resolution_ratio,
    run_twin_kdv,
)
from aotnudge.spectral import (
    ModeProjection,
    SpectralField1D,
    ddx,
    half_weights,
    l2_norm,
    project,
    sq_norm_1d,
    to_physical,
)


def grid(N, L=2.0):
    return np.arange(N) * L / N


def smooth_field(seed, N=64, kmax=None):
    rng = np.random.default_rng(seed)
    kmax = kmax or N // 3
    c = np.zeros(N // 2 + 1, complex)
    c[1 : kmax + 1] = (rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)) / np.arange(1, kmax + 1) ** 2
    return SpectralField1D(c)


class TestParams:
    def test_default_dt_is_dx_squared(self):
        p = KdvParams(delta=0.075, N=128)
        assert p.dt == (2.0 / 128) ** 2

    def test_dt_above_dx_squared(self):
        with pytest.raises(CFLError) as e:
            KdvParams(delta=1, N=64, dt=1e-3)
        assert "Δt ≲ Δx²" in str(e.value)
        assert e.value.key == "dt"

    def test_feedback_cfl(self):
        dt = 1e-4
        with pytest.raises(CFLError) as e:
            KdvParams(delta=1, N=64, dt=dt, mu=3 / dt)
        assert "μ ≲ 2/Δt" in str(e.value)

    @pytest.mark.parametrize("kw", [{"N": 100}, {"gamma": -1.0}, {"M": 0}, {"M": 40, "N": 64}, {"mu": -1.0}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ConfigError):
            KdvParams(delta=1.0, **kw)


class TestLinearSymbol:
    def test_zero_mode_is_damping(self):
        assert linear_symbol(0, KdvParams(delta=1.0, gamma=0.3, N=64)) == 0.3

    def test_scaled_wavenumber(self):
        p = KdvParams(delta=0.5, N=64)
        assert linear_symbol(2, p) == pytest.approx(-1j * 0.25 * (2 * np.pi) ** 3)

    def test_modulus_of_propagator(self):
        p = KdvParams(delta=0.075, gamma=0.1, N=64)
        E = np.exp(-linear_symbol(np.arange(33), p) * p.dt)
        np.testing.assert_allclose(np.abs(E), np.exp(-0.1 * p.dt), rtol=1e-15)

    def test_undamped_is_rotation(self):
        s = linear_symbol(np.arange(1, 33), KdvParams(delta=1.0, N=64))
        assert np.all(s.real == 0)


class TestNonlinearTerm:
    def test_zero(self):
        assert not nonlinear_term(SpectralField1D.zeros(32)).coeffs.any()

    def test_cosine(self):
        u = init_single_mode(1.0, 1, 64)
        out = to_physical(nonlinear_term(u))
        np.testing.assert_allclose(out, 0.5 * np.pi * np.sin(2 * np.pi * grid(64)), atol=1e-12)

    def test_matches_advective_form(self):
        # band limited to N/6 so u * u_x is resolved without aliasing
        u = smooth_field(1, N=96 * 2 // 3 * 2, kmax=20)
        adv = -to_physical(u) * to_physical(ddx(u))
        np.testing.assert_allclose(to_physical(nonlinear_term(u)), adv, atol=1e-12)

    def test_dealiased_output(self):
        u = smooth_field(2, N=64)
        assert not nonlinear_term(u).coeffs[64 // 3 + 1 :].any()

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_conserves_l2(self, seed):
        u = smooth_field(seed)
        Nl = nonlinear_term(u)
        flux = np.sum(half_weights(u.N) * np.real(np.conj(u.coeffs) * Nl.coeffs))
        scale = np.sum(half_weights(u.N) * np.abs(u.coeffs) * np.abs(Nl.coeffs))
        assert abs(flux) <= 1e-12 * scale


class TestIFRK4:
    def test_zero_field(self):
        p = KdvParams(delta=0.075, N=64)
        assert not ifrk4_step(SpectralField1D.zeros(64), p).coeffs.any()

    def test_linear_exactness(self):
        p = KdvParams(delta=0.075, gamma=0.2, N=128)
        u = smooth_field(3, N=128)
        out = IFRK4(p, nonlinear=False).step(u.coeffs)
        exact = np.exp(-linear_symbol(np.arange(65), p) * p.dt) * u.coeffs
        assert np.max(np.abs(out - exact)) <= 1e-15 * np.max(np.abs(u.coeffs))

    def test_local_error_against_substeps(self):
        # one step against 100 sub-steps of dt/100: local error of a 4th order scheme is O(dt^5)
        errs = []
        for dt in (0.0156, 0.0078, 0.0039):
            u = init_single_mode(1.0, 1, 16).coeffs
            one = IFRK4(KdvParams(delta=0.5, N=16, dt=dt)).step(u)
            fine = IFRK4(KdvParams(delta=0.5, N=16, dt=dt / 100))
            c = u.copy()
            for _ in range(100):
                c = fine.step(c)
            errs.append(np.sqrt(sq_norm_1d(one - c)))
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes > 4.5)

    def test_forcing_enters_as_constant_source(self):
        p = KdvParams(delta=0.3, N=32)
        f = init_single_mode(1.0, 2, 32)
        out = IFRK4(p, forcing=f, nonlinear=False).step(np.zeros(17, complex))
        # Lawson RK4 integrates exp(-L s) f with Simpson's rule
        Lk = linear_symbol(2, p)
        E, E2 = np.exp(-Lk * p.dt), np.exp(-Lk * p.dt / 2)
        assert out[2] == pytest.approx(0.5 * p.dt / 6 * (E + 4 * E2 + 1), rel=1e-13)
        assert out[2] == pytest.approx(0.5 * (1 - E) / Lk, rel=1e-6)

    def test_forcing_must_be_mean_free(self):
        f = SpectralField1D.zeros(32)
        f.coeffs[0] = 1.0
        with pytest.raises(ConfigError):
            IFRK4(KdvParams(delta=1.0, N=32), forcing=f)

    def test_non_finite_raises(self):
        u = init_single_mode(1e200, 1, 32)
        with pytest.raises(DivergenceError):
            ifrk4_step(u, KdvParams(delta=1.0, N=32))

    def test_accepts_stacked_arrays(self):
        p = KdvParams(delta=0.075, N=64)
        a, b = smooth_field(4).coeffs, smooth_field(5).coeffs
        st_ = IFRK4(p)
        both = st_.step(np.stack([a, b]))
        np.testing.assert_allclose(both[1], st_.step(b), rtol=0, atol=1e-15)


class TestNudgeStep:
    def test_unobserved_reference_gives_free_step(self):
        p = KdvParams(delta=0.075, mu=100.0, M=5, N=64)
        u = init_single_mode(1.0, 6, 64)
        v = smooth_field(6, N=64)
        v.coeffs[1:6] = 0.0
        np.testing.assert_array_equal(nudge_step(v, u, p).coeffs, ifrk4_step(v, p).coeffs)

    def test_equal_states_give_free_step(self):
        p = KdvParams(delta=0.075, mu=100.0, M=5, N=64)
        u = smooth_field(7, N=64)
        np.testing.assert_array_equal(nudge_step(u, u, p).coeffs, ifrk4_step(u, p).coeffs)

    def test_first_step_from_zero(self):
        p = KdvParams(delta=0.075, mu=100.0, M=3, N=64)
        u = init_single_mode(1.0, 1, 64)
        v1 = nudge_step(SpectralField1D.zeros(64), u, p).coeffs
        E1 = np.exp(-linear_symbol(1, p) * p.dt)
        assert v1[1] == E1 * p.mu * p.dt * u.coeffs[1]
        assert not np.delete(v1, 1).any()


class TestInitialData:
    def test_single_mode(self):
        u = init_single_mode(1.0, 6, 128)
        assert l2_norm(u) == pytest.approx(1.0, rel=1e-15)
        assert not project(ModeProjection(5), u).coeffs.any()
        np.testing.assert_allclose(to_physical(u), np.cos(6 * np.pi * grid(128)), atol=1e-14)

    def test_single_mode_norm_scales(self):
        assert l2_norm(init_single_mode(-2.5, 12, 128)) == pytest.approx(2.5, rel=1e-15)

    @pytest.mark.parametrize("c,k0", [(0.0, 3), (1.0, 0)])
    def test_single_mode_rejects_degenerate(self, c, k0):
        with pytest.raises(ValueError):
            init_single_mode(c, k0, 64)

    def test_cosines_beyond_cutoff_rejected(self):
        with pytest.raises(ValueError):
            init_cosines([(30, 1.0)], 64)

    def test_shifted_profile(self):
        u_in = init_single_mode(1.0, 1, 512)
        out = init_shifted_profile(u_in, 50, 0)
        s = 1 / np.sqrt(2.0)
        expected = s * (np.cos(np.pi * grid(512)) + np.cos(100 * np.pi * grid(512)))
        np.testing.assert_allclose(to_physical(out), expected, atol=1e-14)
        assert l2_norm(out) == pytest.approx(l2_norm(u_in), rel=1e-13)

    def test_shifted_profile_keeps_low_mode_shape(self):
        u_in = smooth_field(8, N=256, kmax=10)
        out = init_shifted_profile(u_in, 20, 3)
        P = ModeProjection(20)
        low_in, low_out = project(P, u_in).coeffs, project(P, out).coeffs
        ratio = low_out[1:11] / low_in[1:11]
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-13)
        assert abs(out.coeffs[43]) > 0

    def test_shifted_profile_rejects_zero(self):
        with pytest.raises(ValueError):
            init_shifted_profile(SpectralField1D.zeros(64), 5, 0)


class TestChooseM:
    def test_single_cosine(self):
        assert choose_M([init_single_mode(1.0, 1, 64)], 1e-16) == 1

    def test_zero_field(self):
        assert choose_M([SpectralField1D.zeros(64)], 1e-16) == 1

    def test_supremum_over_samples(self):
        a = init_cosines([(2, 1.0)], 64)
        b = init_cosines([(1, 1.0), (7, 1e-3)], 64)
        assert choose_M([a, b], 1e-16) == 7
        assert choose_M([a, b], 1e-5) == 2

    def test_cosine_run_to_unit_time(self):
        N = 256
        p = KdvParams(delta=0.075, N=N)
        stepper = IFRK4(p)
        c = init_single_mode(1.0, 1, N).coeffs
        samples = []
        for n in range(int(round(1 / p.dt)) + 1):
            if n % 512 == 0:
                samples.append(SpectralField1D(c.copy()))
            c = stepper.step(c)
        samples.append(SpectralField1D(c))
        M = choose_M(samples, 1e-16)
        assert 1 < M <= 50
        # M = 50 meets the selection inequality at every sample
        for s in samples:
            low = l2_norm(project(ModeProjection(50), s)) ** 2
            assert low >= l2_norm(s) ** 2 - 1e-16

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            choose_M([init_single_mode(1.0, 1, 64)], 0.0)


class TestTwinRun:
    def test_identical_twin(self):
        p = KdvParams(delta=0.075, mu=100, M=5, N=64)
        u = init_single_mode(1.0, 1, 64)
        r = run_twin_kdv(u, u, p, T=0.2, resolution="off")
        assert np.max(r.series["err_total"]) == 0.0

    def test_channels_and_snapshots(self):
        p = KdvParams(delta=1.0, mu=10, M=3, N=32)
        r = run_twin_kdv(init_single_mode(1.0, 1, 32), SpectralField1D.zeros(32), p, T=0.1, stride=16, snapshot_times=(0.0, 0.05))
        assert set(r.series.channels) == {"err_low", "err_high", "err_total", "norm_u", "norm_v"}
        assert [s.t for s in r.snapshots] == pytest.approx([0.0, 0.05, 0.1], abs=p.dt)
        # the horizon is rounded up to a whole number of steps
        assert 0.1 <= r.series.times[-1] < 0.1 + p.dt
        assert r.series.metadata["M"] == 3

    def test_lattice_reference_keeps_low_error_zero(self):
        p = KdvParams(delta=0.075, mu=100, M=5, N=128, filter_tol=1e-15)
        r = run_twin_kdv(init_single_mode(1.0, 6, 128), SpectralField1D.zeros(128), p, T=0.5)
        assert np.max(r.series["err_low"]) == 0.0
        assert r.info["assim_first_nonzero_step"] is None

    def test_rejects_mean(self):
        u = init_single_mode(1.0, 1, 32)
        u.coeffs[0] = 0.1
        with pytest.raises(ConfigError):
            run_twin_kdv(u, SpectralField1D.zeros(32), KdvParams(delta=1.0, N=32), T=0.1)

    def test_grid_mismatch(self):
        with pytest.raises(ConfigError):
            run_twin_kdv(init_single_mode(1.0, 1, 64), SpectralField1D.zeros(64), KdvParams(delta=1.0, N=32), T=0.1)

    def test_resolution_error(self):
        p = KdvParams(delta=0.075, N=16)
        with pytest.raises(ResolutionError):
            run_twin_kdv(init_single_mode(1.0, 1, 16), SpectralField1D.zeros(16), p, T=0.5, resolution="error")

    def test_resolution_warning(self, caplog):
        p = KdvParams(delta=0.075, N=16)
        with caplog.at_level(logging.WARNING):
            r = run_twin_kdv(init_single_mode(1.0, 1, 16), SpectralField1D.zeros(16), p, T=0.5, resolution="warn")
        assert not r.info["resolved"]
        assert "increase N" in caplog.text

    def test_resolution_ratio(self):
        c = np.zeros(33, complex)
        c[1] = 1.0
        c[10] = 1e-2
        c[20] = 1e-3
        assert resolution_ratio(c) == 1e-3

    def test_divergence_reports_step(self):
        p = KdvParams(delta=0.01, N=16)
        with pytest.raises(DivergenceError) as e:
            run_twin_kdv(init_single_mode(1e150, 1, 16), SpectralField1D.zeros(16), p, T=1.0, resolution="off")
        assert e.value.step >= 1
