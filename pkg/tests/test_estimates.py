import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian_field, random_field
from hoslab import evolution
from hoslab.estimates import (
    AdmissiblePair,
    XsbParams,
    _antiderivative,
    almost_conservation_experiment,
    bilinear_horizon,
    bilinear_ratio,
    duhamel_cutoff_check,
    estimate_c0,
    fit_loglog,
    growth_experiment,
    is_admissible,
    linear_trajectory,
    rescaling_plan,
    strichartz_ratio,
    time_cutoff,
    time_sobolev_norm,
    xsb_norm,
)
from hoslab.evolution import SolverConfig
from hoslab.harness import generate_initial_data
from hoslab.i_method import IOperatorSpec
from hoslab.spectral import Field, GridSpec, lp_norm, sobolev_norm


class TestAdmissible:
    @pytest.mark.parametrize("p,q", [(4, 4), (8, 8 / 3), (2, math.inf), (6, 3)])
    def test_accepts(self, p, q):
        assert is_admissible(p, q)

    @pytest.mark.parametrize("p,q", [(math.inf, 2), (1, math.inf), (4, 3), (3, 3)])
    def test_rejects(self, p, q):
        assert not is_admissible(p, q)
        with pytest.raises(ValueError):
            AdmissiblePair(p, q)


class TestFit:
    def test_exact_power(self):
        x = [1.0, 2.0, 4.0, 8.0]
        fit = fit_loglog(x, [3 * v**2 for v in x])
        assert fit.slope == pytest.approx(2.0, rel=1e-12)
        assert fit.intercept == pytest.approx(math.log(3), rel=1e-12)
        assert fit.residual_rms < 1e-12
        assert set(fit.as_dict()) == {"log_x", "log_y", "slope", "intercept", "residual_rms"}

    @pytest.mark.parametrize("x,y", [([1, 2], [1, 2]), ([1, 2, 3], [1, 0, 2]), ([1, 2, 3], [1, 2])])
    def test_rejects(self, x, y):
        with pytest.raises(ValueError):
            fit_loglog(x, y)


class TestXsbParams:
    @pytest.mark.parametrize("b,bp", [(0.5, 0.3), (0.55, 0.0), (0.55, 0.5), (0.8, 0.3)])
    def test_rejects(self, b, bp):
        with pytest.raises(ValueError):
            XsbParams(b=b, b_prime=bp)

    def test_cutoff(self):
        assert time_cutoff(0.5) == 1.0 and time_cutoff(-2.5) == 0.0
        assert time_cutoff(1.5, 0.5) == 0.0 and time_cutoff(0.4, 0.5) == 1.0


class TestStrichartz:
    grid = GridSpec(d=1, k=3, n=128, L=math.pi)

    @pytest.mark.parametrize("p,q", [(4, 4), (8, 8 / 3)])
    def test_single_mode_closed_form(self, p, q):
        # |e^{it Lambda^k} f| is constant, so the ratio is (T/V)^{1/p}
        f = Field.plane_wave(self.grid, (5,), 0.3)
        T = 0.5
        r = strichartz_ratio(f, AdmissiblePair(p, q), T=T)
        assert r == pytest.approx((T / self.grid.volume) ** (1 / p), rel=1e-12)

    def test_unit_phase_invariance(self):
        f = random_field(self.grid, 4)
        pair = AdmissiblePair(4, 4)
        assert strichartz_ratio(f * np.exp(0.7j), pair) == pytest.approx(strichartz_ratio(f, pair), rel=1e-12)

    def test_endpoint_like_pair(self):
        p = 1e6
        q = 1 / (0.5 - 1 / p)
        r = strichartz_ratio(random_field(self.grid, 5), (p, q), T=1.0)
        assert r == pytest.approx(1.0, rel=1e-4)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            strichartz_ratio(Field.zeros(self.grid), AdmissiblePair(4, 4))


class TestBilinear:
    grid = GridSpec(d=2, k=2, n=64, L=math.pi)

    def _data(self, seed):
        return generate_initial_data("windowed-noise", self.grid, seed, 1.0, width=0.5)

    def test_equal_scales_finite(self):
        u, v = self._data(1), self._data(2)
        T = bilinear_horizon(self.grid, 4)
        r = bilinear_ratio(u, v, 4, 4, T, T / 32)
        assert 0 < r < np.inf

    def test_rejects(self):
        u = self._data(1)
        with pytest.raises(ValueError, match="empty"):
            bilinear_ratio(u, Field.zeros(self.grid), 2, 8, 0.1, 0.01)
        with pytest.raises(ValueError):
            bilinear_ratio(u, u, 8, 2, 0.1, 0.01)
        with pytest.raises(ValueError):
            bilinear_ratio(u, u, 2, 8, 0.1, 0.01, conjugate="w")

    def test_conjugating_either_factor_agrees(self):
        u, v = self._data(3), self._data(4)
        T = bilinear_horizon(self.grid, 8)
        a = bilinear_ratio(u, v, 2, 8, T, T / 32, conjugate="u")
        b = bilinear_ratio(u, v, 2, 8, T, T / 32, conjugate="v")
        assert a == pytest.approx(b, rel=1e-12)

    def test_horizon(self):
        assert bilinear_horizon(self.grid, 8) == pytest.approx(0.5 * math.pi / (2 * 16))


class TestXsb:
    grid = GridSpec(d=1, k=3, n=32, L=math.pi)

    def _times(self, n=256, t_max=2.5):
        return np.linspace(-t_max, t_max, n, endpoint=False)

    def test_zero(self):
        t = self._times()
        traj = [Field.zeros(self.grid)] * t.size
        assert xsb_norm(traj, t, XsbParams()) == 0.0

    def test_b0_gamma0_is_l2(self):
        # nonlinear-looking trajectory: free flow plus a time-dependent perturbation
        t = self._times()
        f, h = random_field(self.grid, 1), random_field(self.grid, 2)
        traj = [linear_trajectory(f, [s])[0] + h * math.sin(3 * s) for s in t]
        dt = t[1] - t[0]
        direct = math.sqrt(sum(float(time_cutoff(s)) ** 2 * lp_norm(u, 2) ** 2 for s, u in zip(t, traj)) * dt)
        assert xsb_norm(traj, t, (0.0, 0.0)) == pytest.approx(direct, rel=1e-10)

    def test_free_solution_factorises(self):
        t = self._times()
        f = random_field(self.grid, 3)
        traj = linear_trajectory(f, t)
        p = XsbParams(gamma=1.0)
        expected = time_sobolev_norm(time_cutoff(t), t[1] - t[0], p.b) * sobolev_norm(f, 1.0)
        assert xsb_norm(traj, t, p) == pytest.approx(expected, rel=1e-10)

    def test_window_too_short(self):
        t = np.linspace(-1.5, 1.5, 64, endpoint=False)
        traj = [Field.zeros(self.grid)] * t.size
        with pytest.raises(ValueError, match="cover"):
            xsb_norm(traj, t, XsbParams())

    def test_non_uniform(self):
        t = np.concatenate([self._times(64)[:-1], [3.0]])
        traj = [Field.zeros(self.grid)] * t.size
        with pytest.raises(ValueError, match="uniform"):
            xsb_norm(traj, t, XsbParams())


class TestDuhamel:
    times = np.linspace(-16, 16, 1024, endpoint=False)

    def test_zero_signal(self):
        res = duhamel_cutoff_check(np.zeros(self.times.size), self.times, [1, 0.5, 0.25])
        assert res.ratios == [0.0, 0.0, 0.0] and res.fit is None

    def test_sweep_too_short(self):
        with pytest.raises(ValueError, match="at least 3"):
            duhamel_cutoff_check(np.ones(self.times.size), self.times, [1, 0.5])

    def test_sweep_outside_window(self):
        with pytest.raises(ValueError, match="window"):
            duhamel_cutoff_check(np.ones(self.times.size), self.times, [8, 4, 2])

    @given(st.integers(-40, 40))
    def test_antiderivative_of_pure_tone(self, j):
        t = self.times
        tau = 2 * math.pi * j / 32.0
        g = np.exp(1j * tau * t)
        G = _antiderivative(g, t)
        exact = t if j == 0 else (np.exp(1j * tau * t) - 1) / (1j * tau)
        np.testing.assert_allclose(G, exact, atol=1e-10)

    def test_pure_tone_against_quadrature(self):
        # |delta tau0| <= 1: the windowed antiderivative is smooth, so direct quadrature of
        # its H^b norm on a much finer time grid is an independent oracle
        p = XsbParams()
        tau0, delta = 2 * math.pi * 3 / 32.0, 1.0
        res = duhamel_cutoff_check(np.exp(1j * tau0 * self.times), self.times, [1.0, 0.5, 0.25], p)
        fine = np.linspace(-16, 16, 1 << 14, endpoint=False)
        dt = fine[1] - fine[0]
        G = (np.exp(1j * tau0 * fine) - 1) / (1j * tau0)
        num = time_sobolev_norm(time_cutoff(fine, delta) * G, dt, p.b)
        den = time_sobolev_norm(np.exp(1j * tau0 * fine), dt, -p.b_prime)
        assert res.ratios[0] == pytest.approx(num / den, rel=1e-8)
        assert res.normalized[0] == res.ratios[0]


class TestAlmostConservation:
    grid = GridSpec(d=1, k=3, n=256, L=math.pi)

    def test_identity_operator_conserves(self):
        # I is the identity, so the increment is the solver's energy drift, O(dt^2) for smooth data
        u0 = generate_initial_data("shell-random", self.grid, 0, 0.5, band="<=", M=1)
        specs = [IOperatorSpec(N, 1.0, 3) for N in (500.0, 1000.0, 2000.0)]
        cfg = SolverConfig(dt=1e-3, T=0.05, dealias=False, record_every=10)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            res = almost_conservation_experiment(u0, specs, 0.05, cfg)
        assert max(res.increments) <= 1e-10
        assert res.bound_slope == pytest.approx(-51 / 22)

    def test_floor_exclusion(self):
        specs = [IOperatorSpec(N, 1.0, 3) for N in (4.0, 8.0, 16.0)]
        cfg = SolverConfig(dt=1e-3, T=0.01)
        with pytest.warns(UserWarning, match="measurement floor"):
            res = almost_conservation_experiment(Field.zeros(self.grid), specs, 0.01, cfg)
        assert res.excluded == [4.0, 8.0, 16.0] and res.fit is None

    def test_needs_specs(self):
        with pytest.raises(ValueError):
            almost_conservation_experiment(Field.zeros(self.grid), [], 0.01, SolverConfig(dt=1e-3, T=0.01))


class TestRescalingPlan:
    def test_k3_gamma1_exponents(self):
        plan = rescaling_plan(3, 1, 1.0, 10.0)
        assert plan.n_exponent == Fraction(9, 11)
        assert plan.lambda_exponent == Fraction(1, 2)

    def test_reaches_target(self):
        C0, C1, delta, T = 2.0, 0.5, 0.3, 50.0
        plan = rescaling_plan(3, 1.2, 0.7, T, C0, C1, delta)
        gamma0 = 51 / 22
        assert C1 * delta * plan.N**gamma0 / plan.lam**3 == pytest.approx(T, rel=1e-10)

    @pytest.mark.parametrize("gamma", [Fraction(11, 13), 0.8, 1.5, 2])
    def test_rejects_gamma(self, gamma):
        with pytest.raises(ValueError):
            rescaling_plan(3, gamma, 1.0, 10.0)

    def test_rejects_short_target(self):
        with pytest.raises(ValueError):
            rescaling_plan(3, 1, 1.0, 0.5)

    def test_exponent_vanishes_at_threshold(self):
        near = rescaling_plan(3, Fraction(11, 13) + Fraction(1, 10**6), 1.0, 10.0)
        assert 0 < near.n_exponent < Fraction(1, 10**5)
        assert near.N == math.inf
        assert rescaling_plan(3, Fraction(11, 13) + Fraction(1, 100), 1.0, 10.0).N > rescaling_plan(3, 1, 1.0, 10.0).N

    def test_lambda_increases_with_N(self):
        plans = [rescaling_plan(3, 1, 1.0, T) for T in (1.0, 10.0, 100.0, 1000.0)]
        Ns = [p.N for p in plans]
        lams = [p.lam for p in plans]
        assert Ns == sorted(Ns) and lams == sorted(lams) and len(set(lams)) == 4

    def test_estimate_c0_positive(self):
        g = GridSpec(d=2, k=2, n=32, L=4.0)
        f = gaussian_field(g, 0.7)
        c0 = estimate_c0(f, IOperatorSpec(2.0, 0.8, 2), [1.0, 2.0])
        assert 0 < c0 < np.inf


class TestGrowth:
    grid = GridSpec(d=1, k=3, n=128, L=8.0)

    def test_linear_flow_flat(self):
        u0 = gaussian_field(self.grid)
        cfg = SolverConfig(dt=1e-2, T=1.0, nonlinearity_on=False)
        res = growth_experiment(u0, 1.0, 3, [1, 2, 4], cfg)
        assert abs(res.fit.slope) < 1e-10
        assert res.theoretical == pytest.approx(11 / 12)
        assert not res.aborted

    def test_k_mismatch(self):
        with pytest.raises(ValueError):
            growth_experiment(gaussian_field(self.grid), 1.2, 4, [1, 2, 4], SolverConfig(dt=1e-2, T=1.0))

    def test_abort_keeps_partial_record(self, monkeypatch):
        u0 = gaussian_field(self.grid)
        cfg = SolverConfig(dt=1e-2, T=1.0)
        real = evolution.evolve
        calls = []

        def flaky(u, seg, *a, **kw):
            calls.append(seg.T)
            if len(calls) == 3:
                raise evolution.BlowUpError(0.5)
            return real(u, seg, *a, **kw)

        import hoslab.estimates as est

        monkeypatch.setattr(est, "evolve", flaky)
        res = growth_experiment(u0, 1.0, 3, [1, 2, 4, 8], cfg)
        assert res.aborted and res.abort_time == pytest.approx(2.5)
        assert res.times == [1.0, 2.0] and res.fit is None
