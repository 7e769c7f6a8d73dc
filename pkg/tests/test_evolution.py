import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian_field, random_field
from hoslab import evolution
from hoslab.evolution import (
    BlowUpError,
    SolverConfig,
    evolve,
    linear_propagate,
    nonlinear_substep,
    scaling_transform,
    step,
)
from hoslab.i_method import IOperatorSpec, energy
from hoslab.spectral import Field, GridSpec, lp_norm


def _bumps(grid):
    x = grid.coordinates()[0]
    return Field(grid, np.exp(-((x - 1) ** 2)) * np.exp(1j * x) + 0.5 * np.exp(-((x + 2) ** 2) / 2))


class TestSolverConfig:
    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": -1.0}, {"T": 1e-4}, {"record_every": 0}, {"record_every": 1.5}])
    def test_rejects(self, kw):
        args = dict(dt=1e-3, T=1.0)
        args.update(kw)
        with pytest.raises(ValueError):
            SolverConfig(**args)

    def test_step_count(self):
        assert SolverConfig(dt=1e-3, T=1.0).n_steps == 1000
        assert SolverConfig(dt=0.3, T=1.0).n_steps == 3


class TestLinear:
    grid = GridSpec(d=1, k=3, n=128, L=math.pi)

    def test_identity_at_zero(self):
        f = random_field(self.grid)
        assert linear_propagate(f, 0.0) is f

    @given(st.integers(-60, 60), st.floats(-3, 3))
    def test_eigenmode_phase(self, j, t):
        f = Field.plane_wave(self.grid, (j,))
        out = linear_propagate(f, t)
        np.testing.assert_allclose(out.values, np.exp(1j * t * abs(j) ** 3) * f.values, atol=1e-11)

    def test_mass_and_group_property(self):
        f = random_field(self.grid, 3)
        a = linear_propagate(f, 0.7)
        assert lp_norm(a, 2) == pytest.approx(lp_norm(f, 2), rel=1e-13)
        b = linear_propagate(linear_propagate(f, 0.3), 0.4)
        # phases reach t |xi|^3 ~ 2e5 rad, so roundoff in the phase is ~1e-11
        assert lp_norm(a - b, 2) <= 1e-10 * lp_norm(f, 2)


class TestNonlinear:
    grid = GridSpec(d=1, k=3, n=128, L=math.pi)

    def test_modulus_kept(self):
        f = random_field(self.grid, 1)
        for dealias in (False, True):
            out = nonlinear_substep(f, 0.37, dealias)
            np.testing.assert_allclose(np.abs(out.values), np.abs(f.values), rtol=1e-14)

    def test_closed_form(self):
        f = random_field(self.grid, 2)
        out = nonlinear_substep(f, 0.2)
        np.testing.assert_allclose(out.values, f.values * np.exp(0.2j * np.abs(f.values) ** 2), rtol=1e-14)

    @pytest.mark.parametrize("p", [2, 4, math.inf])
    def test_lp_norms_invariant(self, p):
        f = random_field(self.grid, 3)
        assert lp_norm(nonlinear_substep(f, 1.3), p) == pytest.approx(lp_norm(f, p), rel=1e-13)


class TestStep:
    grid = GridSpec(d=1, k=3, n=256, L=16.0)

    def test_plane_wave_exact(self):
        # |u|^2 is constant, so the product of the two exact flows is the exact solution
        A, j, dt = 0.7, 5, 0.01
        f = Field.plane_wave(self.grid, (j,), A)
        xi = math.pi * j / self.grid.L
        for dealias in (False, True):
            _, u = evolve(f, SolverConfig(dt=dt, T=100 * dt, dealias=dealias, record_every=100))
            expected = f.values * np.exp(1j * (xi**3 + A**2) * 100 * dt)
            np.testing.assert_allclose(u.values, expected, atol=1e-11)

    def test_switches(self):
        f = _bumps(self.grid)
        dt = 0.05
        lin = step(f, SolverConfig(dt=dt, T=dt, nonlinearity_on=False))
        assert lp_norm(lin - linear_propagate(f, dt), 2) <= 1e-13
        nl = step(f, SolverConfig(dt=dt, T=dt, dispersion_on=False, dealias=False))
        assert lp_norm(nl - nonlinear_substep(f, dt), 2) <= 1e-14
        frozen = step(f, SolverConfig(dt=dt, T=dt, nonlinearity_on=False, dispersion_on=False))
        np.testing.assert_array_equal(frozen.values, f.values)

    def test_linear_evolve_matches_propagator(self):
        f = _bumps(self.grid)
        _, u = evolve(f, SolverConfig(dt=0.01, T=1.0, nonlinearity_on=False, record_every=50))
        assert lp_norm(u - linear_propagate(f, 1.0), 2) <= 1e-11 * lp_norm(f, 2)

    def test_time_reversal(self):
        f = _bumps(self.grid)
        cfg = SolverConfig(dt=0.01, T=1.0, record_every=100)
        _, u = evolve(f, cfg)
        _, back = evolve(u.conj(), cfg)
        assert lp_norm(back.conj() - f, 2) <= 1e-8 * lp_norm(f, 2)

    def test_second_order(self):
        f = _bumps(self.grid)
        T = 0.5
        _, ref = evolve(f, SolverConfig(dt=T / 16384, T=T, record_every=16384))
        errs = []
        # coarser steps are still pre-asymptotic for this stiff symbol
        for n in (128, 256, 512):
            _, u = evolve(f, SolverConfig(dt=T / n, T=T, record_every=n))
            errs.append(lp_norm(u - ref, 2))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        for p in orders:
            assert 1.8 <= p <= 2.2


class TestEvolve:
    grid = GridSpec(d=1, k=3, n=256, L=16.0)

    def test_zero_data(self):
        trace, u = evolve(Field.zeros(self.grid), SolverConfig(dt=0.01, T=0.1), [IOperatorSpec(2.0, 1.0, 3)])
        assert len(trace) == 11
        assert np.all(u.values == 0)
        assert max(trace.mass) <= 1e-10 and trace.max_relative_mass_drift() <= 1e-10
        assert trace.max_energy_drift() == 0

    def test_mass_conserved(self):
        f = _bumps(self.grid)
        trace, _ = evolve(f, SolverConfig(dt=1e-3, T=2.0, record_every=100))
        assert trace.max_relative_mass_drift() <= 1e-12

    def test_records(self):
        specs = [IOperatorSpec(1.0, 1.0, 3), IOperatorSpec(4.0, 1.0, 3)]
        trace, u = evolve(_bumps(self.grid), SolverConfig(dt=0.01, T=0.25, record_every=10), specs)
        assert trace.times == pytest.approx([0.0, 0.1, 0.2, 0.25])
        assert trace.gamma == 1.0
        assert set(trace.modified_energy) == {1.0, 4.0}
        assert trace.energy[-1] == pytest.approx(energy(u).total, rel=1e-14)
        assert all(len(v) == 4 for v in trace.modified_energy.values())

    def test_trace_csv(self):
        trace, _ = evolve(_bumps(self.grid), SolverConfig(dt=0.01, T=0.02), [IOperatorSpec(2.0, 1.0, 3)])
        lines = trace.to_csv().splitlines()
        assert lines[0] == "t,mass,energy,E_I_N=2.0,H_gamma=1.0"
        assert len(lines) == 4
        assert float(lines[2].split(",")[0]) == 0.01

    def test_blow_up_detection(self, monkeypatch):
        monkeypatch.setattr(evolution, "BLOWUP_FACTOR", 0.5)
        with pytest.raises(BlowUpError) as info:
            evolve(_bumps(self.grid), SolverConfig(dt=0.01, T=0.1, record_every=2))
        assert info.value.time == pytest.approx(0.02)
        assert len(info.value.trace) == 1


class TestScaling:
    grid = GridSpec(d=2, k=2, n=64, L=4.0)

    def test_identity(self):
        f = gaussian_field(self.grid, 0.7)
        assert scaling_transform(f, 1.0) is f

    def test_rejects(self):
        with pytest.raises(ValueError, match="critical"):
            scaling_transform(gaussian_field(GridSpec(1, 3, 64)), 2.0)
        with pytest.raises(ValueError):
            scaling_transform(gaussian_field(self.grid), -1.0)

    @pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
    def test_norm_identities(self, lam):
        f = gaussian_field(self.grid, 0.7) * (1 + 0.5j)
        g = scaling_transform(f, lam)
        assert g.grid.L == lam * self.grid.L and g.grid.n == self.grid.n
        assert lp_norm(g, 2) == pytest.approx(lp_norm(f, 2), rel=1e-13)
        e0, e1 = energy(f), energy(g)
        k = self.grid.k
        assert e1.kinetic == pytest.approx(lam**-k * e0.kinetic, rel=1e-12)
        assert e1.potential == pytest.approx(lam**-k * e0.potential, rel=1e-12)

    def test_generator_matches_resampling(self):
        gen = lambda x, y: np.exp(-(x**2 + y**2) / (2 * 0.49))
        f = Field.from_function(self.grid, gen)
        a = scaling_transform(f, 2.0)
        b = scaling_transform(f, 2.0, generator=gen)
        np.testing.assert_allclose(a.values, b.values, atol=1e-14)
