from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diomhd import diagnostics as dg
from diomhd.pressure import power_law
from diomhd.solver import SolverConfig, prepare_initial_data, random_initial_data, run
from diomhd.spectral import Grid3
from diomhd.state import PerturbationState

TWO_PI = 2 * np.pi
GOLDEN = (1.0, np.sqrt(2.0), np.sqrt(3.0))
RELAXED = dg.OrderParams.relaxed_default()


def h_mode(grid, amplitude):
    _, y, _ = grid.points()
    h = np.zeros((3,) + grid.shape)
    h[0] = amplitude * np.cos(TWO_PI * y)
    return prepare_initial_data(grid, h0=h)


def acoustic_pair(grid, A, B):
    # a = A cos(2 pi x), u1 = B sin(2 pi x)
    x, _, _ = grid.points()
    u = np.zeros((3,) + grid.shape)
    u[0] = B * np.sin(TWO_PI * x)
    a = np.broadcast_to(A * np.cos(TWO_PI * x), grid.shape)
    return prepare_initial_data(grid, a0=a, u0=u)


class TestOrderParams:
    def test_minimal(self):
        o = dg.OrderParams.minimal(3.0)
        assert (o.L, o.M, o.N, o.d) == (6, 10, 15, 25)
        assert not o.violations()

    def test_relaxed_default(self):
        assert (RELAXED.L, RELAXED.M, RELAXED.N, RELAXED.d, RELAXED.r) == (1, 2, 3, 7, 1.0)
        assert RELAXED.cross1_order == 0
        assert RELAXED.decay_exponent == pytest.approx(7 / 3)

    def test_strict_orders_enforced(self):
        with pytest.raises(ValueError, match="relaxed"):
            dg.OrderParams(1, 2, 3, 7, 1.0)

    @pytest.mark.parametrize("bad", [dict(L=0), dict(M=2.5), dict(N=True)])
    def test_positive_integers(self, bad):
        args = dict(L=1, M=2, N=3, d=7, r=1.0, relaxed=True) | bad
        with pytest.raises(ValueError):
            dg.OrderParams(**args)


class TestEnergies:
    def test_rest_state(self):
        grid = Grid3(8)
        s = PerturbationState.zeros(grid)
        law = power_law(1.4)
        assert dg.physical_energy(s, law) == 0.0
        assert dg.dissipation(s) == 0.0
        assert dg.weighted_energy(s, law, 3) == 0.0
        rep = dg.energy_report(s, law, GOLDEN, RELAXED)
        assert rep.X == 0.0 and rep.E_N == 0.0

    def test_single_h_mode(self):
        grid = Grid3(8)
        A = 0.1
        s = h_mode(grid, A)
        law = power_law(1.4)
        assert dg.physical_energy(s, law) == pytest.approx(A**2 / 4, rel=1e-13)
        assert dg.dissipation(s) == pytest.approx(TWO_PI**2 * A**2 / 2, rel=1e-13)
        assert dg.sobolev_energy(s, 2) == pytest.approx(A**2 / 2 * (1 + TWO_PI**2) ** 2, rel=1e-13)
        expected = sum(TWO_PI ** (2 * j) for j in range(4)) * A**2 / 2
        assert dg.weighted_energy(s, law, 3) == pytest.approx(expected, rel=1e-13)

    def test_cross1_of_acoustic_pair(self):
        grid = Grid3(8)
        A, B = 0.02, 0.03
        s = acoustic_pair(grid, A, B)
        c = dg.cross_functionals(s, GOLDEN, RELAXED)
        # order 0: mean(div u * a) = pi A B
        assert c.cross1 == pytest.approx(np.pi * A * B, rel=1e-12)
        assert dg.cross_functionals(s, (0, 0, 0), RELAXED).cross2 == 0.0

    def test_cross_needs_orders(self):
        with pytest.raises(TypeError):
            dg.cross_functionals(PerturbationState.zeros(Grid3(8)), GOLDEN, (1, 2, 3))

    def test_negative_order(self):
        with pytest.raises(ValueError):
            dg.sobolev_energy(PerturbationState.zeros(Grid3(8)), -1)

    def test_report_row_matches_columns(self):
        grid = Grid3(8)
        rep = dg.energy_report(random_initial_data(grid, 1e-2, seed=1), power_law(1.4), GOLDEN, RELAXED)
        assert len(rep.row()) == len(dg.CSV_COLUMNS)
        assert rep.div_h_L2 < 1e-14
        assert abs(rep.mass_residual) < 1e-15

    def test_bracket_on_random_states(self):
        grid = Grid3(8)
        law = power_law(1.4)
        for seed in range(5):
            s = random_initial_data(grid, 0.05, seed=seed)
            Xt = dg.weighted_energy(s, law, RELAXED.N)
            E_N = dg.sobolev_energy(s, RELAXED.N)
            assert law.alpha1 * E_N <= Xt <= law.alpha2 * E_N


class TestComposite:
    def test_bracket_holds(self):
        assert list(dg.bracket_holds([1.0, 5.0, 0.1, 3.0], [1.0, 1.0, 1.0, 0.0], 1.0, 2.0)) == [True, False, False, True]

    def test_shrink_delta_halves_until_admissible(self):
        # X_tilde = 1, cross = 10, bracket [0.5, 4] needs delta <= 0.3
        assert dg.shrink_delta([1.0], [[10.0, 0.0, 0.0]], [1.0], 1.0, 2.0) == 0.25

    def test_shrink_delta_fails_without_cross(self):
        with pytest.raises(RuntimeError):
            dg.shrink_delta([10.0], [[0.0, 0.0, 0.0]], [1.0], 1.0, 2.0)

    def test_composite_auto(self):
        grid = Grid3(8)
        rep = dg.composite_X(random_initial_data(grid, 1e-2, seed=2), power_law(1.4), GOLDEN, RELAXED)
        assert rep.bracket_ok
        assert 0 < rep.delta_star <= 1.0

    def test_composite_rejects_negative_delta(self):
        with pytest.raises(ValueError):
            dg.composite_X(PerturbationState.zeros(Grid3(8)), power_law(1.4), GOLDEN, RELAXED, delta_star=-1.0)


class TestDerivatives:
    @pytest.mark.parametrize("order", [2, 4, 6, 8])
    def test_exact_on_polynomials(self, order):
        t = np.linspace(0.0, 1.0, 21)
        v = t**order
        idx, d = dg.centred_derivative(t, v, order)
        assert np.allclose(d, order * t[idx] ** (order - 1), atol=1e-10)

    def test_order_reduced_for_short_series(self):
        idx, d = dg.centred_derivative([0.0, 1.0, 2.0], [0.0, 1.0, 4.0])
        assert list(idx) == [1] and d[0] == pytest.approx(2.0)

    def test_non_uniform_rejected(self):
        with pytest.raises(ValueError):
            dg.centred_derivative([0.0, 1.0, 3.0], [0.0, 0.0, 0.0])

    def test_identity_exact_for_exponential(self):
        t = np.linspace(0.0, 1.0, 101)
        rep = dg.energy_identity(t, np.exp(-t), np.exp(-t))
        assert rep.max_relative < 1e-10

    def test_monitor_margin_of_exponential(self):
        t = np.linspace(0.0, 1.0, 101)
        rep = dg.dissipation_monitor(t, np.exp(-2 * t), np.exp(-2 * t))
        assert rep.empirical_margin == pytest.approx(2.0, rel=1e-9)
        assert rep.positive and rep.violations == 0

    def test_monitor_detects_growth(self):
        t = np.linspace(0.0, 1.0, 11)
        rep = dg.dissipation_monitor(t, np.exp(t), np.ones_like(t))
        assert not rep.positive


class TestMonitors:
    def test_identity_monitor_on_rest_state(self):
        grid = Grid3(8)
        mon = dg.IdentityMonitor(power_law(1.4))
        run(SolverConfig(n=8, t_end=0.05, dt=0.005), PerturbationState.zeros(grid), [mon])
        rep = mon.identity()
        assert len(mon.times) == 11
        assert np.all(rep.residual == 0) and rep.max_relative == 0.0

    def test_identity_monitor_on_h_mode(self):
        grid = Grid3(8)
        mon = dg.IdentityMonitor(power_law(1.4))
        run(SolverConfig(n=8, t_end=0.05, dt=0.001, w=(0, 0, 0)), h_mode(grid, 1e-3), [mon])
        assert mon.identity().max_relative < 1e-6

    def test_energy_monitor_on_linear_h_mode(self):
        # a decaying h mode has dX/dt < 0 at every interior sample
        grid = Grid3(8)
        mon = dg.EnergyMonitor(power_law(1.4), (0, 0, 0), RELAXED, cadence=1)
        run(SolverConfig(n=8, t_end=0.05, dt=0.001, w=(0, 0, 0)), h_mode(grid, 1e-4), [mon])
        rep = dg.dissipation_monitor(mon.series("t"), mon.series("X"), [dg.sobolev_energy(h_mode(grid, 1.0), 0)] * 51)
        assert rep.positive
        assert mon.auto_delta() == 1.0
        assert len(mon.with_delta(0.5)) == len(mon.reports)


class TestDecayFit:
    def test_recovers_power_law(self):
        t = np.linspace(0.0, 20.0, 100)
        fit = dg.decay_fit(t, 2.0 * (1 + 0.5 * t) ** -3)
        assert fit.C == pytest.approx(2.0, abs=1e-6)
        assert fit.alpha == pytest.approx(0.5, abs=1e-6)
        assert fit.p == pytest.approx(3.0, abs=1e-6)
        assert fit.residual < 1e-9

    @settings(max_examples=15, deadline=None)
    @given(C=st.floats(0.1, 10), alpha=st.floats(0.1, 2), p=st.floats(0.5, 4))
    def test_recovers_random_parameters(self, C, alpha, p):
        t = np.linspace(0.0, 20.0, 100)
        fit = dg.decay_fit(t, C * (1 + alpha * t) ** -p)
        assert fit.p == pytest.approx(p, rel=1e-5)

    def test_constant_is_degenerate(self):
        fit = dg.decay_fit(np.arange(10.0), np.full(10, 7.0))
        assert fit.degenerate and fit.p == 0.0 and fit.C == pytest.approx(7.0)

    def test_exponential_drives_fit_to_limit(self):
        # e^-t is the alpha -> 0, p -> inf limit of the family; no error raised
        t = np.linspace(0.0, 20.0, 100)
        fit = dg.decay_fit(t, np.exp(-t))
        assert np.isfinite(fit.residual) and fit.residual > 0
        assert fit.alpha < 1e-3 and fit.p > 1e3
        assert fit.alpha * fit.p == pytest.approx(1.0, rel=1e-3)

    @pytest.mark.parametrize("t, E", [(np.arange(5.0), np.ones(5)), (np.arange(10.0), -np.ones(10)),
                                      (np.zeros(10), np.ones(10))])
    def test_rejects(self, t, E):
        with pytest.raises(ValueError):
            dg.decay_fit(t, E)

    def test_window(self):
        t = np.linspace(0.0, 20.0, 201)
        fit = dg.decay_fit(t, 2.0 * (1 + 0.5 * t) ** -3, window=(5.0, 20.0))
        assert fit.window == (5.0, 20.0)
        assert fit.p == pytest.approx(3.0, abs=1e-6)


class TestInterpolationAndRemainders:
    @pytest.mark.parametrize("k", [(1, 0, 0), (2, 1, 0), (1, 1, 1)])
    def test_single_mode_is_sharp(self, k):
        grid = Grid3(16)
        x, y, z = grid.points()
        h = np.zeros((3,) + grid.shape)
        # h perpendicular to k
        e = np.cross(k, (0, 0, 1)) if k[:2] != (0, 0) else np.array([1, 0, 0])
        for i in range(3):
            h[i] = 1e-2 * e[i] * np.cos(TWO_PI * (k[0] * x + k[1] * y + k[2] * z))
        s = prepare_initial_data(grid, h0=h)
        assert dg.interpolation_ratio(s, RELAXED) == pytest.approx(1.0, rel=1e-12)

    def test_random_states_bounded_by_one(self):
        grid = Grid3(16)
        for seed in range(5):
            assert dg.interpolation_ratio(random_initial_data(grid, 1e-2, seed=seed, k_max=4), RELAXED) <= 1.0

    def test_remainder_ratios_scale(self):
        grid = Grid3(8)
        cfg = SolverConfig(n=8)
        s = random_initial_data(grid, 1e-2, seed=3)
        big = dg.remainder_ratios(s, cfg)
        small = dg.remainder_ratios(s.scaled(0.5), cfg)
        for b, sm in zip(big.linear, small.linear):
            assert sm / b == pytest.approx(0.5, rel=0.05)
        for b, sm in zip(big.bound, small.bound):
            assert sm / b == pytest.approx(1.0, rel=0.05)

    def test_remainder_ratios_of_rest_state(self):
        r = dg.remainder_ratios(PerturbationState.zeros(Grid3(8)), SolverConfig(n=8))
        assert r.bound == (0.0, 0.0, 0.0) and r.linear == (0.0, 0.0, 0.0)
