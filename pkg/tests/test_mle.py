"""Unit tests for the maximum-likelihood adaptive-control baseline."""

import math

import numpy as np
import pytest

from exploremv.market import FactorState, MarketParams, TimeGrid
from exploremv.mle import (
    SIGMA_FLOOR,
    EstimationWindow,
    mle_estimate,
    plug_in_control,
    run_mle_experiment,
)


class TestEstimationWindow:
    def test_rolls_over_capacity(self):
        win = EstimationWindow(dt=1.0, size=3)
        for p in (1.0, 2.0, 3.0, 4.0):
            win.push(p)
        np.testing.assert_allclose(win.prices(), [2.0, 3.0, 4.0])
        assert len(win) == 3
        assert win.warmed_up

    def test_not_warmed_up_initially(self):
        win = EstimationWindow(dt=1.0, size=3)
        win.push(1.0)
        assert not win.warmed_up

    def test_rejects_nonpositive_prices(self):
        win = EstimationWindow(dt=1.0)
        with pytest.raises(ValueError):
            win.push(0.0)
        with pytest.raises(ValueError):
            win.push(-1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            EstimationWindow(dt=0.0)


class TestMleEstimate:
    def test_two_return_hand_value(self):
        # prices (1, e^0.01, e^0.01), dt=1: log-returns (0.01, 0);
        # mean 0.005, unbiased variance 5e-5
        win = EstimationWindow(dt=1.0, size=3)
        for p in (1.0, math.exp(0.01), math.exp(0.01)):
            win.push(p)
        mu_hat, sigma_hat = mle_estimate(win)
        assert sigma_hat == pytest.approx(math.sqrt(5e-5), abs=1e-9)
        assert sigma_hat == pytest.approx(0.007071, abs=1e-6)
        assert mu_hat == pytest.approx(0.005 + 5e-5 / 2.0, abs=1e-9)
        assert mu_hat == pytest.approx(0.005025, abs=1e-6)

    def test_needs_two_prices(self):
        win = EstimationWindow(dt=1.0)
        win.push(1.0)
        with pytest.raises(ValueError):
            mle_estimate(win)

    def test_constant_prices_hit_sigma_floor(self):
        win = EstimationWindow(dt=1.0, size=5)
        for _ in range(5):
            win.push(2.0)
        mu_hat, sigma_hat = mle_estimate(win)
        assert sigma_hat == SIGMA_FLOOR
        assert mu_hat == pytest.approx(SIGMA_FLOOR**2 / 2.0, abs=1e-15)

    def test_consistency_on_simulated_prices(self):
        # long window of exact GBM increments recovers (mu, sigma)
        rng = np.random.default_rng(0)
        mu, sigma, dt = 0.07, 0.10, 1.0 / 252.0
        n = 100_000
        g = (mu - 0.5 * sigma**2) * dt + sigma * math.sqrt(dt) * rng.standard_normal(n)
        prices = np.exp(np.concatenate([[0.0], np.cumsum(g)]))
        win = EstimationWindow(dt=dt, size=n + 1)
        for p in prices:
            win.push(float(p))
        mu_hat, sigma_hat = mle_estimate(win)
        assert sigma_hat == pytest.approx(sigma, rel=0.01)
        assert mu_hat == pytest.approx(mu, abs=0.05)


class TestPlugInControl:
    def test_composes_hand_values(self):
        # estimates (7%, 10%) with r=2% give rho_hat=0.5, w_hat~2.80833,
        # so at x=0.5 the allocation is -5*(0.5 - 2.80833)
        u = plug_in_control(0.0, 0.5, 0.07, 0.10, 0.02, z=1.4, x0_episode=1.0, T=1.0)
        assert u == pytest.approx(11.5417, abs=1e-3)

    def test_negligible_sharpe_means_zero_allocation(self):
        u = plug_in_control(0.0, 0.5, 0.02, 0.10, 0.02, z=1.4, x0_episode=1.0, T=1.0)
        assert u == 0.0

    def test_enormous_sharpe_stays_finite(self):
        # overflow of e^{rho_hat^2 T} collapses w_hat to z
        u = plug_in_control(0.0, 0.5, 50.0, SIGMA_FLOOR, 0.02, 1.4, 1.0, 1.0)
        assert math.isfinite(u)

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            plug_in_control(0.0, 0.5, 0.07, 0.0, 0.02, 1.4, 1.0, 1.0)


class TestRunMleExperiment:
    def setup_method(self):
        self.grid = TimeGrid(T=1.0, dt=1.0 / 252.0)
        self.market = MarketParams(mu=-0.30, sigma=0.10, r=0.02)

    def test_deterministic_given_seed(self):
        a = run_mle_experiment(self.market, self.grid, 20, 1.4, 1.0, seed=4)
        b = run_mle_experiment(self.market, self.grid, 20, 1.4, 1.0, seed=4)
        np.testing.assert_array_equal(a.terminal_wealth, b.terminal_wealth)
        np.testing.assert_array_equal(a.sigma_hats, b.sigma_hats)

    def test_shapes_and_failures(self):
        h = run_mle_experiment(self.market, self.grid, 30, 1.4, 1.0, seed=0)
        assert h.episodes == 30
        assert h.terminal_wealth.shape == (30,)
        assert np.isfinite(h.terminal_wealth[~h.failed]).all()

    def test_sigma_estimate_tracks_truth(self):
        h = run_mle_experiment(self.market, self.grid, 50, 1.4, 1.0, seed=1)
        assert h.sigma_hats[-1] == pytest.approx(0.10, rel=0.20)

    def test_factor_market_runs(self):
        factor = FactorState(rho_t=-3.2, sigma_t=0.10, delta=0.0001, gamma=0.0)
        h = run_mle_experiment(factor, self.grid, 20, 1.4, 1.0, seed=0)
        assert h.episodes == 20

    def test_rejects_unknown_market(self):
        with pytest.raises(TypeError):
            run_mle_experiment(object(), self.grid, 10, 1.4, 1.0, seed=0)
