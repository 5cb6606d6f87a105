"""Adaptive-control baseline: rolling-window maximum-likelihood estimation
of the market drift and volatility from simulated prices, plugged into the
classical optimal allocation and Lagrange-multiplier formulas.

The estimation window persists across episodes: the simulated price stream
is one continuous time series, so the estimator keeps tracking the market
in real time (and thus remains usable in non-stationary scenarios).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .market import FactorState, MarketParams, TimeGrid, advance_factor, correlated_draws

__all__ = [
    "EstimationWindow",
    "MleHistory",
    "mle_estimate",
    "plug_in_control",
    "run_mle_experiment",
]

SIGMA_FLOOR = 1e-6
RHO_HAT_EPS = 1e-8
WEALTH_CAP = 1e100
WINDOW_SIZE = 100


class EstimationWindow:
    """Rolling buffer of the most recent price observations."""

    def __init__(self, dt: float, size: int = WINDOW_SIZE):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self.size = size
        self._prices: deque[float] = deque(maxlen=size)

    def push(self, price: float) -> None:
        if not price > 0:
            raise ValueError(f"prices must be positive, got {price}")
        self._prices.append(price)

    def __len__(self) -> int:
        return len(self._prices)

    @property
    def warmed_up(self) -> bool:
        return len(self._prices) == self.size

    def prices(self) -> np.ndarray:
        return np.array(self._prices)


def mle_estimate(window: EstimationWindow) -> tuple[float, float]:
    """Log-return moment estimators of (mu, sigma).

    With g_i = ln(p_{i+1}/p_i): sigma^2 is the unbiased sample variance of
    the g_i divided by dt, and mu recovers the Ito correction,
    mean(g)/dt + sigma^2/2.  sigma is floored to avoid division blow-up on
    degenerate (constant-return) windows.
    """
    if len(window) < 2:
        raise ValueError("need at least 2 prices to estimate")
    g = np.diff(np.log(window.prices()))
    var = float(np.var(g, ddof=1)) if g.size > 1 else 0.0
    sigma_hat = max(math.sqrt(var / window.dt), SIGMA_FLOOR)
    mu_hat = float(np.mean(g)) / window.dt + sigma_hat**2 / 2.0
    return mu_hat, sigma_hat


def plug_in_control(
    t: float, x: float, mu_hat: float, sigma_hat: float, r: float,
    z: float, x0_episode: float, T: float,
) -> float:
    """Classical optimal allocation with the estimated parameters plugged
    into both the control and the Lagrange-multiplier formulas.  Falls back
    to a zero allocation when the estimated Sharpe ratio is negligible
    (the multiplier is undefined there)."""
    if not sigma_hat > 0:
        raise ValueError("sigma_hat must be positive")
    rho_hat = (mu_hat - r) / sigma_hat
    if abs(rho_hat) < RHO_HAT_EPS:
        return 0.0
    try:
        g = math.exp(rho_hat**2 * T)
    except OverflowError:
        g = math.inf
    if math.isinf(g):
        # estimated Sharpe so large that w_hat = z to machine precision
        w_hat = z
    else:
        w_hat = (z * g - x0_episode) / (g - 1.0)
    return -(rho_hat / sigma_hat) * (x - w_hat)


@dataclass
class MleHistory:
    """Per-episode outcome of one MLE experiment run."""

    terminal_wealth: np.ndarray  # NaN for failed episodes
    failed: np.ndarray
    mu_hats: np.ndarray  # estimate at the end of each episode
    sigma_hats: np.ndarray

    @property
    def episodes(self) -> int:
        return self.terminal_wealth.size

    @property
    def n_failures(self) -> int:
        return int(self.failed.sum())


def run_mle_experiment(
    market, grid: TimeGrid, M: int, z: float, x0: float, seed: int,
) -> MleHistory:
    """Run M episodes of the identify-then-optimize baseline.

    A warm-up of one full estimation window of prices is generated under a
    zero allocation before the first episode.  At every rebalancing time
    the parameters are re-estimated from the rolling window and the
    allocation computed by :func:`plug_in_control`; the price stream (and
    the window) continues across episodes.  Wealth blow-up marks the
    episode failed and the run continues.
    """
    rng = np.random.default_rng(seed)
    n = grid.n_steps
    dt, T = grid.dt, grid.T
    times = grid.times()
    sqrt_dt = math.sqrt(dt)

    factor = market if isinstance(market, FactorState) else None
    if factor is None and not isinstance(market, MarketParams):
        raise TypeError("market must be MarketParams or FactorState")

    window = EstimationWindow(dt)
    price = 1.0
    window.push(price)
    r = _riskfree(market)

    # warm-up: evolve the price only, no wealth at stake
    for _ in range(window.size - 1):
        if factor is not None:
            rho_t, sigma_t = factor.rho_t, factor.sigma_t
            mu_t = rho_t * sigma_t + r
        else:
            rho_t, sigma_t, mu_t = market.rho, market.sigma, market.mu
        zdraw = rng.standard_normal()
        price *= math.exp((mu_t - 0.5 * sigma_t**2) * dt + sigma_t * sqrt_dt * zdraw)
        window.push(price)
        if factor is not None:
            zperp = rng.standard_normal()
            _, z1 = correlated_draws(zdraw, zperp, factor.gamma)
            factor = advance_factor(factor, dt, z1)

    terminal = np.full(M, np.nan)
    failed = np.zeros(M, dtype=bool)
    mu_hats = np.zeros(M)
    sigma_hats = np.zeros(M)

    for k in range(M):
        x = x0
        ep_failed = False
        mu_hat = sigma_hat = 0.0
        for i in range(n):
            if factor is not None:
                rho_t, sigma_t = factor.rho_t, factor.sigma_t
                mu_t = rho_t * sigma_t + r
            else:
                rho_t, sigma_t, mu_t = market.rho, market.sigma, market.mu
            mu_hat, sigma_hat = mle_estimate(window)
            if not ep_failed:
                u = plug_in_control(times[i], x, mu_hat, sigma_hat, r, z, x0, T)
                zdraw = rng.standard_normal()
                x = x + sigma_t * u * (rho_t * dt + sqrt_dt * zdraw)
                if not math.isfinite(x) or abs(x) > WEALTH_CAP:
                    ep_failed = True
            else:
                zdraw = rng.standard_normal()
            price *= math.exp((mu_t - 0.5 * sigma_t**2) * dt + sigma_t * sqrt_dt * zdraw)
            window.push(price)
            if factor is not None:
                zperp = rng.standard_normal()
                _, z1 = correlated_draws(zdraw, zperp, factor.gamma)
                factor = advance_factor(factor, dt, z1)
        if ep_failed:
            failed[k] = True
        else:
            terminal[k] = x
        mu_hats[k] = mu_hat
        sigma_hats[k] = sigma_hat

    return MleHistory(
        terminal_wealth=terminal, failed=failed, mu_hats=mu_hats, sigma_hats=sigma_hats
    )


def _riskfree(market) -> float:
    # factor markets carry no rate of their own: the wealth dynamics use
    # rho_t directly and the estimator needs r only to form rho_hat
    if isinstance(market, FactorState):
        return 0.02
    return market.r
