"""Monte Carlo market simulator.

Single risky asset following a geometric Brownian motion plus a riskless
account, the controlled (discounted) wealth process in both its classical
and exploratory forms, and a slowly varying stochastic-factor environment
for non-stationary experiments.

All step functions are stateless and accept numpy arrays broadcast over
any of their arguments, so large path ensembles can be simulated without
Python-level loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MarketParams",
    "FactorState",
    "TimeGrid",
    "WealthPath",
    "sharpe_ratio",
    "wealth_step",
    "price_step",
    "exploratory_wealth_step",
    "advance_factor",
    "correlated_draws",
    "run_episode",
]

# Wealth beyond this magnitude is treated as numerical blow-up: squaring it
# downstream would overflow double precision.
WEALTH_CAP = 1e100


@dataclass(frozen=True)
class MarketParams:
    """Constant-coefficient market: annualized drift, volatility, short rate."""

    mu: float
    sigma: float
    r: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite((self.mu - self.r) / self.sigma):
            raise ValueError("Sharpe ratio is not finite")

    @property
    def rho(self) -> float:
        return (self.mu - self.r) / self.sigma


def sharpe_ratio(params: MarketParams) -> float:
    """Excess return per unit volatility, (mu - r) / sigma."""
    return (params.mu - params.r) / params.sigma


@dataclass(frozen=True)
class FactorState:
    """Slow stochastic factor driving a non-stationary market.

    The instantaneous Sharpe ratio drifts deterministically at rate
    ``delta`` while the volatility follows a lognormal diffusion on the
    same slow time scale; ``gamma`` is the correlation between the
    volatility's Brownian driver and the wealth/price driver.
    """

    rho_t: float
    sigma_t: float
    delta: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not abs(self.gamma) < 1:
            raise ValueError(f"|gamma| must be < 1, got {self.gamma}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with step dt: t_0 = 0, ..., t_{l+1} = T."""

    T: float
    dt: float

    def __post_init__(self):
        if not self.T > 0 or not self.dt > 0:
            raise ValueError("T and dt must be positive")
        n = self.n_steps
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        """Number of increments; the grid has n_steps + 1 points."""
        return int(round(self.T / self.dt))

    @property
    def l(self) -> int:
        """Number of interior points."""
        return self.n_steps - 1

    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1, dtype=float) * self.dt
        t[-1] = self.T
        return t


@dataclass(frozen=True)
class WealthPath:
    """One simulated episode: wealth at every grid point plus the sampled
    allocations that produced it.  ``failed`` marks episodes whose wealth
    left the representable range; entries past the failure point are NaN.
    """

    grid: TimeGrid
    times: np.ndarray
    wealth: np.ndarray
    actions: np.ndarray
    failed: bool = False
    final_factor: FactorState | None = None


def wealth_step(x, u, rho, sigma, dt, z):
    """Euler step of the classical wealth SDE dx = sigma*u*(rho dt + dW).

    Exact in distribution per step for an allocation held over [t, t+dt].
    """
    return x + sigma * u * (rho * dt + math.sqrt(dt) * z)


def price_step(s, mu, sigma, dt, z):
    """Exact lognormal GBM step; strictly positive for positive s."""
    return s * np.exp((mu - 0.5 * sigma**2) * dt + sigma * math.sqrt(dt) * z)


def exploratory_wealth_step(x, policy_mean, policy_var, rho, sigma, dt, z):
    """Euler step of the exploratory wealth SDE

        dX = rho*sigma*mean dt + sigma*sqrt(mean^2 + var) dW.

    Reduces exactly to :func:`wealth_step` when the policy variance is zero.
    """
    if np.any(np.asarray(policy_var) < 0):
        raise ValueError("policy_var must be nonnegative")
    drift = rho * sigma * policy_mean * dt
    diff = sigma * np.sqrt(policy_mean**2 + policy_var) * math.sqrt(dt) * z
    return x + drift + diff


def advance_factor(state: FactorState, dt: float, z1: float) -> FactorState:
    """One step of the slow factor: the Sharpe ratio drifts linearly, the
    volatility takes an exact lognormal step (which keeps it positive)."""
    rho_next = state.rho_t + state.delta * dt
    sigma_next = state.sigma_t * math.exp(
        (state.delta - 0.5 * state.delta) * dt + math.sqrt(state.delta * dt) * z1
    )
    return replace(state, rho_t=rho_next, sigma_t=sigma_next)


def correlated_draws(z, z_perp, gamma: float):
    """Turn two independent standard normals into a correlated pair
    (z, z1) with corr(z, z1) = gamma."""
    if not abs(gamma) < 1:
        raise ValueError(f"|gamma| must be < 1, got {gamma}")
    z1 = gamma * z + math.sqrt(1.0 - gamma**2) * z_perp
    return z, z1


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def run_episode(grid: TimeGrid, market, sampler, x0: float, rng) -> WealthPath:
    """Simulate one wealth episode under an action sampler.

    ``market`` is either constant :class:`MarketParams` or a
    :class:`FactorState` whose (rho_t, sigma_t) evolve along the episode.
    ``sampler(t, x)`` returns the allocation applied over [t, t + dt).
    ``rng`` is a seed or a numpy Generator; the path is deterministic
    given the seed.  Non-finite wealth ends the episode with
    ``failed=True`` instead of raising.
    """
    rng = _as_rng(rng)
    times = grid.times()
    n = grid.n_steps
    wealth = np.full(n + 1, np.nan)
    actions = np.full(n, np.nan)
    wealth[0] = x0

    factor = market if isinstance(market, FactorState) else None
    z_all = rng.standard_normal(n)
    z_perp_all = rng.standard_normal(n) if factor is not None else None

    failed = False
    x = x0
    for i in range(n):
        if factor is not None:
            rho, sigma = factor.rho_t, factor.sigma_t
        else:
            rho, sigma = market.rho, market.sigma
        u = sampler(times[i], x)
        actions[i] = u
        x = wealth_step(x, u, rho, sigma, grid.dt, z_all[i])
        if not np.isfinite(x) or abs(x) > WEALTH_CAP:
            failed = True
            break
        wealth[i + 1] = x
        if factor is not None:
            _, z1 = correlated_draws(z_all[i], z_perp_all[i], factor.gamma)
            factor = advance_factor(factor, grid.dt, z1)

    return WealthPath(
        grid=grid,
        times=times,
        wealth=wealth,
        actions=actions,
        failed=failed,
        final_factor=factor,
    )
