"""Entropy-regularized mean-variance learner.

Learns the Gaussian feedback policy and quadratic value function from
simulated wealth trajectories alone: a continuous-time Bellman-error loss
evaluated on sampled (t, x) pairs, analytic stochastic-gradient updates of
the value parameters theta and policy parameters phi, a self-correcting
stochastic-approximation update of the Lagrange multiplier w, and an
optional annealing schedule for the exploration weight.

The value function is parametrized as

    V(t, x) = (x - w)^2 e^{-theta3 (T - t)} + theta2 t^2 + theta1 t + theta0

with theta3 = 2 phi2 coupled to the policy's entropy slope and theta0
pinned by the terminal condition; the policy's differential entropy is
phi1 + phi2 (T - t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .market import FactorState, MarketParams, TimeGrid, advance_factor, correlated_draws

__all__ = [
    "ValueParams",
    "PolicyParams",
    "LearnerConfig",
    "EpisodeSamples",
    "TrainHistory",
    "v_theta",
    "vdot",
    "policy_from_phi",
    "bellman_error",
    "loss",
    "gradients",
    "apply_updates",
    "update_w",
    "lambda_schedule",
    "train",
]

PHI2_FLOOR = 1e-8
# Annealed exploration weight hits exactly zero on the final episode; the
# policy's mean coefficient scales like lam^{-1/2}, so a floor is needed
# when building the sampling policy.
LAMBDA_POLICY_FLOOR = 1e-8


@dataclass(frozen=True)
class ValueParams:
    """Learnable value-function coefficients."""

    theta0: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta0, self.theta1, self.theta2, self.theta3])


@dataclass(frozen=True)
class PolicyParams:
    """Learnable policy coefficients: the entropy intercept and slope,
    plus the Sharpe-sign convention applied to the policy mean."""

    phi1: float
    phi2: float
    sign_hint: int = 1

    def __post_init__(self):
        if not self.phi2 > 0:
            raise ValueError("phi2 must be positive")
        if self.sign_hint not in (1, -1):
            raise ValueError("sign_hint must be +1 or -1")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2])


@dataclass(frozen=True)
class EpisodeSamples:
    """Trajectory of one episode: times, wealth at those times, and the
    allocations sampled along the way."""

    times: np.ndarray
    wealth: np.ndarray
    actions: np.ndarray
    T: float

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class LearnerConfig:
    grid: TimeGrid
    x0: float
    z: float
    episodes: int
    avg_window: int = 10
    alpha: float = 0.05
    eta_theta: float = 0.0005
    eta_phi: float = 0.0005
    lambda0: float = 2.0
    anneal: bool = False
    # +1 or -1 forces the Sharpe-sign convention; None auto-detects it from
    # the action/wealth-increment covariance after `sign_warmup` episodes.
    sign_hint: int | None = None
    sign_warmup: int = 50

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be nonnegative")
        if self.avg_window < 1:
            raise ValueError("avg_window must be >= 1")
        if self.episodes and self.episodes < self.avg_window:
            raise ValueError("episodes must be >= avg_window")
        for name in ("alpha", "eta_theta", "eta_phi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")


@dataclass
class TrainHistory:
    """Per-episode record of one training run."""

    terminal_wealth: np.ndarray  # NaN for failed episodes
    failed: np.ndarray  # bool mask
    thetas: np.ndarray  # (M, 4)
    phis: np.ndarray  # (M, 2)
    ws: np.ndarray
    lambdas: np.ndarray
    sign: int
    config: LearnerConfig

    @property
    def episodes(self) -> int:
        return self.terminal_wealth.size

    @property
    def n_failures(self) -> int:
        return int(self.failed.sum())

    @property
    def final_theta(self) -> ValueParams:
        if self.episodes == 0:
            return ValueParams()
        t = self.thetas[-1]
        return ValueParams(*t)

    @property
    def final_phi(self) -> PolicyParams:
        if self.episodes == 0:
            raise ValueError("empty history has no final policy")
        return PolicyParams(self.phis[-1][0], self.phis[-1][1], self.sign)

    @property
    def final_w(self) -> float:
        if self.episodes == 0:
            raise ValueError("empty history has no learned w")
        return float(self.ws[-1])


def v_theta(t, x, theta: ValueParams, w: float, T: float):
    """Parametrized value function."""
    t = np.asarray(t, dtype=float)
    return (
        (x - w) ** 2 * np.exp(-theta.theta3 * (T - t))
        + theta.theta2 * t**2
        + theta.theta1 * t
        + theta.theta0
    )


def vdot(theta: ValueParams, w: float, T: float, sample_i, sample_next, dt: float):
    """Difference quotient of the value function along an observed pair."""
    t0, x0 = sample_i
    t1, x1 = sample_next
    return (v_theta(t1, x1, theta, w, T) - v_theta(t0, x0, theta, w, T)) / dt


def policy_from_phi(t, x, phi: PolicyParams, lam: float, w: float, T: float):
    """Gaussian policy induced by the entropy parameters:

        mean  = -sign * sqrt(2 phi2 / (lam pi)) e^{(2 phi1 - 1)/2} (x - w)
        var   = (1 / 2 pi) e^{2 phi2 (T - t) + 2 phi1 - 1}

    The entropy of this Gaussian is phi1 + phi2 (T - t) exactly.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not phi.phi2 > 0:
        raise ValueError("phi2 must be positive")
    coef = _mean_coef(phi, lam)
    mean = coef * (np.asarray(x, dtype=float) - w)
    var = _policy_variance(t, phi, T)
    return mean, var


def _mean_coef(phi: PolicyParams, lam: float) -> float:
    return (
        -phi.sign_hint
        * math.sqrt(2.0 * phi.phi2 / (lam * math.pi))
        * math.exp((2.0 * phi.phi1 - 1.0) / 2.0)
    )


def _policy_variance(t, phi: PolicyParams, T: float):
    t = np.asarray(t, dtype=float)
    return 1.0 / (2.0 * math.pi) * np.exp(2.0 * phi.phi2 * (T - t) + 2.0 * phi.phi1 - 1.0)


def bellman_error(
    theta: ValueParams, phi: PolicyParams, lam: float, w: float, T: float,
    sample_i, sample_next, dt: float,
):
    """Continuous-time TD residual for one consecutive sample pair:
    the value difference quotient minus lam times the policy entropy."""
    t0, _ = sample_i
    return vdot(theta, w, T, sample_i, sample_next, dt) - lam * (
        phi.phi1 + phi.phi2 * (T - t0)
    )


def _deltas(theta: ValueParams, phi: PolicyParams, lam, w, samples: EpisodeSamples):
    t, x, T = samples.times, samples.wealth, samples.T
    dt = samples.dt
    curv = (x - w) ** 2 * np.exp(-2.0 * phi.phi2 * (T - t))
    vd = (np.diff(curv) + theta.theta2 * np.diff(t**2) + theta.theta1 * dt) / dt
    return vd - lam * (phi.phi1 + phi.phi2 * (T - t[:-1])), curv


def loss(theta: ValueParams, phi: PolicyParams, lam: float, w: float, samples: EpisodeSamples):
    """Discretized Bellman-error objective 0.5 * sum(delta_i^2) * dt,
    with the coupling theta3 = 2 phi2 applied inside the value function."""
    delta, _ = _deltas(theta, phi, lam, w, samples)
    return 0.5 * float(np.sum(delta**2)) * samples.dt


def gradients(
    theta: ValueParams, phi: PolicyParams, lam: float, w: float, T: float,
    samples: EpisodeSamples,
):
    """Analytic partial derivatives of :func:`loss` with respect to
    (theta1, theta2, phi1, phi2), under the theta3 = 2 phi2 coupling."""
    delta, curv = _deltas(theta, phi, lam, w, samples)
    t = samples.times
    dt = samples.dt
    tau = T - t
    weighted = curv * tau
    dvd_dphi2 = -2.0 * np.diff(weighted) / dt - lam * tau[:-1]
    g_theta1 = float(np.sum(delta)) * dt
    g_theta2 = float(np.sum(delta * np.diff(t**2)))
    g_phi1 = -lam * float(np.sum(delta)) * dt
    g_phi2 = float(np.sum(delta * dvd_dphi2)) * dt
    return g_theta1, g_theta2, g_phi1, g_phi2


def apply_updates(
    theta: ValueParams, phi: PolicyParams, grads, eta_theta: float, eta_phi: float,
    w: float, z: float, T: float,
):
    """Descend the four gradients, then restore the structural constraints:
    theta3 = 2 phi2 and theta0 from the terminal condition; phi2 is clamped
    positive."""
    g_theta1, g_theta2, g_phi1, g_phi2 = grads
    theta1 = theta.theta1 - eta_theta * g_theta1
    theta2 = theta.theta2 - eta_theta * g_theta2
    phi1 = phi.phi1 - eta_phi * g_phi1
    phi2 = max(phi.phi2 - eta_phi * g_phi2, PHI2_FLOOR)
    theta3 = 2.0 * phi2
    theta0 = -theta2 * T**2 - theta1 * T - (w - z) ** 2
    return (
        ValueParams(theta0, theta1, theta2, theta3),
        replace(phi, phi1=phi1, phi2=phi2),
    )


def update_w(w: float, terminal_wealths, alpha: float, z: float) -> float:
    """Stochastic-approximation step toward the terminal-mean constraint:
    w moves opposite to the excess of the sampled mean over the target."""
    terminal_wealths = np.asarray(terminal_wealths, dtype=float)
    return w - alpha * (float(np.mean(terminal_wealths)) - z)


def lambda_schedule(k: int, M: int, lambda0: float) -> float:
    """Decaying exploration weight lambda_k = lambda0 (1 - e^{200 (k - M)/M});
    flat near lambda0 for most of training, zero at k = M."""
    if k > M:
        raise ValueError(f"k={k} exceeds M={M}")
    return lambda0 * (1.0 - math.exp(200.0 * (k - M) / M))


def _initial_params(config: LearnerConfig, sign: int):
    phi2 = 0.5
    phi1 = 0.5 * math.log(math.pi * math.e * config.lambda0 / 1.0)
    phi = PolicyParams(phi1=phi1, phi2=phi2, sign_hint=sign)
    theta = ValueParams(theta0=0.0, theta1=0.0, theta2=0.0, theta3=2.0 * phi2)
    return theta, phi


def train(config: LearnerConfig, market, seed: int) -> TrainHistory:
    """Run the full learning loop.

    ``market`` is constant :class:`MarketParams` or a :class:`FactorState`
    whose coefficients keep drifting across all episodes (the factor is
    never reset, so its effective horizon is M*T).  Deterministic given
    (config, seed).  Episodes whose wealth blows up are recorded as
    failures; their parameter updates are discarded and they are excluded
    from the w-update window.
    """
    M = config.episodes
    grid = config.grid
    times = grid.times()
    n = grid.n_steps
    T, dt = grid.T, grid.dt

    auto_sign = config.sign_hint is None
    sign = 1 if auto_sign else config.sign_hint
    theta, phi = _initial_params(config, sign)
    w = config.z

    terminal = np.full(M, np.nan)
    failed = np.zeros(M, dtype=bool)
    thetas = np.zeros((M, 4))
    phis = np.zeros((M, 2))
    ws = np.zeros(M)
    lambdas = np.zeros(M)

    factor = market if isinstance(market, FactorState) else None
    if factor is None and not isinstance(market, MarketParams):
        raise TypeError("market must be MarketParams or FactorState")
    if factor is None:
        rho_arr = np.full(n, market.rho)
        sigma_arr = np.full(n, market.sigma)

    rng = np.random.default_rng(seed)
    streams = rng.spawn(M) if M else []

    # running sums for the sign auto-detection covariance
    warm_n = 0
    warm_su = warm_sdx = warm_sudx = 0.0

    window: list[float] = []  # non-failed terminal wealths since last w update

    for k in range(1, M + 1):
        ep_rng = streams[k - 1]
        lam_k = lambda_schedule(k, M, config.lambda0) if config.anneal else config.lambda0
        lam_pol = max(lam_k, LAMBDA_POLICY_FLOOR)

        z_w = ep_rng.standard_normal(n)
        z_u = ep_rng.standard_normal(n)
        if factor is not None:
            z_perp = ep_rng.standard_normal(n)
            rho_arr = np.empty(n)
            sigma_arr = np.empty(n)
            for i in range(n):
                rho_arr[i] = factor.rho_t
                sigma_arr[i] = factor.sigma_t
                _, z1 = correlated_draws(z_w[i], z_perp[i], factor.gamma)
                factor = advance_factor(factor, dt, z1)

        mean_coef = _mean_coef(phi, lam_pol)
        policy_sd = np.sqrt(_policy_variance(times[:-1], phi, T))

        ok, wealth, actions, th1, th2, p1, p2 = _backend.run_learning_episode(
            times, rho_arr, sigma_arr, z_w, z_u, policy_sd,
            config.x0, w, lam_k,
            mean_coef,
            theta.theta1, theta.theta2, phi.phi1, phi.phi2,
            config.eta_theta, config.eta_phi,
        )

        if ok:
            # Reject updates whose policy mean coefficient would overflow
            # exp() on the next episode (worst case: lambda at its floor).
            log_coef = (
                0.5 * math.log(2.0 * p2 / (LAMBDA_POLICY_FLOOR * math.pi))
                + (2.0 * p1 - 1.0) / 2.0
            )
            if not log_coef < 600.0:
                ok = False

        if ok:
            theta3 = 2.0 * p2
            theta0 = -th2 * T**2 - th1 * T - (w - config.z) ** 2
            theta = ValueParams(theta0, th1, th2, theta3)
            phi = replace(phi, phi1=p1, phi2=p2)
            terminal[k - 1] = wealth[-1]
            window.append(float(wealth[-1]))
            if auto_sign and warm_n < config.sign_warmup * n:
                dx = np.diff(wealth)
                fin = np.isfinite(actions) & np.isfinite(dx)
                warm_n += int(fin.sum())
                warm_su += float(actions[fin].sum())
                warm_sdx += float(dx[fin].sum())
                warm_sudx += float((actions[fin] * dx[fin]).sum())
        else:
            failed[k - 1] = True

        if auto_sign and k == config.sign_warmup and warm_n > 1:
            cov = warm_sudx / warm_n - (warm_su / warm_n) * (warm_sdx / warm_n)
            if cov < 0:
                sign = -1
                phi = replace(phi, sign_hint=sign)

        if k % config.avg_window == 0:
            if window:
                w = update_w(w, window[-config.avg_window:], config.alpha, config.z)
            window = []

        thetas[k - 1] = theta.as_array()
        phis[k - 1] = phi.as_array()
        ws[k - 1] = w
        lambdas[k - 1] = lam_k

    return TrainHistory(
        terminal_wealth=terminal,
        failed=failed,
        thetas=thetas,
        phis=phis,
        ws=ws,
        lambdas=lambdas,
        sign=sign,
        config=config,
    )
