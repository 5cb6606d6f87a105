"""Experiment runner and reporting.

Scenario grids over market drift/volatility, trailing terminal-wealth
statistics, learning-curve buckets, and CSV emission for external
plotting.  Runs are deterministic given the per-scenario seeds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analytic, learner, mle
from .market import FactorState, MarketParams, TimeGrid

__all__ = [
    "Scenario",
    "StatsWindow",
    "RunResult",
    "trailing_stats",
    "learning_curve",
    "run_one",
    "run_grid",
    "default_grid",
    "read_results",
    "RESULTS_HEADER",
    "CURVE_HEADER",
]

RESULTS_HEADER = (
    "scenario_id,method,mu,sigma,r,lambda,episodes,seed,mean,variance,sharpe,"
    "w_learned,w_analytic,phi1,phi2,theta0,theta1,theta2,theta3,failures"
)
CURVE_HEADER = "bucket,episode_start,mean,variance"

GRID_MUS = (-0.50, -0.30, -0.10, 0.0, 0.10, 0.30, 0.50)
GRID_SIGMAS = (0.10, 0.20, 0.30, 0.40)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    mu: float
    sigma: float
    r: float = 0.02
    T: float = 1.0
    dt: float = 1.0 / 252.0
    z: float = 1.4
    x0: float = 1.0
    lambda0: float = 2.0
    anneal: bool = False
    episodes: int = 2000
    avg_window: int = 10
    alpha: float = 0.05
    eta_theta: float = 0.0005
    eta_phi: float = 0.0005
    seed: int = 0
    # None => stationary market; otherwise a slow factor with these params,
    # started at (rho0, sigma0) derived from (mu, sigma, r)
    factor_delta: float | None = None
    factor_gamma: float = 0.0
    stats_window: int = 2000

    def market(self):
        if self.factor_delta is None:
            return MarketParams(mu=self.mu, sigma=self.sigma, r=self.r)
        rho0 = (self.mu - self.r) / self.sigma
        return FactorState(
            rho_t=rho0, sigma_t=self.sigma, delta=self.factor_delta, gamma=self.factor_gamma
        )

    def grid(self) -> TimeGrid:
        return TimeGrid(T=self.T, dt=self.dt)

    def learner_config(self) -> learner.LearnerConfig:
        return learner.LearnerConfig(
            grid=self.grid(),
            x0=self.x0,
            z=self.z,
            episodes=self.episodes,
            avg_window=self.avg_window,
            alpha=self.alpha,
            eta_theta=self.eta_theta,
            eta_phi=self.eta_phi,
            lambda0=self.lambda0,
            anneal=self.anneal,
        )

    def window_size(self) -> int:
        return max(2, min(self.stats_window, self.episodes // 2))


@dataclass(frozen=True)
class StatsWindow:
    """The last K terminal wealths of a run (failures excluded)."""

    values: np.ndarray
    K: int = 2000

    @classmethod
    def from_terminal(cls, terminal_wealth, K: int = 2000) -> "StatsWindow":
        tail = np.asarray(terminal_wealth, dtype=float)[-K:]
        return cls(values=tail[np.isfinite(tail)], K=K)


def trailing_stats(window: StatsWindow):
    """Sample mean, unbiased variance and annualized Sharpe ratio
    (mean - 1)/sqrt(variance) of the window.  Sharpe is None when the
    variance vanishes (or the window is degenerate)."""
    v = np.asarray(window.values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 values for trailing stats")
    mean = float(np.mean(v))
    var = float(np.var(v, ddof=1))
    sharpe = (mean - 1.0) / math.sqrt(var) if var > 0 else None
    return mean, var, sharpe


def learning_curve(terminal_wealth, bucket: int = 50):
    """Non-overlapping bucket means/variances of the terminal wealths; the
    last partial bucket is dropped.  Failed episodes (NaN) are skipped
    inside each bucket.  Rows are (bucket index, first episode, mean, var).
    """
    if bucket < 1:
        raise ValueError("bucket must be >= 1")
    if hasattr(terminal_wealth, "terminal_wealth"):
        terminal_wealth = terminal_wealth.terminal_wealth
    tw = np.asarray(terminal_wealth, dtype=float)
    rows = []
    for b in range(tw.size // bucket):
        chunk = tw[b * bucket : (b + 1) * bucket]
        chunk = chunk[np.isfinite(chunk)]
        if chunk.size == 0:
            mean, var = float("nan"), float("nan")
        else:
            mean = float(np.mean(chunk))
            var = float(np.var(chunk, ddof=1)) if chunk.size > 1 else 0.0
        rows.append((b, b * bucket, mean, var))
    return rows


@dataclass
class RunResult:
    scenario: Scenario
    method: str
    terminal_wealth: np.ndarray
    failures: int
    mean: float
    variance: float
    sharpe: float | None
    w_learned: float | None = None
    theta: learner.ValueParams | None = None
    phi: learner.PolicyParams | None = None


def run_one(scenario: Scenario, method: str) -> RunResult:
    """Run one (scenario, method) experiment and compute trailing stats."""
    method = method.upper()
    if method == "EMV":
        hist = learner.train(scenario.learner_config(), scenario.market(), scenario.seed)
        terminal = hist.terminal_wealth
        failures = hist.n_failures
        w_learned = hist.final_w if hist.episodes else None
        theta = hist.final_theta if hist.episodes else None
        phi = hist.final_phi if hist.episodes else None
    elif method == "MLE":
        hist = mle.run_mle_experiment(
            scenario.market(), scenario.grid(), scenario.episodes,
            scenario.z, scenario.x0, scenario.seed,
        )
        terminal = hist.terminal_wealth
        failures = hist.n_failures
        w_learned = theta = phi = None
    else:
        raise ValueError(f"unknown method {method!r}; expected EMV or MLE")

    window = StatsWindow.from_terminal(terminal, scenario.window_size())
    mean, var, sharpe = trailing_stats(window)
    return RunResult(
        scenario=scenario,
        method=method,
        terminal_wealth=terminal,
        failures=failures,
        mean=mean,
        variance=var,
        sharpe=sharpe,
        w_learned=w_learned,
        theta=theta,
        phi=phi,
    )


def _w_analytic(s: Scenario) -> float | None:
    rho = (s.mu - s.r) / s.sigma
    if rho == 0:
        return None
    spec = analytic.ProblemSpec(
        market=MarketParams(s.mu, s.sigma, s.r), T=s.T, x0=s.x0, z=s.z, lam=s.lambda0
    )
    return analytic.lagrange_w(spec)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def result_row(res: RunResult) -> list[str]:
    s = res.scenario
    theta = res.theta
    phi = res.phi
    return [
        s.scenario_id,
        res.method,
        _fmt(s.mu),
        _fmt(s.sigma),
        _fmt(s.r),
        _fmt(s.lambda0),
        str(s.episodes),
        str(s.seed),
        _fmt(res.mean),
        _fmt(res.variance),
        _fmt(res.sharpe),
        _fmt(res.w_learned),
        _fmt(_w_analytic(s)),
        _fmt(phi.phi1 if phi else None),
        _fmt(phi.phi2 if phi else None),
        _fmt(theta.theta0 if theta else None),
        _fmt(theta.theta1 if theta else None),
        _fmt(theta.theta2 if theta else None),
        _fmt(theta.theta3 if theta else None),
        str(res.failures),
    ]


def write_curve(path: Path, terminal_wealth, bucket: int = 50) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_HEADER.split(","))
        for b, start, mean, var in learning_curve(terminal_wealth, bucket):
            writer.writerow([b, start, repr(mean), repr(var)])


def run_grid(scenarios, methods, out_dir) -> int:
    """Run every (scenario, method) pair, writing results.csv plus one
    learning-curve CSV per run.  Per-run failures are recorded in-row and
    the grid continues; an unwritable output directory is a nonzero exit.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / "results.csv"
        f = open(probe, "w", newline="")
    except OSError as exc:
        print(f"error: cannot write to {out_dir}: {exc}")
        return 1

    jobs = sorted(
        ((s, m.upper()) for s in scenarios for m in methods),
        key=lambda job: (job[0].scenario_id, job[1]),
    )
    with f:
        writer = csv.writer(f)
        writer.writerow(RESULTS_HEADER.split(","))
        for scenario, method in jobs:
            res = run_one(scenario, method)
            writer.writerow(result_row(res))
            curve_path = out_dir / f"curve_{scenario.scenario_id}_{method}.csv"
            write_curve(curve_path, res.terminal_wealth)
    return 0


def read_results(path) -> list[dict]:
    """Re-parse a results CSV into a list of row dicts (strings as written)."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RESULTS_HEADER.split(","):
            raise ValueError(f"unexpected results header in {path}")
        return list(reader)


def default_grid(base: Scenario | None = None, seed: int = 0) -> list[Scenario]:
    """The 28-scenario drift x volatility grid with a distinct seed per
    scenario."""
    if base is None:
        base = Scenario(scenario_id="", mu=0.0, sigma=0.1)
    scenarios = []
    for i, mu in enumerate(GRID_MUS):
        for j, sigma in enumerate(GRID_SIGMAS):
            sid = f"mu{int(round(mu * 100)):+04d}_sig{int(round(sigma * 100)):03d}"
            scenarios.append(
                replace(base, scenario_id=sid, mu=mu, sigma=sigma,
                        seed=seed + i * len(GRID_SIGMAS) + j)
            )
    return scenarios
