"""Closed-form solutions of the classical and exploratory mean-variance
problems.

Everything here is analytic: optimal values, the optimal Gaussian feedback
policy, the Lagrange multiplier pinning the terminal-mean constraint, the
entropy/exploration-cost identities, the policy-improvement operator and
its two-step convergence to the optimum, and the HJB residual.  These
functions are the ground truth against which the learner is tested.

Sign conventions: all formulas are written directly in the Sharpe ratio
rho = (mu - r)/sigma, which may be negative; no absolute values are taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketParams

__all__ = [
    "ProblemSpec",
    "GaussianPolicy",
    "QuadraticValue",
    "lagrange_w",
    "classical_control",
    "classical_value",
    "exploratory_value",
    "optimal_policy",
    "gaussian_entropy",
    "exploration_cost",
    "exploration_cost_from_definition",
    "policy_improvement",
    "value_of_initial_gaussian",
    "improve_twice",
    "hjb_residual",
    "mean_wealth",
]

# Below this magnitude the exponent of the time integral in
# value_of_initial_gaussian is treated as zero (removable singularity).
_SINGULAR_EPS = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    """One mean-variance problem instance.

    ``lam`` is the exploration weight trading exploitation against
    exploration; ``z`` the target mean terminal wealth.
    """

    market: MarketParams
    T: float
    x0: float
    z: float
    lam: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def rho(self) -> float:
        return self.market.rho

    @property
    def sigma(self) -> float:
        return self.market.sigma


@dataclass(frozen=True)
class GaussianPolicy:
    """Gaussian feedback policy with mean affine in (x - w) and variance
    exponential in time to maturity:

        mean(t, x) = mean_coeff * (x - w)
        var(t)     = var_scale * exp(var_rate * (T - t))
    """

    mean_coeff: float
    w: float
    var_scale: float
    var_rate: float
    T: float

    def __post_init__(self):
        if not self.var_scale > 0:
            raise ValueError("var_scale must be positive")

    def mean(self, t, x):
        return self.mean_coeff * (x - self.w)

    def variance(self, t):
        return self.var_scale * np.exp(self.var_rate * (self.T - t))


def _check_t(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > T):
        raise ValueError(f"t must lie in [0, {T}]")
    return t if t.ndim else float(t)


def lagrange_w(spec: ProblemSpec) -> float:
    """Multiplier w enforcing E[X_T] = z:  w = (z e^{rho^2 T} - x0) / (e^{rho^2 T} - 1)."""
    rho = spec.rho
    if rho == 0:
        raise ValueError("lagrange_w undefined for rho = 0: the mean constraint is unattainable")
    g = math.exp(rho**2 * spec.T)
    return (spec.z * g - spec.x0) / (g - 1.0)


def classical_control(t, x, w, rho, sigma):
    """Optimal classical allocation u*(t, x) = -(rho/sigma) (x - w)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return -(rho / sigma) * (x - w)


def classical_value(t, x, spec: ProblemSpec, w: float):
    """Optimal value of the classical problem: (x-w)^2 e^{-rho^2 (T-t)} - (w-z)^2."""
    t = _check_t(t, spec.T)
    rho = spec.rho
    return (x - w) ** 2 * np.exp(-(rho**2) * (spec.T - t)) - (w - spec.z) ** 2


def exploratory_value(t, x, spec: ProblemSpec, w: float):
    """Optimal value of the entropy-regularized problem.

    Classical quadratic term plus a time-only remainder carrying the
    exploration weight.
    """
    if not spec.lam > 0:
        raise ValueError("exploratory_value requires lam > 0; use classical_value for lam = 0")
    t = _check_t(t, spec.T)
    rho, sigma, lam, T = spec.rho, spec.sigma, spec.lam, spec.T
    quad = (x - w) ** 2 * np.exp(-(rho**2) * (T - t))
    rest = (
        lam * rho**2 / 4.0 * (T**2 - t**2)
        - lam / 2.0 * (rho**2 * T - math.log(sigma**2 / (math.pi * lam))) * (T - t)
    )
    return quad + rest - (w - spec.z) ** 2


def optimal_policy(t, x, spec: ProblemSpec, w: float):
    """Optimal Gaussian feedback policy: mean -(rho/sigma)(x-w),
    variance (lam / 2 sigma^2) e^{rho^2 (T-t)}.

    The mean is independent of lam and the variance independent of x: the
    exploitation/exploration split is exact.
    """
    if not spec.lam > 0:
        raise ValueError("optimal_policy requires lam > 0")
    t = _check_t(t, spec.T)
    rho, sigma = spec.rho, spec.sigma
    mean = -(rho / sigma) * (x - w)
    var = spec.lam / (2.0 * sigma**2) * np.exp(rho**2 * (spec.T - t))
    return mean, var


def optimal_policy_family(spec: ProblemSpec, w: float) -> GaussianPolicy:
    """The optimal policy as a member of the Gaussian feedback family."""
    rho, sigma = spec.rho, spec.sigma
    return GaussianPolicy(
        mean_coeff=-rho / sigma,
        w=w,
        var_scale=spec.lam / (2.0 * sigma**2),
        var_rate=rho**2,
        T=spec.T,
    )


def gaussian_entropy(variance):
    """Differential entropy of a Gaussian: 0.5 * ln(2 pi e variance)."""
    if np.any(np.asarray(variance) <= 0):
        raise ValueError("variance must be positive")
    return 0.5 * np.log(2.0 * math.pi * math.e * variance)


def exploration_cost(lam: float, T: float) -> float:
    """Cost of exploration: lam * T / 2, independent of the market and target."""
    if lam < 0 or not T > 0:
        raise ValueError("need lam >= 0 and T > 0")
    return lam * T / 2.0


def exploration_cost_from_definition(spec: ProblemSpec, w: float | None = None) -> float:
    """Exploration cost evaluated from its definition: the exploratory
    optimal value minus the accumulated entropy bonus minus the classical
    optimal value.

    The entropy of the optimal policy is independent of the state, so its
    time integral is T * entropy(var_scale) + rho^2 T^2 / 4 in closed
    form.  Agrees with :func:`exploration_cost` identically.
    """
    if w is None:
        w = lagrange_w(spec)
    lam, T, rho, sigma, x0 = spec.lam, spec.T, spec.rho, spec.sigma, spec.x0
    entropy_integral = T * gaussian_entropy(lam / (2.0 * sigma**2)) + rho**2 * T**2 / 4.0
    return (
        exploratory_value(0.0, x0, spec, w)
        + lam * entropy_integral
        - classical_value(0.0, x0, spec, w)
    )


def policy_improvement(vx, vxx, rho, sigma, lam):
    """One application of the policy-improvement operator at a state:
    from the value derivatives of the current policy, build the improved
    Gaussian with mean -(rho/sigma) vx/vxx and variance lam/(sigma^2 vxx).
    """
    if not np.all(np.asarray(vxx) > 0):
        raise ValueError("policy improvement requires vxx > 0")
    if not sigma > 0 or not lam > 0:
        raise ValueError("need sigma > 0 and lam > 0")
    mean = -(rho / sigma) * vx / vxx
    var = lam / (sigma**2 * vxx)
    return mean, var


@dataclass(frozen=True)
class QuadraticValue:
    """Value function quadratic in wealth:

        v(t, x) = (x - w)^2 e^{-q (T - t)} + F(t)
        F(t)    = f2 t^2 + f1 t + f0 + g e^{h (T - t)}

    with analytic time and space derivatives, so the policy-improvement
    fixed point can be checked without finite differences.
    """

    q: float
    f0: float
    f1: float
    f2: float
    g: float
    h: float
    w: float
    z: float
    T: float

    def _curv(self, t):
        return np.exp(-self.q * (self.T - t))

    def value(self, t, x):
        F = self.f2 * t**2 + self.f1 * t + self.f0 + self.g * np.exp(self.h * (self.T - t))
        return (x - self.w) ** 2 * self._curv(t) + F

    def vt(self, t, x):
        Fdot = 2.0 * self.f2 * t + self.f1 - self.g * self.h * np.exp(self.h * (self.T - t))
        return self.q * (x - self.w) ** 2 * self._curv(t) + Fdot

    def vx(self, t, x):
        return 2.0 * (x - self.w) * self._curv(t)

    def vxx(self, t, x):
        return 2.0 * self._curv(t) * np.ones_like(np.asarray(x, dtype=float))

    @classmethod
    def exploratory(cls, spec: ProblemSpec, w: float) -> "QuadraticValue":
        """The optimal exploratory value in quadratic form."""
        rho, sigma, lam, T = spec.rho, spec.sigma, spec.lam, spec.T
        k = lam / 2.0 * (rho**2 * T - math.log(sigma**2 / (math.pi * lam)))
        return cls(
            q=rho**2,
            f0=lam * rho**2 * T**2 / 4.0 - k * T - (w - spec.z) ** 2,
            f1=k,
            f2=-lam * rho**2 / 4.0,
            g=0.0,
            h=0.0,
            w=w,
            z=spec.z,
            T=T,
        )

    @classmethod
    def classical(cls, spec: ProblemSpec, w: float) -> "QuadraticValue":
        return cls(
            q=spec.rho**2,
            f0=-((w - spec.z) ** 2),
            f1=0.0,
            f2=0.0,
            g=0.0,
            h=0.0,
            w=w,
            z=spec.z,
            T=spec.T,
        )

    @classmethod
    def from_initial_gaussian(cls, a, c1, c2, spec: ProblemSpec, w: float) -> "QuadraticValue":
        """Value function of the Gaussian feedback policy
        N(a (x - w), c1 e^{c2 (T - t)}) in quadratic form."""
        if not c1 > 0:
            raise ValueError("c1 must be positive")
        rho, sigma, lam, T, z = spec.rho, spec.sigma, spec.lam, spec.T, spec.z
        k = 2.0 * rho * sigma * a + sigma**2 * a**2
        ent = lam / 2.0 * math.log(2.0 * math.pi * math.e * c1)
        f0 = lam * c2 / 4.0 * T**2 + ent * T - (w - z) ** 2
        f1 = -lam * c2 / 2.0 * T - ent
        f2 = lam * c2 / 4.0
        h = k + c2
        if abs(h) < _SINGULAR_EPS:
            # limiting form of the time integral: c1 sigma^2 (T - t)
            g = 0.0
            f1 -= c1 * sigma**2
            f0 += c1 * sigma**2 * T
            h = 0.0
        else:
            g = c1 * sigma**2 / h
            f0 -= g
        return cls(q=-k, f0=f0, f1=f1, f2=f2, g=g, h=h, w=w, z=z, T=T)


def value_of_initial_gaussian(t, x, a, c1, c2, spec: ProblemSpec, w: float):
    """Value function of the Gaussian feedback family member
    N(a (x - w), c1 e^{c2 (T - t)}), evaluated in closed form."""
    t = _check_t(t, spec.T)
    return QuadraticValue.from_initial_gaussian(a, c1, c2, spec, w).value(t, x)


def improve_twice(a, c1, c2, spec: ProblemSpec, w: float | None = None):
    """Apply the policy-improvement operator twice starting from the
    Gaussian family member (a, c1, c2).

    The first step already locks the mean coefficient to -rho/sigma; the
    second step lands exactly on the optimal policy.
    """
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    if w is None:
        w = lagrange_w(spec)
    rho, sigma, lam, T = spec.rho, spec.sigma, spec.lam, spec.T
    # Step 1: improvement through the value function of (a, c1, c2), whose
    # curvature is e^{k (T - t)} with k = 2 rho sigma a + sigma^2 a^2.
    k = 2.0 * rho * sigma * a + sigma**2 * a**2
    step1 = GaussianPolicy(
        mean_coeff=-rho / sigma,
        w=w,
        var_scale=lam / (2.0 * sigma**2),
        var_rate=-k,
        T=T,
    )
    # Step 2: the mean coefficient is now -rho/sigma, so the curvature
    # exponent becomes -rho^2 and the improvement is the optimal policy.
    step2 = GaussianPolicy(
        mean_coeff=-rho / sigma,
        w=w,
        var_scale=lam / (2.0 * sigma**2),
        var_rate=rho**2,
        T=T,
    )
    return step1, step2


def hjb_residual(value: QuadraticValue, t, x, spec: ProblemSpec):
    """Residual of the post-minimization HJB equation

        v_t - (rho^2/2) v_x^2 / v_xx + (lam/2)(1 - ln(2 pi e lam / (sigma^2 v_xx)))

    Zero (to tolerance) exactly when ``value`` solves the equation.
    """
    vxx = value.vxx(t, x)
    if not np.all(vxx > 0):
        raise ValueError("hjb_residual requires vxx > 0")
    rho, sigma, lam = spec.rho, spec.sigma, spec.lam
    vt = value.vt(t, x)
    vx = value.vx(t, x)
    return vt - rho**2 / 2.0 * vx**2 / vxx + lam / 2.0 * (
        1.0 - np.log(2.0 * math.pi * math.e * lam / (sigma**2 * vxx))
    )


def mean_wealth(t, spec: ProblemSpec, w: float):
    """Mean of the optimal wealth process: (x0 - w) e^{-rho^2 t} + w."""
    t = _check_t(t, spec.T)
    return (spec.x0 - w) * np.exp(-spec.rho**2 * np.asarray(t, dtype=float)) + w
