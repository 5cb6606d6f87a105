"""Pure-Python (numpy) implementation of the hot training-episode kernel.

One call simulates a single learning episode and performs the per-step
stochastic-gradient updates of the value and policy parameters over the
samples collected so far, exactly mirroring the compiled kernel in
``_episode_kernel.pyx``.  Selected automatically when the compiled
extension is unavailable, or forced with EXPLOREMV_PURE=1.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

# Wealth magnitude beyond which the episode is declared failed: squaring
# larger values would overflow double precision downstream.
WEALTH_CAP = 1e100
PHI2_FLOOR = 1e-8


def run_learning_episode(
    times,
    rho,
    sigma,
    z_wealth,
    z_action,
    policy_sd,
    x0,
    w,
    lam,
    mean_coef,
    theta1,
    theta2,
    phi1,
    phi2,
    eta_theta,
    eta_phi,
):
    """Run one episode: sample allocations from the frozen Gaussian policy
    (mean ``mean_coef * (x - w)``, per-step standard deviation
    ``policy_sd``), step the wealth with the true market coefficients, and
    after each step descend the Bellman-error loss over all sample pairs
    collected so far in this episode.

    Returns (ok, wealth, actions, theta1, theta2, phi1, phi2).  On failure
    (non-finite or capped wealth, or non-finite parameters) the input
    parameters are returned unchanged and ok is False.
    """
    times = np.asarray(times, dtype=float)
    n = times.size - 1
    T = times[-1]
    dt = times[1] - times[0]
    sqrt_dt = np.sqrt(dt)
    tau = T - times
    t_sq_diff = times[1:] ** 2 - times[:-1] ** 2

    theta1_in, theta2_in, phi1_in, phi2_in = theta1, theta2, phi1, phi2
    wealth = np.full(n + 1, np.nan)
    actions = np.full(n, np.nan)
    wealth[0] = x0
    xw2 = np.empty(n + 1)  # (x_j - w)^2
    xw2[0] = (x0 - w) ** 2

    for i in range(n):
        u = mean_coef * (wealth[i] - w) + policy_sd[i] * z_action[i]
        actions[i] = u
        x_next = wealth[i] + sigma[i] * u * (rho[i] * dt + sqrt_dt * z_wealth[i])
        if not np.isfinite(x_next) or abs(x_next) > WEALTH_CAP:
            return False, wealth, actions, theta1_in, theta2_in, phi1_in, phi2_in
        wealth[i + 1] = x_next
        xw2[i + 1] = (x_next - w) ** 2

        # gradient of the discretized Bellman-error loss over pairs 0..i,
        # with the curvature coupling theta3 = 2 phi2 in force
        decay = np.exp(-2.0 * phi2 * tau[: i + 2])
        curv = xw2[: i + 2] * decay
        vdot = (np.diff(curv) + theta2 * t_sq_diff[: i + 1] + theta1 * dt) / dt
        delta = vdot - lam * (phi1 + phi2 * tau[: i + 1])
        weighted = curv * tau[: i + 2]
        dvdot_dphi2 = -2.0 * np.diff(weighted) / dt - lam * tau[: i + 1]

        g_theta1 = np.sum(delta) * dt
        g_theta2 = np.sum(delta * t_sq_diff[: i + 1])
        g_phi1 = -lam * np.sum(delta) * dt
        g_phi2 = np.sum(delta * dvdot_dphi2) * dt

        theta1 -= eta_theta * g_theta1
        theta2 -= eta_theta * g_theta2
        phi1 -= eta_phi * g_phi1
        phi2 -= eta_phi * g_phi2
        if phi2 < PHI2_FLOOR:
            phi2 = PHI2_FLOOR

    if not (
        np.isfinite(theta1) and np.isfinite(theta2) and np.isfinite(phi1) and np.isfinite(phi2)
    ):
        return False, wealth, actions, theta1_in, theta2_in, phi1_in, phi2_in
    return True, wealth, actions, theta1, theta2, phi1, phi2
