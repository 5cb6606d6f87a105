# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled training-episode kernel.

Same contract as ``_episode_py.run_learning_episode``; the per-step
gradient pass over the episode-so-far samples is the O(n^2) hot loop that
dominates training time, hence the compiled implementation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, isfinite, fabs

BACKEND_NAME = "cython"

cdef double WEALTH_CAP = 1e100
cdef double PHI2_FLOOR = 1e-8


def run_learning_episode(
    times,
    rho,
    sigma,
    z_wealth,
    z_action,
    policy_sd,
    double x0,
    double w,
    double lam,
    double mean_coef,
    double theta1,
    double theta2,
    double phi1,
    double phi2,
    double eta_theta,
    double eta_phi,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_arr = np.ascontiguousarray(times, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rho_arr = np.ascontiguousarray(rho, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sig_arr = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zw = np.ascontiguousarray(z_wealth, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zu = np.ascontiguousarray(z_action, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sd = np.ascontiguousarray(policy_sd, dtype=np.float64)

    cdef Py_ssize_t n = t_arr.shape[0] - 1
    cdef double T = t_arr[n]
    cdef double dt = t_arr[1] - t_arr[0]
    cdef double sqrt_dt = sqrt(dt)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] wealth = np.full(n + 1, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] actions = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xw2 = np.empty(n + 1)

    cdef double theta1_in = theta1, theta2_in = theta2
    cdef double phi1_in = phi1, phi2_in = phi2

    cdef Py_ssize_t i, j
    cdef double u, x_next, tau_j, tau_j1, e0, e1, a, b
    cdef double vdot, delta, dvdot_dphi2, tsqd
    cdef double g_theta1, g_theta2, g_phi1, g_phi2

    wealth[0] = x0
    xw2[0] = (x0 - w) * (x0 - w)

    for i in range(n):
        u = mean_coef * (wealth[i] - w) + sd[i] * zu[i]
        actions[i] = u
        x_next = wealth[i] + sig_arr[i] * u * (rho_arr[i] * dt + sqrt_dt * zw[i])
        if not isfinite(x_next) or fabs(x_next) > WEALTH_CAP:
            return False, wealth, actions, theta1_in, theta2_in, phi1_in, phi2_in
        wealth[i + 1] = x_next
        xw2[i + 1] = (x_next - w) * (x_next - w)

        g_theta1 = 0.0
        g_theta2 = 0.0
        g_phi1 = 0.0
        g_phi2 = 0.0
        for j in range(i + 1):
            tau_j = T - t_arr[j]
            tau_j1 = T - t_arr[j + 1]
            e0 = exp(-2.0 * phi2 * tau_j)
            e1 = exp(-2.0 * phi2 * tau_j1)
            a = xw2[j] * e0
            b = xw2[j + 1] * e1
            tsqd = t_arr[j + 1] * t_arr[j + 1] - t_arr[j] * t_arr[j]
            vdot = (b - a + theta2 * tsqd + theta1 * dt) / dt
            delta = vdot - lam * (phi1 + phi2 * tau_j)
            dvdot_dphi2 = -2.0 * (b * tau_j1 - a * tau_j) / dt - lam * tau_j
            g_theta1 += delta * dt
            g_theta2 += delta * tsqd
            g_phi1 += -lam * delta * dt
            g_phi2 += delta * dvdot_dphi2 * dt

        theta1 -= eta_theta * g_theta1
        theta2 -= eta_theta * g_theta2
        phi1 -= eta_phi * g_phi1
        phi2 -= eta_phi * g_phi2
        if phi2 < PHI2_FLOOR:
            phi2 = PHI2_FLOOR

    if not (isfinite(theta1) and isfinite(theta2) and isfinite(phi1) and isfinite(phi2)):
        return False, wealth, actions, theta1_in, theta2_in, phi1_in, phi2_in
    return True, wealth, actions, theta1, theta2, phi1, phi2
