"""Agreement tests between the compiled episode kernel and its pure-numpy
fallback, plus selection plumbing."""

import subprocess
import sys

import numpy as np
import pytest

from exploremv import _backend, _episode_py

try:
    from exploremv import _episode_kernel
except ImportError:  # pragma: no cover - compiled extension not built
    _episode_kernel = None

needs_kernel = pytest.mark.skipif(
    _episode_kernel is None, reason="compiled episode kernel not built"
)


def episode_inputs(seed=0, n=40, explosive=False):
    rng = np.random.default_rng(seed)
    T = 1.0
    times = np.linspace(0.0, T, n + 1)
    rho = np.full(n, -3.2)
    sigma = np.full(n, 0.10)
    z_w = rng.standard_normal(n)
    z_u = rng.standard_normal(n)
    policy_sd = np.full(n, 1e50 if explosive else 1.5)
    return dict(
        times=times, rho=rho, sigma=sigma, z_wealth=z_w, z_action=z_u,
        policy_sd=policy_sd, x0=1.0, w=1.4, lam=2.0,
        mean_coef=0.2 if not explosive else 1e60,
        theta1=0.1, theta2=-0.2, phi1=1.4, phi2=0.5,
        eta_theta=0.0005, eta_phi=0.0005,
    )


def run_backend(mod, kw):
    return mod.run_learning_episode(
        kw["times"], kw["rho"], kw["sigma"], kw["z_wealth"], kw["z_action"],
        kw["policy_sd"], kw["x0"], kw["w"], kw["lam"], kw["mean_coef"],
        kw["theta1"], kw["theta2"], kw["phi1"], kw["phi2"],
        kw["eta_theta"], kw["eta_phi"],
    )


class TestPureBackend:
    def test_successful_episode_updates_params(self):
        kw = episode_inputs()
        ok, wealth, actions, th1, th2, p1, p2 = run_backend(_episode_py, kw)
        assert ok
        assert wealth.shape == (41,)
        assert actions.shape == (40,)
        assert np.isfinite(wealth).all()
        assert (th1, th2, p1, p2) != (kw["theta1"], kw["theta2"], kw["phi1"], kw["phi2"])

    def test_failed_episode_reverts_params(self):
        kw = episode_inputs(explosive=True)
        ok, _, _, th1, th2, p1, p2 = run_backend(_episode_py, kw)
        assert not ok
        assert (th1, th2, p1, p2) == (kw["theta1"], kw["theta2"], kw["phi1"], kw["phi2"])

    def test_wealth_recurrence_matches_hand_step(self):
        # the action is mean_coef*(x - w) + sd*z_u and the wealth update is
        # x + sigma*u*(rho dt + sqrt(dt) z_w): check the first step by hand
        kw = episode_inputs()
        _, wealth, actions, *_ = run_backend(_episode_py, kw)
        dt = kw["times"][1] - kw["times"][0]
        u0 = kw["mean_coef"] * (kw["x0"] - kw["w"]) + kw["policy_sd"][0] * kw["z_action"][0]
        assert actions[0] == pytest.approx(u0, rel=1e-12)
        x1 = kw["x0"] + kw["sigma"][0] * u0 * (
            kw["rho"][0] * dt + np.sqrt(dt) * kw["z_wealth"][0]
        )
        assert wealth[1] == pytest.approx(x1, rel=1e-12)


@needs_kernel
class TestKernelAgreement:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_pure_backend(self, seed):
        kw = episode_inputs(seed=seed)
        ok_a, w_a, a_a, *params_a = run_backend(_episode_py, kw)
        ok_b, w_b, a_b, *params_b = run_backend(_episode_kernel, kw)
        assert ok_a == ok_b
        np.testing.assert_allclose(w_a, w_b, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a_a, a_b, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(params_a, params_b, rtol=1e-9, atol=1e-12)

    def test_matches_on_failure(self):
        kw = episode_inputs(explosive=True)
        ok_a, *_ = run_backend(_episode_py, kw)
        ok_b, *_ = run_backend(_episode_kernel, kw)
        assert ok_a == ok_b is False

    def test_full_training_run_agrees(self):
        # identical training histories through either backend
        code = (
            "import numpy as np\n"
            "from exploremv.learner import LearnerConfig, train\n"
            "from exploremv.market import MarketParams, TimeGrid\n"
            "cfg = LearnerConfig(grid=TimeGrid(1.0, 1/252), x0=1.0, z=1.4, episodes=50)\n"
            "h = train(cfg, MarketParams(mu=-0.30, sigma=0.10, r=0.02), seed=9)\n"
            "print(repr(h.final_w), repr(float(h.phis[-1][0])), repr(float(h.phis[-1][1])))\n"
        )
        outs = {}
        for pure in ("0", "1"):
            env = {"EXPLOREMV_PURE": pure} if pure == "1" else {}
            import os

            full_env = dict(os.environ)
            full_env.pop("EXPLOREMV_PURE", None)
            full_env.update(env)
            proc = subprocess.run(
                [sys.executable, "-c", code], capture_output=True, text=True, env=full_env
            )
            assert proc.returncode == 0, proc.stderr
            outs[pure] = [float(v) for v in proc.stdout.split()]
        np.testing.assert_allclose(outs["0"], outs["1"], rtol=1e-9)


class TestBackendSelection:
    def test_active_backend_exposed(self):
        assert _backend.BACKEND_NAME in ("cython", "python")

    def test_env_var_forces_pure(self):
        import os

        env = dict(os.environ)
        env["EXPLOREMV_PURE"] = "1"
        proc = subprocess.run(
            [sys.executable, "-c", "from exploremv import _backend; print(_backend.BACKEND_NAME)"],
            capture_output=True, text=True, env=env,
        )
        assert proc.stdout.strip() == "python"
