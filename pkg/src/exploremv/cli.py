"""Command-line interface: `exploremv run-grid | run-one | curves`.

Every flag can also be supplied through a flat `key = value` config file
(--config); explicit flags override file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .bench import Scenario

_FLOAT_KEYS = {
    "mu", "sigma", "r", "T", "dt", "z", "x0", "lambda", "alpha",
    "eta_theta", "eta_phi", "factor_delta", "factor_gamma",
}
_INT_KEYS = {"episodes", "avg_window", "seed"}
_BOOL_KEYS = {"anneal"}


def parse_config_file(path) -> dict:
    """Flat `key = value` file; '#' starts a comment; keys use the flag
    names with '-' or '_' interchangeably."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in ("method", "out"):
            values[key] = value
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="flat key=value config file")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--z", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--anneal", action="store_true", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--avg-window", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta-theta", type=float, default=None)
    p.add_argument("--eta-phi", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--method", type=str, default=None, help="EMV, MLE, or EMV,MLE")
    p.add_argument("--factor-delta", type=float, default=None)
    p.add_argument("--factor-gamma", type=float, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")


def _merged_options(args) -> dict:
    opts = {}
    if args.config:
        opts.update(parse_config_file(args.config))
    flag_map = {
        "mu": args.mu, "sigma": args.sigma, "r": args.r, "T": args.T,
        "dt": args.dt, "z": args.z, "x0": args.x0, "lambda": args.lambda_,
        "anneal": args.anneal, "episodes": args.episodes,
        "avg_window": args.avg_window, "alpha": args.alpha,
        "eta_theta": args.eta_theta, "eta_phi": args.eta_phi,
        "seed": args.seed, "method": args.method,
        "factor_delta": args.factor_delta, "factor_gamma": args.factor_gamma,
        "out": args.out,
    }
    for key, value in flag_map.items():
        if value is not None:
            opts[key] = value
    return opts


def _base_scenario(opts: dict, scenario_id: str = "custom") -> Scenario:
    return Scenario(
        scenario_id=scenario_id,
        mu=opts.get("mu", -0.30),
        sigma=opts.get("sigma", 0.10),
        r=opts.get("r", 0.02),
        T=opts.get("T", 1.0),
        dt=opts.get("dt", 1.0 / 252.0),
        z=opts.get("z", 1.4),
        x0=opts.get("x0", 1.0),
        lambda0=opts.get("lambda", 2.0),
        anneal=opts.get("anneal", False),
        episodes=opts.get("episodes", 2000),
        avg_window=opts.get("avg_window", 10),
        alpha=opts.get("alpha", 0.05),
        eta_theta=opts.get("eta_theta", 0.0005),
        eta_phi=opts.get("eta_phi", 0.0005),
        seed=opts.get("seed", 0),
        factor_delta=opts.get("factor_delta"),
        factor_gamma=opts.get("factor_gamma", 0.0),
    )


def _methods(opts: dict) -> list[str]:
    raw = opts.get("method", "EMV,MLE")
    return [m.strip().upper() for m in raw.split(",") if m.strip()]


def cmd_run_grid(args) -> int:
    opts = _merged_options(args)
    base = _base_scenario(opts)
    scenarios = bench.default_grid(base, seed=opts.get("seed", 0))
    out = opts.get("out", "results")
    return bench.run_grid(scenarios, _methods(opts), out)


def cmd_run_one(args) -> int:
    opts = _merged_options(args)
    scenario = _base_scenario(opts)
    out = opts.get("out")
    results = [bench.run_one(scenario, m) for m in _methods(opts)]
    for res in results:
        sharpe = "undefined" if res.sharpe is None else f"{res.sharpe:.4f}"
        print(
            f"{scenario.scenario_id} {res.method}: mean={res.mean:.4f} "
            f"variance={res.variance:.4f} sharpe={sharpe} failures={res.failures}"
        )
    if out is not None:
        return bench.run_grid([scenario], _methods(opts), out)
    return 0


def cmd_curves(args) -> int:
    opts = _merged_options(args)
    scenario = _base_scenario(opts)
    out = Path(opts.get("out", "results"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}")
        return 1
    for method in _methods(opts):
        res = bench.run_one(scenario, method)
        path = out / f"curve_{scenario.scenario_id}_{method}.csv"
        bench.write_curve(path, res.terminal_wealth)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exploremv",
        description="Exploratory mean-variance portfolio selection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (
        ("run-grid", cmd_run_grid),
        ("run-one", cmd_run_one),
        ("curves", cmd_curves),
    ):
        p = sub.add_parser(name)
        _add_scenario_flags(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
