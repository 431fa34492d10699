"""Command-line interface: ``mvimpulse {solve, simulate, verify-qvi, fp-check}``.

Exit codes: 0 ok, 1 configuration error, 2 infinite value, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, dividend, fokker_planck, impulse, qvi
from .config import load_config
from .errors import BoundaryCase, ConfigError, InfiniteValue, InvalidParam, MvImpulseError
from .io import dumps
from .particles import conditional_mean_oracle, simulate_path, write_path_csv
from .rng import NoiseStream

EXIT_OK, EXIT_CONFIG, EXIT_INFINITE, EXIT_VERIFY = 0, 1, 2, 3


class _Run:
    """Collects outputs of one command and writes the ``run.json`` manifest."""

    def __init__(self, args, command: str, kv: dict, sim):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.kv = kv
        self.sim = sim
        self.threads = args.threads
        self.outputs: list[str] = []
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def finish(self, status: str) -> None:
        manifest = {
            "command": self.command,
            "version": __version__,
            "seed": self.sim.seed,
            "threads": self.threads,
            "config": dict(self.kv),
            "sim": self.sim.as_dict(),
            "outputs": self.outputs,
            "status": status,
            "wall_time_s": time.perf_counter() - self.t0,
        }
        (self.out / "run.json").write_text(dumps(manifest))


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required")
    model, sim, kv = load_config(args.config)
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    return model, sim, kv


def _solution_dict(sol) -> dict:
    _, margin = qvi.check_condition_vi(sol)
    return {"gamma1": sol.gamma1, "gamma2": sol.gamma2, "u_bar": sol.u_bar, "C1": sol.C1,
            "condition_vi_margin": margin}


def cmd_solve(args) -> int:
    model, sim, kv = _load(args)
    run = _Run(args, "solve", kv, sim)
    sol = dividend.solve(model)
    info = _solution_dict(sol)
    run.write_text("solution.json", dumps(info))
    with open(run.path("phi.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "phi", "branch"])
        for u, v, branch in dividend.phi_table(sol):
            w.writerow([f"{u:.12g}", f"{v:.12g}", branch])
    run.finish("ok")
    sys.stdout.write(dumps(info))
    return EXIT_OK


def parse_policy(spec: str, model, sol=None):
    """``optimal`` | ``never`` | ``threshold:<u>`` | ``wait:<t1>``."""
    name, _, arg = spec.partition(":")
    c, lam = model.c_fixed, model.lambda_prop
    try:
        if name == "optimal" and not arg:
            return dividend.optimal_policy(sol if sol is not None else dividend.solve(model))
        if name == "never" and not arg:
            return impulse.never_policy(model)
        if name == "threshold":
            return impulse.ThresholdPolicy(float(arg), c, lam)
        if name == "wait":
            return impulse.WaitThenLiquidate(float(arg), c, lam)
    except ValueError as exc:
        raise ConfigError(f"bad policy {spec!r}: {exc}") from None
    raise ConfigError(f"unknown policy {spec!r}")


def cmd_simulate(args) -> int:
    model, sim, kv = _load(args)
    policy = parse_policy(args.policy, model)
    run = _Run(args, "simulate", kv, sim)
    est = impulse.estimate_performance(model, policy, sim, threads=args.threads, label=args.policy)
    summary = est.summary()
    if args.policy == "optimal":
        sol = dividend.solve(model)
        phi = dividend.value_phi(0.0, sim.x0, sol)
        summary["phi"] = phi
        summary["mean_minus_phi"] = est.mean - phi
    run.write_text("summary.json", dumps(summary))
    impulse.write_payoffs_csv(run.path("paths.csv"), est)
    impulse.write_events_csv(run.path("events.csv"), est.events)
    run.finish("ok")
    sys.stdout.write(dumps(summary))
    return EXIT_OK


def cmd_verify_qvi(args) -> int:
    model, sim, kv = _load(args)
    run = _Run(args, "verify-qvi", kv, sim)
    sol = dividend.solve(model)
    psi = qvi.dividend_psi(sol, args.perturb_c1)
    report = qvi.verify(psi, sol, model, qvi.GridSpec(n=args.grid))
    run.write_text("qvi_report.json", report.to_json())
    report.write_csv(run.path("qvi_points.csv"))
    run.finish("passed" if report.passed else "failed")
    sys.stdout.write(report.to_json())
    return EXIT_OK if report.passed else EXIT_VERIFY


def _fp_path(model, sim, g, n_steps, i):
    stream = NoiseStream(sim.seed, i)
    dB1 = stream.common_increments(sim.dt, n_steps)
    means = []

    def recorded():
        for e in simulate_path(model, sim.n_particles, sim.x0, sim.dt, n_steps, stream):
            means.append(e.mean)
            yield e

    r = fokker_planck.step_residuals(recorded(), dB1, g, model, sim.dt)
    oracle = conditional_mean_oracle(sim.x0, model, dB1, sim.dt)
    return r, np.array(means), oracle


def cmd_fp_check(args) -> int:
    model, sim, kv = _load(args)
    g = fokker_planck.test_function(args.test_function)
    n_steps = args.steps if args.steps is not None else sim.n_steps
    run = _Run(args, "fp-check", kv, sim)

    def one(i):
        return _fp_path(model, sim, g, n_steps, i)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(one, range(sim.n_paths)))
    else:
        results = [one(i) for i in range(sim.n_paths)]
    stats = fokker_planck.ResidualStats.from_residuals(g.name, [r for r, _, _ in results], sim.dt)
    run.write_text("residual.json", stats.to_json())
    rows = ((k * sim.dt, mh, mo, sim.n_particles, i)
            for i, (_, m_hat, m_or) in enumerate(results)
            for k, (mh, mo) in enumerate(zip(m_hat, m_or)))
    write_path_csv(run.path("paths.csv"), rows)
    run.finish("ok")
    sys.stdout.write(stats.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvimpulse", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--out", default="mvimpulse_out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for path loops")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", help="closed-form dividend solution").set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="Monte Carlo value of an impulse policy")
    sp.add_argument("--policy", default="optimal",
                    help="optimal | never | threshold:<u> | wait:<t1>")
    sp.set_defaults(func=cmd_simulate)

    vq = sub.add_parser("verify-qvi", help="check the solved value against the QVI conditions")
    vq.add_argument("--perturb-c1", type=float, default=1.0,
                    help="scale the continuation coefficient before verifying")
    vq.add_argument("--grid", type=int, default=2000, help="number of grid points")
    vq.set_defaults(func=cmd_verify_qvi)

    fp = sub.add_parser("fp-check", help="weak-form residual of simulated ensembles")
    fp.add_argument("--test-function", default="q", help="q | q2 | exp_capped:<a>,<cap>")
    fp.add_argument("--steps", type=int, help="steps per path (default horizon/dt)")
    fp.set_defaults(func=cmd_fp_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InfiniteValue as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFINITE
    except (ConfigError, InvalidParam, BoundaryCase) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MvImpulseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
