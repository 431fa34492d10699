"""Impulse controls: interventions, controlled paths and performance estimates.

An intervention of size ``zeta`` moves every particle by
``x -> x - c - (1 + lambda) zeta`` (so the conditional law jumps to its
pushforward) and pays ``exp(-rho (s + tau)) zeta``.  Interventions happen only
at grid times.  The path stops at the bankruptcy time: the first grid time at
which the conditional mean is ``<= 0``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .config import SimConfig
from .errors import BadCount, Inadmissible
from .io import dumps
from .model import ExtendedState, unwrap
from .particles import ParticleEnsemble, PathDriver, init_ensemble, shift_measure
from .rng import NoiseStream

# relative size below which a post-intervention mean counts as exactly zero
SOLVENCY_TOL = 1e-12


@dataclass(frozen=True)
class ImpulseControl:
    """Ordered interventions ``(tau_k, zeta_k)``."""

    interventions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        taus = [t for t, _ in self.interventions]
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise ValueError("intervention times must be nondecreasing")
        if any(z < 0 for _, z in self.interventions):
            raise ValueError("impulse sizes must be >= 0")

    def __len__(self):
        return len(self.interventions)


@dataclass(frozen=True)
class InterventionSpec:
    gamma: Callable[[np.ndarray, float], np.ndarray]
    reward: Callable[[ExtendedState, float], float]
    admissible: Callable[[ExtendedState, float], bool]


def _law_mean(y: ExtendedState) -> float:
    if isinstance(y.mu, ParticleEnsemble):
        return y.mu.mean
    if isinstance(y.mu, (int, float)):
        return float(y.mu)
    return float(y.x)


def dividend_intervention(params) -> InterventionSpec:
    """Dividend payout with fixed cost ``c`` and proportional cost ``lambda``."""
    p = unwrap(params)
    c, lam, rho = p.c_fixed, p.lambda_prop, p.rho

    def gamma(x, zeta):
        return x - c - (1.0 + lam) * zeta

    def reward(y, zeta):
        return math.exp(-rho * y.s) * zeta

    def admissible(y, zeta):
        zmax = (_law_mean(y) - c) / (1.0 + lam)
        return zeta >= 0 and zeta <= zmax + SOLVENCY_TOL * max(1.0, abs(zmax))

    return InterventionSpec(gamma, reward, admissible)


def apply_intervention(y: ExtendedState, zeta: float, spec: InterventionSpec):
    """Apply one impulse; returns ``(new_state, reward)``."""
    if not spec.admissible(y, zeta):
        raise Inadmissible(f"impulse {zeta!r} not admissible at state x={y.x!r}")
    reward = spec.reward(y, zeta)
    x_new = float(spec.gamma(y.x, zeta))
    if isinstance(y.mu, ParticleEnsemble):
        mu_new = shift_measure(y.mu, lambda pos: spec.gamma(pos, zeta))
    elif isinstance(y.mu, (int, float)):
        mu_new = float(spec.gamma(float(y.mu), zeta))
    else:
        mu_new = y.mu
    return ExtendedState(y.s, x_new, mu_new), reward


@dataclass(frozen=True)
class ThresholdPolicy:
    """Pay out everything, ``(u - c)/(1 + lambda)``, once the mean reaches ``u_bar``."""

    u_bar: float
    c: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.u_bar > self.c:
            raise ValueError("u_bar must exceed the fixed cost c")

    @property
    def level(self) -> float:
        return self.u_bar

    @property
    def not_before(self) -> float:
        return 0.0

    def payout(self, u: float) -> float:
        return (u - self.c) / (1.0 + self.lam)


@dataclass(frozen=True)
class WaitThenLiquidate:
    """Do nothing before ``t1``; afterwards pay out everything at the first grid time with ``m > c``."""

    t1: float
    c: float
    lam: float = 0.0

    @property
    def level(self) -> float:
        return self.c

    @property
    def not_before(self) -> float:
        return self.t1

    def payout(self, u: float) -> float:
        return (u - self.c) / (1.0 + self.lam)


def never_policy(params) -> ThresholdPolicy:
    p = unwrap(params)
    return ThresholdPolicy(math.inf, p.c_fixed, p.lambda_prop)


@dataclass(frozen=True)
class EventRecord:
    path_index: int
    tau: float
    zeta: float
    m_before: float
    m_after: float
    discounted_reward: float


@dataclass
class ControlledTrajectory:
    grid: np.ndarray
    m_path: np.ndarray
    events: list[EventRecord]
    tau_S: float
    payoff: float

    @property
    def control(self) -> ImpulseControl:
        return ImpulseControl(tuple((e.tau, e.zeta) for e in self.events))


def bankruptcy_time(traj) -> float:
    """First grid time with conditional mean ``<= 0``; ``inf`` if none."""
    m = np.asarray(traj.m_path, dtype=float)
    hit = np.flatnonzero(m <= 0)
    return float(traj.grid[hit[0]]) if hit.size else math.inf


tau_S = bankruptcy_time


def run_controlled_path(model, policy, sim: SimConfig, stream: NoiseStream, *,
                        s: float = 0.0, spec: InterventionSpec | None = None,
                        record_path: bool = True,
                        running_profit: Callable[[float, float], float] | None = None,
                        bequest: Callable[[float, float], float] | None = None,
                        ) -> ControlledTrajectory:
    """Simulate one controlled path up to bankruptcy or the horizon.

    Particles evolve by the Euler scheme between interventions.  At the first
    grid time (not earlier than ``policy.not_before``) with ``m >= policy.level``
    the payout ``policy.payout(m)`` is applied to every particle; payouts
    ``<= 0`` are skipped.  The payoff is the sum of discounted rewards, plus the
    running profit (left Riemann sum) and the bequest at ``tau_S`` when given.
    """
    p = unwrap(model)
    spec = spec or dividend_intervention(p)
    dt, n_steps = sim.dt, sim.n_steps
    e0 = init_ensemble(sim.n_particles, sim.x0, stream)
    drv = PathDriver(p, e0.positions, dt, stream)
    record = record_path or running_profit is not None
    m_path = np.full(n_steps + 1, np.nan) if record else None
    m = drv.mean
    if record:
        m_path[0] = m
    check_from = max(0, math.ceil(policy.not_before / dt - 1e-9))
    events: list[EventRecord] = []
    tau_end = math.inf

    def intervene(k, m_before):
        zeta = policy.payout(m_before)
        if not zeta > 0:
            return m_before
        tau = k * dt
        y = ExtendedState(s + tau, m_before, m_before)
        if not spec.admissible(y, zeta):
            return m_before
        reward = spec.reward(y, zeta)
        drv.x = np.ascontiguousarray(spec.gamma(drv.x, zeta), dtype=float)
        m_after = drv.mean
        if m_after <= SOLVENCY_TOL * max(1.0, abs(m_before)):
            m_after = min(m_after, 0.0)
        events.append(EventRecord(stream.path_index, tau, zeta, m_before, m_after, reward))
        if record:
            m_path[k] = m_after
        return m_after

    if check_from == 0 and m >= policy.level:
        m = intervene(0, m)
    if m <= 0:
        tau_end = 0.0
    while tau_end == math.inf and drv.k < n_steps:
        status = drv.run(n_steps, policy.level, check_from - 1,
                         m_out=m_path[1:] if record else None)
        k_last = drv.k
        m = drv.mean
        if status == kernels.STOP_BANKRUPT:
            tau_end = k_last * dt
        elif status == kernels.STOP_TRIGGER:
            m = intervene(k_last, m)
            if m <= 0:
                tau_end = k_last * dt
    k_last = drv.k
    payoff = math.fsum(ev.discounted_reward for ev in events)
    if running_profit is not None:
        stop = k_last if tau_end == math.inf else int(round(tau_end / dt))
        ts = s + dt * np.arange(stop)
        payoff += dt * math.fsum(running_profit(t, mm) for t, mm in zip(ts, m_path[:stop]))
    if bequest is not None and tau_end < math.inf:
        payoff += bequest(s + tau_end, m)
    if record:
        n_rec = k_last + 1
        grid = dt * np.arange(n_rec)
        m_rec = m_path[:n_rec].copy()
    else:
        grid = np.empty(0)
        m_rec = np.empty(0)
    return ControlledTrajectory(grid, m_rec, events, tau_end, payoff)


@dataclass
class PerformanceEstimate:
    mean: float
    stderr: float
    n_paths: int
    dt: float
    policy: str
    payoffs: np.ndarray = field(repr=False)
    events: list[EventRecord] = field(repr=False, default_factory=list)
    tau_S: np.ndarray | None = field(repr=False, default=None)

    def summary(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths,
                "dt": self.dt, "policy": self.policy}


def estimate_performance(model, policy, sim: SimConfig, n_paths: int | None = None, *,
                         threads: int = 1, s: float = 0.0, label: str | None = None,
                         path_offset: int = 0, **path_kwargs) -> PerformanceEstimate:
    """Sample mean and standard error of the realised payoff over independent paths.

    Path ``i`` draws all its noise from ``NoiseStream(sim.seed, path_offset + i)``,
    so estimates with the same seed use common random numbers and do not depend
    on ``threads``.
    """
    n_paths = sim.n_paths if n_paths is None else n_paths
    if n_paths < 2:
        raise BadCount("n_paths must be >= 2")
    label = label or type(policy).__name__
    extra = path_kwargs.get("running_profit") or path_kwargs.get("bequest")
    if policy.level == math.inf and not extra:
        return PerformanceEstimate(0.0, 0.0, n_paths, sim.dt, label, np.zeros(n_paths), [],
                                   np.full(n_paths, math.inf))

    def one(i):
        return run_controlled_path(model, policy, sim, NoiseStream(sim.seed, path_offset + i),
                                   s=s, record_path=False, **path_kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(one, range(n_paths)))
    else:
        trajs = [one(i) for i in range(n_paths)]
    payoffs = np.array([t.payoff for t in trajs])
    events = [ev for t in trajs for ev in t.events]
    mean = float(np.mean(payoffs))
    stderr = float(np.std(payoffs, ddof=1) / math.sqrt(n_paths))
    taus = np.array([t.tau_S for t in trajs])
    return PerformanceEstimate(mean, stderr, n_paths, sim.dt, label, payoffs, events, taus)


def write_events_csv(path, events: Sequence[EventRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_index", "tau_k", "zeta_k", "m_before", "m_after", "discounted_reward"])
        for ev in events:
            w.writerow([ev.path_index, f"{ev.tau:.12g}", f"{ev.zeta:.12g}", f"{ev.m_before:.12g}",
                        f"{ev.m_after:.12g}", f"{ev.discounted_reward:.12g}"])


def write_payoffs_csv(path, est: PerformanceEstimate, path_offset: int = 0) -> None:
    idx = np.array([ev.path_index - path_offset for ev in est.events], dtype=np.intp)
    n_events = np.bincount(idx, minlength=est.n_paths)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_index", "payoff", "tau_S", "n_events"])
        for i in range(est.n_paths):
            tau = est.tau_S[i] if est.tau_S is not None else math.inf
            w.writerow([path_offset + i, f"{est.payoffs[i]:.12g}", f"{tau:.12g}", int(n_events[i])])


def summary_json(est: PerformanceEstimate, **extra) -> str:
    return dumps({**est.summary(), **extra})
