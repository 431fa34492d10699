"""Monte Carlo for the discounted first hitting time of the conditional-mean GBM.

``log m`` is a Brownian motion with drift, so the path is sampled exactly on a
coarse skeleton.  Coarse intervals that could contain a crossing (bridge
crossing probability at least ``eps``, or endpoint above the level) are filled
in on the fine grid by Brownian-bridge interpolation.  The first passage is
then monitored on two grids, ``dt`` and ``dt/2``, from the same path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadBarrier, BadCount
from .model import unwrap
from .rng import _generator


@dataclass(frozen=True)
class HittingEstimate:
    dt: float
    mean: float
    stderr: float
    mean_half: float
    stderr_half: float
    n_paths: int
    values: np.ndarray
    values_half: np.ndarray


def _first_passage(x0, b, p, dt, horizon, seed, path, coarse_steps, eps):
    """Discounted hitting values ``(exp(-rho tau_dt), exp(-rho tau_dt/2))`` for one path."""
    mu = p.alpha0 - 0.5 * p.sigma1 ** 2
    sig = abs(p.sigma1)
    level = math.log(b)
    y0 = math.log(x0)
    big = coarse_steps * dt
    n_coarse = int(math.ceil(horizon / big - 1e-9))
    z = _generator(seed, path, "common", 0).standard_normal(n_coarse)
    ys = y0 + np.concatenate(([0.0], np.cumsum(mu * big + sig * math.sqrt(big) * z)))
    ya, yb = ys[:-1], ys[1:]
    da = np.maximum(level - ya, 0.0)
    db = np.maximum(level - yb, 0.0)
    cross = np.exp(-2.0 * da * db / (sig * sig * big))
    flagged = np.flatnonzero((cross >= eps) | (yb >= level))

    n_fine = 2 * coarse_steps
    h = 0.5 * dt
    frac = np.arange(1, n_fine + 1) / n_fine
    tau_half = math.inf
    for j in flagged:
        w = np.cumsum(math.sqrt(h) * _generator(seed, path, "bridge", int(j)).standard_normal(n_fine))
        y = ya[j] + (yb[j] - ya[j]) * frac + sig * (w - frac * w[-1])
        y[-1] = yb[j]
        hit = y >= level
        t0 = j * big
        if math.isinf(tau_half):
            idx = np.flatnonzero(hit)
            if idx.size:
                tau_half = t0 + (idx[0] + 1) * h
        idx_full = np.flatnonzero(hit[1::2])
        if idx_full.size:
            tau_full = t0 + (idx_full[0] + 1) * dt
            return math.exp(-p.rho * tau_full), math.exp(-p.rho * tau_half)
    half = 0.0 if math.isinf(tau_half) else math.exp(-p.rho * tau_half)
    return 0.0, half


def hitting_mc(x0: float, b: float, params, dt: float, n_paths: int, seed: int = 0, *,
               horizon: float = 150.0, coarse_steps: int = 500, eps: float = 1e-10,
               path_offset: int = 0) -> HittingEstimate:
    """Estimate ``E[exp(-rho tau_b)]`` under grid monitoring at ``dt`` and ``dt/2``.

    Paths that have not hit the level by ``horizon`` contribute 0, a truncation
    error of at most ``exp(-rho horizon)``.
    """
    p = unwrap(params)
    if x0 > b:
        raise BadBarrier(f"start {x0!r} above barrier {b!r}")
    if n_paths < 2:
        raise BadCount("n_paths must be >= 2")
    if not x0 > 0:
        z = np.zeros(n_paths)
        return HittingEstimate(dt, 0.0, 0.0, 0.0, 0.0, n_paths, z, z)
    if x0 == b:
        o = np.ones(n_paths)
        return HittingEstimate(dt, 1.0, 0.0, 1.0, 0.0, n_paths, o, o)
    vals = np.empty(n_paths)
    vals_half = np.empty(n_paths)
    for i in range(n_paths):
        vals[i], vals_half[i] = _first_passage(x0, b, p, dt, horizon, seed, path_offset + i,
                                               coarse_steps, eps)
    se = float(np.std(vals, ddof=1) / math.sqrt(n_paths))
    se_h = float(np.std(vals_half, ddof=1) / math.sqrt(n_paths))
    return HittingEstimate(dt, float(vals.mean()), se, float(vals_half.mean()), se_h,
                           n_paths, vals, vals_half)
