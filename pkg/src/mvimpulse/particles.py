"""Interacting-particle approximation of the conditional law given the common noise.

All particles of one path share the common increment ``dB1``; each has its own
idiosyncratic Brownian increment and compound-Poisson jumps.  The mean-field
coupling enters only through the empirical first moment, frozen at the start of
every Euler step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from . import kernels
from .errors import BadCount, NonFinite
from .model import unwrap
from .rng import COMMON_BLOCK, NoiseStream, particle_block_steps

_EMPTY = np.empty((0, 0))


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Equally weighted particles; the empirical measure approximates ``mu_t``."""

    positions: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size < 1:
            raise BadCount("an ensemble needs at least one particle")
        if not np.all(np.isfinite(pos)):
            raise NonFinite("ensemble positions must be finite")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def mean(self) -> float:
        return kernels.mean(self.positions)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class NormalLaw:
    mean: float
    sd: float

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, n)


def init_ensemble(n: int, initial_law, stream: NoiseStream) -> ParticleEnsemble:
    """Draw ``n`` particles i.i.d. from ``initial_law``.

    ``initial_law`` is a float (point mass), an object with ``sample(rng, n)``,
    or a callable ``(rng, n) -> array``.
    """
    if n < 1:
        raise BadCount(f"n must be >= 1, got {n}")
    if isinstance(initial_law, (int, float)):
        return ParticleEnsemble(np.full(n, float(initial_law)))
    rng = stream.initial()
    if hasattr(initial_law, "sample"):
        pos = initial_law.sample(rng, n)
    else:
        pos = initial_law(rng, n)
    return ParticleEnsemble(np.asarray(pos, dtype=float))


def conditional_moment(e: ParticleEnsemble, g: Callable = None) -> float:
    """Empirical moment ``(1/N) sum g(X_i)``; ``g`` defaults to the identity."""
    if g is None:
        return kernels.mean(e.positions)
    vals = np.ascontiguousarray(np.broadcast_to(g(e.positions), e.positions.shape), dtype=float)
    return kernels.mean(vals)


def shift_measure(e: ParticleEnsemble, shift: Callable) -> ParticleEnsemble:
    """Push the empirical measure forward through ``shift`` (particlewise map)."""
    pos = np.asarray(shift(e.positions), dtype=float)
    return ParticleEnsemble(np.broadcast_to(pos, e.positions.shape).copy(), e.t, e.step_index)


def needs_idio(params) -> bool:
    return unwrap(params).sigma2 != 0.0


def needs_jumps(params) -> bool:
    levy = unwrap(params).levy
    return levy.rate > 0 and levy.kind != "none"


@lru_cache(maxsize=8)
def _particle_noise(stream: NoiseStream, block: int, n: int, dt: float, idio: bool, levy):
    sq = math.sqrt(dt)
    dB2 = sq * stream.idio_block(block, n) if idio else _EMPTY
    jumps = stream.jump_block(block, n, levy, dt) if levy is not None else _EMPTY
    return dB2, jumps


class PathDriver:
    """Advances one particle path block by block through the selected kernel."""

    def __init__(self, params, x: np.ndarray, dt: float, stream: NoiseStream, k0: int = 0):
        self.p = unwrap(params)
        self.x = np.ascontiguousarray(x, dtype=float).copy()
        self.n = self.x.shape[0]
        self.dt = float(dt)
        self.stream = stream
        self.k = k0
        self.idio = needs_idio(self.p)
        self.levy = self.p.levy if needs_jumps(self.p) else None
        self.sblock = particle_block_steps(self.n)
        self._common = (None, None)

    def _dB1(self, k: int) -> tuple[np.ndarray, int]:
        b, off = divmod(k, COMMON_BLOCK)
        if self._common[0] != b:
            self._common = (b, math.sqrt(self.dt) * self.stream.common_block(b))
        return self._common[1], off

    def run(self, stop: int, level: float = math.inf, check_from: int = 0,
            m_out: np.ndarray | None = None) -> int:
        """Step until global step ``stop`` or an early stop; returns the kernel status.

        ``m_out[k]`` (global index) receives the mean after step ``k`` if given.
        """
        p = self.p
        status = kernels.STOP_NONE
        while self.k < stop and status == kernels.STOP_NONE:
            blk, off = divmod(self.k, self.sblock)
            span = min(self.sblock, stop - blk * self.sblock)
            common, coff = self._dB1(blk * self.sblock)
            dB1 = common[coff:coff + self.sblock]
            dB2, jumps = _particle_noise(self.stream, blk, self.n, self.dt, self.idio, self.levy)
            local_m = np.empty(self.sblock)
            k_end, status = kernels.advance(
                self.x, self.dt, p.alpha0, p.sigma1, p.sigma2, dB1, dB2, jumps,
                off, span, level, check_from - blk * self.sblock, local_m,
            )
            if m_out is not None:
                m_out[blk * self.sblock + off:blk * self.sblock + k_end] = local_m[off:k_end]
            self.k = blk * self.sblock + k_end
        if status == kernels.STOP_NONFINITE:
            raise NonFinite(f"non-finite particle mean at step {self.k}")
        return status

    @property
    def mean(self) -> float:
        return kernels.mean(self.x)


def step(e: ParticleEnsemble, dt: float, dB1: float, params, stream: NoiseStream) -> ParticleEnsemble:
    """One explicit Euler-Maruyama step of the particle system.

    With ``m`` the pre-step empirical mean, every particle moves by
    ``m * (alpha0*dt + sigma1*dB1 + sigma2*dB2_i + J_i)``; the idiosyncratic
    ``dB2_i`` and compensated jumps ``J_i`` come from ``stream`` at
    ``e.step_index``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    p = unwrap(params)
    x = e.positions.copy()
    k = e.step_index
    n = x.shape[0]
    sblock = particle_block_steps(n)
    blk, off = divmod(k, sblock)
    dB2, jumps = _particle_noise(stream, blk, n, float(dt), needs_idio(p),
                                 p.levy if needs_jumps(p) else None)
    dB1_arr = np.zeros(sblock)
    dB1_arr[off] = dB1
    m_out = np.empty(sblock)
    _, status = kernels.advance(x, float(dt), p.alpha0, p.sigma1, p.sigma2, dB1_arr, dB2, jumps,
                                off, off + 1, math.inf, sblock, m_out)
    if status == kernels.STOP_NONFINITE or not np.all(np.isfinite(x)):
        raise NonFinite(f"non-finite particle position at step {k + 1}")
    return ParticleEnsemble(x, e.t + dt, k + 1)


def simulate_path(params, n: int, initial_law, dt: float, n_steps: int,
                  stream: NoiseStream) -> Iterator[ParticleEnsemble]:
    """Yield the uncontrolled ensemble at every grid time ``0, dt, ..., n_steps*dt``."""
    e0 = init_ensemble(n, initial_law, stream)
    drv = PathDriver(params, e0.positions, dt, stream)
    yield ParticleEnsemble(drv.x.copy(), 0.0, 0)
    for k in range(1, n_steps + 1):
        drv.run(k, level=math.inf)
        yield ParticleEnsemble(drv.x.copy(), k * dt, k)


def mean_path(params, n: int, initial_law, dt: float, n_steps: int,
              stream: NoiseStream) -> np.ndarray:
    """Empirical conditional-mean path ``m_hat(t_k)``, ``k = 0..n_steps``.

    Stops early (remaining entries NaN) if the mean reaches zero.
    """
    e0 = init_ensemble(n, initial_law, stream)
    drv = PathDriver(params, e0.positions, dt, stream)
    out = np.full(n_steps + 1, np.nan)
    out[0] = drv.mean
    drv.run(n_steps, level=math.inf, m_out=out[1:])
    return out


def conditional_mean_oracle(x0: float, params, dB1: np.ndarray, dt: float) -> np.ndarray:
    """Exact solution of ``dm = m (alpha0 dt + sigma1 dB1)`` on the simulation grid.

    ``m(t_k) = x0 exp((alpha0 - sigma1^2/2) t_k + sigma1 B1(t_k))`` with
    ``B1(t_k)`` the cumulative sum of the supplied increments.
    """
    p = unwrap(params)
    if not x0 > 0:
        raise ValueError("x0 must be > 0")
    dB1 = np.asarray(dB1, dtype=float)
    t = dt * np.arange(dB1.size + 1)
    b1 = np.concatenate(([0.0], np.cumsum(dB1)))
    return x0 * np.exp((p.alpha0 - 0.5 * p.sigma1 ** 2) * t + p.sigma1 * b1)


def write_path_csv(path, rows) -> None:
    """Write path dump rows ``(t, m_hat, m_oracle, n_particles, path_index)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "m_hat", "m_oracle", "n_particles", "path_index"])
        for t, mh, mo, n, pi in rows:
            w.writerow([f"{t:.12g}", f"{mh:.12g}", f"{mo:.12g}", n, pi])
