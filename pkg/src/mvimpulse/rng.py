"""Counter-based random substreams.

Every random number used by a simulation is addressed by
``(seed, path_index, kind, block)``: a Philox key is derived from
``(seed, path_index, kind)`` and the block index is written into the counter.
Blocks never overlap, so any block can be regenerated on its own and results
do not depend on the order in which paths or blocks are evaluated.

Within a block values are laid out step-major, particle-minor.  The common
noise uses blocks of ``COMMON_BLOCK`` steps.  Per-particle streams use blocks
of ``particle_block_steps(n)`` steps, a power of two dividing ``COMMON_BLOCK``,
so a given ``(particle, step)`` always maps to the same draw for a fixed
ensemble size ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

COMMON_BLOCK = 4096
PARTICLE_BLOCK_VALUES = 4096

_KINDS = {"init": 0, "common": 1, "idio": 2, "jump": 3, "bridge": 4}


def particle_block_steps(n: int) -> int:
    """Steps per idiosyncratic/jump block for an ensemble of ``n`` particles."""
    target = max(1, PARTICLE_BLOCK_VALUES // max(1, n))
    return 1 << (target.bit_length() - 1)


@lru_cache(maxsize=4096)
def _key(seed: int, path_index: int, kind: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index, kind))
    k = ss.generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def _generator(seed: int, path_index: int, kind: str, block: int) -> np.random.Generator:
    key = np.array(_key(seed, path_index, _KINDS[kind]), dtype=np.uint64)
    counter = np.array([0, 0, block, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class NoiseStream:
    """Random source for one simulated path."""

    seed: int
    path_index: int = 0

    def initial(self) -> np.random.Generator:
        return _generator(self.seed, self.path_index, "init", 0)

    def common_block(self, block: int) -> np.ndarray:
        """Standard normals for common-noise steps ``[block*COMMON_BLOCK, (block+1)*COMMON_BLOCK)``."""
        return _generator(self.seed, self.path_index, "common", block).standard_normal(COMMON_BLOCK)

    def common_increments(self, dt: float, n_steps: int, start: int = 0) -> np.ndarray:
        """Brownian increments ``dB1`` for steps ``start .. start+n_steps-1``."""
        out = np.empty(n_steps)
        sq = np.sqrt(dt)
        k = start
        while k < start + n_steps:
            b, off = divmod(k, COMMON_BLOCK)
            z = self.common_block(b)
            take = min(COMMON_BLOCK - off, start + n_steps - k)
            out[k - start:k - start + take] = sq * z[off:off + take]
            k += take
        return out

    def idio_block(self, block: int, n: int) -> np.ndarray:
        s = particle_block_steps(n)
        return _generator(self.seed, self.path_index, "idio", block).standard_normal((s, n))

    def jump_block(self, block: int, n: int, levy, dt: float) -> np.ndarray:
        """Compensated compound-Poisson increments, shape ``(steps, n)``.

        Entry ``[k, i]`` is ``sum of gamma0 over jumps of particle i in step k``
        minus ``rate * dt * E[gamma0]``.
        """
        s = particle_block_steps(n)
        rng = _generator(self.seed, self.path_index, "jump", block)
        counts = rng.poisson(levy.rate * dt, size=(s, n))
        total = int(counts.sum())
        sums = np.zeros(s * n)
        if total:
            sizes = levy.sample_gamma0(rng, total)
            owner = np.repeat(np.arange(s * n), counts.ravel())
            sums += np.bincount(owner, weights=sizes, minlength=s * n)
        sums -= levy.rate * dt * levy.mean_gamma0
        return sums.reshape(s, n)
