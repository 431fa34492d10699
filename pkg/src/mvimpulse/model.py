"""Model coefficients, the finite-activity jump measure, and their validation.

The controlled state follows

    dX = m(t) (alpha0 dt + sigma1 dB1 + sigma2 dB2 + int gamma0(z) N~(dt, dz)),

where ``m(t) = E[X(t) | F_t^(1)]`` is the conditional mean given the common
noise ``B1``.  Jumps are compound Poisson: ``rate`` events per unit time, marks
``z`` drawn from a mark distribution and mapped to relative jump sizes
``gamma0(z) >= -1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import InvalidParam

GAUSS_LEGENDRE_NODES = 64


@dataclass(frozen=True)
class UniformMarks:
    """Uniform mark distribution on ``[low, high]``."""

    low: float = 0.0
    high: float = 1.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)

    def quadrature(self, n: int = GAUSS_LEGENDRE_NODES) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and probability weights (summing to one)."""
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (self.high - self.low)
        return self.low + half * (x + 1.0), 0.5 * w


def _zero_map(z):
    return np.zeros_like(np.asarray(z, dtype=float))


@dataclass(frozen=True, eq=False)
class LevyMeasureSpec:
    """Finite-activity jump measure ``nu = rate * P(mark in dz)``.

    ``kind`` is one of ``"none"``, ``"constant"``, ``"uniform"`` (presets with
    closed-form moments) or ``"custom"`` (moments by quadrature).
    """

    rate: float = 0.0
    marks: UniformMarks = field(default_factory=UniformMarks)
    gamma0: Callable[[np.ndarray], np.ndarray] = _zero_map
    kind: str = "none"
    args: tuple[float, ...] = ()

    @property
    def constant(self) -> float | None:
        if self.kind == "none":
            return 0.0
        if self.kind == "constant":
            return self.args[0]
        return None

    def sample_gamma0(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(size)
        if self.kind == "constant":
            # marks are still consumed so the stream layout does not depend on the preset
            z = self.marks.sample(rng, size)
            return np.full_like(z, self.args[0])
        return np.asarray(self.gamma0(self.marks.sample(rng, size)), dtype=float)

    def gamma0_nodes(self, n: int = GAUSS_LEGENDRE_NODES) -> tuple[np.ndarray, np.ndarray]:
        """Relative jump sizes at quadrature nodes with their probability weights."""
        z, w = self.marks.quadrature(n)
        return np.asarray(self.gamma0(z), dtype=float) * np.ones_like(z), w

    @cached_property
    def mean_gamma0(self) -> float:
        if self.kind in ("none", "constant"):
            return float(self.constant)
        if self.kind == "uniform":
            a, b = self.args
            return 0.5 * (a + b)
        g, w = self.gamma0_nodes()
        return float(np.dot(w, g))

    @cached_property
    def second_moment_gamma0(self) -> float:
        if self.kind in ("none", "constant"):
            return float(self.constant) ** 2
        if self.kind == "uniform":
            a, b = self.args
            return (a * a + a * b + b * b) / 3.0
        g, w = self.gamma0_nodes()
        return float(np.dot(w, g * g))

    def min_gamma0(self) -> float:
        if self.kind in ("none", "constant"):
            return float(self.constant)
        if self.kind == "uniform":
            return float(min(self.args))
        g, _ = self.gamma0_nodes()
        ends = np.asarray(self.gamma0(np.array([self.marks.low, self.marks.high])), dtype=float)
        return float(min(g.min(), ends.min()))

    def _identity(self):
        if self.kind == "custom":
            return (self.rate, self.marks, self.kind, id(self.gamma0))
        return (self.rate, self.marks, self.kind, self.args)

    def __eq__(self, other):
        if not isinstance(other, LevyMeasureSpec):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self):
        return hash(self._identity())

    def __repr__(self):
        return f"LevyMeasureSpec(rate={self.rate!r}, preset={self.preset!r})"

    @property
    def preset(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "constant":
            return f"constant:{self.args[0]:.12g}"
        if self.kind == "uniform":
            return f"uniform:{self.args[0]:.12g},{self.args[1]:.12g}"
        return "custom"


def no_jumps() -> LevyMeasureSpec:
    return LevyMeasureSpec()


def constant_jumps(rate: float, g: float) -> LevyMeasureSpec:
    g = float(g)
    return LevyMeasureSpec(
        rate=float(rate), gamma0=lambda z: np.full_like(np.asarray(z, dtype=float), g),
        kind="constant", args=(g,),
    )


def uniform_jumps(rate: float, a: float, b: float) -> LevyMeasureSpec:
    a, b = float(a), float(b)
    return LevyMeasureSpec(
        rate=float(rate), gamma0=lambda z: a + (b - a) * np.asarray(z, dtype=float),
        kind="uniform", args=(a, b),
    )


def parse_gamma0(rate: float, preset: str) -> LevyMeasureSpec:
    """Build a jump spec from ``"none" | "constant:<g>" | "uniform:<a>,<b>"``."""
    text = preset.strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    try:
        if name == "none" and not rest:
            return LevyMeasureSpec(rate=float(rate))
        if name == "constant":
            return constant_jumps(rate, float(rest))
        if name == "uniform":
            a, b = (float(v) for v in rest.split(","))
            return uniform_jumps(rate, a, b)
    except ValueError:
        pass
    raise InvalidParam([("jump_gamma0", f"unrecognised preset {preset!r}")])


def levy_mass(levy: LevyMeasureSpec) -> float:
    """Total mass ``||nu||`` of the jump measure (the jump rate)."""
    return float(levy.rate)


@dataclass(frozen=True)
class ModelParams:
    alpha0: float
    sigma1: float
    sigma2: float
    rho: float
    lambda_prop: float
    c_fixed: float
    levy: LevyMeasureSpec = field(default_factory=no_jumps)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ValidatedModel:
    """A ``ModelParams`` instance known to satisfy every constraint."""

    params: ModelParams

    def __getattr__(self, name):
        return getattr(self.params, name)


def unwrap(p) -> ModelParams:
    return p.params if isinstance(p, ValidatedModel) else p


def validate_params(p) -> ValidatedModel:
    """Check every parameter constraint; raise ``InvalidParam`` listing all failures.

    ``sigma2 == 0`` is accepted: it never enters the closed-form solution and
    is the degenerate single-particle reduction used for fast simulation.
    """
    p = unwrap(p)
    bad = []
    for f in fields(ModelParams):
        if f.name == "levy":
            continue
        v = getattr(p, f.name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            bad.append((f.name, "must be a finite number"))
    if bad:
        raise InvalidParam(bad)
    if p.sigma1 == 0:
        bad.append(("sigma1", "must be nonzero"))
    if p.rho <= 0:
        bad.append(("rho", "must be > 0"))
    if p.c_fixed <= 0:
        bad.append(("c_fixed", "must be > 0"))
    if p.lambda_prop < 0:
        bad.append(("lambda_prop", "must be >= 0"))
    levy = p.levy
    if not math.isfinite(levy.rate) or levy.rate < 0:
        bad.append(("jump_rate", "must be finite and >= 0"))
    if levy.kind == "uniform" and levy.args[0] > levy.args[1]:
        bad.append(("jump_gamma0", "uniform bounds must satisfy a <= b"))
    if levy.min_gamma0() < -1:
        bad.append(("jump_gamma0", "relative jump size gamma0 must be >= -1"))
    if bad:
        raise InvalidParam(bad)
    return ValidatedModel(p)


@dataclass(frozen=True)
class ExtendedState:
    """Markovian state ``(s, x, mu)``: clock, representative state, law handle.

    ``mu`` is either a ``ParticleEnsemble`` or a float (point mass).
    """

    s: float
    x: float
    mu: object

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("elapsed time s must be >= 0")
