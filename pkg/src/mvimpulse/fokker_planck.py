"""Weak-form test of the conditional Fokker-Planck equation on particle ensembles.

For a test function ``g`` and the empirical measure ``mu`` with mean ``m``

    A0 g(x) = alpha0 m g'(x) + (sigma1^2 + sigma2^2) m^2 g''(x) / 2
              + rate * E[g(x + gamma0 m) - g(x) - gamma0 m g'(x)]
    A1 g(x) = sigma1 m g'(x)

and one Euler step ``t -> t + dt`` should satisfy
``<mu_{t+dt}, g> - <mu_t, g> ~ <mu_t, A0 g> dt + <mu_t, A1 g> dB1``.
The per-step residuals of that relation are collected into ``ResidualStats``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .errors import GridMismatch
from .io import dumps
from .model import unwrap
from .particles import ParticleEnsemble


@dataclass(frozen=True)
class TestFunction:
    """Smooth ``g`` with analytic first and second derivatives.

    ``degree`` is the polynomial degree when ``g`` is a polynomial of degree
    at most 2 (the jump term then has a moment closed form), else ``None``.
    """

    __test__ = False

    name: str
    g: Callable
    dg: Callable
    d2g: Callable
    degree: int | None = None


def _q(x):
    return np.asarray(x, dtype=float)


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _sq(x):
    x = np.asarray(x, dtype=float)
    return x * x


def _two_x(x):
    return 2.0 * np.asarray(x, dtype=float)


def _two(x):
    return np.full_like(np.asarray(x, dtype=float), 2.0)


Q = TestFunction("q", _q, _one, _zero, 1)
Q2 = TestFunction("q2", _sq, _two_x, _two, 2)


def exp_capped(a: float = 1.0, cap: float = 10.0) -> TestFunction:
    """``g(x) = cap * tanh(exp(a x) / cap)``: exponential growth, bounded by ``cap``."""
    if not cap > 0:
        raise ValueError("cap must be > 0")

    def parts(x):
        y = np.exp(np.clip(a * np.asarray(x, dtype=float), -700.0, 700.0))
        s = y / cap
        th = np.tanh(s)
        return y, th, 1.0 - th * th

    def g(x):
        _, th, _ = parts(x)
        return cap * th

    def dg(x):
        y, _, sech2 = parts(x)
        return a * y * sech2

    def d2g(x):
        y, th, sech2 = parts(x)
        return a * a * y * sech2 * (1.0 - 2.0 * th * y / cap)

    return TestFunction(f"exp_capped:{a:g},{cap:g}", g, dg, d2g, None)


PRESETS = {"q": Q, "q2": Q2}


def test_function(name: str) -> TestFunction:
    """Look up ``"q"``, ``"q2"`` or ``"exp_capped:<a>,<cap>"``."""
    if name in PRESETS:
        return PRESETS[name]
    head, _, rest = name.partition(":")
    if head == "exp_capped":
        a, cap = (float(v) for v in rest.split(",")) if rest else (1.0, 10.0)
        return exp_capped(a, cap)
    raise ValueError(f"unknown test function {name!r}")


def _positions(e) -> np.ndarray:
    return e.positions if isinstance(e, ParticleEnsemble) else np.asarray(e, dtype=float)


def _jump_integrand(g: TestFunction, x, m, levy, method: str):
    """``E[g(x + gamma0 m) - g(x) - gamma0 m g'(x)]`` pointwise in ``x``."""
    if method == "auto":
        method = "closed" if (levy.constant is not None or (g.degree or 3) <= 2) else "quadrature"
    if method == "closed":
        if levy.constant is not None:
            h = levy.constant * m
            return g.g(x + h) - g.g(x) - h * g.dg(x)
        if g.degree is not None and g.degree <= 2:
            return 0.5 * levy.second_moment_gamma0 * m * m * g.d2g(x)
        raise ValueError("no closed form for this test function and jump law")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    gam, w = levy.gamma0_nodes()
    xx = x[..., None]
    mm = np.asarray(m)[..., None] if np.ndim(m) else m
    h = gam * mm
    vals = g.g(xx + h) - g.g(xx) - h * g.dg(xx)
    return vals @ w


def A0_pointwise(g: TestFunction, x, m, p, method: str = "auto") -> np.ndarray:
    """``A0 g`` evaluated at each position in ``x`` for conditional mean ``m``."""
    p = unwrap(p)
    x = np.asarray(x, dtype=float)
    out = p.alpha0 * m * g.dg(x) + 0.5 * (p.sigma1 ** 2 + p.sigma2 ** 2) * m * m * g.d2g(x)
    if p.levy.rate > 0:
        out = out + p.levy.rate * _jump_integrand(g, x, m, p.levy, method)
    return out


def A1_pointwise(g: TestFunction, x, m, p) -> np.ndarray:
    return unwrap(p).sigma1 * m * g.dg(np.asarray(x, dtype=float))


def _avg(v: np.ndarray) -> float:
    return kernels.mean(np.ascontiguousarray(v, dtype=float))


def apply_A0(g: TestFunction, e, p, method: str = "auto") -> float:
    """``<mu, A0 g>`` for the empirical measure of ``e``."""
    x = _positions(e)
    return _avg(A0_pointwise(g, x, _avg(x), p, method))


def apply_A1(g: TestFunction, e, p) -> float:
    """``<mu, A1 g>`` for the empirical measure of ``e``."""
    x = _positions(e)
    return _avg(A1_pointwise(g, x, _avg(x), p))


@dataclass(frozen=True)
class ResidualStats:
    test_function: str
    n_paths: int
    n_steps: int
    dt: float
    mean: float
    stderr: float
    max_abs: float

    @classmethod
    def from_residuals(cls, name: str, residuals: list[np.ndarray], dt: float) -> "ResidualStats":
        r = np.concatenate([np.asarray(a, dtype=float) for a in residuals]) if residuals else np.empty(0)
        n = r.size
        if n == 0:
            return cls(name, len(residuals), 0, dt, math.nan, math.nan, math.nan)
        se = float(np.std(r, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        n_steps = max(a.size for a in residuals)
        return cls(name, len(residuals), int(n_steps), dt, float(np.mean(r)), se,
                   float(np.max(np.abs(r))))

    def within(self, k: float = 3.0) -> bool:
        """``|mean| <= k * stderr`` (exact zero residuals count as within)."""
        if self.max_abs == 0:
            return True
        return abs(self.mean) <= k * self.stderr

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def step_residuals(trajectory, b1_increments, g: TestFunction, p, dt: float | None = None,
                   method: str = "auto") -> np.ndarray:
    """Residuals ``r_k`` along one path.

    ``trajectory`` is an iterable of ensembles (streamed, step sizes from their
    times unless ``dt`` is given) or an array of shape ``(K+1, N)``.
    """
    p = unwrap(p)
    b1 = np.asarray(b1_increments, dtype=float)
    if isinstance(trajectory, np.ndarray):
        X = trajectory.reshape(-1, 1) if trajectory.ndim == 1 else trajectory
        if X.shape[0] - 1 != b1.size:
            raise GridMismatch(f"{X.shape[0]} grid points but {b1.size} increments")
        if dt is None:
            raise ValueError("dt is required for array trajectories")
        m = X.mean(axis=1, keepdims=True)
        Xk = X[:-1]
        mk = m[:-1]
        G = g.g(X).mean(axis=1)
        a0 = A0_pointwise(g, Xk, mk, p, method).mean(axis=1)
        a1 = A1_pointwise(g, Xk, mk, p).mean(axis=1)
        return G[1:] - G[:-1] - a0 * dt - a1 * b1

    out = []
    prev = None
    k = 0
    for e in trajectory:
        x = _positions(e)
        gx = _avg(g.g(x))
        if prev is not None:
            if k >= b1.size:
                raise GridMismatch("more ensembles than increments + 1")
            g_prev, a0, a1, t_prev = prev
            h = dt if dt is not None else e.t - t_prev
            out.append(gx - g_prev - a0 * h - a1 * b1[k])
            k += 1
        m = _avg(x)
        t = e.t if isinstance(e, ParticleEnsemble) else 0.0
        prev = (gx, _avg(A0_pointwise(g, x, m, p, method)), _avg(A1_pointwise(g, x, m, p)), t)
    if k != b1.size:
        raise GridMismatch(f"{k + 1} grid points but {b1.size} increments")
    return np.array(out)


def weak_form_residual(trajectory, b1_increments, g: TestFunction, p, dt: float | None = None,
                       method: str = "auto") -> ResidualStats:
    """Residual statistics for one path (see ``step_residuals``)."""
    r = step_residuals(trajectory, b1_increments, g, p, dt, method)
    h = dt if dt is not None else _infer_dt(trajectory)
    return ResidualStats.from_residuals(g.name, [r], h)


def pooled_residual(paths: Iterable, g: TestFunction, p, dt: float | None = None,
                    method: str = "auto") -> ResidualStats:
    """Residual statistics pooled over ``(trajectory, b1_increments)`` pairs."""
    rs = [step_residuals(tr, b1, g, p, dt, method) for tr, b1 in paths]
    return ResidualStats.from_residuals(g.name, rs, dt if dt is not None else math.nan)


def _infer_dt(trajectory) -> float:
    if isinstance(trajectory, (list, tuple)) and len(trajectory) > 1 \
            and isinstance(trajectory[1], ParticleEnsemble):
        return trajectory[1].t - trajectory[0].t
    return math.nan


def point_mass_trajectory(m_path) -> np.ndarray:
    """Array trajectory of a single particle sitting at ``m_path``."""
    return np.asarray(m_path, dtype=float).reshape(-1, 1)
