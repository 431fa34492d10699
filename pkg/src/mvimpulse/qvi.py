"""Quasi-variational inequality checks for the reduced one-dimensional problem.

A candidate value ``exp(-rho s) psi(u)`` in the conditional mean ``u`` is checked
on a grid for

* ``psi - M psi >= 0`` everywhere and ``= 0`` on the intervention region,
* ``G0 psi = 0`` on the continuation region ``(0, u_bar)``,
* ``G0 psi + jump term <= 0`` on the intervention region,

plus the smooth-fit gaps at ``u_bar``.  ``M`` is the intervention operator
``M psi(u) = sup_{0 <= zeta <= (u-c)/(1+lambda)} psi(u - c - (1+lambda) zeta) + zeta``
and ``G0 psi = -rho psi + alpha0 u psi' + sigma1^2 u^2 psi'' / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dividend import DividendSolution
from .errors import NoAdmissibleImpulse
from .io import dumps
from .model import levy_mass, unwrap

ZETA_GRID = 1024
FD_STEP = 1e-4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ReducedFunction:
    """``psi(u)`` on ``u > 0`` with optional analytic derivatives.

    Without ``dpsi``/``d2psi`` central differences with step ``h`` are used
    (the step shrinks to ``u/2`` near the origin to stay inside the domain).
    """

    psi: Callable
    dpsi: Callable | None = None
    d2psi: Callable | None = None
    h: float = FD_STEP

    @property
    def analytic(self) -> bool:
        return self.dpsi is not None and self.d2psi is not None

    def __call__(self, u):
        return self.psi(u)

    def _step(self, u):
        return np.minimum(self.h, 0.5 * np.abs(u))

    def d1(self, u):
        if self.dpsi is not None:
            return self.dpsi(u)
        h = self._step(u)
        return (self.psi(u + h) - self.psi(u - h)) / (2.0 * h)

    def d2(self, u):
        if self.d2psi is not None:
            return self.d2psi(u)
        h = self._step(u)
        return (self.psi(u + h) - 2.0 * self.psi(u) + self.psi(u - h)) / (h * h)

    def without_derivatives(self, h: float = FD_STEP) -> "ReducedFunction":
        return ReducedFunction(self.psi, None, None, h)


def dividend_psi(sol: DividendSolution, c1_scale: float = 1.0) -> ReducedFunction:
    """Closed-form ``psi`` with the continuation coefficient scaled by ``c1_scale``."""
    if c1_scale == 1.0:
        return ReducedFunction(sol.psi, sol.dpsi, sol.d2psi)
    p = sol.params
    C1, g, ub = sol.C1 * c1_scale, sol.gamma1, sol.u_bar
    c, lam = p.c_fixed, p.lambda_prop

    def psi(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < ub, C1 * np.power(np.maximum(u, 0.0), g), (u - c) / (1.0 + lam))
        return out if out.ndim else float(out)

    def dpsi(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < ub, C1 * g * np.power(np.maximum(u, 0.0), g - 1.0), 1.0 / (1.0 + lam))
        return out if out.ndim else float(out)

    def d2psi(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < ub, C1 * g * (g - 1.0) * np.power(np.maximum(u, 0.0), g - 2.0), 0.0)
        return out if out.ndim else float(out)

    return ReducedFunction(psi, dpsi, d2psi)


def _golden_max(f, a: float, b: float, iters: int = 80) -> tuple[float, float]:
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a) + abs(b)):
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def intervention_operator_M(psi, u: float, p, grid: int = ZETA_GRID) -> tuple[float, float]:
    """``(M psi(u), argmax zeta)`` by a uniform zeta grid plus golden-section refinement."""
    p = unwrap(p)
    c, lam = p.c_fixed, p.lambda_prop
    if not u > c:
        raise NoAdmissibleImpulse(f"no admissible impulse at u={u!r} <= c={c!r}")
    zmax = (u - c) / (1.0 + lam)
    zeta = np.linspace(0.0, zmax, grid)
    h = np.asarray(psi(u - c - (1.0 + lam) * zeta), dtype=float) + zeta
    j = int(np.argmax(h))
    best_z, best_h = float(zeta[j]), float(h[j])
    lo, hi = zeta[max(j - 1, 0)], zeta[min(j + 1, grid - 1)]
    if hi > lo:
        def obj(z):
            return float(psi(u - c - (1.0 + lam) * z)) + z

        z_ref, h_ref = _golden_max(obj, float(lo), float(hi))
        if h_ref > best_h:
            best_z, best_h = z_ref, h_ref
    return best_h, best_z


def generator_G0(psi, u, p):
    """``-rho psi + alpha0 u psi' + sigma1^2 u^2 psi'' / 2`` (no jump term)."""
    p = unwrap(p)
    if not isinstance(psi, ReducedFunction):
        psi = ReducedFunction(psi)
    u = np.asarray(u, dtype=float)
    out = -p.rho * psi(u) + p.alpha0 * u * psi.d1(u) + 0.5 * p.sigma1 ** 2 * u * u * psi.d2(u)
    return out if np.ndim(out) else float(out)


def jump_term(psi, u, p):
    """``rate * E[psi(u(1+gamma0)) - psi(u) - gamma0 u psi'(u)]`` over the jump marks.

    Post-jump means ``<= 0`` are absorbed with value 0.
    """
    p = unwrap(p)
    levy = p.levy
    u = np.asarray(u, dtype=float)
    if levy.rate == 0:
        return np.zeros_like(u) if u.ndim else 0.0
    if not isinstance(psi, ReducedFunction):
        psi = ReducedFunction(psi)
    if levy.constant is not None:
        g, w = np.array([levy.constant]), np.array([1.0])
    else:
        g, w = levy.gamma0_nodes()
    uu = np.atleast_1d(u)[:, None]
    v = uu * (1.0 + g[None, :])
    pv = np.where(v > 0, psi(np.maximum(v, np.finfo(float).tiny)), 0.0)
    integrand = pv - np.asarray(psi(uu)) - g[None, :] * uu * np.asarray(psi.d1(uu))
    out = levy.rate * (integrand @ w)
    return out if u.ndim else float(out[0])


def condition_vi_bound(p) -> float:
    """``(rho + ||nu||) / (alpha0 + ||nu||)``, ``+inf`` when the denominator is ``<= 0``."""
    p = unwrap(p)
    n = levy_mass(p.levy)
    den = p.alpha0 + n
    return math.inf if den <= 0 else (p.rho + n) / den


def check_condition_vi(solution: DividendSolution, p=None) -> tuple[bool, float]:
    """``(gamma1 <= bound, bound - gamma1)``."""
    p = unwrap(p if p is not None else solution.params)
    bound = condition_vi_bound(p)
    return solution.gamma1 <= bound, bound - solution.gamma1


@dataclass(frozen=True)
class GridSpec:
    n: int = 2000
    u_max: float | None = None
    zeta_grid: int = ZETA_GRID
    tol_ii: float = 1e-10
    tol_x: float = 1e-6
    tol_vi: float = 1e-8
    tol_smooth: float = 1e-8
    tol_smooth_fd: float = 1e-5

    def points(self, u_bar: float) -> np.ndarray:
        u_max = 2.0 * u_bar if self.u_max is None else self.u_max
        if not u_max > u_bar:
            raise ValueError("u_max must exceed u_bar")
        # fraction first so that k/n = 1/2 lands exactly on u_bar when u_max = 2 u_bar
        return u_max * (np.arange(1, self.n + 1) / self.n)


@dataclass
class QviReport:
    grid: np.ndarray
    u_bar: float
    cond_ii: np.ndarray
    cond_x: np.ndarray
    cond_vi: np.ndarray
    smooth_fit: tuple[float, float]
    flags: dict = field(default_factory=dict)
    vi_margin: float = math.nan

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def worst(self) -> dict:
        below = self.grid < self.u_bar
        above = ~below
        strict = self.grid > self.u_bar
        ii_fin = np.where(np.isfinite(self.cond_ii), self.cond_ii, np.nan)
        return {
            "min_psi_minus_Mpsi": float(np.nanmin(ii_fin)) if np.any(np.isfinite(ii_fin)) else math.inf,
            "max_psi_minus_Mpsi_intervention": float(np.max(self.cond_ii[above])) if above.any() else 0.0,
            "max_abs_G0_continuation": float(np.max(np.abs(self.cond_x[below]))) if below.any() else 0.0,
            "max_G0_intervention": float(np.max(self.cond_vi[strict])) if strict.any() else -math.inf,
        }

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "flags": dict(self.flags),
            "u_bar": self.u_bar,
            "n_grid": int(self.grid.size),
            "smooth_fit": {"value_gap": self.smooth_fit[0], "derivative_gap": self.smooth_fit[1]},
            "condition_vi_margin": self.vi_margin,
            **self.worst(),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "psi_minus_Mpsi", "G0_continuation", "G0_intervention"])
            for row in zip(self.grid, self.cond_ii, self.cond_x, self.cond_vi):
                w.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    if math.isnan(v):
        return ""
    return f"{v:.12g}"


def _smooth_fit_gaps(psi: ReducedFunction, u_bar: float) -> tuple[float, float]:
    left = np.nextafter(u_bar, 0.0)
    value_gap = float(psi(left)) - float(psi(u_bar))
    if psi.dpsi is not None:
        return value_gap, float(psi.dpsi(left)) - float(psi.dpsi(u_bar))
    h = psi.h
    f = lambda x: float(psi(x))  # noqa: E731
    d_left = (3.0 * f(left) - 4.0 * f(left - h) + f(left - 2.0 * h)) / (2.0 * h)
    d_right = (-3.0 * f(u_bar) + 4.0 * f(u_bar + h) - f(u_bar + 2.0 * h)) / (2.0 * h)
    return value_gap, d_left - d_right


def verify(psi: ReducedFunction, solution: DividendSolution, p=None,
           grid_spec: GridSpec | None = None) -> QviReport:
    """Evaluate the QVI conditions of ``psi`` on a grid over ``(0, u_max]`` with ``f = 0``.

    Flags: ``ii`` (``psi >= M psi``; equality on ``[u_bar, u_max]``),
    ``continuation_region`` (``{psi > M psi}`` matches ``(0, u_bar)``),
    ``x`` (``|G0 psi| <= tol`` on ``(0, u_bar)``), ``vi_pointwise``
    (``G0 psi + jump term <= tol`` on ``(u_bar, u_max]``), ``vi_bound`` (closed
    criterion) and ``smooth_fit``.
    """
    p = unwrap(p if p is not None else solution.params)
    gs = grid_spec or GridSpec()
    if not isinstance(psi, ReducedFunction):
        psi = ReducedFunction(psi)
    u_bar, c = solution.u_bar, p.c_fixed
    u = gs.points(u_bar)

    ii = np.full(u.shape, math.inf)
    for i, ui in enumerate(u):
        if ui > c:
            m_val, _ = intervention_operator_M(psi, float(ui), p, gs.zeta_grid)
            ii[i] = float(psi(ui)) - m_val

    below = u < u_bar
    above = ~below
    strictly_above = u > u_bar
    g0 = np.asarray(generator_G0(psi, u, p), dtype=float)
    cond_x = np.where(below, g0, np.nan)
    vi_vals = g0 + np.asarray(jump_term(psi, u, p), dtype=float)
    cond_vi = np.where(strictly_above, vi_vals, np.nan)
    sf = _smooth_fit_gaps(psi, u_bar)
    tol_sf = gs.tol_smooth if psi.dpsi is not None else gs.tol_smooth_fd
    vi_ok, margin = check_condition_vi(solution, p)

    flags = {
        "ii": bool(np.all(ii >= -gs.tol_ii) and np.all(ii[above] <= gs.tol_ii)),
        "continuation_region": bool(np.all(ii[below] > gs.tol_ii)),
        "x": bool(np.all(np.abs(g0[below]) <= gs.tol_x)),
        "vi_pointwise": bool(np.all(vi_vals[strictly_above] <= gs.tol_vi)),
        "vi_bound": bool(vi_ok),
        "smooth_fit": bool(abs(sf[0]) <= tol_sf and abs(sf[1]) <= tol_sf),
    }
    return QviReport(u, u_bar, ii, cond_x, cond_vi, sf, flags, margin)
