"""Closed-form optimal dividend policy under fixed and proportional costs.

In the reduced variable ``u = E[X | F^(1)]`` the value is ``exp(-rho s) psi(u)``
with

    psi(u) = C1 u**gamma1            for 0 < u < u_bar
    psi(u) = (u - c) / (1 + lambda)  for u >= u_bar,

where ``gamma1 > 1`` is the positive root of
``F(g) = -rho + alpha0 g + sigma1**2 g (g - 1) / 2`` and smooth fit at
``u_bar`` gives ``u_bar = gamma1 c / (gamma1 - 1)`` and
``C1 = (u_bar - c) / (1 + lambda) * u_bar**(-gamma1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadBarrier, BoundaryCase, NoRoot
from .impulse import ThresholdPolicy
from .model import ModelParams, unwrap

SMOOTH_FIT_TOL = 1e-12


class ValueCase(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"


def check_case_split(p) -> ValueCase:
    """``INFINITE`` if ``alpha0 > rho``, ``FINITE`` if ``alpha0 < rho``."""
    p = unwrap(p)
    if p.alpha0 > p.rho:
        return ValueCase.INFINITE
    if p.alpha0 < p.rho:
        return ValueCase.FINITE
    raise BoundaryCase(f"alpha0 == rho == {p.rho!r}: not covered by either case")


def characteristic(gamma, p) -> float:
    """``F(gamma) = -rho + alpha0 gamma + sigma1^2 gamma (gamma - 1) / 2``."""
    p = unwrap(p)
    return -p.rho + p.alpha0 * gamma + 0.5 * p.sigma1 ** 2 * gamma * (gamma - 1.0)


def characteristic_roots(p) -> tuple[float, float]:
    """Both roots ``(gamma1, gamma2)`` of ``F``, larger first.

    Uses the cancellation-free form of the quadratic formula.
    """
    p = unwrap(p)
    if p.sigma1 == 0:
        raise NoRoot("sigma1 must be nonzero")
    a = 0.5 * p.sigma1 ** 2
    b = p.alpha0 - a
    c = -p.rho
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise NoRoot("negative discriminant")
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0 else 1.0))
    r1, r2 = q / a, c / q
    return max(r1, r2), min(r1, r2)


def solve_gamma1(p) -> float:
    p = unwrap(p)
    if not p.alpha0 < p.rho:
        raise NoRoot("gamma1 > 1 requires alpha0 < rho")
    g1, _ = characteristic_roots(p)
    if not g1 > 1:
        raise NoRoot(f"positive root {g1!r} is not > 1")
    return g1


def thresholds(p, gamma1: float) -> tuple[float, float]:
    """Free boundary ``u_bar`` and coefficient ``C1`` from the smooth-fit equations."""
    p = unwrap(p)
    if not gamma1 > 1:
        raise ValueError("gamma1 must be > 1")
    c, lam = p.c_fixed, p.lambda_prop
    u_bar = gamma1 * c / (gamma1 - 1.0)
    C1 = (u_bar - c) / (1.0 + lam) * u_bar ** (-gamma1)
    value_gap = C1 * u_bar ** gamma1 - (u_bar - c) / (1.0 + lam)
    slope_gap = C1 * gamma1 * u_bar ** (gamma1 - 1.0) - 1.0 / (1.0 + lam)
    scale = max(1.0, u_bar / (1.0 + lam))
    if abs(value_gap) > SMOOTH_FIT_TOL * scale or abs(slope_gap) > SMOOTH_FIT_TOL * scale:
        raise ArithmeticError(f"smooth fit not satisfied: {value_gap!r}, {slope_gap!r}")
    return u_bar, C1


@dataclass(frozen=True)
class DividendSolution:
    gamma1: float
    u_bar: float
    C1: float
    params: ModelParams
    gamma2: float = float("nan")
    # bounded near zero forces the coefficient of u**gamma2 to vanish
    C2: float = 0.0

    def psi(self, u):
        """Reduced value ``psi(u)`` (vectorised, ``psi(0) = 0``)."""
        c, lam = self.params.c_fixed, self.params.lambda_prop
        u = np.asarray(u, dtype=float)
        low = self.C1 * np.power(np.maximum(u, 0.0), self.gamma1)
        out = np.where(u < self.u_bar, low, (u - c) / (1.0 + lam))
        return out if out.ndim else float(out)

    def dpsi(self, u):
        lam = self.params.lambda_prop
        u = np.asarray(u, dtype=float)
        low = self.C1 * self.gamma1 * np.power(np.maximum(u, 0.0), self.gamma1 - 1.0)
        out = np.where(u < self.u_bar, low, 1.0 / (1.0 + lam))
        return out if out.ndim else float(out)

    def d2psi(self, u):
        u = np.asarray(u, dtype=float)
        g = self.gamma1
        low = self.C1 * g * (g - 1.0) * np.power(np.maximum(u, 0.0), g - 2.0)
        out = np.where(u < self.u_bar, low, 0.0)
        return out if out.ndim else float(out)


def solve(p) -> DividendSolution:
    """Solve the finite case; raises ``InfiniteValue``/``BoundaryCase`` otherwise."""
    from .errors import InfiniteValue

    p = unwrap(p)
    if check_case_split(p) is ValueCase.INFINITE:
        raise InfiniteValue("value is +infinity (alpha0 > rho)")
    g1, g2 = characteristic_roots(p)
    g1 = solve_gamma1(p)
    u_bar, C1 = thresholds(p, g1)
    return DividendSolution(g1, u_bar, C1, p, gamma2=g2)


def value_phi(s: float, u, sol: DividendSolution):
    """``Phi(s, u) = exp(-rho s) psi(u)``."""
    if np.any(np.asarray(u) <= 0):
        raise ValueError("u must be > 0")
    return math.exp(-sol.params.rho * s) * sol.psi(u)


def optimal_policy(sol: DividendSolution) -> ThresholdPolicy:
    return ThresholdPolicy(sol.u_bar, sol.params.c_fixed, sol.params.lambda_prop)


def hitting_laplace_oracle(x: float, b: float, sol: DividendSolution) -> float:
    """``E[exp(-rho tau_b)] = (x/b)**gamma1`` for the conditional-mean GBM started at ``x``."""
    if x > b:
        raise BadBarrier(f"start {x!r} above barrier {b!r}")
    if x <= 0:
        return 0.0
    return (x / b) ** sol.gamma1


def phi_table(sol: DividendSolution, u_max: float | None = None, n: int = 200):
    """Rows ``(u, phi, branch)`` on a uniform grid over ``(0, u_max]``."""
    u_max = 2.0 * sol.u_bar if u_max is None else u_max
    u = u_max * np.arange(1, n + 1) / n
    phi = sol.psi(u)
    return [(float(ui), float(vi), "continuation" if ui < sol.u_bar else "intervention")
            for ui, vi in zip(u, phi)]
