"""Closed-form objects: the Finsler ZKB profile, structural exponents, ODE majorants
and an integral comparison oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .norms import FinslerEvaluator

__all__ = [
    "OutOfRegime",
    "NonpositiveTime",
    "StepTooLarge",
    "kappa",
    "hypo_q_ok",
    "growth_exponent_d",
    "ZkbParams",
    "zkb_params",
    "zkb_eval",
    "zkb_support_radius",
    "zkb_mass",
    "MajorantParams",
    "majorant_phi",
    "majorant_psi",
    "majorant_phi_blowup",
    "majorant_psi_blowup",
    "ComparisonResult",
    "ode_compare",
]


class OutOfRegime(ValueError):
    """Parameter outside the porous-medium / fast-diffusion regime an operation requires."""


class NonpositiveTime(ValueError):
    pass


class StepTooLarge(ArithmeticError):
    pass


def kappa(p: float, q: float, N: int) -> float:
    """``kappa_p = 2p - N (q-2)/(q-1)``."""
    if q <= 1 or N < 1:
        raise OutOfRegime(f"kappa needs q > 1 and N >= 1, got q={q}, N={N}")
    return 2.0 * p - N * (q - 2.0) / (q - 1.0)


def hypo_q_ok(q: float, N: int) -> bool:
    """Whether ``q < 2(N-1)/(N-2)_+`` (always true for N <= 2)."""
    if N <= 2:
        return True
    return q < 2.0 * (N - 1) / (N - 2)


def growth_exponent_d(q: float) -> float:
    """``d = (2-q)/(q-1)``, positive in the porous-medium range."""
    return (2.0 - q) / (q - 1.0)


@dataclass(frozen=True)
class ZkbParams:
    q: float
    N: int
    C: float
    alpha: float
    beta: float
    k: float
    d: float

    @property
    def time_exponent(self) -> float:
        """Decay exponent of ``sup u``: ``alpha / (q-1)``."""
        return self.alpha / (self.q - 1.0)


def zkb_params(q: float, N: int, C: float) -> ZkbParams:
    if not 1.0 < q < 2.0:
        raise OutOfRegime(f"ZKB profile exists only for 1 < q < 2, got q={q}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    d = growth_exponent_d(q)
    alpha = N / (2.0 + N * d)
    return ZkbParams(q=q, N=N, C=C, alpha=alpha, beta=alpha / N, k=alpha * (2.0 - q) / (2.0 * N), d=d)


def zkb_eval(params: ZkbParams, ev: FinslerEvaluator, x, t: float):
    """``u(x,t) = t^{-alpha/(q-1)} (C - k H0(x)^2 t^{-2 beta})_+^{1/(2-q)}``."""
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    if ev.dim != params.N:
        raise ValueError(f"evaluator dimension {ev.dim} != N={params.N}")
    r = ev.dual_eval(x)
    return zkb_profile(params, r, t)


def zkb_profile(params: ZkbParams, r, t: float):
    """Radial profile ``U(r, t)`` in the dual-norm radius ``r``."""
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    bracket = np.maximum(params.C - params.k * np.asarray(r, dtype=float) ** 2 * t ** (-2.0 * params.beta), 0.0)
    return t ** (-params.time_exponent) * bracket ** (1.0 / (2.0 - params.q))


def zkb_support_radius(params: ZkbParams, t: float) -> float:
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    return math.sqrt(params.C / params.k) * t**params.beta


def zkb_mass(params: ZkbParams, ev: FinslerEvaluator, t: float, quadrature_h: float) -> float:
    """Midpoint quadrature of ``u^{q-1}`` over the support ball."""
    if quadrature_h <= 0:
        raise ValueError("quadrature_h must be positive")
    rho = zkb_support_radius(params, t)
    axes = []
    for ext in ev.axis_extent():
        half = rho * ext
        n = max(1, int(math.ceil(2 * half / quadrature_h)))
        step = 2 * half / n
        axes.append(-half + step * (np.arange(n) + 0.5))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    cell = np.prod([2 * rho * e / len(a) for e, a in zip(ev.axis_extent(), axes)])
    u = zkb_eval(params, ev, pts, t)
    return float(np.sum(u ** (params.q - 1.0)) * cell)


# -- ODE majorants --------------------------------------------------------------


@dataclass(frozen=True)
class MajorantParams:
    """Seed value ``a0``, forcing coefficient and exponents of a majorant ODE."""

    a0: float
    coeff: float
    d: float
    kappa: float

    def __post_init__(self):
        if self.a0 < 0 or self.coeff < 0:
            raise ValueError("a0 and coeff must be nonnegative")
        if self.d <= 0 or self.kappa <= 0:
            raise OutOfRegime("majorants need d > 0 and kappa > 0")

    @classmethod
    def from_qN(cls, a0: float, coeff: float, q: float, N: int) -> "MajorantParams":
        d = growth_exponent_d(q)
        return cls(a0=a0, coeff=coeff, d=d, kappa=2.0 + N * d)


def majorant_phi(mp: MajorantParams, t):
    """Solution of ``y' = coeff t^{2/kappa - 1} y^{1+d}``, ``y(0) = a0``.

    ``[a0^{-d} - (d kappa / 2) coeff t^{2/kappa}]_+^{-1/d}``; ``inf`` at and past
    the blow-up time (see :func:`majorant_phi_blowup`).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if mp.a0 == 0:
        return np.zeros_like(t)[()]
    bracket = mp.a0 ** (-mp.d) - 0.5 * mp.d * mp.kappa * mp.coeff * t ** (2.0 / mp.kappa)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(bracket > 0, np.maximum(bracket, 1e-300) ** (-1.0 / mp.d), math.inf)
    return out[()]


def majorant_phi_blowup(mp: MajorantParams) -> float:
    """Zero of the bracket in :func:`majorant_phi` (``inf`` without forcing)."""
    if mp.coeff == 0 or mp.a0 == 0:
        return math.inf
    return (2.0 * mp.a0 ** (-mp.d) / (mp.d * mp.kappa * mp.coeff)) ** (mp.kappa / 2.0)


def majorant_psi(mp: MajorantParams, t):
    """Solution of ``y' = coeff t^{1/kappa - 1} y^{1 + d/kappa}``, ``y(0) = a0``.

    ``[a0^{-d/kappa} - coeff d t^{1/kappa}]_+^{-kappa/d}``; ``inf`` past blow-up.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if mp.a0 == 0:
        return np.zeros_like(t)[()]
    e = mp.d / mp.kappa
    bracket = mp.a0 ** (-e) - mp.coeff * mp.d * t ** (1.0 / mp.kappa)
    with np.errstate(over="ignore"):
        out = np.where(bracket > 0, np.maximum(bracket, 1e-300) ** (-1.0 / e), math.inf)
    return out[()]


def majorant_psi_blowup(mp: MajorantParams) -> float:
    if mp.coeff == 0 or mp.a0 == 0:
        return math.inf
    return mp.a0 ** (-mp.d) / (mp.coeff * mp.d) ** mp.kappa


# -- comparison oracle ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    ok: bool
    violation_time: float | None = None
    t_reached: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def ode_compare(
    f: Callable[[float], float],
    k: Callable[[float], float],
    a_minus: float,
    a_plus: float,
    T: float,
    h: float,
) -> ComparisonResult:
    """Integrate ``phi' = k f(phi)`` from ``a_minus`` and ``a_plus`` and check ordering.

    Explicit Euler with step ``h`` (first order); the weight is sampled at
    interval midpoints so integrable singularities of ``k`` at ``t = 0`` are
    tolerated.  Test oracle, not a production integrator.
    """
    if not a_minus < a_plus:
        raise ValueError("comparison needs a_minus < a_plus")
    if h <= 0 or T <= 0:
        raise ValueError("T and h must be positive")
    lo, hi = float(a_minus), float(a_plus)
    n = int(math.ceil(T / h - 1e-12))
    t = 0.0
    for i in range(n):
        step = min(h, T - t)
        w = k(t + 0.5 * step)
        try:
            lo = lo + step * w * f(lo)
            hi = hi + step * w * f(hi)
        except OverflowError:
            raise StepTooLarge(f"Euler iterate overflowed after t={t:g}") from None
        t = (i + 1) * h if i + 1 < n else T
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise StepTooLarge(f"Euler iterate left the finite range at t={t:g}")
        if not lo < hi:
            return ComparisonResult(False, t, t)
    return ComparisonResult(True, None, t)
