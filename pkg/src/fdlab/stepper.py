"""Backward-Euler time integration of ``d/dt beta(u) = Delta_H u`` with zero Dirichlet data.

Each step solves ``beta(u) - dt L(u) = v_prev`` by a damped Newton iteration.
Only the Jacobian is regularised; the residual is exact, so converged iterates
solve the unregularised equation and conserve ``sum v`` up to the tolerance.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid

from ._csv import write_table
from .disc import (
    Grid,
    beta,
    beta_inverse,
    beta_prime,
    face_gradients,
    finsler_laplacian,
    laplacian_jacobian,
)
from .norms import FinslerEvaluator

__all__ = [
    "StepConfig",
    "Status",
    "RunStatus",
    "RunResult",
    "NonConvergence",
    "BumpTouchesBoundary",
    "TestBump",
    "implicit_step",
    "run",
    "monitors",
    "residual_weakform",
    "max_principle_check",
]

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"Newton did not converge after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class BumpTouchesBoundary(ValueError):
    pass


@dataclass
class StepConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    t0: float = 0.0
    newton_tol: float = 1e-10
    max_newton: int = 40
    jacobian_eps: float | None = None  # None: 1e-8 (1 + |u|_inf)
    max_halvings: int = 30
    dt_min: float | None = None  # None: 1e-10 t_end
    sup_cap: float = 1e8
    growth_cap: float | None = None  # blow-up flag on window sup growth factor
    growth_window: float | None = None  # dual radius of that window; None = whole ball
    dt_growth: float = 1.0
    dt_max: float = math.inf
    save_every: int = 1
    save_times: tuple[float, ...] = ()

    def __post_init__(self):
        if self.t_end <= self.t0:
            raise ValueError("t_end must exceed t0")
        if self.dt0 <= 0 or self.newton_tol <= 0 or self.max_newton < 1 or self.save_every < 1:
            raise ValueError("dt0, newton_tol, max_newton and save_every must be positive")
        if self.dt_growth < 1.0:
            raise ValueError("dt_growth must be >= 1")
        if self.dt_min is not None and not 0 < self.dt_min < self.dt0:
            raise ValueError("need 0 < dt_min < dt0")
        self.save_times = tuple(sorted(float(s) for s in self.save_times))

    @property
    def resolved_dt_min(self) -> float:
        return self.dt_min if self.dt_min is not None else 1e-10 * self.t_end


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    BLOWUP = "BlowUpSuspected"
    FAILED = "SolverFailed"


@dataclass(frozen=True)
class RunStatus:
    kind: Status
    time: float | None = None

    def __str__(self) -> str:
        if self.kind is Status.COMPLETED:
            return self.kind.value
        return f"{self.kind.value}({self.time:.17g})"


MONITOR_NAMES = ("mass", "sup", "grad_l1", "energy")


def monitors(grid: Grid, ev: FinslerEvaluator, q: float, u: np.ndarray) -> dict[str, float]:
    v = beta(q, u)
    g = face_gradients(grid, u)
    H = ev.eval(g)
    return {
        "mass": float(np.sum(v) * grid.node_volume),
        "sup": float(np.max(np.abs(u))) if u.size else 0.0,
        "grad_l1": float(np.sum(H) * grid.face_volume),
        "energy": float(0.5 * np.sum(H * H) * grid.face_volume),
    }


@dataclass(eq=False)
class RunResult:
    grid: Grid
    ev: FinslerEvaluator
    q: float
    t_start: float
    times: np.ndarray
    u: np.ndarray  # (n_saved, n_interior)
    v: np.ndarray
    monitors: dict[str, np.ndarray]
    status: RunStatus
    trace: dict[str, np.ndarray] = field(default_factory=dict)  # per accepted step
    steps: int = 0
    newton_iterations: int = 0

    @property
    def elapsed(self) -> np.ndarray:
        return self.times - self.t_start

    @property
    def completed(self) -> bool:
        return self.status.kind is Status.COMPLETED

    def write_monitor_csv(self, path) -> None:
        rows = ([t] + [self.monitors[k][j] for k in MONITOR_NAMES] for j, t in enumerate(self.times))
        write_table(path, ("t",) + MONITOR_NAMES, rows)


_AMG_MIN_SIZE = 4000


def _solve(J: sp.spmatrix, rhs: np.ndarray, spd: bool = False) -> np.ndarray:
    """Direct sparse solve; large SPD systems use AMG-preconditioned CG instead."""
    if spd and rhs.size >= _AMG_MIN_SIZE:
        A = J.tocsr()
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
        scale = float(np.max(np.abs(rhs))) or 1.0
        x = ml.solve(rhs / scale, tol=1e-12, maxiter=200, accel="cg") * scale
        if np.max(np.abs(A @ x - rhs)) <= 1e-9 * scale:
            return x
    return spla.spsolve(J.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")


def _newton(grid, ev, q, v_prev, dt, cfg: StepConfig, u0):
    """Damped Newton on ``beta(u) - dt L(u) - v_prev = 0``; returns ``(u, iterations)``.

    For ``q >= 2`` the unknown is ``u`` (``beta`` is C^1 there); for ``q < 2`` it is
    ``v`` with ``u = beta_inverse(v)``, which is C^1 in that range.  The Jacobian
    derivative of the nonlinearity is evaluated at ``|w| + eps``.
    """
    in_u = q >= 2.0
    tol = cfg.newton_tol * max(1.0, float(np.max(np.abs(v_prev))) if v_prev.size else 1.0)

    def split(w):
        return (w, beta(q, w)) if in_u else (beta_inverse(q, w), w)

    def residual(w):
        u, v = split(w)
        return v - dt * finsler_laplacian(grid, ev, u) - v_prev

    w = np.asarray(u0, dtype=float).copy() if in_u else beta(q, u0)
    r = residual(w)
    res = float(np.max(np.abs(r))) if r.size else 0.0
    it = 0
    while res > tol:
        if it >= cfg.max_newton:
            raise NonConvergence(it, res)
        it += 1
        wmax = float(np.max(np.abs(w)))
        eps = cfg.jacobian_eps if cfg.jacobian_eps is not None else 1e-8 * (1.0 + wmax)
        u, _ = split(w)
        JL = laplacian_jacobian(grid, ev, u, eps=1e-8)
        if in_u:
            J = sp.diags(beta_prime(q, w, eps)) - dt * JL
        else:
            J = sp.identity(w.size, format="csr") - dt * (JL @ sp.diags(beta_prime(1.0 + 1.0 / (q - 1.0), w, eps)))
        dw = _solve(J, -r, spd=in_u)
        if not np.all(np.isfinite(dw)):
            raise NonConvergence(it, res)
        lam = 1.0
        for _ in range(31):
            trial = w + lam * dw
            r_new = residual(trial)
            res_new = float(np.max(np.abs(r_new)))
            if res_new < res:
                break
            lam *= 0.5
        else:
            raise NonConvergence(it, res)
        w, r, res = trial, r_new, res_new
    return split(w)[0], it


def implicit_step(
    grid: Grid,
    ev: FinslerEvaluator,
    q: float,
    v_prev,
    dt: float,
    cfg: StepConfig,
    u_guess: np.ndarray | None = None,
) -> np.ndarray:
    """One backward-Euler step; returns ``v_next``.

    ``u_next = beta_inverse(v_next)`` satisfies ``v_next - dt L(u_next) = v_prev``
    with residual sup-norm at most ``newton_tol * max(1, |v_prev|_inf)``.
    """
    v_prev = grid.as_interior(v_prev)
    u0 = beta_inverse(q, v_prev) if u_guess is None else u_guess
    u, _ = _newton(grid, ev, q, v_prev, dt, cfg, np.asarray(u0, dtype=float))
    return beta(q, u)


Observer = Callable[[Grid, np.ndarray], float]


def run(
    grid: Grid,
    ev: FinslerEvaluator,
    q: float,
    v_init,
    cfg: StepConfig,
    observers: Mapping[str, Observer] | None = None,
) -> RunResult:
    """March from ``cfg.t0`` to ``cfg.t_end``.

    A failed Newton solve halves the step and retries.  The run stops with
    ``BlowUpSuspected`` when the sup-norm exceeds ``sup_cap``, when the window
    sup grows past ``growth_cap`` times its initial value, or when the step
    falls below ``dt_min``; ``SolverFailed`` when more than ``max_halvings``
    consecutive halvings are needed or values become non-finite.
    ``observers`` are evaluated on ``u`` after every accepted step and stored
    in ``trace``.
    """
    observers = dict(observers or {})
    v = grid.as_interior(v_init).astype(float).copy()
    u = beta_inverse(q, v)
    t = float(cfg.t0)
    window = None if cfg.growth_window is None else grid.radius < cfg.growth_window

    def window_sup(w):
        sel = w if window is None else w[window]
        return float(np.max(np.abs(sel))) if sel.size else 0.0

    sup0 = window_sup(u)
    save_t, save_u, save_v = [], [], []
    mon = {k: [] for k in MONITOR_NAMES}
    trace = {k: [] for k in ("t", "dt", *MONITOR_NAMES, *observers)}

    def record_trace(m):
        trace["t"].append(t)
        trace["dt"].append(dt_used)
        for k in MONITOR_NAMES:
            trace[k].append(m[k])
        for k, fn in observers.items():
            trace[k].append(float(fn(grid, u)))

    def save(m):
        save_t.append(t)
        save_u.append(u.copy())
        save_v.append(v.copy())
        for k in MONITOR_NAMES:
            mon[k].append(m[k])

    dt_used = 0.0
    m = monitors(grid, ev, q, u)
    save(m)
    record_trace(m)

    pending = [s for s in cfg.save_times if cfg.t0 < s < cfg.t_end]
    dt = cfg.dt0
    steps = 0
    newton_total = 0
    status = RunStatus(Status.COMPLETED)
    halvings = 0
    t_tol = 1e-12 * max(1.0, abs(cfg.t_end))
    while cfg.t_end - t > t_tol:
        target = pending[0] if pending else cfg.t_end
        dt_try = min(dt, target - t)
        landing = dt_try >= target - t - t_tol
        try:
            u_new, it = _newton(grid, ev, q, v, dt_try, cfg, u)
            if not np.all(np.isfinite(u_new)):
                raise NonConvergence(it, math.inf)
        except NonConvergence as exc:
            halvings += 1
            dt = dt_try / 2.0
            log.debug("t=%g: %s; halving dt to %g", t, exc, dt)
            if halvings > cfg.max_halvings:
                status = RunStatus(Status.FAILED, t)
                break
            if dt < cfg.resolved_dt_min:
                status = RunStatus(Status.BLOWUP, t)
                break
            continue
        halvings = 0
        newton_total += it
        steps += 1
        u = u_new
        v = beta(q, u)
        t = target if landing else t + dt_try
        dt_used = dt_try
        if landing and pending:
            pending.pop(0)
        if not landing:
            dt = min(dt_try * cfg.dt_growth, cfg.dt_max)
        else:
            dt = min(max(dt, dt_try) * cfg.dt_growth, cfg.dt_max)
        m = monitors(grid, ev, q, u)
        record_trace(m)
        at_end = cfg.t_end - t <= t_tol
        blew = m["sup"] > cfg.sup_cap or (
            cfg.growth_cap is not None and sup0 > 0 and window_sup(u) > cfg.growth_cap * sup0
        )
        if cfg.save_times:
            want = (landing and target != cfg.t_end) or at_end
        else:
            want = steps % cfg.save_every == 0 or at_end
        if want or blew:
            save(m)
        if blew:
            status = RunStatus(Status.BLOWUP, t)
            break

    return RunResult(
        grid=grid,
        ev=ev,
        q=q,
        t_start=float(cfg.t0),
        times=np.asarray(save_t),
        u=np.asarray(save_u),
        v=np.asarray(save_v),
        monitors={k: np.asarray(a) for k, a in mon.items()},
        status=status,
        trace={k: np.asarray(a) for k, a in trace.items()},
        steps=steps,
        newton_iterations=newton_total,
    )


# -- weak-form residual ------------------------------------------------------------


@dataclass(frozen=True)
class TestBump:
    """``psi(x, tau) = cos^2(pi |x - c| / (2 rho)) * (1 - tau / (2 T))^2`` on ``|x - c| < rho``.

    ``tau`` is time elapsed since the run start and ``T`` the horizon passed
    to :meth:`time_factor`.
    """

    __test__ = False  # not a pytest class

    center: tuple[float, ...]
    radius: float

    def space(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return np.where(r < self.radius, np.cos(0.5 * np.pi * r / self.radius) ** 2, 0.0)

    def space_grad(self, x: np.ndarray) -> np.ndarray:
        d = x - np.asarray(self.center)
        r = np.linalg.norm(d, axis=-1)
        inside = (r < self.radius) & (r > 0)
        k = 0.5 * np.pi / self.radius
        # d/dr cos^2(k r) = -k sin(2 k r)
        coef = np.where(inside, -k * np.sin(2 * k * r) / np.where(r > 0, r, 1.0), 0.0)
        return coef[:, None] * d

    @staticmethod
    def time_factor(tau, T: float):
        return (1.0 - np.asarray(tau) / (2.0 * T)) ** 2

    @staticmethod
    def time_derivative(tau, T: float):
        return -(1.0 - np.asarray(tau) / (2.0 * T)) / T


def _check_bump(bump: TestBump, grid: Grid, ev: FinslerEvaluator):
    c = np.asarray(bump.center, dtype=float)
    if c.shape != (grid.N,):
        raise BumpTouchesBoundary(f"bump center must have {grid.N} coordinates")
    lo, _ = ev.equivalence_constants()
    # H0(x) <= |x| / c_lo bounds the dual radius of the bump support
    reach = float(ev.dual_eval(c)) + (bump.radius + 2 * grid.h) / lo
    if reach >= grid.R:
        raise BumpTouchesBoundary(f"bump support reaches dual radius {reach:.4g} >= R={grid.R}")


def residual_weakform(result: RunResult, bump: TestBump, grid: Grid, ev: FinslerEvaluator, q: float) -> float:
    """Sum of the four terms of the weak formulation over the saved time series.

    Trapezoid rule in time over the saved times, nodal (midpoint) sums in space
    for the ``v`` terms and face sums for the flux term.
    """
    _check_bump(bump, grid, ev)
    tau = result.elapsed
    T = float(tau[-1])
    if T <= 0:
        raise ValueError("need at least two saved times")
    phi = bump.space(grid.coords)
    dphi = bump.space_grad(grid.face_centers)
    vol, fvol = grid.node_volume, grid.face_volume
    v = result.v
    u = result.u
    pair_v = (v @ phi) * vol  # int v phi dx at each saved time
    flux_term = np.array([np.sum(ev.flux(face_gradients(grid, uj)) * dphi) * fvol for uj in u])
    eta = bump.time_factor(tau, T)
    deta = bump.time_derivative(tau, T)
    a = -trapezoid(pair_v * deta, tau)
    b = pair_v[-1] * eta[-1]
    c = -pair_v[0] * eta[0]
    d = trapezoid(flux_term * eta, tau)
    return float(a + b + c + d)


def max_principle_check(result: RunResult, M: float) -> bool:
    """``sup_t |v(t)|_inf <= M (1 + 1e-8)``."""
    if result.v.size == 0:
        return True
    return float(np.max(np.abs(result.v))) <= M * (1.0 + 1e-8)
