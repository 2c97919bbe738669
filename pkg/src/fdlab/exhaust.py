"""Approximation of growing or measure-valued data by runs on expanding balls.

Each level ``n`` solves the Dirichlet problem on ``B_{R_n}`` from a mollified,
cut-off datum ``mu_n``.  The levels are compared on a fixed observation window
``B_{R_obs} x (t1, t2)`` that lies inside every cutoff plateau, and the
uniform local bounds and small-time integrability the limit requires are
checked on the same runs.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, ndimage

from ._csv import fmt, write_table
from ._parallel import parallel_map
from .disc import Grid, ShapeMismatch, build_grid, face_gradients
from .exact import OutOfRegime, growth_exponent_d, kappa
from .norms import FinslerEvaluator
from .stepper import RunResult, StepConfig, run

__all__ = [
    "InitialDatum",
    "DiracBump",
    "Density",
    "CriticalGrowth",
    "Custom",
    "cutoff",
    "mollify",
    "ExhaustionPlan",
    "PlanError",
    "ReportStatus",
    "ConvergenceReport",
    "A1Report",
    "A2Report",
    "BallAbsV",
    "BallGradientL1",
    "window_l1_difference",
    "run_exhaustion",
    "verify_A1",
    "verify_A2",
    "observers_for_A2",
    "loglog_slope",
]


# -- initial data --------------------------------------------------------------------


def _radial_ball_integral(ev: FinslerEvaluator, R: float, profile: Callable[[float], float]) -> float:
    """``int_{H0 < R} f(H0(x)) dx = N |B_1| int_0^R f(r) r^{N-1} dr``."""
    N = ev.dim
    val, _ = integrate.quad(lambda r: profile(r) * r ** (N - 1), 0.0, R, limit=200)
    return N * ev.ball_volume(1.0) * val


class InitialDatum:
    """Initial value of ``v = |u|^{q-2} u``."""

    def evaluate(self, coords: np.ndarray, ev: FinslerEvaluator, h: float | None = None) -> np.ndarray:
        """Sample at ``coords``; ``h`` enables lattice normalisation where relevant."""
        raise NotImplementedError

    def ball_integral(self, R: float, ev: FinslerEvaluator) -> float:
        """``int_{B_R} |datum| dx``."""
        raise NotImplementedError

    def growth_limit(self, ev: FinslerEvaluator, q: float) -> float:
        """``lim_R R^{-kappa_1/d} int_{B_R} |datum|`` (``inf`` when faster than critical)."""
        raise NotImplementedError

    def scaled(self, factor: float) -> "InitialDatum":
        raise NotImplementedError


@dataclass(frozen=True)
class DiracBump(InitialDatum):
    """``cos^2(pi H0(x - c) / (2 w))`` on ``H0(x - c) < w`` scaled to total mass ``M``.

    With a lattice spacing the bump is normalised so its node sum times ``h^N``
    is exactly ``M``; otherwise the continuous normalisation is used.
    """

    mass: float
    width: float
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"bump width must be positive, got {self.width}")

    def _shape(self, coords, ev):
        c = np.zeros(ev.dim) if self.center is None else np.asarray(self.center, dtype=float)
        r = ev.dual_eval(np.asarray(coords, dtype=float) - c)
        return np.where(r < self.width, np.cos(0.5 * np.pi * r / self.width) ** 2, 0.0)

    def _unit_integral(self, ev, R=math.inf):
        w = self.width
        return _radial_ball_integral(ev, min(R, w), lambda r: math.cos(0.5 * math.pi * r / w) ** 2)

    def evaluate(self, coords, ev, h=None):
        b = self._shape(coords, ev)
        if h is None:
            return self.mass * b / self._unit_integral(ev)
        total = float(np.sum(b)) * h**ev.dim
        if total == 0:
            raise ValueError("bump is narrower than the lattice and misses every node")
        return self.mass * b / total

    def ball_integral(self, R, ev):
        if self.center is not None and np.any(np.asarray(self.center) != 0):
            raise NotImplementedError("closed-form ball integral needs a centred bump")
        return abs(self.mass) * self._unit_integral(ev, R) / self._unit_integral(ev)

    def growth_limit(self, ev, q):
        return 0.0

    def scaled(self, factor):
        return dataclasses.replace(self, mass=self.mass * factor)


@dataclass(frozen=True)
class Density(InitialDatum):
    """``A (1 + H0(x))^gamma``."""

    gamma: float
    amplitude: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"growth exponent must be nonnegative, got {self.gamma}")

    def evaluate(self, coords, ev, h=None):
        return self.amplitude * (1.0 + ev.dual_eval(np.asarray(coords, dtype=float))) ** self.gamma

    def ball_integral(self, R, ev):
        return abs(self.amplitude) * _radial_ball_integral(ev, R, lambda r: (1.0 + r) ** self.gamma)

    def growth_limit(self, ev, q):
        d = growth_exponent_d(q)
        if d <= 0:
            raise OutOfRegime("growth limit needs the porous-medium range 1 < q < 2")
        critical = 2.0 / d
        if self.amplitude == 0 or self.gamma < critical:
            return 0.0
        if self.gamma > critical:
            return math.inf
        # int_{B_R} (1+r)^gamma ~ N |B_1| R^{gamma + N} / (gamma + N), gamma + N = kappa_1 / d
        N = ev.dim
        return abs(self.amplitude) * N * ev.ball_volume(1.0) * d / kappa(1.0, q, N)

    def scaled(self, factor):
        return dataclasses.replace(self, amplitude=self.amplitude * factor)


def CriticalGrowth(amplitude: float, q: float) -> Density:
    """Density at the critical growth ``(1 + H0)^{2/d}`` (porous-medium range only)."""
    if not 1.0 < q < 2.0:
        raise OutOfRegime(f"critical growth is defined for 1 < q < 2, got q={q}")
    return Density(gamma=2.0 / growth_exponent_d(q), amplitude=amplitude)


@dataclass(frozen=True)
class Custom(InitialDatum):
    """Arbitrary datum ``func(coords)``; ball integrals are not available in closed form."""

    func: Callable[[np.ndarray], np.ndarray]
    factor: float = 1.0

    def evaluate(self, coords, ev, h=None):
        return self.factor * np.asarray(self.func(np.asarray(coords, dtype=float)), dtype=float)

    def ball_integral(self, R, ev):
        raise NotImplementedError("sample a Custom datum on a grid instead")

    def growth_limit(self, ev, q):
        raise NotImplementedError("growth of a Custom datum is unknown")

    def scaled(self, factor):
        return dataclasses.replace(self, factor=self.factor * factor)


# -- mollification -------------------------------------------------------------------


def cutoff(r, R: float):
    """1 on ``r <= R/2``, ``cos^2(pi (r - R/2) / R)`` up to ``R``, 0 beyond."""
    r = np.asarray(r, dtype=float)
    ramp = np.cos(np.pi * (r - 0.5 * R) / R) ** 2
    return np.where(r <= 0.5 * R, 1.0, np.where(r < R, ramp, 0.0))


def _gaussian_weights(delta: float, h: float) -> np.ndarray:
    p = int(math.ceil(4.0 * delta / h))
    x = h * np.arange(-p, p + 1)
    w = np.exp(-0.5 * (x / delta) ** 2)
    return w / w.sum()


def mollify(datum: InitialDatum, ev: FinslerEvaluator, grid: Grid, delta: float) -> np.ndarray:
    """Cut-off, Gaussian-smoothed datum on the interior nodes of ``grid``.

    The datum is sampled on the grid lattice extended by the kernel radius
    ``4 delta``, smoothed by a separable discrete Gaussian of width ``delta``
    (``delta = 0`` skips smoothing) and multiplied by :func:`cutoff` at radius
    ``grid.R``.
    """
    if delta < 0:
        raise ValueError(f"mollification width must be nonnegative, got {delta}")
    h, N = grid.h, grid.N
    if delta == 0:
        smooth = datum.evaluate(grid.coords, ev, h=h)
    else:
        weights = _gaussian_weights(delta, h)
        pad = (weights.size - 1) // 2
        n = grid.axes[0].size + 2 * pad
        ax = -grid.L - pad * h + h * np.arange(n)
        mesh = np.stack(np.meshgrid(*([ax] * N), indexing="ij"), axis=-1)
        field = datum.evaluate(mesh.reshape(-1, N), ev, h=h).reshape(mesh.shape[:-1])
        for axis in range(N):
            field = ndimage.correlate1d(field, weights, axis=axis, mode="constant", cval=0.0)
        inner = tuple(slice(pad, n - pad) for _ in range(N))
        smooth = field[inner].ravel()[grid.interior]
    return smooth * cutoff(grid.radius, grid.R)


# -- exhaustion plan ----------------------------------------------------------------


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExhaustionPlan:
    """Radii ``R_n``, common spacing, mollification widths and observation window."""

    radii: tuple[float, ...]
    h: float
    delta: float | tuple[float, ...]
    R_obs: float
    t1: float
    t2: float
    n_window: int = 11

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if not radii:
            raise PlanError("plan needs at least one radius")
        if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise PlanError("radii must be positive and strictly increasing")
        if self.h <= 0:
            raise PlanError("spacing must be positive")
        if not 0 < self.R_obs < 0.5 * radii[0]:
            raise PlanError(f"window radius {self.R_obs} must lie in (0, R_0/2 = {0.5 * radii[0]})")
        if not 0 <= self.t1 < self.t2:
            raise PlanError("window needs 0 <= t1 < t2")
        if self.n_window < 2:
            raise PlanError("window needs at least two sample times")
        if len(self.deltas) != len(radii) or any(d < 0 for d in self.deltas):
            raise PlanError("one nonnegative mollification width per level is required")

    @classmethod
    def geometric(cls, R0: float, n_max: int, h: float, delta, R_obs: float, t1: float, t2: float, **kw):
        """``R_n = R0 2^n`` for ``n = 0..n_max``."""
        return cls(tuple(R0 * 2.0**n for n in range(n_max + 1)), h, delta, R_obs, t1, t2, **kw)

    @property
    def deltas(self) -> tuple[float, ...]:
        if isinstance(self.delta, (int, float)):
            return (float(self.delta),) * len(self.radii)
        return tuple(float(d) for d in self.delta)

    @property
    def window_times(self) -> np.ndarray:
        return np.linspace(self.t1, self.t2, self.n_window)

    def check_config(self, cfg: StepConfig) -> None:
        if self.t2 > cfg.t_end + 1e-12:
            raise PlanError(f"window end {self.t2} exceeds t_end={cfg.t_end}")
        if self.t1 < cfg.t0:
            raise PlanError(f"window start {self.t1} precedes t0={cfg.t0}")


# -- observers ---------------------------------------------------------------------


@dataclass(frozen=True)
class BallAbsV:
    """Observer: ``int_{B_R} |v| dx`` for the current ``u``."""

    R: float
    q: float

    def __call__(self, grid: Grid, u: np.ndarray) -> float:
        return grid.integrate(np.abs(u) ** (self.q - 1.0), radius=self.R)


@dataclass(frozen=True)
class BallGradientL1:
    """Observer: ``int_{B_R} H(grad u) dx`` as a face sum."""

    R: float

    def __call__(self, grid: Grid, u: np.ndarray) -> float:
        H = grid.ev.eval(face_gradients(grid, u))
        return float(np.sum(H[grid.face_radius() < self.R]) * grid.face_volume)


# -- reports --------------------------------------------------------------------------


class ReportStatus(str, enum.Enum):
    CONVERGED = "Converged"
    NOT_CONVERGED = "NotConverged"
    BLOWUP_AT_LEVEL = "BlowUpAtLevel"


@dataclass
class A1Report:
    values: np.ndarray
    delta_exponent: float
    window: tuple[float, float, float]
    threshold: float = 2.0

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def ratio(self) -> float:
        v = self.values
        if v.size == 0 or np.all(v == 0):
            return 1.0
        lo = float(np.min(v))
        return math.inf if lo <= 0 else float(np.max(v)) / lo

    @property
    def passed(self) -> bool:
        return bool(np.all(np.isfinite(self.values))) and self.ratio <= self.threshold

    def summary(self) -> str:
        R, t1, t2 = self.window
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"A1 {verdict} max={self.max!r} ratio={self.ratio!r} threshold={self.threshold!r} "
            f"delta={self.delta_exponent!r} window=(R={R!r},t1={t1!r},t2={t2!r})"
        )


@dataclass
class A2Report:
    times: np.ndarray
    g: np.ndarray
    slope: float
    min_slope: float = 0.4

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.g) >= 0))

    @property
    def passed(self) -> bool:
        if np.all(self.g == 0):
            return True
        return self.monotone and self.slope >= self.min_slope

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"A2 {verdict} slope={self.slope!r} min_slope={self.min_slope!r} monotone={self.monotone}"


@dataclass
class ConvergenceReport:
    radii: tuple[float, ...]
    errors: np.ndarray  # errors[n] = |u_n - u_{n+1}| on the window
    a1: A1Report
    status: ReportStatus
    blowup_level: int | None = None
    tol_window: float = math.inf

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    @property
    def passed(self) -> bool:
        return self.status is ReportStatus.CONVERGED and self.a1.passed

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tag = self.status.value if self.blowup_level is None else f"{self.status.value}({self.blowup_level})"
        return f"EXHAUST {verdict} status={tag} decreasing={self.decreasing} {self.a1.summary()}"

    def write_csv(self, path) -> None:
        rows = []
        for n, R in enumerate(self.radii):
            e = fmt(self.errors[n]) if n < self.errors.size else ""
            a = fmt(self.a1.values[n]) if n < self.a1.values.size else ""
            rows.append([n, R, e, a])
        write_table(path, ["n", "R_n", "e_n", "A1_value"], rows)


# -- window comparison --------------------------------------------------------------


def _window_indices(result: RunResult, t1: float, t2: float) -> np.ndarray:
    tol = 1e-9 * max(1.0, abs(t2))
    return np.flatnonzero((result.times >= t1 - tol) & (result.times <= t2 + tol))


def _window_nodes(grid: Grid, R_obs: float) -> tuple[np.ndarray, np.ndarray]:
    sel = np.flatnonzero(grid.radius < R_obs)
    keys = grid.lattice_keys(sel)
    order = np.lexsort(keys.T[::-1])
    return sel[order], keys[order]


def window_l1_difference(a: RunResult, b: RunResult, R_obs: float, t1: float, t2: float) -> float:
    """``int_{t1}^{t2} int_{B_R_obs} |u_a - u_b|`` on the shared lattice and saved times."""
    if not math.isclose(a.grid.h, b.grid.h, rel_tol=1e-12):
        raise ShapeMismatch("window comparison needs equal spacing")
    sa, ka = _window_nodes(a.grid, R_obs)
    sb, kb = _window_nodes(b.grid, R_obs)
    if ka.shape != kb.shape or np.any(ka != kb):
        raise ShapeMismatch("window node sets differ between grids")
    ia, ib = _window_indices(a, t1, t2), _window_indices(b, t1, t2)
    ta, tb = a.times[ia], b.times[ib]
    if ta.size != tb.size or not np.allclose(ta, tb, rtol=0, atol=1e-9 * max(1.0, abs(t2))):
        raise ShapeMismatch("window save times differ between runs")
    vol = a.grid.node_volume
    diff = np.abs(a.u[ia][:, sa] - b.u[ib][:, sb]).sum(axis=1) * vol
    if ta.size == 1:
        return float(diff[0])
    return float(integrate.trapezoid(diff, ta))


# -- driver ------------------------------------------------------------------------


@dataclass(frozen=True)
class _LevelJob:
    R: float
    h: float
    delta: float
    datum: InitialDatum
    q: float
    ev: FinslerEvaluator
    cfg: StepConfig
    observers: tuple


def _run_level(job: _LevelJob) -> RunResult:
    grid = build_grid(job.R, job.h, None, job.ev)
    v0 = mollify(job.datum, job.ev, grid, job.delta)
    return run(grid, job.ev, job.q, v0, job.cfg, observers=dict(job.observers))


def run_exhaustion(
    plan: ExhaustionPlan,
    datum: InitialDatum,
    q: float,
    ev: FinslerEvaluator,
    cfg: StepConfig,
    tol_window: float = math.inf,
    delta_exponent: float = 3.0,
    observers: dict | None = None,
) -> tuple[list[RunResult], ConvergenceReport]:
    """Run every level (concurrently, see ``FDL_THREADS``) and compare them on the window.

    The window sample times are merged into ``cfg.save_times``.  ``Converged``
    requires the last window difference to be at most ``tol_window``.
    """
    plan.check_config(cfg)
    times = sorted(set(cfg.save_times) | {float(t) for t in plan.window_times if t > cfg.t0})
    cfg = dataclasses.replace(cfg, save_times=tuple(times))
    obs = tuple(sorted((observers or {}).items()))
    jobs = [_LevelJob(R, plan.h, dl, datum, q, ev, cfg, obs) for R, dl in zip(plan.radii, plan.deltas)]
    results = parallel_map(_run_level, jobs)

    window = (plan.R_obs, plan.t1, plan.t2)
    blown = [n for n, r in enumerate(results) if not r.completed]
    if blown:
        a1 = A1Report(np.zeros(0), delta_exponent, window)
        return results, ConvergenceReport(
            plan.radii, np.zeros(0), a1, ReportStatus.BLOWUP_AT_LEVEL, blown[0], tol_window
        )
    errors = np.array(
        [window_l1_difference(a, b, *window) for a, b in zip(results, results[1:])], dtype=float
    )
    a1 = verify_A1(results, window, delta_exponent)
    ok = errors.size == 0 or errors[-1] <= tol_window
    status = ReportStatus.CONVERGED if ok else ReportStatus.NOT_CONVERGED
    return results, ConvergenceReport(plan.radii, errors, a1, status, None, tol_window)


# -- (A1) / (A2) -----------------------------------------------------------------------


def _a1_value(result: RunResult, R: float, t1: float, t2: float, delta_exponent: float) -> float:
    grid, ev = result.grid, result.ev
    idx = _window_indices(result, t1, t2)
    nodes = grid.radius < R
    faces = grid.face_radius() < R
    vol, fvol = grid.node_volume, grid.face_volume
    mass, energy = [], []
    for j in idx:
        u, v = result.u[j], result.v[j]
        mass.append(np.sum(np.abs(u[nodes])) * vol)
        H = ev.eval(face_gradients(grid, u))[faces]
        energy.append(np.sum(v[nodes] ** 2) * vol + np.sum(H * H) * fvol)
    t = result.times[idx]
    if t.size < 2:
        return 0.0
    mass = np.asarray(mass)
    return float(integrate.trapezoid(mass**delta_exponent, t) + integrate.trapezoid(energy, t))


def verify_A1(
    results: Sequence[RunResult], window: tuple[float, float, float], delta_exponent: float = 3.0
) -> A1Report:
    """Per-level ``int (int_{B_R} |u|)^delta dt + int int (|v|^2 + H(grad u)^2)`` on the window."""
    if delta_exponent <= 2.0:
        raise ValueError(f"the time exponent must exceed p = 2, got {delta_exponent}")
    R, t1, t2 = window
    vals = np.array([_a1_value(r, R, t1, t2, delta_exponent) for r in results], dtype=float)
    return A1Report(vals, float(delta_exponent), (float(R), float(t1), float(t2)))


def _cumulative(result: RunResult, R: float) -> tuple[np.ndarray, np.ndarray]:
    """``(t, int_0^t int_{B_R} (|v| + H(grad u)))``, from per-step observers when recorded."""
    names = list(observers_for_A2(R, result.q))
    tr = result.trace
    if all(k in tr for k in names):
        t = tr["t"]
        f = tr[names[0]] + tr[names[1]]
    else:
        absv, grad = BallAbsV(R, result.q), BallGradientL1(R)
        t = result.times
        f = np.array([absv(result.grid, u) + grad(result.grid, u) for u in result.u])
    return t - result.t_start, integrate.cumulative_trapezoid(f, t, initial=0.0)


def observers_for_A2(R: float, q: float) -> dict:
    """Observers recording the (A2) integrands after every step."""
    return {f"absv@{R!r}": BallAbsV(R, q), f"gradl1@{R!r}": BallGradientL1(R)}


def loglog_slope(t: np.ndarray, y: np.ndarray) -> float:
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    ok = (t > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(t[ok]), np.log(y[ok]), 1)[0])


def verify_A2(results: Sequence[RunResult], R: float, t_grid, min_slope: float = 0.4) -> A2Report:
    """``g(t) = sup_n int_0^t int_{B_R} (|v_n| + H(grad u_n))`` on ``t_grid`` and its log-log slope.

    ``t_grid`` is measured from each run's start time.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must be nonempty and positive")
    g = np.zeros_like(t_grid)
    for res in results:
        t, c = _cumulative(res, R)
        if t_grid[-1] > t[-1] + 1e-12:
            raise ValueError(f"t_grid extends past the run ({t[-1]})")
        g = np.maximum(g, np.interp(t_grid, t, c))
    return A2Report(t_grid, g, loglog_slope(t_grid, g), min_slope)
