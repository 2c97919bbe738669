"""Post-processing of runs against the smoothing, growth and blow-up laws.

Every inequality checked here carries an unspecified constant, so the checks
either fit that constant once and test its stability, or compare
parameter-free exponents.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from ._csv import write_table
from ._parallel import parallel_map
from .disc import Grid, build_grid
from .exact import (
    MajorantParams,
    OutOfRegime,
    growth_exponent_d,
    hypo_q_ok,
    kappa,
    majorant_phi,
    majorant_psi,
    majorant_psi_blowup,
    ode_compare,
)
from .exhaust import BallGradientL1, Density, InitialDatum, mollify
from .norms import FinslerEvaluator
from .stepper import RunResult, StepConfig, Status, run

__all__ = [
    "AllCensored",
    "GrowthNormSample",
    "Check",
    "EstimateReport",
    "growth_norm",
    "existence_time",
    "global_existence_time",
    "fit_slope",
    "gradient_observer",
    "gradient_l1_integral",
    "sup_on_ball",
    "fde_report",
    "pme_report",
    "psi_phi_series",
    "SupportSeries",
    "support_radius",
    "BlowupPoint",
    "blowup_scan",
    "majorant_consistency",
]


class AllCensored(RuntimeError):
    """No amplitude of a blow-up scan produced a detected blow-up."""


def _require_pme(q: float) -> float:
    if not 1.0 < q < 2.0:
        raise OutOfRegime(f"porous-medium range 1 < q < 2 required, got q={q}")
    return growth_exponent_d(q)


# -- growth norm ---------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthNormSample:
    r: float
    radii: np.ndarray
    values: np.ndarray  # R^{-kappa_1/d} int_{B_R} |f|
    sup: float

    @property
    def argmax(self) -> float:
        return float(self.radii[int(np.argmax(self.values))]) if self.values.size else math.nan


def _geometric_radii(r: float, R_max: float) -> np.ndarray:
    if R_max < r:
        raise ValueError(f"largest radius {R_max} is below the base radius {r}")
    n = int(math.floor(2.0 * math.log(R_max / r) / math.log(2.0) + 1e-9))
    return r * np.sqrt(2.0) ** np.arange(n + 1)


def growth_norm(
    f,
    ev: FinslerEvaluator,
    r: float,
    q: float,
    N: int,
    radii: Sequence[float] | None = None,
    grid: Grid | None = None,
    R_max: float | None = None,
) -> GrowthNormSample:
    """``sup_{R >= r} R^{-kappa_1/d} int_{B_R} |f|`` over sampled radii.

    ``f`` is either an :class:`InitialDatum` (closed-form ball integrals) or a
    nodal field on ``grid``.  Default radii are ``r sqrt(2)^j`` up to ``R_max``
    (the grid radius for nodal fields).
    """
    d = _require_pme(q)
    if r <= 0:
        raise ValueError(f"base radius must be positive, got {r}")
    if ev.dim != N:
        raise ValueError(f"evaluator dimension {ev.dim} != N={N}")
    expo = kappa(1.0, q, N) / d
    if isinstance(f, InitialDatum):
        ball = lambda R: f.ball_integral(R, ev)  # noqa: E731
        top = R_max
    else:
        if grid is None:
            raise ValueError("a nodal field needs its grid")
        absf = np.abs(grid.as_interior(f))
        ball = lambda R: grid.integrate(absf, radius=R)  # noqa: E731
        top = grid.R if R_max is None else R_max
    if radii is None:
        if top is None:
            raise ValueError("pass radii or R_max")
        radii = _geometric_radii(r, top)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < r * (1 - 1e-12)):
        raise ValueError("sampled radii must be at least r")
    values = np.array([R ** (-expo) * ball(R) for R in radii])
    return GrowthNormSample(float(r), radii, values, float(values.max()) if values.size else 0.0)


def existence_time(datum, ev: FinslerEvaluator, r: float, q: float, N: int, c: float, **kw) -> float:
    """``c |||datum|||_r^{-d}``; ``datum`` may also be a precomputed norm value."""
    d = _require_pme(q)
    if c <= 0:
        raise ValueError("c must be positive")
    norm = float(datum) if isinstance(datum, (int, float)) else growth_norm(datum, ev, r, q, N, **kw).sup
    return math.inf if norm == 0 else c * norm ** (-d)


def global_existence_time(datum: InitialDatum, ev: FinslerEvaluator, q: float, c: float) -> float:
    """``c a^{-d}`` with ``a`` the large-radius limit of the growth norm; ``inf`` when ``a = 0``."""
    d = _require_pme(q)
    a = datum.growth_limit(ev, q)
    if a == 0:
        return math.inf
    return 0.0 if math.isinf(a) else c * a ** (-d)


# -- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    expected: float
    tol: float
    informational: bool = False  # reported but excluded from the overall verdict

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tail = " informational" if self.informational else ""
        return f"CHECK {self.name} {verdict} value={self.value!r} expected={self.expected!r} tol={self.tol!r}{tail}"


@dataclass
class EstimateReport:
    checks: list[Check] = field(default_factory=list)
    series: dict[str, np.ndarray] = field(default_factory=dict)  # all sampled at series["t"]
    fits: dict[str, tuple[float, float]] = field(default_factory=dict)  # slope, residual

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not (c.passed or c.informational)]

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def write_csv(self, path) -> None:
        keys = list(self.series)
        write_table(path, keys, zip(*(self.series[k] for k in keys)))


def fit_slope(t, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log t`` and the RMS residual."""
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    ok = (t > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return math.nan, math.nan
    X, Y = np.log(t[ok]), np.log(y[ok])
    coef = np.polyfit(X, Y, 1)
    res = Y - np.polyval(coef, X)
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def _ratio_check(name: str, lhs: np.ndarray, rhs: np.ndarray, margin: float) -> tuple[Check, np.ndarray]:
    """Calibrate ``C = lhs/rhs`` at the first sample with ``lhs > 0``; PASS if later
    ratios stay below ``C (1 + margin)``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, math.inf, 0.0))
    nz = np.flatnonzero(lhs > 0)
    if nz.size == 0:
        return Check(name, True, 0.0, 0.0, margin), ratio
    C = float(ratio[nz[0]])
    worst = float(np.max(ratio[nz[0]:]))
    ok = bool(np.isfinite(worst)) and worst <= C * (1.0 + margin)
    return Check(name, ok, worst, C, margin), ratio


# -- series helpers ------------------------------------------------------------------


def gradient_observer(R: float) -> dict:
    """Observer recording ``int_{B_R} H(grad u)`` after every step."""
    return {f"gradl1@{R!r}": BallGradientL1(R)}


def gradient_l1_integral(result: RunResult, R: float, times=None) -> np.ndarray:
    """``int_0^t |H(grad u)|_{L1(B_R)}`` at ``times`` (elapsed; default the saved times).

    Uses the per-step trace when :func:`gradient_observer` was attached to the
    run, else the trapezoid rule over the saved fields.
    """
    key = next(iter(gradient_observer(R)))
    if key in result.trace:
        t = result.trace["t"] - result.t_start
        f = result.trace[key]
    else:
        t = result.elapsed
        obs = BallGradientL1(R)
        f = np.array([obs(result.grid, u) for u in result.u])
    cum = integrate.cumulative_trapezoid(f, t, initial=0.0)
    times = result.elapsed if times is None else np.asarray(times, dtype=float)
    return np.interp(times, t, cum)


def sup_on_ball(result: RunResult, R: float) -> np.ndarray:
    sel = result.grid.radius < R
    if not sel.any():
        return np.zeros(result.times.size)
    return np.max(np.abs(result.u[:, sel]), axis=1)


def _ball_mass(result: RunResult, R: float, j: int | slice = slice(None)) -> np.ndarray:
    sel = result.grid.radius < R
    return np.sum(np.abs(result.v[j][..., sel]), axis=-1) * result.grid.node_volume


def _select(t: np.ndarray, times) -> np.ndarray:
    if times is None:
        return np.flatnonzero(t > 0)
    lo, hi = times
    return np.flatnonzero((t >= lo * (1 - 1e-9)) & (t <= hi * (1 + 1e-9)) & (t > 0))


# -- fast diffusion ---------------------------------------------------------------------


def fde_report(
    result: RunResult,
    q: float,
    N: int,
    R: float,
    times: tuple[float, float] | None = None,
    p: float = 1.0,
    margin: float = 0.2,
    slope_tol: float = 0.1,
    grad_window: tuple[float, float] | None = None,
    grad_slope_range: tuple[float, float] = (0.4, 1.1),
) -> EstimateReport:
    """Fast-diffusion smoothing and gradient bounds on ``B_R`` over the elapsed-time window ``times``.

    Checks: the sup-norm log-log slope against ``-N/(kappa_p (q-1))``, the
    ratio stability of the three bounds (the pointwise one only for ``p = 1``)
    and the early-time slope of the cumulative gradient ``L1`` norm over
    ``grad_window`` (default: the same window).  The gradient-bound ratio is
    informational: its time shape is saturated only by concentrated data, and
    for smooth data the left side grows linearly so the early calibration
    underestimates the constant.
    """
    if q <= 2:
        raise OutOfRegime(f"fast-diffusion range q > 2 required, got q={q}")
    if p == 1.0 and not hypo_q_ok(q, N):
        raise OutOfRegime(f"q={q} violates the boundedness condition for N={N}")
    kp = kappa(p, q, N)
    if kp <= 0:
        raise OutOfRegime(f"kappa_p must be positive, got {kp}")
    k1 = kappa(1.0, q, N)
    t_all = result.elapsed
    idx = _select(t_all, times)
    t = t_all[idx]
    rep = EstimateReport()

    sup = sup_on_ball(result, R)
    slope, resid = fit_slope(t, sup[idx])
    expected = -N / (kp * (q - 1.0))
    rep.fits["sup"] = (slope, resid)
    zero = not np.any(result.v)
    ok = zero or abs(slope - expected) <= slope_tol
    rep.checks.append(Check("sup_slope", ok, 0.0 if zero else slope, expected, slope_tol))

    mass_R = _ball_mass(result, R)
    mass_2R = _ball_mass(result, 2 * R)
    mu_2R = float(mass_2R[0])
    run_sup = np.maximum.accumulate(mass_R)[idx]
    rhs2 = mu_2R + (t / R**k1) ** ((q - 1.0) / (q - 2.0))
    c2, ratio2 = _ratio_check("fde_mass_bound", run_sup, rhs2, margin)
    rep.checks.append(c2)

    series = {"t": t, "sup": sup[idx], "mass_sup": run_sup, "ratio_mass": ratio2}
    if p == 1.0:
        win = np.array([np.max(mass_2R[(t_all > tj / 8) & (t_all <= tj)]) for tj in t])
        rhs1 = t ** (-N / (k1 * (q - 1.0))) * win ** (2.0 / (k1 * (q - 1.0))) + (t / R**2) ** (1.0 / (q - 2.0))
        c1, ratio1 = _ratio_check("fde_sup_bound", sup[idx], rhs1, margin)
        rep.checks.append(c1)
        series["ratio_sup"] = ratio1

    grad = gradient_l1_integral(result, R, t)
    e = (q - 1.0) / (q - 2.0)
    rhs3 = (
        t**0.5 * R ** (N * (q - 2.0) / (2 * (q - 1.0))) * (mu_2R + t**e * R ** (N - 2 * e)) ** (q / (2 * (q - 1.0)))
        + t**e * R ** (N - q / (q - 2.0))
    )
    c3, ratio3 = _ratio_check("fde_gradient_bound", grad, rhs3, margin)
    c3 = dataclasses.replace(c3, informational=True)
    rep.checks.append(c3)
    series["grad_l1_cum"] = grad
    series["ratio_grad"] = ratio3

    gsel = _select(t, grad_window) if grad_window is not None else np.arange(t.size)
    gslope, gres = fit_slope(t[gsel], grad[gsel])
    rep.fits["grad_l1_cum"] = (gslope, gres)
    lo, hi = grad_slope_range
    ok = zero or (lo <= gslope <= hi)
    rep.checks.append(Check("grad_l1_slope", ok, 0.0 if zero else gslope, 0.5, 0.5 * (hi - lo)))
    rep.series = series
    return rep


# -- porous medium ----------------------------------------------------------------------


def psi_phi_series(result: RunResult, r: float, q: float, N: int, t_origin: float | None = None):
    """``(t, psi_r, phi_r)`` at the saved times, both as running suprema.

    ``t`` is measured from ``t_origin`` (default: the run start).  Radii are
    sampled geometrically from ``r`` to the grid radius.
    """
    d = _require_pme(q)
    grid = result.grid
    k1 = kappa(1.0, q, N)
    radii = _geometric_radii(r, grid.R)
    t = result.times - (result.t_start if t_origin is None else t_origin)
    order = np.argsort(grid.radius)
    rsorted = grid.radius[order]
    pos = np.searchsorted(rsorted, radii, side="left")  # nodes with radius < R
    vol = grid.node_volume
    psi, phi = [], []
    for j in range(result.times.size):
        w = np.abs(result.v[j])[order]
        cum = np.concatenate([[0.0], np.cumsum(w)]) * vol
        runmax = np.concatenate([[0.0], np.maximum.accumulate(w)])
        psi.append(np.max(radii ** (-k1 / d) * cum[pos]))
        phi.append(max(t[j], 0.0) ** (N / k1) * np.max(radii ** (-2.0 / d) * runmax[pos]))
    return t, np.maximum.accumulate(psi), np.maximum.accumulate(phi)


def pme_report(
    result: RunResult,
    q: float,
    N: int,
    r: float,
    R: float,
    times: tuple[float, float] | None = None,
    t_origin: float | None = None,
    margin: float = 0.2,
    slope_rel_tol: float = 0.05,
) -> EstimateReport:
    """Porous-medium growth-norm, sup-norm and gradient bounds plus the monitors ``psi_r``, ``phi_r``.

    ``t_origin`` shifts the time axis of the sup-norm law and ``phi_r`` (use 0
    for a run started from a self-similar profile at a positive time); the
    gradient integral is always measured from the run start.  As in
    :func:`fde_report` the gradient-bound ratio is informational.
    """
    d = _require_pme(q)
    k1 = kappa(1.0, q, N)
    grid = result.grid
    mu = growth_norm(result.v[0], result.ev, r, q, N, grid=grid).sup
    t_all, psi, phi = psi_phi_series(result, r, q, N, t_origin)
    idx = _select(t_all, times)
    t = t_all[idx]
    rep = EstimateReport()

    for name, s in (("psi_monotone", psi), ("phi_monotone", phi)):
        ok = bool(np.all(np.isfinite(s)) and np.all(np.diff(s) >= 0))
        rep.checks.append(Check(name, ok, float(s[-1]) if s.size else 0.0, math.nan, 0.0))

    norms_t = np.array([growth_norm(v, result.ev, r, q, N, grid=grid).sup for v in result.v[idx]])
    c1, ratio1 = _ratio_check("pme_growth_bound", norms_t, np.full(t.size, mu), margin)
    sup = sup_on_ball(result, R)[idx]
    rhs2 = t ** (-N / (k1 * (q - 1.0))) * R ** (2.0 / (d * (q - 1.0))) * mu ** (2.0 / (k1 * (q - 1.0)))
    c2, ratio2 = _ratio_check("pme_sup_bound", sup, rhs2, margin)
    # the gradient integral starts at the run start whatever the time origin
    tau = result.elapsed[idx]
    grad = gradient_l1_integral(result, R, tau)
    rhs3 = tau ** (1.0 / k1) * R ** (1.0 + k1 / d) * mu ** (1.0 + d / k1)
    c3, ratio3 = _ratio_check("pme_gradient_bound", grad, rhs3, margin)
    c3 = dataclasses.replace(c3, informational=True)
    rep.checks += [c1, c2, c3]

    slope, resid = fit_slope(t, sup)
    expected = -N / (k1 * (q - 1.0))
    rep.fits["sup"] = (slope, resid)
    zero = not np.any(result.v)
    ok = zero or abs(slope - expected) <= slope_rel_tol * abs(expected)
    rep.checks.append(Check("sup_slope", ok, 0.0 if zero else slope, expected, slope_rel_tol * abs(expected)))
    rep.series = {
        "t": t,
        "psi": psi[idx],
        "phi": phi[idx],
        "growth_norm": norms_t,
        "sup": sup,
        "grad_l1_cum": grad,
        "ratio_growth": ratio1,
        "ratio_sup": ratio2,
        "ratio_grad": ratio3,
    }
    return rep


# -- support ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportSeries:
    t: np.ndarray
    radius: np.ndarray
    slope: float


def support_radius(result: RunResult, threshold: float | None = None, t_origin: float | None = None) -> SupportSeries:
    """Largest ``H0`` of a node with ``|u| > threshold`` per saved time, and its log-log slope.

    The default threshold is ``1e-6 sup|u(0)|``; an identically zero field
    gives an empty series.
    """
    sup0 = float(np.max(np.abs(result.u[0]))) if result.u.size else 0.0
    if sup0 == 0:
        return SupportSeries(np.zeros(0), np.zeros(0), math.nan)
    thr = 1e-6 * sup0 if threshold is None else threshold
    if thr <= 0:
        raise ValueError("threshold must be positive")
    t = result.times - (result.t_start if t_origin is None else t_origin)
    rad = np.array([np.max(result.grid.radius[np.abs(u) > thr], initial=0.0) for u in result.u])
    return SupportSeries(t, rad, fit_slope(t, rad)[0])


# -- blow-up scan ------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupPoint:
    amplitude: float
    status: Status
    time: float  # detected blow-up time, or the censoring time


@dataclass(frozen=True)
class _BlowupJob:
    datum: InitialDatum
    q: float
    ev: FinslerEvaluator
    R: float
    h: float
    cfg: StepConfig


def _blowup_run(job: _BlowupJob) -> BlowupPoint:
    grid = build_grid(job.R, job.h, None, job.ev)
    v0 = mollify(job.datum, job.ev, grid, 0.0)
    res = run(grid, job.ev, job.q, v0, job.cfg)
    amp = job.datum.amplitude if isinstance(job.datum, Density) else math.nan
    if res.status.kind is Status.BLOWUP:
        return BlowupPoint(amp, Status.BLOWUP, float(res.status.time) - job.cfg.t0)
    return BlowupPoint(amp, res.status.kind, float(res.times[-1]) - job.cfg.t0)


def blowup_scan(
    amplitudes: Sequence[float],
    template: Density,
    q: float,
    N: int,
    ev: FinslerEvaluator,
    R: float,
    h: float,
    cfg: StepConfig,
    rel_tol: float = 0.15,
) -> tuple[EstimateReport, list[BlowupPoint]]:
    """Blow-up time against amplitude on ``B_R``; PASS when the fitted slope is ``-d`` within ``rel_tol``.

    Blow-up is whatever ``cfg`` detects (``growth_cap`` on ``growth_window`` in
    practice, since the Dirichlet problem obeys the maximum principle); runs
    reaching ``t_end`` are censored and excluded from the fit.
    """
    d = _require_pme(q)
    amps = np.asarray(sorted(amplitudes), dtype=float)
    if amps.size < 3 or amps[0] <= 0 or amps[-1] / amps[0] < 4.0 - 1e-12:
        raise ValueError("need at least 3 positive amplitudes spanning a factor of 4")
    if ev.dim != N:
        raise ValueError(f"evaluator dimension {ev.dim} != N={N}")
    jobs = [_BlowupJob(dataclasses.replace(template, amplitude=float(A)), q, ev, R, h, cfg) for A in amps]
    points = parallel_map(_blowup_run, jobs)
    hit = [p for p in points if p.status is Status.BLOWUP]
    if not hit:
        raise AllCensored(f"no blow-up detected before t_end={cfg.t_end} for amplitudes {list(amps)}")
    slope, resid = fit_slope([p.amplitude for p in hit], [p.time for p in hit])
    rep = EstimateReport()
    rep.fits["blowup_time"] = (slope, resid)
    ok = len(hit) >= 2 and abs(slope + d) <= rel_tol * d
    rep.checks.append(Check("blowup_slope", ok, slope, -d, rel_tol * d))
    rep.series = {
        "amplitude": np.array([p.amplitude for p in points]),
        "t_star": np.array([p.time for p in points]),
        "censored": np.array([0.0 if p.status is Status.BLOWUP else 1.0 for p in points]),
    }
    return rep, points


# -- integral inequalities and majorants ----------------------------------------------------


def _cumulative_singular(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Trapezoid antiderivative; a non-finite value at ``t = 0`` is replaced by 0."""
    f = np.where(np.isfinite(f), f, 0.0)
    return integrate.cumulative_trapezoid(f, t, initial=0.0)


def majorant_consistency(
    result: RunResult,
    r: float,
    C1: float,
    C2: float,
    C3: float,
    C5: float,
    t_origin: float | None = None,
    ode_h: float | None = None,
) -> EstimateReport:
    """Scale factors making the two monitor integral inequalities hold, and majorant domination.

    ``lambda_phi`` is the least factor with ``phi <= lambda (C1 int tau^{-Nd/kappa}
    phi^{1/(q-1)} + C2 psi^{2/kappa})``; ``lambda_psi`` the least with
    ``psi <= lambda (C3 |||mu|||_r + C5 int tau^{1/kappa - 1} psi^{1 + d/kappa})``.
    The monitors are then compared with the closed-form majorants seeded by the
    scaled constants, and the Euler oracle confirms the ordering of the
    ``psi`` majorant from the measured start value.
    """
    q = result.q
    N = result.grid.N
    d = _require_pme(q)
    k = kappa(1.0, q, N)
    t, psi, phi = psi_phi_series(result, r, q, N, t_origin)
    mu = growth_norm(result.v[0], result.ev, r, q, N, grid=result.grid).sup
    rep = EstimateReport()
    if mu == 0:
        for name in ("lambda_phi", "lambda_psi", "phi_dominated", "psi_dominated", "ode_compare"):
            rep.checks.append(Check(name, True, 0.0, 0.0, 0.0))
        rep.series = {"t": t, "psi": psi, "phi": phi}
        return rep

    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = t ** (-N * d / k) * phi ** (1.0 / (q - 1.0))
        f2 = t ** (1.0 / k - 1.0) * psi ** (1.0 + d / k)
    I1 = _cumulative_singular(t, f1)
    I2 = _cumulative_singular(t, f2)
    rhs_phi = C1 * I1 + C2 * psi ** (2.0 / k)
    rhs_psi = C3 * mu + C5 * I2
    pos = t > 0
    lam_phi = float(np.max(phi[pos] / rhs_phi[pos]))
    lam_psi = float(np.max(psi / rhs_psi))

    # phi majorant over (0, t_end] seeded with psi at the final time
    mp_phi = MajorantParams(a0=lam_phi * C2 * psi[-1] ** (2.0 / k), coeff=lam_phi * C1, d=d, kappa=k)
    H = majorant_phi(mp_phi, t[pos])
    mp_psi = MajorantParams(a0=lam_psi * C3 * mu, coeff=lam_psi * C5, d=d, kappa=k)
    G = majorant_psi(mp_psi, t)
    tol = 1e-12
    phi_ok = bool(np.all(phi[pos] <= H * (1 + tol)))
    psi_ok = bool(np.all(psi <= G * (1 + tol)))

    # stay clear of the majorant's blow-up, where explicit Euler cannot follow it
    horizon = min(float(t[-1]), 0.5 * majorant_psi_blowup(mp_psi))
    step = ode_h if ode_h is not None else horizon / 2000.0
    lo = float(psi[0])
    hi = max(mp_psi.a0 * (1 + 1e-9), lo * (1 + 1e-9) + 1e-300)
    cmp = ode_compare(
        lambda y: y ** (1.0 + d / k),
        lambda s: mp_psi.coeff * s ** (1.0 / k - 1.0),
        lo,
        hi,
        horizon,
        step,
    )

    rep.checks += [
        Check("lambda_phi", bool(np.isfinite(lam_phi)), lam_phi, 1.0, math.inf),
        Check("lambda_psi", bool(np.isfinite(lam_psi)), lam_psi, 1.0, math.inf),
        Check("phi_dominated", phi_ok, float(np.max(phi[pos] / H)), 1.0, tol),
        Check("psi_dominated", psi_ok, float(np.max(psi / G)), 1.0, tol),
        Check("ode_compare", cmp.ok, cmp.t_reached, horizon, step),
    ]
    rep.series = {"t": t, "psi": psi, "phi": phi, "rhs_phi": rhs_phi, "rhs_psi": rhs_psi}
    return rep
