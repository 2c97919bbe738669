"""Initial data, mollification, exhaustion plans, window comparison and (A1)/(A2) checks."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from fdlab.disc import ShapeMismatch, beta, build_grid
from fdlab.exact import OutOfRegime, kappa, zkb_eval, zkb_params
from fdlab.exhaust import (
    BallAbsV,
    BallGradientL1,
    CriticalGrowth,
    Custom,
    Density,
    DiracBump,
    ExhaustionPlan,
    PlanError,
    ReportStatus,
    cutoff,
    loglog_slope,
    mollify,
    observers_for_A2,
    run_exhaustion,
    verify_A1,
    verify_A2,
    window_l1_difference,
)
from fdlab.norms import FinslerEvaluator
from fdlab.stepper import StepConfig, run

EUC1 = FinslerEvaluator.from_string("euclidean", 1)
EUC2 = FinslerEvaluator.from_string("euclidean", 2)


def shared(a, b, radius):
    """Index pairs of lattice nodes common to grids ``a`` and ``b`` inside ``H0 < radius``."""
    ka = {tuple(k): i for i, k in enumerate(a.lattice_keys())}
    pairs = [(ka[tuple(k)], j) for j, k in enumerate(b.lattice_keys()) if tuple(k) in ka]
    ia, jb = np.array(pairs).T
    keep = a.radius[ia] < radius
    return ia[keep], jb[keep]


class TestData:
    def test_bump_lattice_mass_exact(self):
        for ev, h in ((EUC1, 1 / 32), (EUC2, 1 / 16)):
            g = build_grid(1.0, h, None, ev)
            v = DiracBump(0.7, 0.3).evaluate(g.coords, ev, h=h)
            assert np.sum(v) * h**ev.dim == pytest.approx(0.7, rel=1e-14)

    def test_bump_continuous_normalisation(self):
        g = build_grid(1.0, 1 / 128, None, EUC2)
        v = DiracBump(1.0, 0.4).evaluate(g.coords, EUC2)
        assert np.sum(v) * g.node_volume == pytest.approx(1.0, rel=1e-3)

    def test_bump_ball_integral(self):
        b = DiracBump(2.0, 0.5)
        assert b.ball_integral(1.0, EUC1) == pytest.approx(2.0, rel=1e-12)
        # half the 1D bump lies in |x| < 0.25 by a closed form: int cos^2 = r/2 + sin(pi r / w) w / (2 pi)
        w = 0.5
        part = 0.25 / 2 + w * math.sin(math.pi * 0.25 / w) / (2 * math.pi)
        assert b.ball_integral(0.25, EUC1) == pytest.approx(2.0 * part / (w / 2), rel=1e-10)
        assert b.growth_limit(EUC1, 1.5) == 0.0

    def test_bump_misses_lattice(self):
        g = build_grid(1.0, 0.25, None, EUC1)
        with pytest.raises(ValueError):
            DiracBump(1.0, 0.01, center=(0.1,)).evaluate(g.coords, EUC1, h=0.25)

    def test_density_ball_integral_closed_form(self):
        d = Density(2.0, 3.0)
        R = 2.5
        expect = 2 * 3.0 * ((1 + R) ** 3 - 1) / 3
        assert d.ball_integral(R, EUC1) == pytest.approx(expect, rel=1e-12)
        radial, _ = quad(lambda r: 2 * math.pi * r * 3.0 * (1 + r) ** 2, 0, R)
        assert d.ball_integral(R, EUC2) == pytest.approx(radial, rel=1e-12)

    @pytest.mark.parametrize("ev", [EUC1, EUC2])
    def test_critical_growth_limit(self, ev):
        q = 1.5
        d = CriticalGrowth(2.0, q)
        assert d.gamma == pytest.approx(2.0)
        k1 = kappa(1, q, ev.dim)
        R = 1e6
        approx = R ** (-k1) * d.ball_integral(R, ev)  # d = 1
        assert d.growth_limit(ev, q) == pytest.approx(approx, rel=1e-4)

    def test_growth_limit_branches(self):
        assert Density(1.0, 5.0).growth_limit(EUC1, 1.5) == 0.0
        assert Density(3.0, 5.0).growth_limit(EUC1, 1.5) == math.inf
        with pytest.raises(OutOfRegime):
            Density(1.0, 1.0).growth_limit(EUC1, 3.0)

    def test_critical_growth_out_of_regime(self):
        with pytest.raises(OutOfRegime):
            CriticalGrowth(1.0, 3.0)

    def test_scaled(self):
        assert DiracBump(1.0, 0.1).scaled(3.0).mass == 3.0
        assert Density(1.0, 2.0).scaled(-1.0).amplitude == -2.0
        c = Custom(lambda x: x[:, 0]).scaled(2.0)
        np.testing.assert_array_equal(c.evaluate(np.array([[1.5]]), EUC1), [3.0])


class TestMollify:
    def test_cutoff(self):
        r = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
        np.testing.assert_allclose(cutoff(r, 2.0), [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-16)

    def test_constant_plateau(self):
        g = build_grid(4.0, 1 / 16, None, EUC2)
        mu = mollify(Density(0.0, 2.5), EUC2, g, 0.2)
        plateau = g.radius <= 2.0
        # the normalised kernel sums to one up to rounding
        np.testing.assert_allclose(mu[plateau], 2.5, rtol=4 * np.finfo(float).eps)
        assert np.all(mu[g.radius >= 4.0] == 0)

    def test_unsmoothed_plateau_exact(self):
        g = build_grid(4.0, 1 / 16, None, EUC1)
        mu = mollify(Density(0.0, 2.5), EUC1, g, 0.0)
        assert np.all(mu[g.radius <= 2.0] == 2.5)

    def test_bump_mass_preserved(self):
        for ev, h in ((EUC1, 1 / 64), (EUC2, 1 / 32)):
            g = build_grid(2.0, h, None, ev)
            mu = mollify(DiracBump(1.0, 0.1), ev, g, 0.15)
            assert 0.999 <= np.sum(mu) * g.node_volume <= 1.001

    def test_linearity_in_sign(self):
        g = build_grid(2.0, 1 / 16, None, EUC2)
        d = Density(1.0, -1.5)
        np.testing.assert_array_equal(mollify(d.scaled(-1.0), EUC2, g, 0.2), -mollify(d, EUC2, g, 0.2))

    def test_plateau_bit_identical_to_smoothed_datum(self):
        d = Density(1.0, 2.0)
        a = build_grid(2.0, 1 / 16, None, EUC2)
        big = build_grid(8.0, 1 / 16, None, EUC2)
        ia, jb = shared(a, big, 1.0)
        assert ia.size > 500
        # on the larger grid these nodes sit deep inside its own plateau too
        np.testing.assert_array_equal(mollify(d, EUC2, a, 0.2)[ia], mollify(d, EUC2, big, 0.2)[jb])

    def test_smoothing_matches_direct_convolution(self):
        d = Density(1.0, 1.0)
        g = build_grid(2.0, 1 / 16, None, EUC1)
        delta = 0.1
        mu = mollify(d, EUC1, g, delta)
        # oracle: explicit truncated-kernel sum at each node
        p = math.ceil(4 * delta / g.h)
        offs = g.h * np.arange(-p, p + 1)
        w = np.exp(-0.5 * (offs / delta) ** 2)
        w /= w.sum()
        x = g.coords[:, 0]
        smooth = np.array([np.sum(w * (1 + np.abs(xi + offs))) for xi in x])
        np.testing.assert_allclose(mu, smooth * cutoff(np.abs(x), 2.0), rtol=1e-13)

    def test_weak_star_pairing(self):
        d = Density(1.0, 1.0)
        phi = DiracBump(1.0, 0.8)
        vals = []
        for R in (2.0, 4.0, 8.0):
            g = build_grid(R, 1 / 32, None, EUC1)
            vals.append(np.sum(mollify(d, EUC1, g, 0.05) * phi.evaluate(g.coords, EUC1)) * g.node_volume)
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)
        exact, _ = quad(lambda x: (1 + abs(x)) * phi.evaluate(np.array([[x]]), EUC1)[0], -0.8, 0.8, points=[0])
        # smoothing the kink of |x| shifts the pairing by O(delta^2 / width)
        assert vals[0] == pytest.approx(exact, rel=5e-3)

    def test_negative_width(self):
        g = build_grid(1.0, 0.1, None, EUC1)
        with pytest.raises(ValueError):
            mollify(Density(0.0, 1.0), EUC1, g, -0.1)


class TestPlan:
    def test_geometric(self):
        p = ExhaustionPlan.geometric(2.0, 2, 1 / 16, 0.1, 0.5, 0.1, 0.5)
        assert p.radii == (2.0, 4.0, 8.0)
        assert p.deltas == (0.1, 0.1, 0.1)
        np.testing.assert_allclose(p.window_times, np.linspace(0.1, 0.5, 11))

    @pytest.mark.parametrize(
        "kw",
        [
            dict(radii=()),
            dict(radii=(2.0, 2.0)),
            dict(R_obs=1.0),
            dict(t1=0.5, t2=0.5),
            dict(delta=(0.1,)),
            dict(h=0.0),
            dict(n_window=1),
        ],
    )
    def test_invalid(self, kw):
        base = dict(radii=(2.0, 4.0), h=1 / 16, delta=0.1, R_obs=0.5, t1=0.1, t2=0.5)
        base.update(kw)
        with pytest.raises(PlanError):
            ExhaustionPlan(**base)

    def test_window_must_fit_run(self):
        p = ExhaustionPlan((2.0,), 1 / 16, 0.0, 0.5, 0.1, 0.5)
        with pytest.raises(PlanError):
            p.check_config(StepConfig(t_end=0.4))
        with pytest.raises(PlanError):
            p.check_config(StepConfig(t0=0.2, t_end=1.0))


class TestWindow:
    def test_self_difference_zero(self):
        g = build_grid(2.0, 1 / 32, None, EUC1)
        res = run(g, EUC1, 3.0, DiracBump(1.0, 0.2).evaluate(g.coords, EUC1, h=g.h), StepConfig(dt0=0.01, t_end=0.1))
        assert window_l1_difference(res, res, 0.5, 0.0, 0.1) == 0.0

    def test_mismatched_spacing(self):
        a = build_grid(2.0, 1 / 32, None, EUC1)
        b = build_grid(2.0, 1 / 16, None, EUC1)
        cfg = StepConfig(dt0=0.05, t_end=0.1)
        ra = run(a, EUC1, 3.0, a.zeros(), cfg)
        rb = run(b, EUC1, 3.0, b.zeros(), cfg)
        with pytest.raises(ShapeMismatch):
            window_l1_difference(ra, rb, 0.5, 0.0, 0.1)

    def test_mismatched_times(self):
        g = build_grid(2.0, 1 / 32, None, EUC1)
        ra = run(g, EUC1, 3.0, g.zeros(), StepConfig(dt0=0.05, t_end=0.1))
        rb = run(g, EUC1, 3.0, g.zeros(), StepConfig(dt0=0.025, t_end=0.1))
        with pytest.raises(ShapeMismatch):
            window_l1_difference(ra, rb, 0.5, 0.0, 0.1)

    def test_known_difference(self):
        g = build_grid(2.0, 1 / 32, None, EUC1)
        ra = run(g, EUC1, 2.0, g.zeros(), StepConfig(dt0=0.05, t_end=0.1))
        rb = run(g, EUC1, 2.0, g.zeros(), StepConfig(dt0=0.05, t_end=0.1))
        rb.u = rb.u + 1.0
        # |diff| = 1 on B_0.5 nodes over a window of length 0.1
        n = int(np.sum(g.radius < 0.5))
        assert window_l1_difference(ra, rb, 0.5, 0.0, 0.1) == pytest.approx(0.1 * n * g.h)


class TestRunExhaustion:
    def test_finite_propagation_makes_levels_agree(self):
        # a PME bump of width 0.2 spreads like t^{1/3}; by t = 0.2 it is far from B_1
        plan = ExhaustionPlan((2.0, 4.0, 8.0), 1 / 32, 0.0, 0.5, 0.05, 0.2, n_window=4)
        cfg = StepConfig(dt0=0.01, t_end=0.2)
        results, rep = run_exhaustion(plan, DiracBump(1.0, 0.2), 1.5, EUC1, cfg)
        assert rep.status is ReportStatus.CONVERGED
        assert np.all(rep.errors <= 1e-10)
        assert all(r.completed for r in results)

    def test_single_level(self):
        plan = ExhaustionPlan((2.0,), 1 / 16, 0.0, 0.5, 0.0, 0.1, n_window=3)
        _, rep = run_exhaustion(plan, DiracBump(1.0, 0.2), 3.0, EUC1, StepConfig(dt0=0.05, t_end=0.1))
        assert rep.errors.size == 0 and rep.status is ReportStatus.CONVERGED

    def test_fast_diffusion_levels_converge(self):
        plan = ExhaustionPlan((2.0, 4.0, 8.0), 1 / 32, 0.1, 0.5, 0.1, 0.5)
        cfg = StepConfig(dt0=1e-3, t_end=0.5, dt_growth=1.1, dt_max=0.02)
        _, rep = run_exhaustion(plan, DiracBump(1.0, 0.1), 3.0, EUC1, cfg, tol_window=1e-2)
        assert rep.decreasing
        assert rep.errors[1] <= rep.errors[0] / 2
        assert rep.a1.ratio <= 2.0
        assert rep.passed
        assert rep.summary().startswith("EXHAUST PASS status=Converged")

    def test_blowup_marks_level(self):
        plan = ExhaustionPlan((2.0, 4.0), 1 / 16, 0.0, 0.5, 0.0, 0.5, n_window=3)
        cfg = StepConfig(dt0=2e-4, t_end=0.5, growth_cap=4.0, growth_window=0.5)
        _, rep = run_exhaustion(plan, CriticalGrowth(8.0, 1.5), 1.5, EUC1, cfg)
        assert rep.status is ReportStatus.BLOWUP_AT_LEVEL
        assert rep.blowup_level is not None
        assert not rep.passed

    def test_report_csv(self, tmp_path):
        plan = ExhaustionPlan((2.0, 4.0), 1 / 16, 0.0, 0.5, 0.0, 0.1, n_window=3)
        _, rep = run_exhaustion(plan, DiracBump(1.0, 0.2), 3.0, EUC1, StepConfig(dt0=0.05, t_end=0.1))
        path = tmp_path / "r.csv"
        rep.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,R_n,e_n,A1_value"
        assert lines[1].startswith("0,2,")
        assert lines[2].split(",")[2] == ""

    def test_parallel_matches_sequential(self, monkeypatch):
        plan = ExhaustionPlan((2.0, 4.0), 1 / 16, 0.1, 0.5, 0.0, 0.1, n_window=3)
        cfg = StepConfig(dt0=0.02, t_end=0.1)
        monkeypatch.setenv("FDL_THREADS", "1")
        r1, a = run_exhaustion(plan, DiracBump(1.0, 0.2), 3.0, EUC1, cfg)
        monkeypatch.setenv("FDL_THREADS", "2")
        r2, b = run_exhaustion(plan, DiracBump(1.0, 0.2), 3.0, EUC1, cfg)
        np.testing.assert_array_equal(a.errors, b.errors)
        for x, y in zip(r1, r2):
            np.testing.assert_array_equal(x.u, y.u)


class TestA1:
    def test_zero_datum(self):
        g = build_grid(2.0, 1 / 16, None, EUC1)
        res = run(g, EUC1, 3.0, g.zeros(), StepConfig(dt0=0.05, t_end=0.2))
        rep = verify_A1([res, res], (0.5, 0.0, 0.2), 3.0)
        np.testing.assert_array_equal(rep.values, 0.0)
        assert rep.passed and rep.ratio == 1.0

    def test_echo_and_value(self):
        g = build_grid(2.0, 1 / 16, None, EUC1)
        res = run(g, EUC1, 2.0, np.ones(g.n_interior), StepConfig(dt0=0.05, t_end=0.1))
        res.u[:] = 1.0
        res.v[:] = 1.0
        rep = verify_A1([res], (0.5, 0.0, 0.1), 4.0)
        n = int(np.sum(g.radius < 0.5))
        # constant field: zero gradient on interior faces of B_0.5
        expect = 0.1 * (n * g.h) ** 4 + 0.1 * n * g.h
        assert rep.values[0] == pytest.approx(expect, rel=1e-12)
        assert "delta=4.0" in rep.summary() and "window=(R=0.5,t1=0.0,t2=0.1)" in rep.summary()

    def test_exponent_must_exceed_two(self):
        with pytest.raises(ValueError):
            verify_A1([], (0.5, 0.0, 1.0), 2.0)


class TestA2:
    def test_zero_datum(self):
        g = build_grid(2.0, 1 / 16, None, EUC1)
        res = run(g, EUC1, 3.0, g.zeros(), StepConfig(dt0=0.01, t_end=0.1))
        rep = verify_A2([res], 1.0, [0.01, 0.05, 0.1])
        np.testing.assert_array_equal(rep.g, 0.0)
        assert rep.passed

    def test_fast_diffusion_slope(self):
        g = build_grid(2.0, 1 / 32, None, EUC1)
        v0 = DiracBump(1.0, 0.1).evaluate(g.coords, EUC1, h=g.h)
        cfg = StepConfig(dt0=1e-4, t_end=0.1, dt_growth=1.1, dt_max=0.005)
        res = run(g, EUC1, 3.0, v0, cfg, observers=observers_for_A2(1.0, 3.0))
        rep = verify_A2([res], 1.0, np.geomspace(1e-3, 0.1, 12))
        assert rep.monotone and 0.4 <= rep.slope <= 1.1
        assert rep.passed

    def test_zkb_vanishes_at_start(self):
        P = zkb_params(1.5, 1, 1 / 12)
        g = build_grid(2.0, 1 / 64, None, EUC1)
        v0 = beta(1.5, zkb_eval(P, EUC1, g.coords, 1.0))
        res = run(g, EUC1, 1.5, v0, StepConfig(dt0=1e-3, t0=1.0, t_end=1.1), observers=observers_for_A2(1.0, 1.5))
        rep = verify_A2([res], 1.0, np.geomspace(1e-3, 0.1, 8))
        assert rep.monotone and rep.g[0] < 0.02 * rep.g[-1]

    def test_observer_and_saved_paths_agree(self):
        g = build_grid(2.0, 1 / 32, None, EUC1)
        v0 = DiracBump(1.0, 0.3).evaluate(g.coords, EUC1, h=g.h)
        cfg = StepConfig(dt0=0.01, t_end=0.1)
        with_obs = run(g, EUC1, 3.0, v0, cfg, observers=observers_for_A2(1.0, 3.0))
        plain = run(g, EUC1, 3.0, v0, cfg)
        a = verify_A2([with_obs], 1.0, [0.05, 0.1])
        b = verify_A2([plain], 1.0, [0.05, 0.1])
        np.testing.assert_allclose(a.g, b.g, rtol=1e-12)

    def test_grid_past_run(self):
        g = build_grid(2.0, 1 / 16, None, EUC1)
        res = run(g, EUC1, 3.0, g.zeros(), StepConfig(dt0=0.05, t_end=0.1))
        with pytest.raises(ValueError):
            verify_A2([res], 1.0, [0.2])
        with pytest.raises(ValueError):
            verify_A2([res], 1.0, [0.0])


class TestObservers:
    def test_ball_integrals(self):
        g = build_grid(2.0, 0.25, None, EUC1)
        u = np.full(g.n_interior, 2.0)
        n = int(np.sum(g.radius < 1.0))
        assert BallAbsV(1.0, 3.0)(g, u) == pytest.approx(4.0 * n * 0.25)
        ramp = g.coords[:, 0]
        nf = int(np.sum(np.abs(g.face_centers[:, 0]) < 1.0))
        assert BallGradientL1(1.0)(g, ramp) == pytest.approx(nf * 0.25)

    def test_loglog_slope(self):
        t = np.geomspace(0.1, 10, 7)
        assert loglog_slope(t, 3 * t**0.5) == pytest.approx(0.5)
        assert math.isnan(loglog_slope([1.0], [1.0]))
