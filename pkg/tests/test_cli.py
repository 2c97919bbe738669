"""Config grammar, subcommands, exit codes, manifests and determinism."""
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from fdlab.cli import Config, ParseError, ValidationError, config_from_manifest, main, parse_config

MINIMAL = """
[problem]
q = 1.5
norm = euclidean
[grid]
R = 2
h = 0.125
[time]
t_end = 1
"""

ZKB = """
[problem]
q = 1.5
datum = zkb:0.0833333333333333
[grid]
R = 2
h = 0.03125
[time]
t0 = 1
dt0 = 0.004
t_end = 2
save_every = 5
[checks]
reports = pme, support, majorant, max_principle, existence
r = 0.5
R_check = 1
t_origin = 0
"""

BLOWUP = """
[problem]
q = 1.5
datum = critical:4
[grid]
R = 4
h = 0.0625
[time]
dt0 = 2e-4
t_end = 1
[solver]
growth_cap = 4
growth_window = 0.5
[checks]
reports = existence
"""

FDE_EXHAUST = """
[problem]
q = 3
datum = dirac:1,0.1
[grid]
radii = 2, 4, 8
h = 0.03125
delta = 0.1
R_obs = 0.5
t1 = 0.1
t2 = 0.5
[time]
dt0 = 1e-3
t_end = 0.5
dt_growth = 1.1
dt_max = 0.02
[checks]
reports = a2
a2_times = 0.01, 0.02, 0.05, 0.1
"""

SCAN = """
[problem]
q = 1.5
datum = critical:1
[grid]
R = 4
h = 0.0625
[time]
dt0 = 2e-4
t_end = 1
[solver]
growth_cap = 4
growth_window = 0.5
[checks]
amplitudes = 1, 2, 4
"""


def invoke(tmp_path, command, text, name="cfg.ini", out="out"):
    cfg = tmp_path / name
    cfg.write_text(textwrap.dedent(text))
    return main([command, str(cfg), "-o", str(tmp_path / out)])


def manifest(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines())


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config(MINIMAL)
        assert isinstance(cfg, Config)
        assert cfg.q == 1.5 and cfg.N == 1
        assert cfg["time"]["dt0"] == 1e-3 and cfg["solver"]["newton_tol"] == 1e-10
        assert cfg["problem"]["datum"] == "dirac:1,0.25"
        assert cfg["output"]["directory"] == "out"

    def test_deterministic(self):
        assert parse_config(MINIMAL).to_text() == parse_config(MINIMAL).to_text()

    def test_round_trip(self):
        cfg = parse_config(ZKB)
        assert parse_config(cfg.to_text()).values == cfg.values

    def test_comments_and_lists(self):
        cfg = parse_config(MINIMAL.replace("norm = euclidean", "norm = pnorm:3  # strictly convex\nN = 2")
                           + "[checks]\nreports = fde, pme\nfit_window = 0.1, 0.5\n")
        assert cfg["problem"]["norm"] == "pnorm:3"
        assert cfg["checks"]["reports"] == ("fde", "pme")
        assert cfg["checks"]["fit_window"] == (0.1, 0.5)

    def test_step_config(self):
        sc = parse_config(BLOWUP).step_config()
        assert sc.growth_cap == 4.0 and sc.dt0 == 2e-4 and sc.t_end == 1.0

    @pytest.mark.parametrize(
        "edit,key",
        [
            (("q = 1.5", "q = 0.5"), "problem.q"),
            (("norm = euclidean", "norm = pnorm:1.0"), "problem.norm"),
            (("norm = euclidean", "norm = taxicab"), "problem.norm"),
            (("norm = euclidean", "norm = euclidean\nfoo = 1"), "problem.foo"),
            (("h = 0.125", "h = -1"), "grid.h"),
            (("h = 0.125", "h = abc"), "grid.h"),
            (("t_end = 1", "t_end = 0"), "time.t_end"),
            (("R = 2", ""), "grid.R"),
            (("q = 1.5", "q = 3\ndatum = critical:1"), "problem.datum"),
            (("t_end = 1", "t_end = 1\nsave_times = 2"), "time.save_times"),
        ],
    )
    def test_validation_errors(self, edit, key):
        with pytest.raises(ValidationError) as exc:
            parse_config(MINIMAL.replace(*edit))
        assert exc.value.key == key

    def test_missing_required(self):
        with pytest.raises(ValidationError) as exc:
            parse_config(MINIMAL.replace("t_end = 1", ""))
        assert exc.value.key == "time.t_end"

    def test_unknown_section_and_report(self):
        with pytest.raises(ValidationError):
            parse_config(MINIMAL + "[plots]\nx = 1\n")
        with pytest.raises(ValidationError):
            parse_config(MINIMAL + "[checks]\nreports = fde, bogus\n")

    @pytest.mark.parametrize(
        "text,line",
        [
            ("q = 1.5\n", 1),
            ("[problem]\nq 1.5\n", 2),
            ("[problem]\nq = 1.5\nq = 2\n", 3),
        ],
    )
    def test_parse_errors(self, text, line):
        with pytest.raises(ParseError) as exc:
            parse_config(text)
        assert exc.value.line == line


class TestSubcommands:
    def test_verify_norm(self, tmp_path, capsys):
        text = MINIMAL.replace("norm = euclidean", "norm = pnorm:1.5\nN = 2")
        assert invoke(tmp_path, "verify-norm", text) == 0
        out = tmp_path / "out"
        assert (out / "verify-norm_identities.txt").exists()
        assert "CHECK euler PASS" in capsys.readouterr().out
        assert manifest(out / "verify-norm_manifest.txt")["result"] == "PASS"

    def test_zkb_profile(self, tmp_path):
        assert invoke(tmp_path, "zkb", ZKB) == 0
        rows = (tmp_path / "out" / "zkb_profile.csv").read_text().splitlines()
        assert rows[0] == "x,value"
        data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        # compact support of radius C^{1/2} k^{-1/2} t^{1/3} = 2^{1/3} at t = 2
        assert np.all(data[np.abs(data[:, 0]) >= 2 ** (1 / 3), 1] == 0)
        assert data[:, 1].max() > 0
        meta = manifest(tmp_path / "out" / "zkb_manifest.txt")
        assert float(meta["zkb_beta"]) == pytest.approx(1 / 3)

    def test_estimates_zkb_pass(self, tmp_path):
        assert invoke(tmp_path, "estimates", ZKB) == 0
        out = tmp_path / "out"
        meta = manifest(out / "estimates_manifest.txt")
        assert meta["status"] == "Completed" and meta["result"] == "PASS"
        for f in meta["files"].split(","):
            assert (out / f).exists()
        assert not (out / "estimates_failures.txt").exists()

    def test_check_failure_exit(self, tmp_path, capsys):
        # a wrong time origin bends the log-log decay away from the self-similar slope
        text = ZKB.replace("t_origin = 0", "t_origin = 0.9").replace(
            "reports = pme, support, majorant, max_principle, existence", "reports = pme"
        )
        assert invoke(tmp_path, "estimates", text) == 1
        failures = (tmp_path / "out" / "estimates_failures.txt").read_text()
        assert "CHECK sup_slope FAIL" in failures
        assert "FAILED CHECK sup_slope" in capsys.readouterr().err

    def test_solve_blowup_is_a_finding(self, tmp_path):
        assert invoke(tmp_path, "solve", BLOWUP) == 0
        meta = manifest(tmp_path / "out" / "solve_manifest.txt")
        assert meta["status"] == "BlowUpSuspected"
        assert 0 < float(meta["t_star"]) < 1
        monitors = (tmp_path / "out" / "solve_monitors.csv").read_text().splitlines()
        assert monitors[0].startswith("t,")

    def test_exhaust_fde(self, tmp_path, capsys):
        assert invoke(tmp_path, "exhaust", FDE_EXHAUST) == 0
        out = tmp_path / "out"
        report = (out / "exhaust_report.csv").read_text().splitlines()
        assert report[0] == "n,R_n,e_n,A1_value" and len(report) == 4
        assert (out / "exhaust_a2.csv").exists()
        assert "EXHAUST PASS" in capsys.readouterr().out

    def test_exhaust_needs_plan(self, tmp_path):
        assert invoke(tmp_path, "exhaust", MINIMAL) == 2

    def test_blowup_scan(self, tmp_path):
        assert invoke(tmp_path, "blowup-scan", SCAN) == 0
        rows = (tmp_path / "out" / "blowup-scan_scan.csv").read_text().splitlines()
        assert rows[0] == "amplitude,t_star,censored" and len(rows) == 4

    def test_blowup_scan_censored(self, tmp_path):
        text = SCAN.replace("t_end = 1", "t_end = 0.02").replace("dt0 = 2e-4", "dt0 = 1e-2")
        assert invoke(tmp_path, "blowup-scan", text) == 1
        assert manifest(tmp_path / "out" / "blowup-scan_manifest.txt")["status"] == "AllCensored"

    @pytest.mark.parametrize(
        "text",
        [
            MINIMAL.replace("q = 1.5", "q = 0.5"),
            MINIMAL.replace("norm = euclidean", "norm = pnorm:1.0"),
            "q = 1.5\n",
        ],
    )
    def test_config_errors_exit_2(self, tmp_path, capsys, text):
        assert invoke(tmp_path, "solve", text) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.ini")]) == 2

    def test_solver_error_exit_3(self, tmp_path):
        text = MINIMAL.replace("norm = euclidean", "norm = pnorm:1.5\nN = 2").replace("h = 0.125", "h = 0.25")
        text += "[solver]\nmax_newton = 2\nmax_halvings = 0\n"
        assert invoke(tmp_path, "solve", text) == 3


class TestReproducibility:
    def test_bit_identical_outputs(self, tmp_path):
        assert invoke(tmp_path, "estimates", ZKB, out="a") == 0
        assert invoke(tmp_path, "estimates", ZKB, out="b") == 0
        files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        assert files
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_rerun(self, tmp_path):
        assert invoke(tmp_path, "solve", BLOWUP, out="a") == 0
        text = (tmp_path / "a" / "solve_manifest.txt").read_text()
        assert config_from_manifest(text).values == parse_config(BLOWUP).values
        assert main(["solve", "--manifest", str(tmp_path / "a" / "solve_manifest.txt"), "-o", str(tmp_path / "b")]) == 0
        for name in manifest(tmp_path / "a" / "solve_manifest.txt")["files"].split(","):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_thread_count_independent(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FDL_THREADS", "1")
        assert invoke(tmp_path, "blowup-scan", SCAN, out="a") == 0
        monkeypatch.setenv("FDL_THREADS", "3")
        assert invoke(tmp_path, "blowup-scan", SCAN, out="b") == 0
        name = "blowup-scan_scan.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_console_entry_point(self, tmp_path):
        cfg = tmp_path / "v.ini"
        cfg.write_text(MINIMAL)
        proc = subprocess.run(
            [sys.executable, "-m", "fdlab.cli", "verify-norm", str(cfg), "-o", str(tmp_path / "o")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "CHECK duality PASS" in proc.stdout
