"""End-to-end command line tests, run in process through ``main(argv)``."""

import pytest

from triqss.cli import EXIT_ABORT, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from triqss.report import parse_kv

from conftest import FIXTURES

TABLE_A9 = str(FIXTURES / "tableIIIa_mu9e-4.csv")
ALL_TABLES = sorted(str(p) for p in FIXTURES.glob("tableIII*_mu*.csv"))


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestKato:
    def test_reference_bound(self, capsys):
        code, out, _ = run(capsys, ["kato", "--k", "1e6", "--lam", "5e5"])
        assert code == EXIT_OK
        assert out.startswith("# triqss kato")
        body = parse_kv(out)
        assert float(body["deviation"]) == pytest.approx(3393.0354890388417, rel=1e-9)
        assert float(body["azuma_deviation"]) == pytest.approx(6786.140424415112, rel=1e-9)
        assert float(body["closed_numeric_rel_diff"]) < 1e-6

    def test_lower_direction(self, capsys):
        code, out, _ = run(capsys, ["kato", "--k", "1e6", "--lam", "5e5", "--dir", "lower"])
        assert code == EXIT_OK
        body = parse_kv(out)
        assert body["direction"] == "lower"
        assert float(body["bound"]) < 5e5

    def test_missing_required_flag_exits_3(self):
        with pytest.raises(SystemExit) as info:
            main(["kato", "--k", "1e6"])
        assert info.value.code == EXIT_INPUT


class TestAnalyze:
    def test_single_table_report(self, capsys):
        code, out, _ = run(capsys, ["analyze", TABLE_A9])
        assert code == EXIT_OK
        body = parse_kv(out)
        assert body["n_x"] == "787407"
        assert body["ell"] == "199428"
        assert float(body["mu"]) == 9e-4
        assert float(body["px"]) == 0.9
        assert float(body["rate_per_second"]) == pytest.approx(398.856, rel=1e-6)
        assert "# config.gain_mode = observed" in out

    def test_multi_table_summary_sorted(self, capsys):
        code, out, _ = run(capsys, ["analyze", *ALL_TABLES])
        assert code == EXIT_OK
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert lines[0] == "px,mu,EbX_pct,EbY_pct,Ep_pct,n_x,n_y,skr_per_pulse,skr_per_s"
        rows = [l.split(",") for l in lines[1:]]
        assert len(rows) == 9
        assert [r[0] for r in rows] == ["0.9"] * 3 + ["0.8"] * 3 + ["0.7"] * 3
        for block in (rows[0:3], rows[3:6], rows[6:9]):
            mus = [float(r[1]) for r in block]
            assert mus == sorted(mus, reverse=True)
        assert rows[0][2] == "0.95" and rows[0][3] == "1.16"

    def test_filename_inference_failure_exits_3(self, capsys, tmp_path):
        anon = tmp_path / "counts.csv"
        anon.write_text((FIXTURES / "tableIIIa_mu9e-4.csv").read_text())
        code, _, err = run(capsys, ["analyze", str(anon)])
        assert code == EXIT_INPUT
        assert "cannot infer" in err

    def test_explicit_params_rescue_anonymous_file(self, capsys, tmp_path):
        anon = tmp_path / "counts.csv"
        anon.write_text((FIXTURES / "tableIIIa_mu9e-4.csv").read_text())
        code, out, _ = run(capsys, ["analyze", str(anon), "--mu", "9e-4", "--px", "0.9"])
        assert code == EXIT_OK
        assert parse_kv(out)["ell"] == "199428"

    def test_missing_file_exits_3(self, capsys, tmp_path):
        code, _, err = run(capsys, ["analyze", str(tmp_path / "missing.csv"),
                                    "--mu", "9e-4", "--px", "0.9"])
        assert code == EXIT_INPUT
        assert "input error" in err

    def test_degenerate_analytic_gain_exits_4(self, capsys):
        code, _, err = run(capsys, ["analyze", TABLE_A9, "--analytic-gain",
                                    "--mu", "0", "--dark", "0"])
        assert code == EXIT_NUMERIC
        assert "numerical degeneracy" in err


class TestSimulate:
    BASE = ["simulate", "--seed", "7", "--rounds", "20000", "--mu", "0.01", "--px", "0.7"]

    def test_fixed_rounds_report(self, capsys):
        code, out, _ = run(capsys, self.BASE)
        assert code == EXIT_OK
        body = parse_kv(out)
        assert body["rounds_used"] == "20000"
        assert body["abort"] == "false"
        assert int(body["n_x"]) > 0
        assert int(body["key_bits"]) == int(body["n_x"])

    def test_missing_seed_exits_3(self, capsys):
        code, _, err = run(capsys, ["simulate", "--rounds", "100"])
        assert code == EXIT_INPUT
        assert "--seed" in err

    def test_missing_stopping_rule_exits_3(self, capsys):
        code, _, err = run(capsys, ["simulate", "--seed", "1"])
        assert code == EXIT_INPUT
        assert "--rounds" in err

    def test_partial_thresholds_exit_3(self, capsys):
        code, _, err = run(capsys, ["simulate", "--seed", "1", "--nx", "10"])
        assert code == EXIT_INPUT
        assert "--nybc" in err

    def test_reruns_are_byte_identical(self, capsys, tmp_path):
        out1 = tmp_path / "one.txt"
        out2 = tmp_path / "two.txt"
        assert run(capsys, self.BASE + ["--out", str(out1)])[0] == EXIT_OK
        assert run(capsys, self.BASE + ["--out", str(out2)])[0] == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_threshold_abort_exits_2_with_partial(self, capsys, tmp_path):
        out = tmp_path / "aborted.txt"
        code, _, err = run(capsys, [
            "simulate", "--seed", "3", "--mu", "0.01", "--px", "0.7",
            "--nx", "100000", "--nybc", "1", "--nyac", "1",
            "--max-rounds", "5000", "--out", str(out),
        ])
        assert code == EXIT_ABORT
        assert "abort" in err
        body = parse_kv(out.read_text())
        assert body["abort"] == "true"
        assert body["rounds_used"] == "5000"

    def test_trace_file_written(self, capsys, tmp_path):
        trace = tmp_path / "trace.csv"
        code, _, _ = run(capsys, [
            "simulate", "--seed", "5", "--rounds", "500", "--mu", "0.01",
            "--px", "0.7", "--trace", str(trace),
        ])
        assert code == EXIT_OK
        lines = trace.read_text().splitlines()
        assert lines[0] == "i,s_a,s_b,basis_a,basis_b,basis_c,outcome,s_c,set_tag"
        assert len(lines) == 501

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mu = 1e-3\npx = 0.85\n")
        base = ["simulate", "--config", str(cfg), "--seed", "2", "--rounds", "1000"]

        code, out, _ = run(capsys, base + ["--mu", "2e-3"])
        assert code == EXIT_OK
        assert "# config.mu = 0.002" in out      # flag beats config
        assert "# config.px = 0.85" in out       # config beats default

        code, out, _ = run(capsys, base)
        assert code == EXIT_OK
        assert "# config.mu = 0.001" in out      # config beats default


class TestSweep:
    def test_small_finite_sweep(self, capsys, tmp_path):
        out = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, ["sweep", "--N", "1e10", "--Lmin", "0",
                                  "--Lmax", "20", "--step", "10", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "# triqss sweep"
        data = [l for l in lines if l and not l.startswith("#")]
        assert data[0] == "L_km,mu,px,rate_per_pulse,ell,Ep_bar,EbX,N"
        assert [row.split(",")[0] for row in data[1:]] == ["0", "10", "20"]
        rates = [float(row.split(",")[3]) for row in data[1:]]
        assert rates[0] >= rates[1] >= rates[2] > 0

    def test_asymptotic_sweep(self, capsys):
        code, out, _ = run(capsys, ["sweep", "--N", "inf", "--Lmin", "0",
                                    "--Lmax", "10", "--step", "5"])
        assert code == EXIT_OK
        data = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert len(data) == 4
        # the asymptotic curve has no finite pulse budget and full sifting
        assert data[1].split(",")[2] == "1"
        assert data[1].split(",")[7] == "inf"

    def test_bad_grid_exits_3(self, capsys):
        code, _, err = run(capsys, ["sweep", "--Lmin", "10", "--Lmax", "0"])
        assert code == EXIT_INPUT
        assert "input error" in err


class TestParserBehavior:
    def test_unknown_subcommand_exits_3(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == EXIT_INPUT

    def test_no_subcommand_exits_3(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == EXIT_INPUT
