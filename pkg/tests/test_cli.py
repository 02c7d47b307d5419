import json

import numpy as np
import pytest

from glyforecast.baseline import BASELINE
from glyforecast.cli import build_parser, load_config, main
from glyforecast.errors import ConfigError
from glyforecast.evaluation import DEFAULT_GRID_STRIDE
from glyforecast.forecasters import Method
from glyforecast.report import (CellRecord, RunManifest, read_records, render_table, write_records)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--patients", "2", "--days", "2", "--seed", "4", "--out-dir", str(d)]) == 0
    return d


def inputs(d):
    return [str(p) for p in sorted(d.glob("*.csv"))]


class TestSynth:
    def test_files_and_rows(self, tmp_path, capsys):
        assert main(["synth", "--patients", "2", "--days", "7", "--out-dir", str(tmp_path)]) == 0
        files = sorted(tmp_path.glob("*.csv"))
        assert len(files) == 2
        assert all(len(f.read_text().splitlines()) == 2016 + 1 for f in files)
        assert str(files[0]) in capsys.readouterr().out

    def test_repeatable(self, tmp_path):
        for sub in ("a", "b"):
            main(["synth", "--patients", "1", "--days", "2", "--seed", "9", "--out-dir", str(tmp_path / sub)])
        assert (tmp_path / "a/patient_000.csv").read_bytes() == (tmp_path / "b/patient_000.csv").read_bytes()

    def test_days_one(self, tmp_path, capsys):
        assert main(["synth", "--days", "1", "--out-dir", str(tmp_path)]) == 1
        assert "days ≥ 2" in capsys.readouterr().err

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["synth", "--days", "2", "--out-dir", str(blocker / "sub")]) == 2

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GLYFORECAST_SEED", "9")
        main(["synth", "--patients", "1", "--days", "2", "--out-dir", str(tmp_path / "env")])
        main(["synth", "--patients", "1", "--days", "2", "--seed", "9", "--out-dir", str(tmp_path / "flag")])
        assert (tmp_path / "env/patient_000.csv").read_bytes() == (tmp_path / "flag/patient_000.csv").read_bytes()


class TestEvaluate:
    def test_rf_cell(self, data_dir, tmp_path, capsys):
        out = tmp_path / "cell.csv"
        code = main(["evaluate", "--input", *inputs(data_dir), "--method", "rf", "--psw-hours", "6",
                     "--sf-minutes", "5", "--ph-minutes", "15", "--refit-stride", "12", "--out", str(out)])
        assert code == 0
        assert "window_values=72" in capsys.readouterr().out
        (rec,) = read_records(out)
        assert rec.method == "rf" and rec.peak_window_values == 72 and rec.mean_fit_ms > 0

    def test_bad_horizon(self, data_dir, capsys):
        assert main(["evaluate", "--input", *inputs(data_dir), "--ph-minutes", "7"]) == 1
        assert "--ph-minutes" in capsys.readouterr().err

    def test_custom_grid_allowed(self, data_dir):
        args = ["evaluate", "--input", inputs(data_dir)[0], "--method", "persistence",
                "--ph-minutes", "20", "--allow-custom-grid"]
        assert main(args) == 0

    def test_missing_input(self, tmp_path, capsys):
        assert main(["evaluate", "--input", str(tmp_path / "none.csv")]) == 2
        assert "--input" in capsys.readouterr().err

    def test_bad_method(self, data_dir):
        assert main(["evaluate", "--input", inputs(data_dir)[0], "--method", "lstm"]) == 1

    def test_argparse_errors_are_config_errors(self):
        assert main(["evaluate"]) == 1
        assert main(["frobnicate"]) == 1

    def test_config_precedence(self, data_dir, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"method": "svr", "ph_minutes": 30, "rf.trees": 5, "refit_stride": 24}))
        main(["evaluate", "--input", inputs(data_dir)[0], "--config", str(cfg)])
        out = capsys.readouterr().out
        assert "method=SVM" in out and "ph_minutes=30" in out
        main(["evaluate", "--input", inputs(data_dir)[0], "--config", str(cfg), "--method", "rf",
              "--out", str(tmp_path / "o.csv")])
        out = capsys.readouterr().out
        assert "method=RF" in out and "ph_minutes=30" in out
        assert '"trees": 5' in (tmp_path / "o.csv").read_text()

    def test_config_unknown_keys(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"rf": {"leaves": 3}}))
        with pytest.raises(ConfigError):
            from glyforecast.cli import hyper_from_config
            hyper_from_config(Method.RF, load_config(cfg))
        cfg.write_text(json.dumps({"colour": "red"}))
        with pytest.raises(ConfigError):
            load_config(cfg)


class TestHelp:
    @pytest.mark.parametrize("cmd", ["synth", "evaluate", "grid", "report", "profile"])
    def test_every_flag_shows_default(self, cmd, capsys):
        with pytest.raises(SystemExit) as info:
            main([cmd, "--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        parser = build_parser()
        sub = next(a for a in parser._actions if a.dest == "command").choices[cmd]
        for action in sub._actions:
            if action.option_strings and action.dest != "help":
                assert action.option_strings[-1] in text
                assert "default" in action.help or "required" in action.help

    def test_help_lists_config_keys(self, capsys):
        with pytest.raises(SystemExit):
            main(["evaluate", "--help"])
        text = capsys.readouterr().out
        for key in ("arima.max_p=5", "rf.trees=100", "rf.min_leaf=2", "svr.C=10.0", "svr.epsilon=1.0"):
            assert key in text

    def test_help_stride_defaults_match_ledger(self, capsys):
        with pytest.raises(SystemExit):
            main(["grid", "--help"])
        text = " ".join(capsys.readouterr().out.split())
        for m in (Method.ARIMA, Method.RF, Method.SVR):
            assert f"--stride-{m.value}" in text
            assert f"(default: {DEFAULT_GRID_STRIDE[m]})" in text


def baseline_records(table):
    recs = []
    rows = (3, 6, 12, 24, 36) if table == 1 else (5, 10, 15)
    for m in ("arima", "rf", "svr"):
        for row in rows:
            for ph in (15, 30, 45, 60):
                psw, sf = (row, 5) if table == 1 else (6, row)
                recs.append(CellRecord(m, psw, sf, ph, BASELINE.lookup(table, m, row, ph), 100))
    return recs


class TestReport:
    def test_rerender_idempotent(self, tmp_path):
        path = tmp_path / "r.csv"
        write_records(baseline_records(1), path)
        outs = []
        for i in range(2):
            out = tmp_path / f"t{i}.txt"
            assert main(["report", "--in", str(path), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        csv_out = tmp_path / "again.csv"
        main(["report", "--in", str(path), "--format", "csv", "--out", str(csv_out)])
        assert csv_out.read_text() == path.read_text()

    def test_row_order(self):
        text = render_table(list(reversed(baseline_records(1))), 1)
        lines = [ln.split()[0] for ln in text.splitlines()[3:]]
        assert lines == ["ARIMA"] * 5 + ["RF"] * 5 + ["SVM"] * 5
        assert "11.53" in text and "33.90" in text

    def test_empty(self, tmp_path, capsys):
        path = tmp_path / "e.csv"
        write_records([], path)
        assert main(["report", "--in", str(path)]) == 0
        assert "no cells" in capsys.readouterr().out

    @pytest.mark.parametrize("table", [1, 2])
    def test_self_delta_zero(self, tmp_path, capsys, table):
        path = tmp_path / "b.csv"
        write_records(baseline_records(table), path)
        assert main(["report", "--in", str(path), "--format", "delta"]) == 0
        text = capsys.readouterr().out
        assert "directional reference only" in text
        assert "(+0.00)" in text and "(-" not in text and "(+0.01" not in text

    def test_schema_mismatch(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        assert main(["report", "--in", str(p)]) == 2

    def test_manifest_ignores_directories(self, tmp_path):
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            (tmp_path / sub / "p.csv").write_text("same")
        m1 = RunManifest.for_inputs("grid", {"t": 1}, [tmp_path / "a/p.csv"], 3, "0.1.0")
        m2 = RunManifest.for_inputs("grid", {"t": 1}, [tmp_path / "b/p.csv"], 3, "0.1.0")
        assert m1.same_run(m2)
        assert RunManifest.from_json(m1.to_json()) == m1


class TestGridCommand:
    def test_table2_small(self, data_dir, tmp_path, capsys):
        out = tmp_path / "g"
        args = ["grid", "--input", *inputs(data_dir), "--table", "2", "--jobs", "1", "--out", str(out),
                "--stride-arima", "96", "--stride-rf", "96", "--stride-svr", "96"]
        assert main(args) == 0
        recs = read_records(out / "report.csv")
        assert len(recs) == 36
        for name in ("report.txt", "deltas.txt", "costs.csv", "per_patient.csv", "manifest.json"):
            assert (out / name).is_file()
        assert read_records(out / "costs.csv")[0].mean_fit_ms is not None
        text = (out / "report.txt").read_text()
        assert text.index("ARIMA") < text.index("\nRF") < text.index("\nSVM")
        per = (out / "per_patient.csv").read_text().splitlines()
        assert len(per) == 1 + 36 * 2
        mean = np.mean([float(r.split(",")[5]) for r in per[1:3]])
        assert recs[0].rmse == pytest.approx(mean, abs=1e-6)
