"""End-to-end checks of the command line: ingest, synth, run, compare."""

import os

import numpy as np
import pytest

from oilcast import cli
from oilcast.cli import CONFIG_KEYS, load_config, main
from oilcast.evaluation import parse_report
from oilcast.numerics import NumericalError
from oilcast.panel import FeaturePanel, read_panel_csv, write_panel_csv
from oilcast.pipeline import PipelineStageError
from oilcast.synth import SynthSpec, synth_generate


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(path, **overrides):
    base = {"synth_seed": 0, "split": "2017-12", "method": "naive", "label": "base"}
    base.update(overrides)
    path.write_text("".join(f"{k} = {v}\n" for k, v in base.items()))
    return str(path)


class TestConfigHandling:
    def test_defaults_match_registry(self):
        config = load_config(None, [])
        assert config["method"] == "kmeans+kpca+kelm"
        assert config["theta"] == 0.95
        assert config["synth_seed"] is None
        assert set(config) == set(CONFIG_KEYS)

    def test_file_then_set_precedence(self, tmp_path):
        path = write_config(tmp_path / "a.conf", c=7.0)
        config = load_config(path, ["c=9.5", "mode=G"])
        assert config["c"] == 9.5
        assert config["mode"] == "G"
        assert config["split"] == "2017-12"

    def test_unknown_key_in_file(self, tmp_path, capsys):
        path = tmp_path / "a.conf"
        path.write_text("split = 2017-12\nwibble = 3\n")
        code, _, err = run_cli(["run", "--config", str(path)], capsys)
        assert code == 1
        assert "line 2" in err and "wibble" in err

    def test_bad_value_type(self, tmp_path, capsys):
        path = write_config(tmp_path / "a.conf", k="three")
        code, _, err = run_cli(["run", "--config", str(path)], capsys)
        assert code == 1
        assert "'k'" in err

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "a.conf"
        path.write_text("# note\n\nsplit = 2010-06\n")
        assert load_config(str(path), [])["split"] == "2010-06"

    def test_empty_value_clears_optional(self):
        config = load_config(None, ["sigma=", "synth_seed=4"])
        assert config["sigma"] is None
        assert config["synth_seed"] == 4

    def test_missing_split_rejected(self, capsys):
        code, _, err = run_cli(["run", "--set", "synth_seed=0"], capsys)
        assert code == 1
        assert "split" in err

    def test_no_data_source_rejected(self, capsys):
        code, _, err = run_cli(["run", "--set", "split=2017-12"], capsys)
        assert code == 1
        assert "panel" in err and "synth_seed" in err


@pytest.fixture()
def fragment_files(tmp_path):
    panel, _, _ = synth_generate(SynthSpec(seed=3, months=60, factors=2, series_per_factor=3))
    names = list(panel.columns)

    def dump(cols, path, rows):
        dates = [panel.dates[i] for i in rows]
        columns = {n: panel.columns[n][list(rows)] for n in cols}
        write_panel_csv(FeaturePanel(dates=dates, columns=columns), str(path))

    dump(names[:3], tmp_path / "econ.csv", range(60))
    dump(names[3:6], tmp_path / "gsvi.csv", range(4, 60))
    dump(["price"], tmp_path / "price.csv", range(58))
    return tmp_path


class TestIngest:
    def test_fuse_counts_and_tags(self, fragment_files, capsys):
        out = fragment_files / "fused"
        code, stdout, _ = run_cli(
            [
                "ingest",
                "--economic", str(fragment_files / "econ.csv"),
                "--gsvi", str(fragment_files / "gsvi.csv"),
                "--target", str(fragment_files / "price.csv"),
                "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        fused = read_panel_csv(str(out) + ".csv")
        assert fused.n_rows == 54  # intersection of 60, 56 (from row 4), 58
        assert len(fused.columns) == 7
        tags = (out.parent / "fused.tags.csv").read_text()
        assert tags.count("economic") == 3
        assert tags.count("gsvi") == 3
        assert tags.count("target") == 1
        assert "54 rows x 7 columns" in stdout
        assert "6 dropped" in stdout  # econ: 60 source rows vs 54 kept

    def test_line_numbered_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,a\n2004-01,1.0\n2004-02,oops\n")
        tgt = tmp_path / "t.csv"
        tgt.write_text("date,price\n2004-01,5.0\n2004-02,6.0\n")
        code, _, err = run_cli(
            ["ingest", "--economic", str(bad), "--target", str(tgt), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 1
        assert "line 3" in err and "'oops'" in err and "'a'" in err

    def test_empty_date_intersection(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        a.write_text("date,a\n2004-01,1.0\n2004-02,2.0\n")
        b = tmp_path / "b.csv"
        b.write_text("date,price\n2010-01,5.0\n2010-02,6.0\n")
        code, _, err = run_cli(
            ["ingest", "--economic", str(a), "--target", str(b), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 1
        assert "empty intersection" in err

    def test_multi_column_target_rejected(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        a.write_text("date,a\n2004-01,1.0\n")
        b = tmp_path / "b.csv"
        b.write_text("date,p,q\n2004-01,5.0,6.0\n")
        code, _, err = run_cli(
            ["ingest", "--economic", str(a), "--target", str(b), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 1
        assert "exactly one column" in err

    def test_target_alone_rejected(self, tmp_path, capsys):
        b = tmp_path / "b.csv"
        b.write_text("date,price\n2004-01,5.0\n")
        code, _, err = run_cli(
            ["ingest", "--target", str(b), "--out", str(tmp_path / "o")], capsys
        )
        assert code == 1
        assert "at least one indicator" in err


class TestSynthCommand:
    def test_writes_panel_tags_labels(self, tmp_path, capsys):
        out = tmp_path / "p"
        code, stdout, _ = run_cli(
            ["synth", "--seed", "2", "--months", "48", "--factors", "2",
             "--series-per-factor", "4", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert "48 rows x 9 columns" in stdout
        labels = (tmp_path / "p.labels.csv").read_text().splitlines()
        assert labels[0] == "name,factor"
        assert len(labels) == 9  # header + 8 indicators
        panel = read_panel_csv(str(out) + ".csv")
        direct, _, _ = synth_generate(
            SynthSpec(seed=2, months=48, factors=2, series_per_factor=4)
        )
        np.testing.assert_allclose(panel.columns["price"], direct.columns["price"])

    def test_invalid_spec_exits_one(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["synth", "--months", "10", "--out", str(tmp_path / "p")], capsys
        )
        assert code == 1
        assert "months" in err


class TestRunOutputs:
    def test_naive_predictions_file(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", label="nv")
        code, stdout, _ = run_cli(
            ["run", "--config", conf, "--out-dir", str(tmp_path / "out")], capsys
        )
        assert code == 0
        assert "nv: n=12" in stdout
        lines = (tmp_path / "out" / "predictions.csv").read_text().splitlines()
        header_at = lines.index("date,actual,forecast_raw,forecast_normalized")
        rows = [ln.split(",") for ln in lines[header_at + 1 :]]
        assert [r[0] for r in rows] == [f"2018-{m:02d}" for m in range(1, 13)]

        panel, _, _ = synth_generate(SynthSpec(seed=0))
        price = panel.columns["price"]
        raw = np.array([float(r[2]) for r in rows])
        np.testing.assert_allclose(raw, price[167])  # last training value, repeated
        actual = np.array([float(r[1]) for r in rows])
        np.testing.assert_allclose(actual, price[168:])
        mu, sd = price[:168].mean(), price[:168].std()
        normalized = np.array([float(r[3]) for r in rows])
        np.testing.assert_allclose(normalized, (raw - mu) / sd, atol=1e-12)

    def test_metrics_file_parses_back(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", label="nv")
        run_cli(["run", "--config", conf, "--out-dir", str(tmp_path / "out")], capsys)
        report = parse_report((tmp_path / "out" / "metrics.txt").read_text())
        assert report.label == "nv"
        assert report.n == 12
        assert len(report.points) == 12
        echo = dict(p.split("=", 1) for p in report.config_echo.split(";"))
        assert echo["method"] == "naive"
        assert echo["test_start"] == "2018-01"
        assert echo["test_end"] == "2018-12"

    def test_rerun_byte_identical(self, tmp_path, capsys):
        conf = write_config(
            tmp_path / "c.conf", method="kmeans+kpca+kelm", k=3, seed=5, label="h"
        )
        run_cli(["run", "--config", conf, "--out-dir", str(tmp_path / "a")], capsys)
        run_cli(["run", "--config", conf, "--out-dir", str(tmp_path / "b")], capsys)
        for name in ("predictions.csv", "metrics.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_preamble_roundtrip_reproduces_file(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", method="kelm", label="kv")
        run_cli(["run", "--config", conf, "--out-dir", str(tmp_path / "a")], capsys)
        first = (tmp_path / "a" / "predictions.csv").read_text()
        embedded = [
            ln[2:] for ln in first.splitlines() if ln.startswith("# ")
        ]
        redo = tmp_path / "redo.conf"
        redo.write_text("\n".join(embedded) + "\n")
        code, _, _ = run_cli(
            ["run", "--config", str(redo), "--out-dir", str(tmp_path / "b")], capsys
        )
        assert code == 0
        assert (tmp_path / "b" / "predictions.csv").read_text() == first

    def test_panel_file_matches_synth_source(self, tmp_path, capsys):
        run_cli(["synth", "--seed", "0", "--out", str(tmp_path / "p")], capsys)
        conf_a = write_config(tmp_path / "a.conf", method="ar", label="x")
        conf_b = write_config(
            tmp_path / "b.conf", method="ar", label="x",
            synth_seed="", panel=str(tmp_path / "p.csv"),
        )
        run_cli(["run", "--config", conf_a, "--out-dir", str(tmp_path / "ra")], capsys)
        run_cli(["run", "--config", conf_b, "--out-dir", str(tmp_path / "rb")], capsys)
        strip = lambda p: [
            ln for ln in p.read_text().splitlines() if not ln.startswith("#")
        ]
        assert strip(tmp_path / "ra" / "predictions.csv") == strip(
            tmp_path / "rb" / "predictions.csv"
        )

    def test_every_method_runs(self, tmp_path, capsys):
        for method in cli.METHODS:
            conf = write_config(
                tmp_path / "c.conf", method=method, k=3, seed=5, label=method
            )
            code, stdout, err = run_cli(
                ["run", "--config", conf, "--out-dir", str(tmp_path / method)], capsys
            )
            assert code == 0, f"{method}: {err}"
            assert f"{method}: n=12" in stdout

    def test_granger_extras_recorded(self, tmp_path, capsys):
        conf = write_config(
            tmp_path / "c.conf", method="kpca+kelm", granger="true",
            p_threshold=0.5, label="g",
        )
        code, _, _ = run_cli(
            ["run", "--config", conf, "--out-dir", str(tmp_path / "out")], capsys
        )
        assert code == 0
        text = (tmp_path / "out" / "predictions.csv").read_text()
        assert "# # granger_retained = " in text

    def test_missing_tags_file(self, tmp_path, capsys):
        run_cli(["synth", "--seed", "0", "--out", str(tmp_path / "p")], capsys)
        os.remove(tmp_path / "p.tags.csv")
        conf = write_config(
            tmp_path / "c.conf", synth_seed="", panel=str(tmp_path / "p.csv")
        )
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "p.tags.csv" in err

    def test_short_test_window_rejected(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", split="2018-11")
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "at least 2" in err

    def test_unknown_mode_rejected(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", mode="X")
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "mode" in err


def write_report(path, label, mape, rmse, da, n=12, echo="src=test"):
    path.write_text(
        f"label = {label}\nn = {n}\nmape_pct = {mape!r}\nrmse = {rmse!r}\n"
        f"mae = 1.0\nda_pct = {da!r}\nconfig_echo = {echo}\n"
    )
    return str(path)


class TestCompare:
    def test_identical_reports_zero_row(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "m1", 5.0, 2.0, 75.0)
        b = write_report(tmp_path / "b.txt", "m2", 5.0, 2.0, 75.0)
        out = tmp_path / "ir.csv"
        code, stdout, _ = run_cli(["compare", a, b, "--out", str(out)], capsys)
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "pair,ir_mape_pct,ir_rmse_pct,ir_da_pct"
        pair, *values = rows[1].split(",")
        assert pair == "m1 vs m2"
        assert all(float(v) == 0.0 for v in values)
        assert stdout.strip().splitlines() == rows

    def test_known_improvement_rate(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "better", 5.44, 2.0, 80.0)
        b = write_report(tmp_path / "b.txt", "worse", 8.09, 4.0, 60.0)
        out = tmp_path / "ir.csv"
        code, _, _ = run_cli(["compare", a, b, "--out", str(out)], capsys)
        assert code == 0
        values = out.read_text().splitlines()[1].split(",")
        assert abs(float(values[1]) - 32.76) < 0.01
        assert abs(float(values[2]) - 50.0) < 1e-9
        assert abs(float(values[3]) - 33.3333) < 0.001

    def test_order_flips_sign(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "better", 5.44, 2.0, 80.0)
        b = write_report(tmp_path / "b.txt", "worse", 8.09, 4.0, 60.0)
        out = tmp_path / "ir.csv"
        run_cli(["compare", b, a, "--out", str(out)], capsys)
        values = out.read_text().splitlines()[1].split(",")
        assert float(values[1]) < 0 and float(values[2]) < 0 and float(values[3]) < 0

    def test_single_report_rejected(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "m", 5.0, 2.0, 75.0)
        code, _, err = run_cli(["compare", a, "--out", str(tmp_path / "o.csv")], capsys)
        assert code == 1
        assert "two report" in err

    def test_odd_count_rejected(self, tmp_path, capsys):
        paths = [
            write_report(tmp_path / f"{i}.txt", f"m{i}", 5.0, 2.0, 75.0) for i in range(3)
        ]
        code, _, err = run_cli(["compare", *paths, "--out", str(tmp_path / "o.csv")], capsys)
        assert code == 1
        assert "even" in err

    def test_mismatched_windows_rejected(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "m1", 5.0, 2.0, 75.0, n=12)
        b = write_report(tmp_path / "b.txt", "m2", 5.0, 2.0, 75.0, n=24)
        code, _, err = run_cli(["compare", a, b, "--out", str(tmp_path / "o.csv")], capsys)
        assert code == 1
        assert "incompatible test windows" in err

    def test_window_dates_compared_when_present(self, tmp_path, capsys):
        a = write_report(
            tmp_path / "a.txt", "m1", 5.0, 2.0, 75.0,
            echo="test_start=2018-01;test_end=2018-12",
        )
        b = write_report(
            tmp_path / "b.txt", "m2", 5.0, 2.0, 75.0,
            echo="test_start=2017-01;test_end=2017-12",
        )
        code, _, err = run_cli(["compare", a, b, "--out", str(tmp_path / "o.csv")], capsys)
        assert code == 1
        assert "incompatible test windows" in err

    def test_dataset_pairs_validates_modes(self, tmp_path, capsys):
        a = write_report(
            tmp_path / "a.txt", "kelm:E", 5.0, 2.0, 75.0, echo="method=kelm;mode=E"
        )
        b = write_report(
            tmp_path / "b.txt", "kelm:G", 6.0, 3.0, 70.0, echo="method=kelm;mode=G"
        )
        code, _, _ = run_cli(
            ["compare", a, b, "--pairing", "dataset-pairs", "--out", str(tmp_path / "o.csv")],
            capsys,
        )
        assert code == 0
        code, _, err = run_cli(
            ["compare", a, b, "--pairing", "method-pairs", "--out", str(tmp_path / "o.csv")],
            capsys,
        )
        assert code == 1
        assert "method-pairs expects" in err

    def test_method_pairs_validates_methods(self, tmp_path, capsys):
        a = write_report(
            tmp_path / "a.txt", "h:H", 5.0, 2.0, 75.0, echo="method=kmeans+kpca+kelm;mode=H"
        )
        b = write_report(
            tmp_path / "b.txt", "n:H", 9.0, 4.0, 50.0, echo="method=naive;mode=H"
        )
        code, _, _ = run_cli(
            ["compare", a, b, "--pairing", "method-pairs", "--out", str(tmp_path / "o.csv")],
            capsys,
        )
        assert code == 0
        code, _, err = run_cli(
            ["compare", a, b, "--pairing", "dataset-pairs", "--out", str(tmp_path / "o.csv")],
            capsys,
        )
        assert code == 1
        assert "dataset-pairs expects" in err

    def test_zero_reference_metric_rejected(self, tmp_path, capsys):
        a = write_report(tmp_path / "a.txt", "m1", 5.0, 2.0, 75.0)
        b = write_report(tmp_path / "b.txt", "m2", 0.0, 2.0, 75.0)
        code, _, err = run_cli(["compare", a, b, "--out", str(tmp_path / "o.csv")], capsys)
        assert code == 1
        assert "improvement rate undefined" in err

    def test_malformed_report_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("label = x\nn = 12\n")
        good = write_report(tmp_path / "g.txt", "m", 5.0, 2.0, 75.0)
        code, _, err = run_cli(
            ["compare", str(bad), good, "--out", str(tmp_path / "o.csv")], capsys
        )
        assert code == 1
        assert "missing fields" in err


class TestExitCodes:
    def test_no_arguments(self, capsys):
        assert run_cli([], capsys)[0] == 1

    def test_unknown_subcommand(self, capsys):
        assert run_cli(["frobnicate"], capsys)[0] == 1

    def test_numerical_error_is_exit_two(self, tmp_path, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalError("matrix went sideways")

        monkeypatch.setattr(cli, "pipeline_fit", boom)
        conf = write_config(tmp_path / "c.conf", method="kpca+kelm")
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 2
        assert "sideways" in err

    def test_wrapped_numerical_error_is_exit_two(self, tmp_path, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise PipelineStageError("cluster", NumericalError("no donors")) from NumericalError(
                "no donors"
            )

        monkeypatch.setattr(cli, "pipeline_fit", boom)
        conf = write_config(tmp_path / "c.conf", method="kmeans+kpca+kelm", k=3)
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 2
        assert "cluster" in err

    def test_validation_stage_error_is_exit_one(self, tmp_path, capsys):
        conf = write_config(tmp_path / "c.conf", method="kmeans+kpca+kelm", k=40)
        code, _, err = run_cli(["run", "--config", conf, "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "cluster" in err
