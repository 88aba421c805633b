import io
import json
import logging

import numpy as np
import pandas as pd
import pytest

from haloscope_qfi.cli import build_parser, main
from haloscope_qfi.utils import cfg, logger


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestParser(object):
    def test_figure_choices(self):
        args = build_parser().parse_args(["figure", "6a", "--omega-grid=-2:2:5"])
        assert args.figure == "6a"
        assert args.omega_grid == "-2:2:5"

    def test_no_command(self, capsys):
        code, out = run(capsys)
        assert code == 0
        assert "commands" in out

    def test_usage_error_is_a_config_error(self):
        with pytest.raises(SystemExit) as e:
            main(["qfi", "--kappa", "x"])
        assert e.value.code == 3

    def test_verbose_logs_debug(self, capsys):
        code, _ = run(capsys, "qfi", "--source", "vacuum", "--nb", "1", "--verbose")
        assert code == 0
        assert logger.level == logging.DEBUG
        run(capsys, "qfi", "--source", "vacuum", "--nb", "1")
        assert logger.level == logging.WARNING


class TestScalarCommands(object):
    def test_vacuum_qfi(self, capsys):
        code, out = run(capsys, "qfi", "--source", "vacuum", "--nb", "1")
        assert code == 0
        report = json.loads(out)
        assert report["qfi"] == pytest.approx(0.5)
        assert report["method"] == "vacuum-limit"

    def test_tmsv_qfi_below_bound(self, capsys):
        code, out = run(capsys, "qfi", "--source", "tmsv", "--G", "10dB", "--kappa", "0.6")
        report = json.loads(out)
        assert report["qfi"] <= report["ub_ue"]
        assert report["qfi"] >= report["vacuum_limit"]

    def test_bell(self, capsys):
        code, out = run(capsys, "fi", "--receiver", "bell", "--nb", "0.1")
        assert code == 0
        assert json.loads(out)["fi"] == pytest.approx(1.0 / 1.21)

    def test_incompatible_receiver(self, capsys):
        code, _ = run(capsys, "fi", "--receiver", "bell", "--source", "vacuum")
        assert code == 1

    def test_domain_error(self, capsys):
        code, _ = run(capsys, "qfi", "--source", "sv", "--G", "0.5")
        assert code == 1


class TestTableCommands(object):
    def test_spectrum(self, capsys):
        code, out = run(
            capsys, "spectrum", "--strategy", "vl,vac-hom", "--omega-grid=-1:1:3", "--gm-ratio", "2"
        )
        assert code == 0
        frame = pd.read_csv(io.StringIO(out))
        assert list(frame.columns) == ["omega", "vl", "vac-hom"]
        assert len(frame) == 3
        assert (frame["vl"] >= frame["vac-hom"]).all()

    def test_spectrum_json(self, capsys):
        code, out = run(capsys, "spectrum", "--omega-grid=0:1:2", "--format", "json")
        assert code == 0
        assert [row["omega"] for row in json.loads(out)] == [0.0, 1.0]

    def test_scanrate(self, capsys, tmp_path):
        out_file = tmp_path / "scan.csv"
        code, _ = run(
            capsys, "scanrate", "--strategy", "vac-hom", "--engineering", "practical",
            "--gm-ratio", "2", "--out", str(out_file),
        )
        assert code == 0
        frame = pd.read_csv(out_file)
        assert frame["method"].iloc[0] == "closed-form"

    def test_unknown_strategy(self, capsys):
        code, _ = run(capsys, "scanrate", "--strategy", "vac-hom,teleport")
        assert code == 3

    def test_bad_grid(self, capsys):
        code, _ = run(capsys, "spectrum", "--omega-grid", "1:2")
        assert code == 3

    def test_config_file(self, capsys, tmp_path):
        path = tmp_path / "user.yaml"
        path.write_text("haloscope_qfi:\n  cavity:\n    gm_ratio: 2.0\n")
        code, out = run(capsys, "scanrate", "--strategy", "vl", "--config", str(path))
        assert code == 0
        frame = pd.read_csv(io.StringIO(out))
        assert frame["gm_ratio"].iloc[0] == pytest.approx(2.0)

    def test_config_numerics_in_force(self, capsys, tmp_path):
        path = tmp_path / "user.yaml"
        path.write_text("haloscope_qfi:\n  numerics:\n    distribution_relative_step: 0.6\n")
        argv = ["fi", "--receiver", "nulling", "--G", "10dB", "--kappa", "0.6", "--nb", "0.01"]
        code, _ = run(capsys, *argv, "--config", str(path))
        # a step of 0.6 n_b does not fit below n_b
        assert code == 1
        assert cfg["numerics"]["distribution_relative_step"] == pytest.approx(1e-3)
        code, out = run(capsys, *argv)
        assert code == 0
        assert json.loads(out)["fi"] > 0

    def test_config_measurements_in_force(self, capsys, tmp_path):
        path = tmp_path / "user.yaml"
        path.write_text("haloscope_qfi:\n  measurements:\n    sv_nulling: fixed\n")
        argv = ["fi", "--receiver", "nulling", "--G", "10dB", "--kappa", "0.6", "--nb", "0.01"]
        code, out = run(capsys, *argv, "--config", str(path))
        assert code == 0
        fixed = json.loads(out)
        assert fixed["squeeze"] == pytest.approx(0.5 * np.log(10.0))
        _, out = run(capsys, *argv)
        assert json.loads(out)["fi"] >= fixed["fi"] * (1.0 - 1e-9)
        assert cfg["measurements"]["sv_nulling"] == "optimized"

        path.write_text("haloscope_qfi:\n  measurements:\n    sv_nulling: adaptive\n")
        code, _ = run(capsys, *argv, "--config", str(path))
        assert code == 3

    def test_figure(self, capsys):
        code, out = run(capsys, "figure", "6a", "--omega-grid=-2:2:5")
        assert code == 0
        frame = pd.read_csv(io.StringIO(out))
        assert len(frame) == 5
        assert "tmsv-qfi" in frame.columns


class TestChecks(object):
    def test_oracle_passes_at_default_cutoffs(self, capsys):
        code, out = run(capsys, "oracle-check")
        assert code == 0
        report = json.loads(out)
        assert report["passed"]
        assert report["worst_deviation"] < 1e-3

    def test_oracle_truncation_fails(self, capsys):
        code, out = run(capsys, "oracle-check", "--cutoff", "5")
        assert code == 2
        report = json.loads(out)
        assert not report["passed"]
        assert any("tail_mass" in row for row in report["checks"])

    def test_distributed(self, capsys):
        code, out = run(capsys, "distributed-check", "--kappa", "0.7", "--G", "10dB")
        assert code == 0
        report = json.loads(out)
        assert report["passed"]
        assert [r["m"] for r in report["reports"]] == [2, 3, 5]


class TestSampling(object):
    def test_needs_seed(self, capsys):
        code, _ = run(capsys, "sample", "--nb", "0.1")
        assert code == 3

    def test_deterministic(self, capsys, tmp_path):
        argv = ["sample", "--seed", "7", "--nb", "0.1", "--samples", "500", "--replications", "4"]
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        code, out = run(capsys, *argv, "--out", str(first))
        assert code == 0
        summary = json.loads(out)
        assert summary["fisher_information"] == pytest.approx(1.0 / 0.11, rel=1e-6)
        run(capsys, *argv, "--out", str(second))
        assert first.read_text() == second.read_text()
        assert len(pd.read_csv(first)) == 4

    def test_run_section_from_config(self, capsys, tmp_path):
        path = tmp_path / "user.yaml"
        path.write_text("haloscope_qfi:\n  run:\n    seed: 3\n    samples: 300\n    replications: 3\n")
        out_file = tmp_path / "runs.csv"
        code, out = run(capsys, "sample", "--nb", "0.1", "--config", str(path), "--out", str(out_file))
        assert code == 0
        summary = json.loads(out)
        assert (summary["seed"], summary["samples"], summary["replications"]) == (3, 300, 3)
        assert len(pd.read_csv(out_file)) == 3
