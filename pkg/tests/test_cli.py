import json
import os

import pytest

from causaltext.cli import main
from causaltext.dataset_io import read_dataset


def run_cli(*argv):
    return main(list(argv))


class TestGenerate:
    def test_trivial_dataset(self, tmp_path, capsys):
        out = str(tmp_path / "d.txt")
        code = run_cli(
            "generate", "--dgp", "trivial", "--tau-word", "0.52", "--delta-word", "0.7",
            "--n", "300", "--seed", "0", "--out", out,
        )
        assert code == 0
        ds = read_dataset(out)
        assert len(ds.records) == 300
        assert ds.metadata["dgp"] == "trivial"

    def test_rerun_byte_identical(self, tmp_path):
        a, b = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
        for out in (a, b):
            assert run_cli(
                "generate", "--dgp", "trivial", "--tau-word", "0.1", "--delta-word",
                "0.4", "--n", "200", "--seed", "7", "--out", out,
            ) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_lda_requires_context(self, tmp_path, capsys):
        code = run_cli(
            "generate", "--dgp", "lda", "--tau-word", "0.1", "--delta-word", "0.1",
            "--n", "200", "--out", str(tmp_path / "x.txt"),
        )
        assert code == 2

    def test_sequential_small(self, tmp_path):
        out = str(tmp_path / "s.txt")
        code = run_cli(
            "generate", "--dgp", "sequential", "--tau-word", "0.1", "--delta-word",
            "0.5", "--tau-context", "0.2", "--delta-context", "0.5", "--n", "120",
            "--corpus-docs", "300", "--max-len", "12", "--out", out,
        )
        assert code == 0
        assert len(read_dataset(out).records) == 120


class TestTrainLdaAndReuse:
    def test_train_and_generate(self, tmp_path):
        model_path = str(tmp_path / "model.json")
        assert run_cli(
            "train-lda", "--k", "4", "--iters", "20", "--corpus-docs", "300",
            "--out", model_path,
        ) == 0
        out = str(tmp_path / "lda.txt")
        assert run_cli(
            "generate", "--dgp", "lda", "--tau-word", "0.1", "--delta-word", "0.3",
            "--tau-context", "0.1", "--delta-context", "0.3", "--n", "150",
            "--lda-model", model_path, "--out", out,
        ) == 0
        ds = read_dataset(out)
        assert len(ds.records) == 150


class TestClassifyAndEstimate:
    @pytest.fixture()
    def dataset_file(self, tmp_path):
        out = str(tmp_path / "d.txt")
        assert run_cli(
            "generate", "--dgp", "trivial", "--tau-word", "0.52", "--delta-word",
            "0.7", "--n", "600", "--seed", "3", "--out", out,
        ) == 0
        return out

    def test_classify_reports_accuracy(self, dataset_file, capsys):
        assert run_cli("classify", "--data", dataset_file, "--target", "u") == 0
        output = capsys.readouterr().out
        assert "test_accuracy=" in output

    def test_estimate_emits_csv_row(self, dataset_file, capsys):
        assert run_cli(
            "estimate", "--method", "measurement", "--data", dataset_file,
            "--labeled", "200", "--seed", "0",
        ) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("method,dgp,structured_seed")
        fields = lines[1].split(",")
        assert fields[0] == "measurement"
        assert float(fields[9]) == pytest.approx(float(fields[9]))

    def test_estimate_baseline(self, dataset_file, capsys):
        assert run_cli("estimate", "--method", "naive", "--data", dataset_file) == 0
        line = capsys.readouterr().out.strip().splitlines()[1]
        assert line.startswith("naive,")

    def test_missing_data_file_fails(self, capsys):
        assert run_cli("estimate", "--method", "ipw", "--data", "/no/such/file") == 1


class TestGridCli:
    def test_grid_runs_and_is_deterministic(self, tmp_path):
        config = {
            "dgp": "trivial",
            "cells": [{"tau_word": 0.52, "delta_word": 0.7}],
            "structured_seeds": [0],
            "text_seeds": [0],
            "n_records": 400,
            "methods": ["ipw"],
            "master_seed": 0,
        }
        cfg_path = str(tmp_path / "cfg.json")
        with open(cfg_path, "w") as f:
            json.dump(config, f)
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out_a, out_b):
            assert run_cli("grid", "--config", cfg_path, "--out-dir", out) == 0
        for name in ("report.json", "runs.csv", "cells.csv"):
            assert open(os.path.join(out_a, name), "rb").read() == \
                open(os.path.join(out_b, name), "rb").read()

    def test_report_subcommand_reuses_runs(self, tmp_path):
        config = {
            "dgp": "trivial",
            "cells": [{"tau_word": 0.52, "delta_word": 0.7}],
            "structured_seeds": [0],
            "text_seeds": [0],
            "n_records": 400,
            "methods": ["ipw"],
            "master_seed": 0,
        }
        cfg_path = str(tmp_path / "cfg.json")
        with open(cfg_path, "w") as f:
            json.dump(config, f)
        out = str(tmp_path / "out")
        assert run_cli("grid", "--config", cfg_path, "--out-dir", out) == 0
        first = open(os.path.join(out, "runs.csv"), "rb").read()
        assert run_cli("report", "--config", cfg_path, "--out-dir", out) == 0
        assert open(os.path.join(out, "runs.csv"), "rb").read() == first


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert run_cli("frobnicate") == 2

    def test_unknown_flag(self):
        assert run_cli("generate", "--nope") == 2

    def test_help_everywhere(self, capsys):
        for sub in ("generate", "train-lda", "classify", "estimate", "grid",
                    "ablate", "report"):
            assert run_cli(sub, "--help") == 0
            assert "--" in capsys.readouterr().out
