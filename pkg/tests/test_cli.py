"""Command line interface: artifacts, stdout contracts, exit codes."""

import numpy as np
import pytest

from emov2.cli import main
from emov2.configfile import save_config
from emov2.tensor import load_tensor, save_tensor
from emov2.train import toy_config


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def toy_ini(workdir):
    path = workdir / "toy.ini"
    save_config(path, toy_config())
    return str(path)


class TestCost:
    def test_writes_csv_and_figure(self, workdir, capsys):
        assert main(["cost", "--preset", "emov2-1m", "--res", "64"]) == 0
        lines = (workdir / "cost.csv").read_text().strip().splitlines()
        assert lines[0] == "name,kind,params,flops,mpl"
        assert lines[-1].startswith("TOTAL,")
        assert (workdir / "cost.png").stat().st_size > 0
        out = capsys.readouterr().out
        assert "params 1458598 (1.46M)" in out

    def test_custom_out_path(self, workdir):
        target = workdir / "sub" / "model.csv"
        target.parent.mkdir()
        assert main(["cost", "--preset", "emov2-2m", "--out", str(target)]) == 0
        assert target.exists() and target.with_suffix(".png").exists()


class TestCheck:
    def test_fast_suite_passes(self, workdir, capsys):
        assert main(["check", "config"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
        summary = out.strip().splitlines()[-1]
        total = summary.split("/")[0]
        assert summary.endswith("checks passed") and int(total) > 0


class TestForward:
    def test_random_input_from_config_file(self, workdir, toy_ini, capsys):
        assert main(["forward", "--config", toy_ini, "--res", "64"]) == 0
        logits = load_tensor(workdir / "logits.emot")
        assert logits.shape == (1, 4)
        out = capsys.readouterr().out
        assert "stage1 (1, 8, 16, 16)" in out
        assert "stage4 (1, 24, 2, 2)" in out

    def test_tensor_file_input_batch(self, workdir, toy_ini):
        x = np.random.default_rng(0).normal(size=(2, 3, 32, 32))
        save_tensor(workdir / "x.emot", x)
        assert main(["forward", "--config", toy_ini, "--input", "x.emot",
                     "--out", "y.emot"]) == 0
        assert load_tensor(workdir / "y.emot").shape == (2, 4)

    def test_forward_deterministic_in_seed(self, workdir, toy_ini):
        main(["forward", "--config", toy_ini, "--res", "32", "--out", "a.emot"])
        main(["forward", "--config", toy_ini, "--res", "32", "--out", "b.emot"])
        np.testing.assert_array_equal(load_tensor(workdir / "a.emot"),
                                      load_tensor(workdir / "b.emot"))

    def test_strict_windows_rejects_ragged_input(self, workdir, toy_ini, capsys):
        assert main(["forward", "--config", toy_ini, "--res", "100"]) == 2
        assert "--pad-windows" in capsys.readouterr().err

    def test_pad_windows_accepts_ragged_input(self, workdir, toy_ini):
        assert main(["forward", "--config", toy_ini, "--res", "100",
                     "--pad-windows"]) == 0

    def test_non_image_tensor_rejected(self, workdir, toy_ini):
        save_tensor(workdir / "flat.emot", np.zeros((4, 7)))
        assert main(["forward", "--config", toy_ini, "--input", "flat.emot"]) == 2


class TestTrainToy:
    def test_artifact_trio(self, workdir, capsys):
        assert main(["train-toy", "--steps", "4", "--out", "run.csv"]) == 0
        rows = (workdir / "run.csv").read_text().strip().splitlines()
        assert rows[0] == "step,loss" and len(rows) == 5
        assert (workdir / "run.png").exists()
        assert (workdir / "run.emow").exists()
        assert "in 4 steps" in capsys.readouterr().out

    def test_zero_steps_is_usage_error(self, workdir):
        assert main(["train-toy", "--steps", "0"]) == 2


class TestErf:
    def test_spanning_artifacts(self, workdir, capsys):
        assert main(["erf", "--layer", "spanning", "--map", "8", "--window", "4",
                     "--depth", "2"]) == 0
        rows = (workdir / "erf.csv").read_text().strip().splitlines()
        assert rows[0] == "depth,coverage"
        # layer 1: 4x4 tile plus stride-2 lattice, 4 pixels shared
        coverages = [float(r.split(",")[1]) for r in rows[1:]]
        assert coverages == [28 / 64, 1.0]
        assert (workdir / "erf.png").exists()
        assert "full coverage at depth 2" in capsys.readouterr().out

    def test_pgm_format(self, workdir):
        main(["erf", "--layer", "spanning", "--map", "8", "--window", "4",
              "--depth", "2", "--out", "span.csv"])
        blob = (workdir / "span_d2.pgm").read_bytes()
        header = b"P5\n8 8\n255\n"
        assert blob.startswith(header)
        payload = blob[len(header):]
        assert len(payload) == 64 and set(payload) == {255}

    def test_window_must_divide_map(self, workdir, capsys):
        assert main(["erf", "--layer", "neighbor", "--map", "10",
                     "--window", "4"]) == 2
        assert "does not divide" in capsys.readouterr().err


class TestUsageAndIo:
    def test_both_model_sources_rejected(self, workdir, toy_ini):
        assert main(["cost", "--preset", "emov2-1m", "--config", toy_ini]) == 2

    def test_no_model_source_rejected(self, workdir):
        assert main(["cost"]) == 2

    def test_unknown_preset_is_argparse_usage(self, workdir):
        with pytest.raises(SystemExit) as err:
            main(["cost", "--preset", "emov2-9m"])
        assert err.value.code == 2

    def test_missing_input_file_is_io(self, workdir, toy_ini):
        assert main(["forward", "--config", toy_ini, "--input", "absent.emot"]) == 3

    def test_corrupt_tensor_is_io(self, workdir, toy_ini):
        (workdir / "junk.emot").write_text("not a tensor")
        assert main(["forward", "--config", toy_ini, "--input", "junk.emot"]) == 3

    def test_broken_config_file_reports_location(self, workdir, capsys):
        from emov2.configfile import emit_config
        text = emit_config(toy_config()).replace("[stem]", "[stem]\nwidth = wide", 1)
        (workdir / "bad.ini").write_text(text)
        assert main(["cost", "--config", "bad.ini"]) == 2
        assert "[stem] width" in capsys.readouterr().err

    def test_log_level_validated(self, workdir, monkeypatch, capsys):
        monkeypatch.setenv("EMOV2_LOG", "chatty")
        assert main(["check", "config"]) == 2
        assert "EMOV2_LOG" in capsys.readouterr().err
