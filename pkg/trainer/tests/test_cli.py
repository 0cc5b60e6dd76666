import json

import numpy as np
import pytest

from dottrainer.cli import cli_dispatch
from dottrainer.records import read_planes


class TestTrainCommand:
    def test_short_train_writes_outputs(self, flat_dataset_dir, tmp_path, capsys):
        out = tmp_path / "run"
        code = cli_dispatch(["train", "--dataset", str(flat_dataset_dir),
                             "--out", str(out), "--steps", "2",
                             "--batch-size", "2", "--learning-rate", "1e-3",
                             "--seed", "1", "--width-scale", "0.25"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["steps"] == 2
        assert (out / "checkpoint.pt").exists()
        assert len((out / "losses.jsonl").read_text().splitlines()) == 2

    def test_unknown_flag_exits_2(self):
        assert cli_dispatch(["train", "--bogus", "1"]) == 2

    def test_missing_dataset_is_reported(self, tmp_path, capsys):
        code = cli_dispatch(["train", "--dataset", str(tmp_path / "nope"),
                             "--out", str(tmp_path / "out"), "--steps", "1"])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert "error" in err


class TestDumpPredictions:
    def test_dump_shapes_and_determinism(self, flat_dataset_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli_dispatch(["dump-predictions", "--dataset",
                                 str(flat_dataset_dir), "--out", str(out),
                                 "--seed", "5", "--width-scale", "0.25"])
            assert code == 0
            outs.append(out)
        d0 = read_planes(outs[0] / "disparity.bin")
        d1 = read_planes(outs[1] / "disparity.bin")
        assert d0.shape == (1, 120, 160)
        assert np.array_equal(d0, d1)
        r0 = read_planes(outs[0] / "reflectance.bin")
        assert r0.shape == (27, 120, 160)
        assert np.all((r0 >= 0.0) & (r0 <= 1.0))

    def test_dump_from_checkpoint(self, flat_dataset_dir, tmp_path, capsys):
        run = tmp_path / "run"
        assert cli_dispatch(["train", "--dataset", str(flat_dataset_dir),
                             "--out", str(run), "--steps", "1",
                             "--batch-size", "2", "--width-scale", "0.25"]) == 0
        capsys.readouterr()
        out = tmp_path / "pred"
        assert cli_dispatch(["dump-predictions", "--dataset",
                             str(flat_dataset_dir), "--out", str(out),
                             "--checkpoint", str(run / "checkpoint.pt")]) == 0
        assert (out / "depth.bin").exists()
