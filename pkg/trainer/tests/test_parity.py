"""Loss parity against the renderer's loss kernels.

The trainer dumps the untrained pipeline's (D_hat, R_hat) for one sample
as plane files, the renderer CLI evaluates them (`chromadot eval`), and
the trainer's own loss module is run on the very same dumped tensors in
float64.  Every term must agree to 1e-5 relative.
"""

import json
import subprocess
import sys

import numpy as np
import pytest
import torch

from dottrainer import ops, records
from dottrainer.cli import cli_dispatch
from dottrainer.losses import LossWeights, total_loss
from dottrainer.train import batch_from_samples

REL_TOL = 1e-5


@pytest.fixture(scope="module")
def dump_and_report(flat_dataset_dir, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("parity")
    pred = tmp / "pred"
    assert cli_dispatch(["dump-predictions", "--dataset", str(flat_dataset_dir),
                         "--out", str(pred), "--sample-index", "0",
                         "--seed", "11", "--width-scale", "0.25"]) == 0
    report_path = tmp / "report.json"
    subprocess.run([sys.executable, "-m", "chromadot.cli", "eval",
                    "--pred", str(pred),
                    "--gt", str(flat_dataset_dir / "sample_0000"),
                    "--out", str(report_path)], check=True)
    return pred, json.loads(report_path.read_text())


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-30)


class TestLossParity:
    def test_step0_terms_match_reference(self, flat_dataset_dir, dump_and_report):
        pred, payload = dump_and_report
        dataset = records.load_dataset(flat_dataset_dir)
        batch = batch_from_samples([dataset.samples[0]], dtype=torch.float64)

        d_hat = torch.from_numpy(
            records.read_planes(pred / "disparity.bin")[0]).double().unsqueeze(0)
        r_hat = torch.from_numpy(
            records.read_planes(pred / "reflectance.bin")).double().unsqueeze(0)

        i_lcn = ops.lcn(batch.image)
        pm = torch.from_numpy(dataset.pattern_pm()).double().unsqueeze(0)
        report = total_loss(d_hat, r_hat, i_lcn, pm, batch.disparity,
                            batch.reflectance, batch.valid, LossWeights(),
                            finite_disparity=batch.finite)
        ours = report.detached()
        theirs = payload["losses"]
        for key in ("l_d", "l_de", "l_p", "l_r", "l_re", "total"):
            assert rel_err(ours[key], theirs[key]) < REL_TOL, \
                f"{key}: trainer {ours[key]} vs reference {theirs[key]}"

    def test_nontrivial_terms(self, dump_and_report):
        # guard against vacuous parity: an untrained net must disagree with
        # the ground truth in every term
        _, payload = dump_and_report
        losses = payload["losses"]
        for key in ("l_d", "l_de", "l_p", "l_r", "l_re"):
            assert losses[key] > 0.0

    def test_weighted_total_recombines(self, dump_and_report):
        _, payload = dump_and_report
        w = payload["weights"]
        lo = payload["losses"]
        total = (lo["l_d"] + w["w_de"] * lo["l_de"] + w["w_p"] * lo["l_p"]
                 + w["w_r"] * lo["l_r"] + w["w_re"] * lo["l_re"])
        assert rel_err(total, lo["total"]) < 1e-12
