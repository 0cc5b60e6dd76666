import json
import subprocess
import sys

import pytest

RIG = {"baseline_m": 0.1, "focal_px": 150.0, "cx": 80.0, "cy": 60.0,
       "width": 160, "height": 120, "max_disparity_px": 64.0}


def render_dataset(out_dir, scene_count=8, objects=(0, 0), master_seed=77):
    """Render a dataset with the chromadot CLI (the only coupling point)."""
    cfg = {
        "format": 1,
        "scene_count": scene_count,
        "rig": RIG,
        "pattern_seed": 3,
        "master_seed": master_seed,
        "corpus": {"random": {"count": 12, "seed": 5}},
        "objects_per_scene": list(objects),
    }
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    ds = out_dir / "ds"
    subprocess.run([sys.executable, "-m", "chromadot.cli", "render-dataset",
                    "--config", str(cfg_path), "--out", str(ds)], check=True)
    return ds


@pytest.fixture(scope="session")
def flat_dataset_dir(tmp_path_factory):
    """Eight flat-plane scenes at 160x120 (the overfit/parity fixture)."""
    return render_dataset(tmp_path_factory.mktemp("flat"), scene_count=8,
                          objects=(0, 0))


@pytest.fixture(scope="session")
def mixed_dataset_dir(tmp_path_factory):
    """Two scenes with floating objects (shape/robustness checks)."""
    return render_dataset(tmp_path_factory.mktemp("mixed"), scene_count=2,
                          objects=(1, 2), master_seed=9)
