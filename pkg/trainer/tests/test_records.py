import numpy as np
import pytest

from dottrainer import records


@pytest.fixture(scope="module")
def dataset(flat_dataset_dir):
    return records.load_dataset(flat_dataset_dir)


class TestDataset:
    def test_manifest_loads(self, dataset):
        assert len(dataset.samples) == 8
        assert dataset.band_count == 27
        assert dataset.max_disparity == 64.0

    def test_pattern_labels(self, dataset):
        assert dataset.pattern_labels.shape == (120, 160)
        assert set(np.unique(dataset.pattern_labels)) <= {0, 1, 2}
        # roughly uniform dot colors
        for lab in range(3):
            assert abs(np.mean(dataset.pattern_labels == lab) - 1 / 3) < 0.05

    def test_primaries_shape(self, dataset):
        assert dataset.primaries.shape == (3, 27)
        assert np.all(dataset.primaries >= 0.0)

    def test_illumination_cube_matches_labels(self, dataset):
        cube = dataset.illumination_cube()
        assert cube.shape == (27, 120, 160)
        v, u = 40, 90
        lab = dataset.pattern_labels[v, u]
        np.testing.assert_array_equal(cube[:, v, u], dataset.primaries[lab])

    def test_pattern_pm_coding(self, dataset):
        pm = dataset.pattern_pm()
        assert pm.shape == (3, 120, 160)
        assert set(np.unique(pm)) == {-1.0, 1.0}
        assert np.all(pm.sum(axis=0) == -1.0)  # one +1, two -1

    def test_sample_arrays(self, dataset):
        for s in dataset.samples:
            assert s.image.shape == (120, 160, 3)
            assert s.image.dtype == np.float32
            assert np.all(np.isfinite(s.image)) and np.all(s.image >= 0.0)
            assert s.disparity.shape == (120, 160)
            assert np.all(np.isfinite(s.disparity))
            assert s.reflectance.shape == (120, 160, 27)
            assert s.valid.any()
            # flat scenes are fully covered: ground truth defined everywhere
            assert s.finite.all()
            d = s.disparity[s.valid]
            assert np.all((d > 0.0) & (d <= dataset.max_disparity))

    def test_depth_consistent_with_disparity(self, dataset):
        bf = dataset.rig["baseline_m"] * dataset.rig["focal_px"]
        for s in dataset.samples:
            z = bf / s.disparity[s.valid]
            np.testing.assert_allclose(z, s.depth[s.valid], rtol=1e-5)

    def test_bad_magic_rejected(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(records.DatasetFormatError):
            records.read_planes(bad)
