import numpy as np
import pytest

import chromadot as cd


@pytest.fixture(scope="session")
def grid():
    return cd.DEFAULT_GRID


@pytest.fixture(scope="session")
def primaries(grid):
    return cd.default_primaries(grid)


@pytest.fixture(scope="session")
def sensitivity(grid):
    return cd.default_sensitivity(grid)


@pytest.fixture(scope="session")
def desk_rig():
    """Small rig used by most rendering tests (fast, same geometry rules)."""
    return cd.RectifiedRig(baseline_m=0.1, focal_px=150.0, principal_point=(80.0, 60.0),
                           width=160, height=120, max_disparity_px=64.0)


@pytest.fixture(scope="session")
def full_rig():
    return cd.RectifiedRig(baseline_m=0.1, focal_px=500.0, principal_point=(320.0, 240.0),
                           width=640, height=480, max_disparity_px=192.0)


@pytest.fixture(scope="session")
def desk_pattern(desk_rig):
    return cd.generate_pattern(desk_rig.width, desk_rig.height, seed=3)


@pytest.fixture(scope="session")
def corpus(grid):
    return cd.make_reflectance_corpus(16, grid, seed=1)


@pytest.fixture(scope="session")
def plane_sample(desk_rig, desk_pattern, primaries, sensitivity, corpus, grid):
    """Noiseless fronto-parallel plane at 0.45 m with a smooth reflectance."""
    scene = cd.Scene((cd.Plane("z", 0.45),), (corpus[0],), grid=grid)
    return cd.render_scene(scene, desk_rig, desk_pattern, primaries, sensitivity)
