"""chromadot: single-shot hyperspectral-depth toolchain around color-dot
structured light — spectral scene rendering with ground truth, imaging
operators and loss kernels, basis-model spectral reconstruction and
evaluation utilities."""

from .spectral import (
    DEFAULT_GRID,
    CameraSensitivity,
    GridMismatchError,
    ProjectorPrimaries,
    Spectrum,
    WavelengthGrid,
    default_primaries,
    default_sensitivity,
    render_pixel,
    shading_factor,
)
from .pattern import (
    DotPattern,
    IlluminationField,
    generate_pattern,
    load_pattern,
    pattern_to_illumination,
    save_pattern,
)
from .render import (
    DatasetConfig,
    Plane,
    RectifiedRig,
    Sample,
    Scene,
    Sphere,
    TriangleMesh,
    depth_from_disparity,
    disparity_from_depth,
    generate_dataset,
    make_reflectance_corpus,
    render_scene,
    trace_camera_ray,
)
from .imageops import (
    lcn,
    shadow_binarize,
    smooth_census_distance,
    sobel_gradients,
    warp_by_disparity,
)
from .losses import (
    EmptyMaskError,
    LossReport,
    LossWeights,
    loss_disparity,
    loss_edges,
    loss_pattern,
    loss_reflectance,
    numeric_gradient_check,
    total_loss,
)
from .basis import (
    BasisModel,
    build_system_matrix,
    condition_number,
    condition_number_reduced,
    fit_basis,
    reconstruct_image,
    reconstruct_window,
)
from .evalio import (
    MetricsReport,
    SampleRecord,
    depth_metrics,
    export_point_cloud,
    load_sample,
    reflectance_metrics,
    reflectance_to_srgb,
    save_sample,
)

__version__ = "0.1.0"
