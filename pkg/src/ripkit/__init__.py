"""Recursive-inpainting degradation measurement harness.

Iteratively inpaints random grid cells of an image (via a remote
diffusion service or native deterministic fills), measures perceptual
drift from the starting image at fixed inpainted-area checkpoints, and
aggregates the results into plot-ready tables.
"""

from .backends import (
    BackendDescriptor,
    BoundaryMeanBackend,
    ConstantFillBackend,
    HarmonicFillBackend,
    InpaintRequest,
    inpaint,
    make_backend,
)
from .errors import (
    BackendError,
    BackendUnreachableError,
    ConfigurationError,
    DimensionMismatchError,
    ImageDecodeError,
    ImageTooSmallError,
    MetricError,
    ModelLoadError,
    RipkitError,
)
from .image import (
    ABLATION_DROP_BLUE,
    ABLATION_DROP_GREEN,
    ABLATION_DROP_RED,
    ABLATION_GRAYSCALE,
    ABLATION_NONE,
    ABLATIONS,
    WORKING_SIZE,
    ImageBuffer,
    MaskRaster,
    ablate,
    composite,
    letterbox,
    load_image,
    save_image,
    test_card,
)
from .maskgrid import (
    GridSpec,
    MaskSelection,
    ScheduleState,
    build_grid,
    cell_fraction,
    checkpoint_iterations,
    expected_distinct_cells,
    inpaint_fraction,
    next_mask,
    render_mask,
)
from .metrics import (
    FeatureNet,
    FeatureNetSpec,
    MetricResult,
    MetricsConfig,
    MetricSuite,
    SsimParams,
    load_feature_net,
    lpips,
    lpips_distance,
    metric_suite,
    ms_ssim,
    save_feature_net,
    ssim,
)
from .prng import Xoshiro256pp, derive_chain_seed
from .remote import RemoteDiffusionBackend
from .report import (
    ScatterRow,
    StatsSummary,
    aggregate,
    emit,
    flag_degradation,
    mean_ci,
    scatter_export,
)
from .runner import (
    DatasetManifest,
    ExperimentConfig,
    ManifestEntry,
    Trajectory,
    ablation_expand,
    load_trajectories,
    resume,
    run_experiment,
    run_rip_chain,
)

__version__ = "0.1.0"
