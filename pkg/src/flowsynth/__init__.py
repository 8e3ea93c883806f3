"""Depth-driven synthetic optical flow and dataset tooling.

Turns single images with precomputed depth maps and segmentation masks into
image-flow-mask training triplets, builds and mixes dataset manifests, and
scores segmentation output with the usual region/boundary/saliency metrics.
"""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    DataError,
    FlowSynthError,
    FormatError,
    InputError,
)
from .model import (
    BinaryMask,
    DepthMap,
    FlowRgb,
    MotionField,
    SampleRecord,
    SynthParams,
    dims_match,
)
from .synthesis import (
    RngStream,
    draw_params,
    normalize_depth,
    reverse_depth,
    scale_motion,
    shift_motion,
    synthesize_motion,
)
from .render import (
    COLOR_WHEEL,
    RenderResult,
    make_color_wheel,
    normalize_flow,
    render_pipeline,
    uv_to_rgb,
)
from .raster_io import (
    read_depth,
    read_depth_auto,
    read_flo,
    read_mask,
    read_pfm,
    read_png_rgb,
    write_flo,
    write_mask,
    write_pfm,
    write_png_rgb,
)
from .dataset import (
    DatasetStats,
    Manifest,
    SynthesisRun,
    build_real_manifest,
    build_synthetic_manifest,
    compute_stats,
    merge_manifests,
    mixed_sampler,
    pair_frames,
    rebase_manifest,
)
from .metrics import (
    EvalReport,
    SaliencyScore,
    SequenceScore,
    baseline_segment,
    boundary_f,
    evaluate_dataset,
    f_beta,
    g_mean,
    mae,
    region_j,
)

__all__ = [
    "__version__",
    "BinaryMask",
    "COLOR_WHEEL",
    "ConsistencyError",
    "DataError",
    "DatasetStats",
    "DepthMap",
    "EvalReport",
    "FlowRgb",
    "FlowSynthError",
    "FormatError",
    "InputError",
    "Manifest",
    "MotionField",
    "RenderResult",
    "RngStream",
    "SaliencyScore",
    "SampleRecord",
    "SequenceScore",
    "SynthParams",
    "SynthesisRun",
    "baseline_segment",
    "boundary_f",
    "build_real_manifest",
    "build_synthetic_manifest",
    "compute_stats",
    "dims_match",
    "draw_params",
    "evaluate_dataset",
    "f_beta",
    "g_mean",
    "mae",
    "make_color_wheel",
    "merge_manifests",
    "mixed_sampler",
    "normalize_depth",
    "normalize_flow",
    "pair_frames",
    "read_depth",
    "read_depth_auto",
    "read_flo",
    "read_mask",
    "read_pfm",
    "read_png_rgb",
    "rebase_manifest",
    "region_j",
    "render_pipeline",
    "reverse_depth",
    "scale_motion",
    "shift_motion",
    "synthesize_motion",
    "uv_to_rgb",
    "write_flo",
    "write_mask",
    "write_pfm",
    "write_png_rgb",
]
