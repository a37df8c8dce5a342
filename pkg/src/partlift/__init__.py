"""Depth-guided lifting of per-part 2D maps and compositional volume rendering
of feature maps and semantic masks."""

from .analysis import (
    LAMBDA_DS,
    d_mean,
    d_mean_masked,
    depth_smoothness_grad,
    depth_smoothness_loss,
    diff_map,
    finite_diff_check,
    regularized_loss_term,
)
from .lifting import (
    FusedVolume,
    GridGeom,
    LiftedPartVolume,
    MappingFn,
    fuse_at,
    lift_part_set,
    materialize,
    psi,
    sample_trilinear,
    voxel,
)
from .maskrender import (
    MaskWeightMode,
    argmax_labels,
    compose_hires_mask,
    init_mask_pixel,
    softmax_mask,
    upsample_bilinear,
)
from .part_model import (
    DepthMode,
    PartId,
    PartKind,
    PartMaps2D,
    PartSet,
    SynthConfig,
    absolute_depth,
    load_part_set,
    occlusion_scene,
    save_part_set,
    synth_part_set,
)
from .raycam import FRONTAL, CameraConfig, CameraPose, generate_rays, place_samples, sample_pose
from .renderer import RenderOptions, nerf_weights, render_frame, render_pixel_feature, transmittance

__version__ = "0.1.0"

__all__ = [
    "CameraConfig",
    "CameraPose",
    "DepthMode",
    "FRONTAL",
    "FusedVolume",
    "GridGeom",
    "LAMBDA_DS",
    "LiftedPartVolume",
    "MappingFn",
    "MaskWeightMode",
    "PartId",
    "PartKind",
    "PartMaps2D",
    "PartSet",
    "RenderOptions",
    "SynthConfig",
    "absolute_depth",
    "argmax_labels",
    "compose_hires_mask",
    "d_mean",
    "d_mean_masked",
    "depth_smoothness_grad",
    "depth_smoothness_loss",
    "diff_map",
    "finite_diff_check",
    "fuse_at",
    "generate_rays",
    "init_mask_pixel",
    "lift_part_set",
    "load_part_set",
    "materialize",
    "nerf_weights",
    "occlusion_scene",
    "place_samples",
    "psi",
    "regularized_loss_term",
    "render_frame",
    "render_pixel_feature",
    "sample_pose",
    "sample_trilinear",
    "save_part_set",
    "softmax_mask",
    "synth_part_set",
    "transmittance",
    "upsample_bilinear",
    "voxel",
]
