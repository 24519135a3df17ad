"""triview: multi-view 3D landmark triangulation.

Differentiable weighted DLT triangulation, a RANSAC + Huber robust
baseline, volumetric localization on voxel grids with three aggregation
schemes, confidence-weight fitting by gradient descent, synthetic
multi-camera scenes with exact ground truth, and MPJPE evaluation —
plus a CLI (``triview``) tying it all together.
"""

from .errors import (BadConfidence, BadFileFormat, DegenerateGeometry,
                     DegenerateGradient, DegenerateProjection, DivergedFit,
                     EmptyDataset, JointOutsideGrid, NoConsensus,
                     NoValidJoints, PelvisMissing, PointAtInfinity,
                     SingularCamera, SpecMismatch, TooFewViews, TriviewError)
from .evaluation import Pose3D, camera_subset_sweep, mpjpe
from .geometry import (Camera, CropTransform, Rig, apply_crop, compose,
                       decompose, heatmap_projection, invert_crop,
                       load_cameras, project, project_points, save_cameras)
from .heatmap import (localize_2d, render_gaussian, soft_argmax_2d,
                      spatial_softmax)
from .learn import (ConfidenceWeights, FitConfig,
                    evaluate_weighted_vs_unweighted, fit_weights)
from .losses import LossConfig, gt_voxel_index, soft_mse_loss, vol_l1_loss
from .pipeline import (algebraic_poses, ransac_poses, volumetric_pose,
                       volumetric_poses)
from .robust import RansacConfig, huber, ransac_triangulate
from .synth import (Frame, SceneConfig, generate_frames, make_ring_rig,
                    render_frame_heatmaps)
from .triangulation import (Observation, TriangulationResult, triangulate,
                            triangulate_backward)
from .volumetric import (VoxelGridSpec, aggregate, bilinear_sample,
                         localize_3d, soft_argmax_3d, unproject_view,
                         volumetric_softmax)

__version__ = "0.1.0"

__all__ = [
    "Camera", "CropTransform", "Rig", "compose", "decompose", "project",
    "project_points", "apply_crop", "invert_crop", "heatmap_projection",
    "save_cameras", "load_cameras",
    "spatial_softmax", "soft_argmax_2d", "localize_2d", "render_gaussian",
    "Observation", "TriangulationResult", "triangulate",
    "triangulate_backward",
    "RansacConfig", "huber", "ransac_triangulate",
    "VoxelGridSpec", "bilinear_sample", "unproject_view", "aggregate",
    "volumetric_softmax", "soft_argmax_3d", "localize_3d",
    "LossConfig", "soft_mse_loss", "gt_voxel_index", "vol_l1_loss",
    "ConfidenceWeights", "FitConfig", "fit_weights",
    "evaluate_weighted_vs_unweighted",
    "SceneConfig", "Frame", "make_ring_rig", "generate_frames",
    "render_frame_heatmaps",
    "Pose3D", "mpjpe", "camera_subset_sweep",
    "algebraic_poses", "ransac_poses", "volumetric_pose", "volumetric_poses",
    "TriviewError", "TooFewViews", "DegenerateGeometry", "PointAtInfinity",
    "DegenerateGradient", "NoConsensus", "SpecMismatch", "BadConfidence",
    "JointOutsideGrid", "NoValidJoints", "PelvisMissing", "EmptyDataset",
    "DivergedFit", "BadFileFormat", "SingularCamera", "DegenerateProjection",
]
