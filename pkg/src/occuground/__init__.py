"""Voxel instance segmentation via affinity fields and 2D-to-3D visual grounding."""

from .camera import (
    PinholeCamera,
    Ray,
    load_camera,
    pixel_to_ray,
    project_point,
    save_camera,
    traverse_grid,
)
from .cluster import NOISE, ClusterLabels, ClusterParams, dbscan, predicted_centers
from .grid import (
    DEFAULT_BACKGROUND_NAMES,
    DEFAULT_CLASS_TABLE,
    AffinityField,
    DimensionMismatchError,
    GridFormatError,
    GridMeta,
    GridSizeError,
    InstanceMap,
    InstanceRecord,
    LossMask,
    SemanticGrid,
    flatten_index,
    load_affinity,
    load_grid,
    load_instance_map,
    load_loss_mask,
    save_affinity,
    save_grid,
    save_instance_map,
    save_loss_mask,
    unflatten_index,
    voxel_to_world,
    world_to_voxel,
)
from .grounding import (
    BackgroundList,
    GroundingCluster,
    GroundingResult,
    Mask2D,
    NoForegroundError,
    candidate_voxels,
    filter_foreground,
    ground_mask,
    instance_segment,
)
from .labeling import (
    AffinityEval,
    affinity_gt,
    connected_components,
    instance_center,
    masked_mse,
    total_loss,
)
from .synth import (
    PlacementFailure,
    RenderedView,
    Scene,
    SceneSpec,
    default_camera,
    default_scene_spec,
    generate_scene,
    instance_mask,
    load_bundle,
    render_view,
    save_bundle,
    scene_from_grid,
)

__version__ = "0.1.0"
