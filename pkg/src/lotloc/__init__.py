"""Square-landmark self-localization for parking robots.

The pipeline: segment 2D laser scans (DBSCAN with a range-adaptive
radius), fit rectangles to the clusters (search-based L-shape fitting,
closeness criterion), extract their corners, and track the robot pose
with a particle filter against an off-line corner map. A deterministic
parking-lot simulator and an evaluation CLI close the loop.
"""
from lotloc.geometry import (
    LaserScan,
    OdometrySample,
    Point2,
    Pose,
    normalize_angle,
    scan_to_points,
    transform_to_map,
)
from lotloc.segmentation import PointCluster, SegmentationParams, adaptive_radius, segment
from lotloc.lshape import (
    FittedRectangle,
    LShapeParams,
    closeness_score,
    extract_corner_observations,
    fit_rectangle,
    rectangle_corners,
)
from lotloc.landmarks import (
    Landmark,
    LandmarkMap,
    NNIndex,
    build_index,
    build_map_from_world,
    load_map,
    save_map,
    select_visible,
)
from lotloc.mcl import (
    Association,
    FilterParams,
    Particle,
    ParticleFilter,
    ParticleSet,
    associate,
    estimate,
    initialize,
    measurement_update,
    merge_frames,
    motion_update,
    resample,
)

__version__ = "0.1.0"
