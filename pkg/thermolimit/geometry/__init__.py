"""Domain shapes, regularity predicates and the simplex tiling average."""

from .models import (
    CellClassification,
    CollarProfile,
    ConeReport,
    ConeWitness,
    FisherEstimate,
    GroupElement,
    HaarTest,
    TilingIdentityReport,
    TilingSpec,
)
from .regularity import (
    collar_profile,
    collar_volume,
    cone_check,
    fibonacci_directions,
    fisher_a_estimate,
    regularized_volume,
    regularized_volume_scan,
)
from .shapes import (
    Ball,
    CellUnion,
    Cube,
    Cuboid,
    DomainShape,
    Intersection,
    RigidTransform,
    Simplex,
    aligned_cube,
    check_rotation,
    regular_tetrahedron,
    shape_signed_distance,
)
from .tiling import (
    boundary_scaling,
    classify_cells,
    haar_angle_ks,
    inclusion_radius,
    sample_group_element,
    sample_group_elements,
    tiling_volume_identity,
    translate_counts,
)

__all__ = [
    "Ball",
    "CellClassification",
    "CellUnion",
    "CollarProfile",
    "ConeReport",
    "ConeWitness",
    "Cube",
    "Cuboid",
    "DomainShape",
    "FisherEstimate",
    "GroupElement",
    "HaarTest",
    "Intersection",
    "RigidTransform",
    "Simplex",
    "TilingIdentityReport",
    "TilingSpec",
    "aligned_cube",
    "boundary_scaling",
    "check_rotation",
    "classify_cells",
    "collar_profile",
    "collar_volume",
    "cone_check",
    "fibonacci_directions",
    "fisher_a_estimate",
    "haar_angle_ks",
    "inclusion_radius",
    "regular_tetrahedron",
    "regularized_volume",
    "regularized_volume_scan",
    "sample_group_element",
    "sample_group_elements",
    "shape_signed_distance",
    "tiling_volume_identity",
    "translate_counts",
]
