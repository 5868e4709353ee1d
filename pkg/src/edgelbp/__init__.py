"""Local binary patterns on surface tessellations.

Rings around each mesh vertex are traced where spheres of increasing radius
cross the mesh edges; the pattern of the color field along those rings is
encoded per vertex and aggregated into a compact histogram descriptor that
is compared across meshes for color-pattern retrieval.
"""

from .mesh_io import (
    MeshLoadError,
    ScalarField,
    SurfaceMesh,
    compute_scalar_field,
    load_mesh,
    srgb_to_lab_l,
    write_ply,
)
from .rings import (
    RingCurve,
    RingExtractor,
    RingSamples,
    VertexRingSet,
    align_inner_start,
    edge_sphere_intersection,
    extract_rings,
    orient_ring,
    radii_schedule,
    resample_ring,
    select_start_point,
    start_field_export,
)
from .descriptor import (
    BaselineHistogram,
    Descriptor,
    EdgeLbpParams,
    NoAdmissibleVertices,
    baseline_histogram,
    compute_descriptor,
    edge_lbp_value,
    load_descriptor,
    save_descriptor,
)
from .similarity import (
    DistanceMatrix,
    IncompatibleDescriptors,
    bhattacharyya_distance,
    descriptor_distance,
    distance_matrix,
    emd_distance,
    euclidean_distance,
    load_distance_matrix,
    save_distance_matrix,
)
from .evaluation import (
    EvalReport,
    LabeledDataset,
    confusion_and_tier,
    e_measure,
    evaluate,
    ndcg,
    precision_recall,
    rank_all,
    tier_scores,
    write_report,
)
from . import datagen

__version__ = "0.1.0"
