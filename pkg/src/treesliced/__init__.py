"""Tree-sliced Wasserstein distances with distance-based splitting maps.

Distances between discrete measures are computed by projecting them onto
sampled systems of lines glued into trees, evaluating the closed-form
1-Wasserstein distance on each tree, and averaging. The splitting map that
distributes each point's mass over the lines is a softmax of scaled
point-to-line distances, which makes the whole construction invariant under
rigid motions. The package adds analytic gradients, exact-OT validation
oracles, a gradient-flow optimizer, and a palette-based color transfer
pipeline, all behind a reproducible seeded CLI.
"""

__version__ = "0.1.0"

from .core import (
    EmpiricalMeasure,
    EuclideanTransform,
    SeedSpec,
    apply_transform,
    load_measure_csv,
    make_measure,
    random_euclidean_transform,
    save_measure_csv,
)
from .estimators import (
    DistanceReport,
    EstimatorConfig,
    dbtsw,
    estimate,
    invariance_audit,
    sw,
    tswsl_chain,
)
from .exactot import exact_w1_lp, exact_wp_assignment
from .gradients import GradientReport, dbtsw_value_and_grad, finite_difference_check
from .projection import (
    ProjectedMeasure,
    SplittingConfig,
    point_line_distances,
    project,
    splitting_weights,
)
from .treemetric import (
    SegmentProfile,
    pairwise_tree_distance,
    segment_profile,
    tree_wasserstein_concurrent,
    tree_wasserstein_general,
    wasserstein_1d,
)
from .trees import (
    DataCenteredRoot,
    FixedRoot,
    GaussianRoot,
    TreeSamplerConfig,
    TreeSystem,
    UniformCube,
    orthogonalize_directions,
    sample_chain,
    sample_concurrent,
    transform_tree,
)

__all__ = [
    "EmpiricalMeasure",
    "EuclideanTransform",
    "SeedSpec",
    "apply_transform",
    "load_measure_csv",
    "make_measure",
    "random_euclidean_transform",
    "save_measure_csv",
    "DistanceReport",
    "EstimatorConfig",
    "dbtsw",
    "estimate",
    "invariance_audit",
    "sw",
    "tswsl_chain",
    "exact_w1_lp",
    "exact_wp_assignment",
    "GradientReport",
    "dbtsw_value_and_grad",
    "finite_difference_check",
    "ProjectedMeasure",
    "SplittingConfig",
    "point_line_distances",
    "project",
    "splitting_weights",
    "SegmentProfile",
    "pairwise_tree_distance",
    "segment_profile",
    "tree_wasserstein_concurrent",
    "tree_wasserstein_general",
    "wasserstein_1d",
    "DataCenteredRoot",
    "FixedRoot",
    "GaussianRoot",
    "TreeSamplerConfig",
    "TreeSystem",
    "UniformCube",
    "orthogonalize_directions",
    "sample_chain",
    "sample_concurrent",
    "transform_tree",
]
