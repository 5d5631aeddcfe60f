"""Volumetric spanners, John decompositions and GeometricHedge exploration."""
from .errors import VolspanError
from .geometry import (
    EllipsoidNormReport,
    PointSet,
    SpannerSet,
    apply_linear_map,
    ellipsoid_norm,
    ellipsoid_norms,
    is_volumetric_spanner,
    symmetrize,
)
from .mvee import Ellipsoid, JohnCertificate, john_decomposition, john_weights, mvee_approx, to_john_position
from .sparsify import WeightedDecomposition, bss_sparsify, exact_volumetric_spanner, prune_contact_points
from .fast import FastSpannerConfig, fast_spanner, fast_spanner_run
from .barycentric import BarycentricBasis, LinearOptOracle, barycentric_spanner, ratio_spanner
from .sampler import (
    ConvexBodyOracle,
    ExpSpannerParams,
    LogDensity,
    exp_volumetric_spanner,
    hit_and_run_sample,
    relative_spanner_certificate,
)
from .blo import (
    BanditInstance,
    FixedAdversary,
    HedgeParams,
    HedgeState,
    RandomAdversary,
    RegretTrace,
    baseline_uniform_exploration,
    run_geometric_hedge,
)
from .verify import verify_spanner

__version__ = "0.1.0"
