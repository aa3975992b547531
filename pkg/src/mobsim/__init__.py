"""Mobility tableau similarity via the least Manhattan-cost vector-graph transformation."""
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
    InvalidPermutationError,
    MobsimError,
    OutOfRangeError,
    SolverFailureError,
    UndefinedMetricError,
)
from .metrics import (
    DEFAULT_MU,
    MuEstimate,
    SimilarityReport,
    baseline_r2,
    baseline_rmse,
    compare,
    estimate_mu,
    md,
    nma,
    nmd,
    nsa,
    rrnsa,
    sp,
)
from .solver import SolverConfig, TransportPlan, min_cost, solve_km, solve_oracle
from .tableau import (
    CellCoord,
    Dihedral,
    FlowVector,
    GridSpec,
    MobilityTableau,
    apply_permutation,
    dihedral_transform,
    extract_slice,
    manhattan_length,
    normalize,
    reduce_common,
    shift_cost,
    total_mass_cost,
)

__version__ = "0.1.0"
