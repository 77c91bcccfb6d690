"""Certified numerical toolkit for quasi-locality of operators on finite
metric spaces: norm brackets, commutator certificates, decomposition chains,
and finite-propagation approximation with machine-checked error bounds."""

from .space import (
    AnchorError,
    FiniteMetricSpace,
    MetricError,
    ScalarFunction,
    Subset,
    build_grid_space,
    indicator,
    lipschitz_constant,
    mcshane_extend,
    neighborhood,
    ramp_function,
    set_distance,
    subset_diameter,
)
from .operators import (
    LpOperator,
    NormBracket,
    commutator,
    compress,
    matrix_pnorm_bracket,
    multiply_function,
    op_norm,
    op_norm_hi,
    propagation,
    truncate,
)
from .locality import (
    CommutCertificate,
    NotQuasiLocalError,
    QuasiLocalityProfile,
    commut_lower_bound,
    commut_upper_bound,
    eps_propagation,
    find_lipschitz_scale,
    quasi_locality_profile,
)
from .cutdown import (
    CutdownFamily,
    FamilyError,
    SignPartition,
    block_cutdown,
    block_expectation,
    sign_group_average,
    verify_block_norm_formula,
    verify_cutdown_estimate,
)
from .decomposition import (
    ChainError,
    DecompositionChain,
    MetricFamily,
    RDecomposition,
    fatten_decomposition,
    fatten_family,
    grid_chain,
    make_chain,
    trivial_chain,
    validate_chain,
    validate_decomposition,
)
from .approximation import (
    ApproximationCertificate,
    BlockDiagonalTerm,
    RampCheckError,
    StepBoundError,
    approximate_finite_propagation,
    decompose_step,
    make_term,
)
from .corpus import Classification, GenSpec, classify, gen

__version__ = "0.1.0"
