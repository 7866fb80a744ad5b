"""Numerical laboratory for truncated q-deformed Fock spaces."""

from .errors import (
    BadExponent,
    ConfigError,
    EigenFailure,
    FiltrationViolation,
    LevelTooLarge,
    NotHermitianError,
    NotPositiveSemidefinite,
    ParamMismatch,
    QFockError,
    ShapeMismatch,
    TruncationLoss,
    UnknownRoute,
    WindowOverflow,
)
from .partitions import (
    CrossingCount,
    PairPartition,
    SegmentShape,
    crossing_number,
    enumerate_pair_partitions,
    permutation_inversions,
    subset_inversions,
)
from .qfock import (
    FockOperator,
    FockParams,
    FockVector,
    annihilation,
    basis_tensor,
    basis_vector,
    conjugation,
    creation,
    pairing_norm,
    pairing_value,
    q_inner,
    r_star,
    r_star3,
    symmetrizer,
    vacuum,
)
from .wick import (
    Element,
    WickWord,
    product_direct,
    product_partition,
    product_triple,
    trace,
    wick,
)
from .gradient import (
    GradientVector,
    PsiMap,
    delta_element,
    gamma,
    gradient_map,
    level_norm,
    nabla_norm,
    nabla_pairing_value,
    number_operator,
    psi_element,
    schatten_diagnostic,
    semigroup_operator,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
