"""Free stochastic calculus: noncrossing combinatorics, free cumulants,
Cauchy transforms, scalar stochastic integrals, the tensor-valued Ito
calculus and a matrix-model laboratory."""

__version__ = "0.1.0"

from .errors import (
    AdaptednessError,
    CalibrationError,
    ConvergenceError,
    DomainError,
    FreeItoError,
    RegimeError,
    SizeError,
    TruncationError,
    ValidationError,
)
from .partitions import SetPartition, catalan, enumerate_noncrossing, is_noncrossing
from .cumulants import (
    CumulantSequence,
    FreeLevyData,
    MomentSequence,
    catalog,
    cumulants_from_moments,
    free_convolution,
    moments_from_cumulants,
    semigroup_cumulants,
)
from .transforms import (
    FormalLaurentSeries,
    cauchy_transform,
    cdf,
    density,
    pde_residual,
    quantiles,
    verify_functional_relation,
)
from .scalar import (
    StepFunction,
    bdg_check,
    diagonal_cumulants,
    integral_cumulants,
    mixed_moment,
    moment_flow,
    mu_norm,
)
from .tensor import TensorPolynomial, partial_k
from .biprocess import ONE, OperatorTensor
from .ito import ito_coeff_closed, ito_coeff_recursive
from .lab import MatrixModelConfig, Report, SimpleBiprocess
