"""Randomized SVD and its use as the decimation step of TEBD."""

from .linalg import (
    ContractViolation,
    NumericFailure,
    QrFactors,
    SvdResult,
    frobenius_norm,
    operator_norm_estimate,
    qr,
    read_rrsm,
    svd_full,
    write_rrsm,
)
from .rrsvd import (
    AccuracyCheckParams,
    ErrorBoundReport,
    RangeBasis,
    RrsvdParams,
    accuracy_check,
    certified_rank,
    error_bound_report,
    gaussian_test_matrix,
    randomized_range_finder,
    rrsvd_fixed_precision,
    rrsvd_fixed_rank,
)
from .matgen import SpectrumSpec, StructuredInstance, spectrum_exponential, spectrum_power, structured_matrix
from .tebd import DecimationBackend, MpsState, evolve, mps_product_state, trotter_plan_3rd
from .chainmap import ChainBreakdown, ChainCoefficients, MeasureGrid, stieltjes_coefficients

__version__ = "0.1.0"
