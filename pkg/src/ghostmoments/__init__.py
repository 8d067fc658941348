"""Moment-based lineshape deconvolution with semiparametric precision bounds."""

from ghostmoments.errors import GhostMomentsError, GridMismatchError, InputError, SingularMatrixError
from ghostmoments.profiles import (
    Grid,
    ProfileSpec,
    SampledProfile,
    convolve,
    generate,
    identity_kernel,
    kernel_grid,
    normalize,
    quadrature,
    raster_kernel,
)
from ghostmoments.moments import (
    ConversionMatrix,
    MomentVector,
    conversion_matrix,
    deconvolve_moments,
    estimate_moments_from_counts,
    invert_lower_triangular,
    normalized_moments,
    raw_moments,
)
from ghostmoments.crb import (
    CrbReport,
    CrbRow,
    InfluenceCoefficients,
    crb_constrained,
    crb_report,
    crb_unconstrained,
    effective_influence,
    influence_function,
    linear_combination,
)
from ghostmoments.montecarlo import McConfig, McReport, poisson_resample, run_mc_f_noise, run_mc_fH_noise
from ghostmoments.kk import (
    KKErrorReport,
    PhaseProfile,
    TransmissionPair,
    blurred_transmission,
    kk_phase,
    kk_quadratic_error,
    phase_discrepancy,
)

__version__ = "0.1.0"
