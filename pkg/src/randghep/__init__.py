"""randghep: randomized matrix-free solvers for A x = lambda B x and the GSVD.

Everything runs on the three contracts Ax, Bx and B^{-1}x; no square root of
B is ever formed outside the dense test oracles.
"""

__version__ = "0.1.0"

from .borth import BOrthoBasis, chol_qr_w, mgs_w, mgs_w_reorth, pre_chol_qr_w, qr_metrics
from .errors import (
    ErrorEstimate,
    SpectrumReference,
    apriori_bound,
    b_angle,
    b_norm,
    b_sine,
    binv_norm_crude,
    dense_ghep_oracle,
    eigenpair_bounds,
    grow_sketch_until,
    posterior_estimate,
    range_error_exact,
    single_pass_bound,
)
from .ghep import GhepSolution, ghep_nystrom, ghep_single_pass, ghep_two_pass, low_rank_apply
from .gsvd import GsvdResult, gsvd_pair_values, randomized_gsvd
from .kle import (
    Grid1D,
    KleSolution,
    MaternConfig,
    assemble_covariance,
    assemble_mass_1d,
    kle_pencil,
    kle_realize,
    kle_solve,
    kle_truncation_check,
    matern_kernel,
)
from .operators import (
    ConfigError,
    GhepPencil,
    IllConditionedError,
    LinearMap,
    MatrixFormatError,
    NotPositiveDefiniteError,
    NumericalError,
    PoleError,
    SpdOperator,
    UnsupportedFieldError,
    c_operator,
    dense_operator,
    dense_spd,
    load_matrix_market,
    load_vector_csv,
    save_matrix_market,
    save_vector_csv,
    spectral_transform,
)
from .sketch import (
    GENERATOR_ID,
    RangeResult,
    SketchConfig,
    derive_seed,
    gaussian_matrix,
    randomized_evd,
    randomized_svd,
    range_finder_b,
)
