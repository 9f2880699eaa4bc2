"""kamact: certified quadratic iteration for scaled group actions.

Truncated Taylor/Fourier series with scale-indexed analytic norms, the
group of near-identity germs under composition, concrete actions
(germ conjugation, small-divisor right inverses), and an orbit solver
that certifies every bound of its convergence proof at runtime.
"""

from .series import (
    TAYLOR,
    FOURIER,
    ScaledSeries,
    BoundedOperatorEstimate,
    zeros,
    monomial,
    identity_series,
    from_coeffs,
    norm,
    series_add,
    series_sub,
    series_scale,
    series_multiply,
    series_compose,
    series_reciprocal,
    series_reversion,
    series_differentiate,
    measure_operator_norm,
    max_coeff_diff,
    dump_series,
    load_series,
)
from .group import (
    GroupElement,
    GroupLawReport,
    gexp,
    glog,
    gmul,
    ginv,
    identity_group,
    verify_group_law,
    measure_group_constants,
)
from .action import (
    ActionInstance,
    AcReport,
    CertificateError,
    DomainGuardError,
    rho,
    check_infinitesimal,
    verify_ac,
    ac_scaling_slope,
    phi,
)
from .solver import (
    Schedule,
    SolveConfig,
    SolveResult,
    SolveStatus,
    IterationTrace,
    CertificateReport,
    CheckRecord,
    epsilon_closed_form,
    epsilon_product,
    mu,
    g_sequence,
    verify_preliminary_remark,
    verify_step_arithmetic,
    solve,
    quadratic_rate,
    rate_ratios,
)
from .instances import (
    GermActionSpec,
    DiophantineSpec,
    KBoundednessStudy,
    GOLDEN_MEAN,
    germ_spec,
    identity_germ_spec,
    build_germ_instance,
    reversion_oracle,
    diophantine_margin,
    build_cohomological_j,
    shift_series,
    measure_kboundedness,
)
from .rng import SplitMix64, random_series

__version__ = "0.1.0"
