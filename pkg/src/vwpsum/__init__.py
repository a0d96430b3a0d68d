"""Evaluation and verification of very-well-poised basic hypergeometric summations.

One-dimensional series (Rogers' 6phi5, the 8phi7 and 8psi8 summations, Bailey's
6psi6) and their A_{r-1} lattice analogues (Milne's 6Phi5, the unilateral and
bilateral r-dimensional 8-parameter sums, Gustafson's 6psi6), with exact
rational arithmetic where the input allows it.
"""

from __future__ import annotations

from .arseries import (
    ArParams,
    PartialFractionInput,
    Phi65rParams,
    eval_6Phi5r,
    eval_m88_lhs,
    eval_m88_rhs,
    eval_p88_lhs,
    eval_p88_lhs_sum,
    eval_p88_rhs,
    gustafson_66_limit,
    milne_65_rhs,
    p88_c0_reduction,
    proof_replay_rd,
    specialization_check_rd,
)
from .classical import (
    PhiSeriesSpec,
    PsiSeriesSpec,
    Rogers65Params,
    ShuklaParams,
    bailey_66_limit,
    eval_87_lhs,
    eval_87_rhs,
    eval_phi,
    eval_psi,
    proof_replay_1d,
    rogers_65_lhs,
    rogers_65_rhs,
    shukla_88_lhs,
    shukla_88_rhs_form1,
    shukla_88_rhs_form2,
    specialization_check_1d,
)
from .core import (
    DEFAULT_TAIL,
    ConvergenceError,
    DomainError,
    InfeasibleDomain,
    PoleError,
    QPochValue,
    QSeriesError,
    TailConfig,
    UnsupportedOperation,
    inf_product,
    qpoch,
    qpoch_list,
    qpoch_ratio,
    qpoch_shift,
    relative_residual,
)
from .harness import (
    REGISTRY,
    IdentityCase,
    SampleConfig,
    VerificationReport,
    check_identity,
    ismail_grid_check,
    limit_rate_check,
    run_suite,
    sample_params,
    write_report,
)
from .lattice import LatticeBox, LatticeSum, LatticeSummand, sum_bilateral, sum_unilateral

__version__ = "0.1.0"
