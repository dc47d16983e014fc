"""Integer scoring systems trained by exact 0-1 loss minimization."""

from .data import (
    BinaryRule,
    BinaryRuleSet,
    ClassWeights,
    DataError,
    Dataset,
    binarize,
    class_weights,
    load_csv,
    save_csv,
)
from .scoring import (
    CoefficientSet,
    ScoringSystem,
    is_coprime,
    load_model,
    norms,
    objective,
    render_table,
    save_model,
    score,
    weighted_loss,
    zero_one_loss,
)
from .formulate import (
    Hierarchy,
    IfThen,
    IPInstance,
    MaxFPR,
    MaxModelSize,
    MinTPR,
    PerFeaturePenalty,
    PinZero,
    Sign,
    add_max_fpr,
    big_m_loss,
    build_mofn,
    build_tiered,
    build_scorecard,
    build_threshold_rules,
    decode_model,
    default_epsilon,
    default_gamma,
    missing_data_penalty,
    mofn_decode,
)
from .milp import SolveResult, branch_and_bound, exhaustive_oracle, simplex_solve
from .reduce import ReductionReport, epsilon_bounds, flip_constraint, reduce_dataset

__version__ = "0.1.0"
