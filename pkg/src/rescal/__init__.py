"""Resource calculus: terms with multiset arguments, reduction, and machines."""

from .syntax import (
    Abs,
    App,
    Bag,
    Expression,
    LamAbs,
    LamApp,
    LamTerm,
    LamVar,
    Linear,
    Node,
    Resource,
    Reusable,
    Sum,
    Term,
    Var,
    ZERO,
    alpha_eq,
    canonicalize,
    free_vars,
    from_lambda,
    size,
    sum_abs,
    sum_app,
    sum_bag_linear,
    sum_bag_reusable,
)
from .parser import ParseError, parse_lambda_term, parse_sum, parse_term, print_expr
from .substitution import (
    FreshnessViolation,
    bag_subst,
    classical_subst,
    linear_subst,
    partial_subst,
    resource_subst,
)
from .reduction import (
    InvalidPath,
    InvalidRedex,
    InvalidTrace,
    Path,
    Redex,
    Step,
    Trace,
    baby_expand,
    baby_step,
    find_redexes,
    fire_nd,
    giant_step,
    is_onf,
    label,
    labels_in,
    erase_labels,
    leftmost_set,
    nd_reducts,
    nd_step,
    plug,
    precedes,
    redex_at,
    residuals,
    resolve,
    resolve_path,
    serialize_path,
    strategy_run,
    trace_from_records,
    trace_records,
)
from .standardization import (
    NoChainFound,
    OuterShape,
    SearchExhausted,
    StdReport,
    factor_outer_inner,
    is_standard,
    outer_shape,
    plug_shape,
    reorder_outer,
    standardize,
)
from .machine import (
    BudgetExhausted,
    Converged,
    MachineNode,
    MalformedTree,
    MaySolvable,
    NotWithinBudget,
    Undefined,
    b_machine_run,
    machine_step_run,
    may_solvable,
    outcome_record,
    reconstruct_trace,
    tree_record,
    verdict_record,
)

__version__ = "0.1.0"
