from .expr import (
    FALSE,
    TRUE,
    BinOp,
    Bool,
    Compare,
    Cond,
    EvalError,
    Expr,
    ExprSyntaxError,
    Num,
    UnaryOp,
    Var,
    conj,
    disj,
    eval_expr,
    free_vars,
    implies,
    neg,
    num,
    parse_expr,
    substitute,
    to_fraction,
    to_text,
)
from .spec import (
    ProblemSpec,
    SpecError,
    VariableDecl,
    derive_domain_constraints,
    load_spec,
    parse_spec,
    spec_from_dict,
    theta_box,
    theta_constraint,
)
