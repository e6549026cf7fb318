"""Identification of interventional estimands on split-node graphs.

Build a BaseDag, split it with to_swig, state an estimand, and call identify
to obtain a step-audited derivation of an observed-data formula; verify
replays every step against exact enumeration on random discrete models.
"""

from .errors import (
    ExprError,
    GraphValidationError,
    ParseError,
    RuleRefusedError,
    StateSpaceLimitError,
    SwigIdentError,
    ZeroProbabilityError,
)
from .model import (
    BaseDag,
    Estimand,
    Lit,
    Regime,
    Role,
    Swig,
    Sym,
    Variable,
    Violation,
    same_skeleton,
    to_swig,
    validate,
    validate_estimand,
)
from .graphs import (
    CiQuery,
    Graph,
    brute_force_ci,
    d_separated,
    drop_later_obstruction,
    later_interventions_droppable,
)
from .expr import (
    DerivationStep,
    ProbExpr,
    Product,
    Sum,
    Term,
    canonicalize,
    free_variables,
    parse_expr,
    regimes_used,
    struct_eq,
    term_of,
    to_text,
)
from .oracle import (
    Dataset,
    DiscreteModel,
    LabeledTable,
    eval_estimand,
    eval_expr,
    joint,
    load_model,
    model_from_json,
    model_to_json,
    plugin_estimate,
    query,
    random_model,
    sample,
    save_model,
)
from .rules import (
    rule_ci_modify,
    rule_consistency,
    rule_drop_later,
    rule_product,
    rule_redundancy,
    rule_total_probability,
)
from .engine import (
    Derivation,
    Strategy,
    VerifyReport,
    compose_mediator_intervention,
    identify,
    identify_backdoor,
    identify_frontdoor,
    identify_sequential_backdoor,
    identify_sequential_frontdoor,
    validate_derivation,
    verify,
)
from .figures import ablated_figure1, figure1, figure2, figure3
from .dsl import emit_graph, parse_ci_query, parse_estimand, parse_graph, to_dot

__version__ = "0.1.0"

__all__ = [
    "BaseDag",
    "CiQuery",
    "Dataset",
    "Derivation",
    "DerivationStep",
    "DiscreteModel",
    "Estimand",
    "ExprError",
    "Graph",
    "GraphValidationError",
    "LabeledTable",
    "Lit",
    "ParseError",
    "ProbExpr",
    "Product",
    "Regime",
    "Role",
    "RuleRefusedError",
    "StateSpaceLimitError",
    "Strategy",
    "Sum",
    "Swig",
    "SwigIdentError",
    "Sym",
    "Term",
    "Variable",
    "VerifyReport",
    "Violation",
    "ZeroProbabilityError",
    "ablated_figure1",
    "brute_force_ci",
    "canonicalize",
    "compose_mediator_intervention",
    "d_separated",
    "drop_later_obstruction",
    "emit_graph",
    "eval_estimand",
    "eval_expr",
    "figure1",
    "figure2",
    "figure3",
    "free_variables",
    "identify",
    "identify_backdoor",
    "identify_frontdoor",
    "identify_sequential_backdoor",
    "identify_sequential_frontdoor",
    "joint",
    "later_interventions_droppable",
    "load_model",
    "model_from_json",
    "model_to_json",
    "parse_ci_query",
    "parse_estimand",
    "parse_expr",
    "parse_graph",
    "plugin_estimate",
    "query",
    "random_model",
    "regimes_used",
    "rule_ci_modify",
    "rule_consistency",
    "rule_drop_later",
    "rule_product",
    "rule_redundancy",
    "rule_total_probability",
    "same_skeleton",
    "sample",
    "save_model",
    "struct_eq",
    "term_of",
    "to_dot",
    "to_swig",
    "to_text",
    "validate",
    "validate_derivation",
    "validate_estimand",
    "verify",
]
