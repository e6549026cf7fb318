"""Identification engine: derivation recipes, search, and numeric audit.

A Derivation records the estimand, the chained rewrite steps, and the final
expression; it is identified when every term of the final expression is an
observed-data conditional over observed variables.  Recipes reproduce the
classic adjustment arguments step by step; the two search modes explore the
same sound move set with different orderings; verify replays every step
against the exact oracle on batches of random models.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ExprError, RuleRefusedError, SwigIdentError, ZeroProbabilityError
from .expr import (
    DerivationStep,
    ProbExpr,
    Sum,
    Product,
    Term,
    canonicalize,
    free_variables,
    from_json as expr_from_json,
    fresh_symbol,
    ref_from_json,
    ref_json,
    regimes_used,
    term_of,
    terms,
    to_json as expr_to_json,
    to_text,
)
from .graphs import CiQuery
from .model import (
    BaseDag,
    Estimand,
    Regime,
    Swig,
    Sym,
    ValueRef,
    same_skeleton,
    to_swig,
    validate_estimand,
)
from .oracle import (
    LabeledTable,
    eval_estimand,
    eval_expr,
    model_from_base_cpts,
    random_base_cpts,
)
from .rules import (
    CiJustification,
    ConsistencyJustification,
    DropLaterJustification,
    IntroduceJustification,
    RedundancyJustification,
    SplitJustification,
    rule_ci_modify,
    rule_consistency,
    rule_drop_later,
    rule_product,
    rule_redundancy,
    rule_total_probability,
)

IDENTIFIED = "identified"
NOT_IDENTIFIED = "not_identified"


@dataclass(frozen=True)
class CompositionJustification:
    """Cross-graph composition: the estimand equals the mediator-intervention
    outcome law averaged over the identified mediator law."""

    mediator_targets: tuple[str, ...]
    binders: tuple[str, ...]
    mediator_law: "Derivation"
    outcome: "Derivation"

    def __str__(self) -> str:
        meds = ", ".join(self.mediator_targets)
        return f"composing over mediator interventions on {meds}"

    def to_json(self) -> dict:
        return {
            "kind": "composition",
            "mediator_targets": list(self.mediator_targets),
            "binders": list(self.binders),
            "mediator_law": self.mediator_law.to_json(),
            "outcome": self.outcome.to_json(),
        }


@dataclass(frozen=True)
class Derivation:
    estimand: Estimand
    steps: tuple[DerivationStep, ...]
    final: ProbExpr
    status: str
    blocking: CiQuery | None = None

    @property
    def identified(self) -> bool:
        return self.status == IDENTIFIED

    @property
    def initial(self) -> ProbExpr:
        return term_of(self.estimand)

    def trace(self) -> str:
        lines = [f"estimand: {to_text(self.initial)}"]
        for i, step in enumerate(self.steps, start=1):
            note = f"  [{step.justification}]" if step.justification is not None else ""
            lines.append(f"{i:3d}. {step.rule}: {to_text(step.output)}{note}")
        lines.append(f"final: {to_text(self.final)}")
        lines.append(f"status: {self.status}")
        if self.blocking is not None:
            lines.append(f"blocking: {self.blocking}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "estimand": estimand_to_json(self.estimand),
            "status": self.status,
            "blocking": None if self.blocking is None else self.blocking.to_json(),
            "final": to_text(self.final),
            "final_ast": expr_to_json(self.final),
            "steps": [
                {
                    "rule": s.rule,
                    "input": to_text(s.input),
                    "output": to_text(s.output),
                    "input_ast": expr_to_json(s.input),
                    "output_ast": expr_to_json(s.output),
                    "justification": None
                    if s.justification is None or not hasattr(s.justification, "to_json")
                    else s.justification.to_json(),
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Derivation":
        steps = tuple(
            DerivationStep(
                rule=s["rule"],
                input=expr_from_json(s["input_ast"]),
                output=expr_from_json(s["output_ast"]),
                justification=_justification_from_json(s.get("justification")),
            )
            for s in obj["steps"]
        )
        blocking = obj.get("blocking")
        return cls(
            estimand=estimand_from_json(obj["estimand"]),
            steps=steps,
            final=expr_from_json(obj["final_ast"]),
            status=obj["status"],
            blocking=None if blocking is None else _ci_query_from_json(blocking),
        )


def estimand_to_json(est: Estimand) -> dict:
    return {
        "regime": sorted(est.regime.active),
        "dependents": [[n, ref_json(r)] for n, r in est.dependents],
        "conditioners": [[n, ref_json(r)] for n, r in est.conditioners],
    }


def estimand_from_json(obj: dict) -> Estimand:
    return Estimand(
        regime=Regime(frozenset(int(i) for i in obj["regime"])),
        dependents=tuple((n, ref_from_json(r)) for n, r in obj["dependents"]),
        conditioners=tuple((n, ref_from_json(r)) for n, r in obj["conditioners"]),
    )


def _ci_query_from_json(obj: dict) -> CiQuery:
    return CiQuery(
        regime=Regime(frozenset(int(i) for i in obj["regime"])),
        x=frozenset(obj["x"]),
        y=frozenset(obj["y"]),
        z=frozenset(obj["z"]),
    )


def _justification_from_json(obj):
    if obj is None:
        return None
    kind = obj.get("kind")
    if kind == "ci":
        return CiJustification(_ci_query_from_json(obj["query"]))
    if kind == "consistency":
        return ConsistencyJustification(
            int(obj["t"]), obj["target"], obj["intervention"], obj["value"]
        )
    if kind == "drop_later":
        return DropLaterJustification(
            int(obj["t"]), tuple(_ci_query_from_json(q) for q in obj["checks"])
        )
    if kind == "redundancy":
        return RedundancyJustification(tuple((t, o) for t, o in obj["pairs"]))
    if kind == "introduce":
        return IntroduceJustification(tuple((v, s) for v, s in obj["introduced"]))
    if kind == "product":
        return SplitJustification(tuple(tuple(g) for g in obj["split"]))
    if kind == "composition":
        return CompositionJustification(
            mediator_targets=tuple(obj["mediator_targets"]),
            binders=tuple(obj["binders"]),
            mediator_law=Derivation.from_json(obj["mediator_law"]),
            outcome=Derivation.from_json(obj["outcome"]),
        )
    raise ExprError(f"unknown justification kind {kind!r}")


def validate_derivation(derivation: Derivation) -> None:
    """Check the step chain and the identified-status contract."""
    prev = derivation.initial
    for i, step in enumerate(derivation.steps):
        if step.input != prev:
            raise SwigIdentError(f"step {i + 1} does not chain from the previous output")
        prev = step.output
    if derivation.final != prev:
        raise SwigIdentError("final expression is not the last step output")
    if derivation.identified:
        bad = [str(r) for r in regimes_used(derivation.final) if not r.is_observational]
        if bad:
            raise SwigIdentError(f"identified derivation still uses regimes {bad}")


@dataclass(frozen=True)
class Strategy:
    """How identify should proceed: a named recipe with optional explicit
    variable set, or a bounded search."""

    kind: str
    variables: tuple[str, ...] = ()
    depth: int = 16

    KINDS = (
        "backdoor",
        "frontdoor",
        "sequential_backdoor",
        "sequential_frontdoor",
        "mediator_intervention",
        "top_down",
        "bottom_up",
    )

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise SwigIdentError(
                f"unknown strategy {self.kind!r}; choose from {', '.join(self.KINDS)}"
            )
        if self.depth < 1:
            raise SwigIdentError("search depth must be >= 1")

    @classmethod
    def parse(cls, text: str, depth: int = 16) -> "Strategy":
        name, _, rest = text.partition(":")
        variables = tuple(v.strip() for v in rest.split(",") if v.strip()) if rest else ()
        return cls(kind=name.strip(), variables=variables, depth=depth)


class _Builder:
    """Tracks the working expression while a recipe applies rules."""

    def __init__(self, swig: Swig, estimand: Estimand):
        validate_estimand(swig, estimand)
        self.swig = swig
        self.estimand = estimand
        self.expr: ProbExpr = term_of(estimand)
        self.steps: list[DerivationStep] = []

    def apply(self, rule, path: tuple[int, ...], *args, **kwargs) -> DerivationStep:
        step = rule(self.swig, self.expr, path, *args, **kwargs)
        self.steps.append(step)
        self.expr = step.output
        return step

    def path_of(self, dep_names: Iterable[str]) -> tuple[int, ...]:
        """Path of the unique term whose dependents are exactly dep_names."""
        want = frozenset(dep_names)
        hits = [p for p, t in terms(self.expr) if frozenset(t.dep_names()) == want]
        if len(hits) != 1:
            raise SwigIdentError(
                f"expected exactly one term over {sorted(want)}, found {len(hits)}"
            )
        return hits[0]

    def term(self, path: tuple[int, ...]) -> Term:
        for p, t in terms(self.expr):
            if p == path:
                return t
        raise SwigIdentError(f"no term at {path}")

    def identified(self) -> Derivation:
        bad = [str(r) for r in regimes_used(self.expr) if not r.is_observational]
        if bad:
            raise SwigIdentError(f"recipe finished but regimes {bad} remain")
        unobserved = [
            n for n in sorted(free_variables(self.expr)) if not self.swig.var(n).observed
        ]
        if unobserved:
            raise SwigIdentError(f"recipe finished but {unobserved} are unobserved")
        return Derivation(self.estimand, tuple(self.steps), self.expr, IDENTIFIED)


def _not_identified(estimand: Estimand, blocking: CiQuery | None) -> Derivation:
    return Derivation(estimand, (), term_of(estimand), NOT_IDENTIFIED, blocking)


def _single_intervention(swig: Swig, estimand: Estimand) -> tuple[int, ValueRef]:
    """Shape check shared by the two single-shot recipes: exactly one active
    intervention whose node is the sole conditioner."""
    if len(estimand.regime.active) != 1:
        raise SwigIdentError(
            "this recipe handles a single intervention; use the sequential recipes"
        )
    (t,) = estimand.regime.active
    do = swig.intervention(t)
    conds = dict(estimand.conditioners)
    if set(conds) != {do}:
        raise SwigIdentError(f"estimand must condition on {do!r} and nothing else")
    if conds[do] is None:
        raise SwigIdentError(f"{do!r} must be pinned to a value or symbol")
    return t, conds[do]


def _subsets(names: Sequence[str], min_size: int = 0) -> Iterable[tuple[str, ...]]:
    for size in range(min_size, len(names) + 1):
        yield from itertools.combinations(sorted(names), size)


def _adjustment_pool(swig: Swig, estimand: Estimand) -> list[str]:
    """Observed, non-intervention variables not mentioned by the estimand."""
    used = {n for n, _ in estimand.dependents} | {n for n, _ in estimand.conditioners}
    out = []
    for v in swig.variables:
        if not v.observed or v.name in used:
            continue
        if v.name in swig.target_of or v.name in swig.intervention_of:
            continue
        out.append(v.name)
    return sorted(out, key=lambda n: (swig.var(n).time, n))


def _check_explicit(swig: Swig, names: Sequence[str]) -> None:
    for n in names:
        if not swig.var(n).observed:
            raise SwigIdentError(f"{n!r} is unobserved and cannot be adjusted for")
        if n in swig.target_of:
            raise SwigIdentError(f"{n!r} is an intervention node")


def _try_candidates(
    swig: Swig,
    estimand: Estimand,
    candidates: Iterable[tuple[str, ...]],
    attempt: Callable[[_Builder, tuple[str, ...]], Derivation],
    fallback_blocking: CiQuery | None = None,
) -> Derivation:
    blocking: CiQuery | None = None
    tried = False
    for cand in candidates:
        tried = True
        builder = _Builder(swig, estimand)
        try:
            return attempt(builder, cand)
        except RuleRefusedError as exc:
            if blocking is None and exc.blocking is not None:
                blocking = exc.blocking
    if blocking is None:
        blocking = fallback_blocking
    if not tried and blocking is None:
        raise SwigIdentError("no candidate variable sets to try")
    return _not_identified(estimand, blocking)


# ---------------------------------------------------------------------------
# back-door and front-door recipes

def _backdoor_attempt(builder: _Builder, adjustment: tuple[str, ...]) -> Derivation:
    swig, est = builder.swig, builder.estimand
    t, do_ref = _single_intervention(swig, est)
    tgt = swig.target(t)
    deps = tuple(n for n, _ in est.dependents)
    if adjustment:
        builder.apply(rule_total_probability, builder.path_of(deps), adjustment)
        builder.apply(
            rule_product,
            builder.path_of(deps + adjustment),
            [list(deps), list(adjustment)],
        )
    builder.apply(rule_ci_modify, builder.path_of(deps), tgt, "insert", do_ref)
    builder.apply(rule_consistency, builder.path_of(deps), t)
    builder.apply(rule_redundancy, builder.path_of(deps))
    if adjustment:
        builder.apply(rule_drop_later, builder.path_of(adjustment), 0)
    return builder.identified()


def identify_backdoor(
    swig: Swig, estimand: Estimand, adjustment: Sequence[str] | None = None
) -> Derivation:
    t, _ = _single_intervention(swig, estimand)
    if adjustment is not None:
        _check_explicit(swig, adjustment)
        candidates: Iterable[tuple[str, ...]] = [tuple(adjustment)]
    else:
        candidates = _subsets(_adjustment_pool(swig, estimand))
    return _try_candidates(swig, estimand, candidates, _backdoor_attempt)


def _frontdoor_attempt(builder: _Builder, mediators: tuple[str, ...]) -> Derivation:
    swig, est = builder.swig, builder.estimand
    t, do_ref = _single_intervention(swig, est)
    tgt = swig.target(t)
    deps = tuple(n for n, _ in est.dependents)

    builder.apply(rule_total_probability, builder.path_of(deps), mediators)
    builder.apply(
        rule_product, builder.path_of(deps + mediators), [list(deps), list(mediators)]
    )
    # mediator law: insert the target at the intervened value, then deactivate
    builder.apply(rule_ci_modify, builder.path_of(mediators), tgt, "insert", do_ref)
    builder.apply(rule_consistency, builder.path_of(mediators), t)
    builder.apply(rule_redundancy, builder.path_of(mediators))
    # outcome: introduce the target's natural value and switch the regime over
    step = builder.apply(rule_total_probability, builder.path_of(deps), (tgt,))
    natural = Sym(dict(step.justification.introduced)[tgt])
    builder.apply(rule_product, builder.path_of(deps + (tgt,)), [list(deps), [tgt]])
    builder.apply(rule_ci_modify, builder.path_of(deps), swig.intervention(t), "change", natural)
    builder.apply(rule_consistency, builder.path_of(deps), t)
    builder.apply(rule_redundancy, builder.path_of(deps))
    # propensity: peel the mediators off, then drop the intervention
    for m in mediators:
        builder.apply(rule_ci_modify, builder.path_of((tgt,)), m, "delete")
    builder.apply(rule_drop_later, builder.path_of((tgt,)), 0)
    return builder.identified()


def identify_frontdoor(
    swig: Swig, estimand: Estimand, mediators: Sequence[str] | None = None
) -> Derivation:
    t, _ = _single_intervention(swig, estimand)
    tgt, do = swig.target(t), swig.intervention(t)
    deps = frozenset(n for n, _ in estimand.dependents)
    if mediators is not None:
        _check_explicit(swig, mediators)
        candidates: Iterable[tuple[str, ...]] = [tuple(mediators)]
    else:
        pool = _mediator_pool(swig, estimand)
        candidates = _subsets(pool, min_size=1)
    fallback = CiQuery(estimand.regime, deps, frozenset({do}), frozenset({tgt}))
    return _try_candidates(swig, estimand, candidates, _frontdoor_attempt, fallback)


def _mediator_pool(swig: Swig, estimand: Estimand) -> list[str]:
    """Observed variables lying on a directed path from an active
    intervention node to the dependents, in the estimand's regime graph."""
    deps = [n for n, _ in estimand.dependents]
    graph = swig.regime_graph(estimand.regime)
    dos = [swig.intervention(j) for j in sorted(estimand.regime.active)]
    downstream = graph.descendants(dos)
    upstream = graph.ancestors(deps)
    pool = []
    for v in swig.variables:
        if not v.observed or v.name in deps:
            continue
        if v.name in swig.target_of or v.name in swig.intervention_of:
            continue
        if v.name in downstream and v.name in upstream:
            pool.append(v.name)
    return sorted(pool, key=lambda n: (swig.var(n).time, n))


# ---------------------------------------------------------------------------
# sequential recipes

def _chain_conditioners(swig: Swig, estimand: Estimand) -> dict[str, ValueRef]:
    """Require the conditioners to be exactly the active intervention nodes,
    each pinned; returns node -> value."""
    conds = dict(estimand.conditioners)
    want = {swig.intervention(j) for j in estimand.regime.active}
    if set(conds) != want:
        raise SwigIdentError(
            "estimand must condition on exactly the active intervention nodes"
        )
    for name, ref in conds.items():
        if ref is None:
            raise SwigIdentError(f"{name!r} must be pinned to a value or symbol")
    return conds


def _time_cut(swig: Swig, active: Sequence[int], time: int) -> int:
    """Largest active index whose target is at or before the given time."""
    cut = 0
    for j in active:
        if swig.var(swig.target(j)).time <= time:
            cut = j
    return cut


def _reduce_factor(
    builder: _Builder,
    dep_names: tuple[str, ...],
    do_values: dict[str, ValueRef],
) -> None:
    """Shared tail of the sequential recipes: on the factor over dep_names,
    drop the interventions after its time, align the targets' conditioned
    values with the intervention values, deactivate by consistency, and
    erase the intervention nodes."""
    swig = builder.swig
    path = builder.path_of(dep_names)
    term = builder.term(path)
    active = sorted(term.regime.active)
    time = max(swig.var(n).time for n in dep_names)
    cut = _time_cut(swig, active, time)
    if any(j > cut for j in active):
        builder.apply(rule_drop_later, path, cut)
    kept = [j for j in active if j <= cut]
    for j in kept:
        tgt = swig.target(j)
        do = swig.intervention(j)
        path = builder.path_of(dep_names)
        term = builder.term(path)
        conds = dict(term.conditioners)
        want = do_values[do]
        if tgt not in conds:
            builder.apply(rule_ci_modify, path, tgt, "insert", want)
        elif conds[tgt] != want:
            builder.apply(rule_ci_modify, path, tgt, "change", want)
    for j in reversed(kept):
        builder.apply(rule_consistency, builder.path_of(dep_names), j)
    path = builder.path_of(dep_names)
    term = builder.term(path)
    if any(do in dict(term.conditioners) for _, do in swig.pairs):
        builder.apply(rule_redundancy, path)


def _sequential_backdoor_attempt(builder: _Builder) -> Derivation:
    swig, est = builder.swig, builder.estimand
    do_values = _chain_conditioners(swig, est)
    order = sorted(
        (n for n, _ in est.dependents), key=lambda n: (swig.var(n).time, n)
    )
    if len(order) > 1:
        builder.apply(
            rule_product,
            builder.path_of(order),
            [[n] for n in reversed(order)],
        )
    for name in order:
        _reduce_factor(builder, (name,), do_values)
    return builder.identified()


def identify_sequential_backdoor(swig: Swig, estimand: Estimand) -> Derivation:
    builder = _Builder(swig, estimand)
    try:
        return _sequential_backdoor_attempt(builder)
    except RuleRefusedError as exc:
        return _not_identified(estimand, exc.blocking)


def _sequential_frontdoor_attempt(
    builder: _Builder, mediators: tuple[str, ...]
) -> Derivation:
    swig, est = builder.swig, builder.estimand
    do_values = _chain_conditioners(swig, est)
    active = sorted(est.regime.active)
    targets = [swig.target(j) for j in active]
    deps = tuple(n for n, _ in est.dependents)

    # interleave targets and mediators by time, mediators after their dose
    introduced = sorted(
        [*targets, *mediators],
        key=lambda n: (swig.var(n).time, n in mediators, n),
    )
    step = builder.apply(rule_total_probability, builder.path_of(deps), introduced)
    binder_of = dict(step.justification.introduced)
    natural = {swig.intervention(j): Sym(binder_of[swig.target(j)]) for j in active}
    builder.apply(
        rule_product,
        builder.path_of(deps + tuple(introduced)),
        [list(deps)] + [[n] for n in reversed(introduced)],
    )

    # outcome factor: swap every intervention node to the natural value
    for j in active:
        do = swig.intervention(j)
        builder.apply(rule_ci_modify, builder.path_of(deps), do, "change", natural[do])
    for j in reversed(active):
        builder.apply(rule_consistency, builder.path_of(deps), j)
    builder.apply(rule_redundancy, builder.path_of(deps))

    # mediator factors: align the targets with the intervention values
    for m in mediators:
        _reduce_factor(builder, (m,), do_values)

    # dose factors: drop own and later interventions, swap earlier ones to
    # the natural values, deactivate
    for j in active:
        tgt = swig.target(j)
        path = builder.path_of((tgt,))
        term = builder.term(path)
        cut = _time_cut(swig, sorted(term.regime.active), swig.var(tgt).time - 1)
        if any(i > cut for i in term.regime.active):
            builder.apply(rule_drop_later, path, cut)
        kept = [i for i in sorted(term.regime.active) if i <= cut]
        for i in kept:
            do_i = swig.intervention(i)
            builder.apply(
                rule_ci_modify, builder.path_of((tgt,)), do_i, "change", natural[do_i]
            )
        for i in reversed(kept):
            builder.apply(rule_consistency, builder.path_of((tgt,)), i)
        path = builder.path_of((tgt,))
        if any(do in dict(builder.term(path).conditioners) for _, do in swig.pairs):
            builder.apply(rule_redundancy, path)
    return builder.identified()


def identify_sequential_frontdoor(
    swig: Swig, estimand: Estimand, mediators: Sequence[str] | None = None
) -> Derivation:
    if not estimand.regime.active:
        raise SwigIdentError("estimand has no active interventions")
    if mediators is not None:
        _check_explicit(swig, mediators)
        candidates: Iterable[tuple[str, ...]] = [tuple(mediators)]
    else:
        pool = _mediator_pool(swig, estimand)
        candidates = [tuple(pool)] if pool else []
    deps = frozenset(n for n, _ in estimand.dependents)
    dos = frozenset(swig.intervention(j) for j in estimand.regime.active)
    tgts = frozenset(swig.target(j) for j in estimand.regime.active)
    fallback = CiQuery(estimand.regime, deps, dos, tgts)
    return _try_candidates(
        swig, estimand, candidates, _sequential_frontdoor_attempt, fallback
    )


# ---------------------------------------------------------------------------
# mediator-intervention composition

def _compose_outcome_attempt(
    builder: _Builder, chain: tuple[str, ...], med_values: dict[str, ValueRef]
) -> Derivation:
    """Identify q'(Y | mediator interventions) by introducing the dose
    chain, inserting the natural mediators next to their intervention nodes,
    and deactivating."""
    swig, est = builder.swig, builder.estimand
    active = sorted(est.regime.active)
    deps = tuple(n for n, _ in est.dependents)
    order = sorted(chain, key=lambda n: (swig.var(n).time, n))

    builder.apply(rule_total_probability, builder.path_of(deps), order)
    builder.apply(
        rule_product,
        builder.path_of(deps + tuple(order)),
        [list(deps)] + [[n] for n in reversed(order)],
    )

    # outcome factor: insert every natural mediator, then deactivate all
    for j in active:
        tgt = swig.target(j)
        builder.apply(
            rule_ci_modify, builder.path_of(deps), tgt, "insert", med_values[tgt]
        )
    for j in reversed(active):
        builder.apply(rule_consistency, builder.path_of(deps), j)
    builder.apply(rule_redundancy, builder.path_of(deps))

    # chain factors: drop interventions at or after the variable's time,
    # insert the earlier natural mediators, deactivate
    for name in order:
        path = builder.path_of((name,))
        term = builder.term(path)
        act = sorted(term.regime.active)
        cut = _time_cut(swig, act, swig.var(name).time - 1)
        if any(i > cut for i in act):
            builder.apply(rule_drop_later, path, cut)
        kept = [i for i in act if i <= cut]
        for i in kept:
            tgt = swig.target(i)
            builder.apply(
                rule_ci_modify, builder.path_of((name,)), tgt, "insert", med_values[tgt]
            )
        for i in reversed(kept):
            builder.apply(rule_consistency, builder.path_of((name,)), i)
        path = builder.path_of((name,))
        if any(do in dict(builder.term(path).conditioners) for _, do in swig.pairs):
            builder.apply(rule_redundancy, path)
    return builder.identified()


def compose_mediator_intervention(
    swig_doses: Swig, swig_mediators: Swig, estimand: Estimand
) -> Derivation:
    """Express the dose effect as the mediator-intervention outcome law
    averaged over the identified mediator law, and identify both factors."""
    if not same_skeleton(swig_doses.base, swig_mediators.base):
        raise SwigIdentError("the two graphs must share variables and edges")
    validate_estimand(swig_doses, estimand)
    do_values = _chain_conditioners(swig_doses, estimand)

    mediators = [swig_mediators.target(j) for j in range(1, swig_mediators.n_interventions + 1)]
    for m in mediators:
        if not swig_doses.var(m).observed:
            raise SwigIdentError(f"mediator target {m!r} is unobserved")

    taken = set()
    for _, ref in (*estimand.dependents, *estimand.conditioners):
        if isinstance(ref, Sym):
            taken.add(ref.name)
    binders = []
    med_values: dict[str, ValueRef] = {}
    for m in mediators:
        sym = fresh_symbol(m.lower(), taken)
        taken.add(sym)
        binders.append(sym)
        med_values[m] = Sym(sym)

    est_m = Estimand(
        regime=estimand.regime,
        dependents=tuple((m, med_values[m]) for m in mediators),
        conditioners=estimand.conditioners,
    )
    mediator_law = identify_sequential_backdoor(swig_doses, est_m)
    if not mediator_law.identified:
        return _not_identified(estimand, mediator_law.blocking)

    est_y = Estimand(
        regime=swig_mediators.full_regime,
        dependents=estimand.dependents,
        conditioners=tuple(
            (swig_mediators.intervention_of[m], med_values[m]) for m in mediators
        ),
    )
    chain = tuple(swig_doses.target(j) for j in sorted(estimand.regime.active))
    builder = _Builder(swig_mediators, est_y)
    try:
        outcome = _compose_outcome_attempt(builder, chain, med_values)
    except RuleRefusedError as exc:
        return _not_identified(estimand, exc.blocking)

    assembled: ProbExpr = Sum(tuple(binders), Product((outcome.final, mediator_law.final)))
    step = DerivationStep(
        rule="mediator_composition",
        input=term_of(estimand),
        output=assembled,
        justification=CompositionJustification(
            mediator_targets=tuple(mediators),
            binders=tuple(binders),
            mediator_law=mediator_law,
            outcome=outcome,
        ),
    )
    return Derivation(estimand, (step,), assembled, IDENTIFIED)


# ---------------------------------------------------------------------------
# search

def _search(swig: Swig, estimand: Estimand, mode: str, depth: int) -> Derivation:
    observed = set(swig.observed)
    intervention_nodes = set(swig.target_of)
    refusals: list[CiQuery] = []

    def goal(expr: ProbExpr) -> bool:
        if any(not t.regime.is_observational for _, t in terms(expr)):
            return False
        return all(n in observed for n in free_variables(expr))

    def simplify(expr: ProbExpr, steps: list[DerivationStep]):
        """Apply consistency and redundancy greedily: both strictly shrink
        the distance to regime 0 and never block another rule we generate."""
        changed = True
        while changed:
            changed = False
            for path, term in terms(expr):
                conds = dict(term.conditioners)
                if term.regime.is_observational:
                    if any(do in conds for _, do in swig.pairs):
                        try:
                            step = rule_redundancy(swig, expr, path)
                        except RuleRefusedError:
                            continue
                        steps = steps + [step]
                        expr = step.output
                        changed = True
                        break
                    continue
                for j in sorted(term.regime.active, reverse=True):
                    tgt, do = swig.target(j), swig.intervention(j)
                    if (
                        conds.get(tgt) is not None
                        and conds.get(tgt) == conds.get(do)
                    ):
                        step = rule_consistency(swig, expr, path, j)
                        steps = steps + [step]
                        expr = step.output
                        changed = True
                        break
                if changed:
                    break
        return expr, steps

    def moves(expr: ProbExpr):
        drops, cis, intros = [], [], []
        for path, term in terms(expr):
            conds = dict(term.conditioners)
            deps = set(term.dep_names())
            if term.regime.is_observational:
                continue
            active = sorted(term.regime.active)
            for t in range(active[-1]):
                drops.append(lambda e, p=path, t=t: [rule_drop_later(swig, e, p, t)])
            for j in active:
                tgt, do = swig.target(j), swig.intervention(j)
                if do in conds and conds[do] is not None:
                    if tgt not in conds and tgt not in deps:
                        cis.append(
                            lambda e, p=path, v=tgt, r=conds[do]: [
                                rule_ci_modify(swig, e, p, v, "insert", r)
                            ]
                        )
                    if tgt in conds and conds[tgt] is not None and conds[tgt] != conds[do]:
                        cis.append(
                            lambda e, p=path, v=do, r=conds[tgt]: [
                                rule_ci_modify(swig, e, p, v, "change", r)
                            ]
                        )
            for v in sorted(conds):
                if v not in intervention_nodes:
                    cis.append(
                        lambda e, p=path, v=v: [rule_ci_modify(swig, e, p, v, "delete")]
                    )
            present = deps | set(conds)
            for v in sorted(observed - present, key=lambda n: (swig.var(n).time, n)):
                if v in intervention_nodes:
                    continue

                def intro(e, p=path, v=v, d=tuple(term.dep_names())):
                    s1 = rule_total_probability(swig, e, p, (v,))
                    s2 = rule_product(swig, s1.output, p + (0,), [list(d), [v]])
                    return [s1, s2]

                intros.append(intro)
        if mode == "top_down":
            return [*drops, *cis, *intros]
        return [*intros, *cis, *drops]

    def dfs(expr: ProbExpr, steps: list[DerivationStep], budget: int, seen: set[str]):
        expr, steps = simplify(expr, steps)
        if goal(expr):
            return steps
        if budget <= 0:
            return None
        key = to_text(canonicalize(expr))
        if key in seen:
            return None
        seen.add(key)
        for attempt in moves(expr):
            try:
                new_steps = attempt(expr)
            except RuleRefusedError as exc:
                if exc.blocking is not None:
                    refusals.append(exc.blocking)
                continue
            found = dfs(new_steps[-1].output, steps + new_steps, budget - 1, seen)
            if found is not None:
                return found
        return None

    found = None
    budget = 0
    while found is None and budget < depth:
        budget = min(budget + 2, depth)
        found = dfs(term_of(estimand), [], budget, set())
    if found is None:
        return _not_identified(estimand, refusals[0] if refusals else None)
    final = found[-1].output if found else term_of(estimand)
    return Derivation(estimand, tuple(found), final, IDENTIFIED)


# ---------------------------------------------------------------------------
# entry point

def identify(
    swig: Swig, estimand: Estimand, strategy: Strategy | str = "top_down"
) -> Derivation:
    """Derive an observed-data expression for the estimand, or report the
    blocking independence that could not be established."""
    if isinstance(strategy, str):
        strategy = Strategy.parse(strategy)
    validate_estimand(swig, estimand)
    variables = strategy.variables or None
    if strategy.kind == "backdoor":
        return identify_backdoor(swig, estimand, variables)
    if strategy.kind == "frontdoor":
        return identify_frontdoor(swig, estimand, variables)
    if strategy.kind == "sequential_backdoor":
        return identify_sequential_backdoor(swig, estimand)
    if strategy.kind == "sequential_frontdoor":
        return identify_sequential_frontdoor(swig, estimand, variables)
    if strategy.kind == "mediator_intervention":
        mediators = list(variables) if variables else _mediator_pool(swig, estimand)
        if not mediators:
            deps = frozenset(n for n, _ in estimand.dependents)
            dos = frozenset(swig.intervention(j) for j in estimand.regime.active)
            tgts = frozenset(swig.target(j) for j in estimand.regime.active)
            return _not_identified(estimand, CiQuery(estimand.regime, deps, dos, tgts))
        base_m = BaseDag(
            variables=swig.base.variables,
            edges=swig.base.edges,
            targets=tuple(sorted(mediators, key=lambda n: (swig.var(n).time, n))),
            name=f"{swig.base.name}_mediators",
        )
        return compose_mediator_intervention(swig, to_swig(base_m), estimand)
    return _search(swig, estimand, strategy.kind, strategy.depth)


# ---------------------------------------------------------------------------
# numeric verification

@dataclass(frozen=True)
class StepReport:
    index: int
    rule: str
    max_deviation: float
    models_used: int
    models_skipped: int
    passed: bool
    nested: tuple["VerifyReport", ...] = ()

    def to_json(self) -> dict:
        out = {
            "index": self.index,
            "rule": self.rule,
            "max_deviation": self.max_deviation,
            "models_used": self.models_used,
            "models_skipped": self.models_skipped,
            "passed": self.passed,
        }
        if self.nested:
            out["nested"] = [r.to_json() for r in self.nested]
        return out


@dataclass(frozen=True)
class VerifyReport:
    steps: tuple[StepReport, ...]
    final_deviation: float | None
    final_models: int
    passed: bool
    n_models: int
    seed: int
    tol: float

    def to_json(self) -> dict:
        return {
            "steps": [s.to_json() for s in self.steps],
            "final_deviation": self.final_deviation,
            "final_models": self.final_models,
            "passed": self.passed,
            "n_models": self.n_models,
            "seed": self.seed,
            "tol": self.tol,
        }

    def summary(self) -> str:
        lines = []
        for s in self.steps:
            flag = "ok" if s.passed else "FAIL"
            lines.append(
                f"step {s.index:3d} {s.rule:20s} max dev {s.max_deviation:.3e} "
                f"({s.models_used} models, {s.models_skipped} skipped) {flag}"
            )
        if self.final_deviation is not None:
            flag = "ok" if self.final_deviation <= self.tol else "FAIL"
            lines.append(
                f"final vs oracle        max dev {self.final_deviation:.3e} "
                f"({self.final_models} models) {flag}"
            )
        lines.append(f"verdict: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _max_dev(a: LabeledTable, b: LabeledTable) -> float:
    labels = a.labels + tuple(l for l in b.labels if l not in a.labels)
    return float(np.max(np.abs(a.aligned(labels) - b.aligned(labels))))


def _mediators_swig(swig: Swig, just: CompositionJustification) -> Swig:
    base = BaseDag(
        variables=swig.base.variables,
        edges=swig.base.edges,
        targets=just.mediator_targets,
        name=f"{swig.base.name}_mediators",
    )
    return to_swig(base)


def _verify_models(
    derivation: Derivation,
    swig: Swig,
    cpts_list: list,
    tol: float,
    seed: int,
) -> VerifyReport:
    validate_derivation(derivation)
    models = [model_from_base_cpts(swig, c) for c in cpts_list]
    reports: list[StepReport] = []
    all_passed = True
    for idx, step in enumerate(derivation.steps, start=1):
        if step.rule == "mediator_composition":
            just = step.justification
            swig_m = _mediators_swig(swig, just)
            nested = (
                _verify_models(just.mediator_law, swig, cpts_list, tol, seed),
                _verify_models(just.outcome, swig_m, cpts_list, tol, seed),
            )
        else:
            nested = ()
        dev = 0.0
        used = skipped = 0
        for model in models:
            try:
                a = eval_expr(model, step.input)
                b = eval_expr(model, step.output)
            except ZeroProbabilityError:
                skipped += 1
                continue
            dev = max(dev, _max_dev(a, b))
            used += 1
        passed = dev <= tol and used > 0 and all(r.passed for r in nested)
        all_passed &= passed
        reports.append(StepReport(idx, step.rule, dev, used, skipped, passed, nested))

    final_dev = None
    final_used = 0
    if derivation.identified:
        final_dev = 0.0
        for model in models:
            try:
                a = eval_expr(model, derivation.final)
                b = eval_estimand(model, derivation.estimand)
            except ZeroProbabilityError:
                continue
            final_dev = max(final_dev, _max_dev(a, b))
            final_used += 1
        all_passed &= final_dev <= tol and final_used > 0
    return VerifyReport(
        steps=tuple(reports),
        final_deviation=final_dev,
        final_models=final_used,
        passed=all_passed,
        n_models=len(models),
        seed=seed,
        tol=tol,
    )


def verify(
    derivation: Derivation,
    swig: Swig,
    n_models: int = 100,
    seed: int = 0,
    tol: float = 1e-9,
) -> VerifyReport:
    """Replay every step on random models: input and output must evaluate
    identically, and the final formula must match the oracle estimand."""
    cpts_list = [
        random_base_cpts(swig.base, np.random.default_rng((seed, i)))
        for i in range(n_models)
    ]
    return _verify_models(derivation, swig, cpts_list, tol, seed)
