"""Probability-expression AST: regime-tagged terms, sums, products.

Expressions are immutable trees of Term / Sum / Product.  A Term's entries
pair a variable name with a value reference: a literal level, a symbol, or
None for a distribution-valued (bare) entry whose levels form an output
axis.  Canonical form puts every binder at the top (sums lifted out of
products), sorts entries and factors, and alpha-renames bound symbols, so
structural equality is equality of canonical forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import ExprError, ParseError
from .model import Estimand, Lit, Regime, Sym, ValueRef

Entry = tuple[str, Union[ValueRef, None]]


@dataclass(frozen=True)
class Term:
    """A conditional probability q_s(dependents | conditioners)."""

    regime: Regime
    dependents: tuple[Entry, ...]
    conditioners: tuple[Entry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "dependents", tuple(tuple(d) for d in self.dependents))
        object.__setattr__(self, "conditioners", tuple(tuple(c) for c in self.conditioners))
        names = [n for n, _ in self.dependents] + [n for n, _ in self.conditioners]
        if len(set(names)) != len(names):
            raise ExprError(f"variable mentioned twice in term: {names}")
        if not self.dependents:
            raise ExprError("term needs at least one dependent")

    def dep_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.dependents)

    def cond_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.conditioners)

    def value_of(self, name: str) -> ValueRef | None:
        for n, ref in (*self.dependents, *self.conditioners):
            if n == name:
                return ref
        raise ExprError(f"{name!r} not in term")


@dataclass(frozen=True)
class Sum:
    """Sum of the body over all levels of each bound symbol."""

    binders: tuple[str, ...]
    body: ProbExpr

    def __post_init__(self) -> None:
        object.__setattr__(self, "binders", tuple(self.binders))
        if len(set(self.binders)) != len(self.binders):
            raise ExprError(f"duplicate binder in sum: {self.binders}")


@dataclass(frozen=True)
class Product:
    factors: tuple[ProbExpr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 1:
            raise ExprError("empty product")


ProbExpr = Union[Term, Sum, Product]


def term_of(estimand: Estimand) -> Term:
    return Term(estimand.regime, estimand.dependents, estimand.conditioners)


# ---------------------------------------------------------------------------
# traversal

def children(e: ProbExpr) -> tuple[ProbExpr, ...]:
    if isinstance(e, Sum):
        return (e.body,)
    if isinstance(e, Product):
        return e.factors
    return ()


def subexpr_at(e: ProbExpr, path: tuple[int, ...]) -> ProbExpr:
    for i in path:
        kids = children(e)
        if not 0 <= i < len(kids):
            raise ExprError(f"path {path} does not exist")
        e = kids[i]
    return e


def replace_at(e: ProbExpr, path: tuple[int, ...], new: ProbExpr) -> ProbExpr:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = children(e)
    if not 0 <= i < len(kids):
        raise ExprError(f"path {path} does not exist")
    replaced = replace_at(kids[i], rest, new)
    if isinstance(e, Sum):
        return Sum(e.binders, replaced)
    assert isinstance(e, Product)
    factors = list(e.factors)
    factors[i] = replaced
    return Product(tuple(factors))


def terms(e: ProbExpr) -> Iterator[tuple[tuple[int, ...], Term]]:
    """All terms with their tree paths, left to right."""
    if isinstance(e, Term):
        yield (), e
        return
    for i, kid in enumerate(children(e)):
        for path, t in terms(kid):
            yield (i, *path), t


def free_variables(e: ProbExpr) -> frozenset[str]:
    out: set[str] = set()
    for _, t in terms(e):
        out.update(t.dep_names())
        out.update(t.cond_names())
    return frozenset(out)


def regimes_used(e: ProbExpr) -> frozenset[Regime]:
    return frozenset(t.regime for _, t in terms(e))


def _term_syms(t: Term) -> list[str]:
    """Symbol names in entry order, dependents first (with repeats)."""
    out = []
    for _, ref in (*t.dependents, *t.conditioners):
        if isinstance(ref, Sym):
            out.append(ref.name)
    return out


def free_symbols(e: ProbExpr) -> frozenset[str]:
    """Symbols not bound by an enclosing sum (the expression's parameters)."""
    if isinstance(e, Term):
        return frozenset(_term_syms(e))
    if isinstance(e, Sum):
        return free_symbols(e.body) - frozenset(e.binders)
    return frozenset().union(*(free_symbols(f) for f in e.factors))


def all_symbols(e: ProbExpr) -> frozenset[str]:
    if isinstance(e, Term):
        return frozenset(_term_syms(e))
    if isinstance(e, Sum):
        return all_symbols(e.body) | frozenset(e.binders)
    return frozenset().union(*(all_symbols(f) for f in e.factors))


def rename_symbols(e: ProbExpr, mapping: dict[str, str]) -> ProbExpr:
    """Rename free symbol occurrences; binders shadow as usual."""
    if not mapping:
        return e
    if isinstance(e, Term):
        def fix(entries: tuple[Entry, ...]) -> tuple[Entry, ...]:
            return tuple(
                (n, Sym(mapping.get(ref.name, ref.name)) if isinstance(ref, Sym) else ref)
                for n, ref in entries
            )

        return Term(e.regime, fix(e.dependents), fix(e.conditioners))
    if isinstance(e, Sum):
        inner = {k: v for k, v in mapping.items() if k not in e.binders}
        return Sum(e.binders, rename_symbols(e.body, inner))
    return Product(tuple(rename_symbols(f, mapping) for f in e.factors))


def fresh_symbol(stem: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = stem
    while name in taken:
        name += "'"
    return name


# ---------------------------------------------------------------------------
# canonical form

def _sorted_term(t: Term) -> Term:
    return Term(
        t.regime,
        tuple(sorted(t.dependents, key=lambda d: d[0])),
        tuple(sorted(t.conditioners, key=lambda c: c[0])),
    )


def _normalize(e: ProbExpr) -> ProbExpr:
    """Prenex pass: sort term entries, flatten products, lift sums to the top."""
    if isinstance(e, Term):
        return _sorted_term(e)

    if isinstance(e, Sum):
        body = _normalize(e.body)
        binders = list(e.binders)
        if isinstance(body, Sum):
            inner = list(body.binders)
            clash = [b for b in inner if b in binders]
            if clash:
                taken = set(binders) | set(inner) | set(all_symbols(body.body))
                ren = {}
                for b in clash:
                    nb = fresh_symbol(b, taken)
                    taken.add(nb)
                    ren[b] = nb
                inner = [ren.get(b, b) for b in inner]
                body = Sum(tuple(inner), rename_symbols(body.body, ren))
            binders += list(body.binders)
            body = body.body
        used = free_symbols(body)
        missing = [b for b in binders if b not in used]
        if missing:
            raise ExprError(f"binder(s) never used: {missing}")
        if not binders:
            return body
        return Sum(tuple(binders), body)

    factors: list[ProbExpr] = []
    for f in e.factors:
        nf = _normalize(f)
        if isinstance(nf, Product):
            factors.extend(nf.factors)
        else:
            factors.append(nf)
    if len(factors) == 1:
        return factors[0]

    # lift binders out of sum factors, renaming to avoid capture
    syms_per_factor = [set(all_symbols(f)) for f in factors]
    lifted: list[str] = []
    stripped: list[ProbExpr] = []
    for idx, f in enumerate(factors):
        if isinstance(f, Sum):
            # a lifted binder must not collide with any symbol of a sibling
            # factor or with a binder already lifted
            forbidden = set(lifted)
            for j, syms in enumerate(syms_per_factor):
                if j != idx:
                    forbidden |= syms
            ren: dict[str, str] = {}
            for b in f.binders:
                if b in forbidden:
                    nb = fresh_symbol(b, forbidden | syms_per_factor[idx])
                    ren[b] = nb
                    b = nb
                forbidden.add(b)
                lifted.append(b)
            body = rename_symbols(f.body, ren) if ren else f.body
            if isinstance(body, Product):
                stripped.extend(body.factors)
            else:
                stripped.append(body)
        else:
            stripped.append(f)
    flat = Product(tuple(stripped))
    if lifted:
        return _normalize(Sum(tuple(lifted), flat))
    return flat


def _entry_text(name: str, ref: ValueRef | None, erase: frozenset[str]) -> str:
    if ref is None:
        return name
    if isinstance(ref, Sym) and ref.name in erase:
        return f"{name}=?"
    return f"{name}={ref}"


def _term_text(t: Term, erase: frozenset[str] = frozenset()) -> str:
    deps = ", ".join(_entry_text(n, r, erase) for n, r in t.dependents)
    conds = ", ".join(_entry_text(n, r, erase) for n, r in t.conditioners)
    inner = f"{deps} | {conds}" if conds else deps
    return f"{t.regime}({inner})"


def _term_text_colored(t: Term, color: dict[str, str]) -> str:
    def entry(name: str, ref: ValueRef | None) -> str:
        if ref is None:
            return name
        if isinstance(ref, Sym) and ref.name in color:
            return f"{name}=?{color[ref.name]}"
        return f"{name}={ref}"

    deps = ", ".join(entry(n, r) for n, r in t.dependents)
    conds = ", ".join(entry(n, r) for n, r in t.conditioners)
    inner = f"{deps} | {conds}" if conds else deps
    return f"{t.regime}({inner})"


def _order(e: ProbExpr) -> ProbExpr:
    """Ordering pass on a prenex expression: sort the factors and rename the
    binders to _1.._k.  Binder identity is resolved by color refinement so
    the result is invariant under factor permutation and alpha renaming,
    even among structurally similar factors."""
    if isinstance(e, Term):
        return e
    binders: tuple[str, ...] = ()
    body = e
    if isinstance(e, Sum):
        binders, body = e.binders, e.body
    factors = list(body.factors) if isinstance(body, Product) else [body]
    if not all(isinstance(f, Term) for f in factors):
        raise ExprError("ordering pass expects a prenex expression")

    bound = frozenset(binders)
    free = frozenset().union(*(frozenset(_term_syms(f)) for f in factors)) - bound

    color = {b: "" for b in binders}
    keys = [_term_text_colored(f, color) for f in factors]
    for _ in range(len(binders) + len(factors) + 2):
        occurrences: dict[str, list[str]] = {b: [] for b in binders}
        for key, f in zip(keys, factors):
            for side, entries in (("d", f.dependents), ("c", f.conditioners)):
                for name, ref in entries:
                    if isinstance(ref, Sym) and ref.name in bound:
                        occurrences[ref.name].append(f"{key}#{side}#{name}")
        raw = {b: "|".join(sorted(occurrences[b])) for b in binders}
        ranks = {c: str(i) for i, c in enumerate(sorted(set(raw.values())))}
        new_color = {b: ranks[raw[b]] for b in binders}
        new_keys = [_term_text_colored(f, new_color) for f in factors]
        if new_keys == keys and new_color == color:
            break
        color, keys = new_color, new_keys

    order_idx = sorted(range(len(factors)), key=lambda i: (keys[i], i))
    factors = [factors[i] for i in order_idx]

    ren: dict[str, str] = {}
    counter = 1
    for f in factors:
        for s in _term_syms(f):
            if s in bound and s not in ren:
                candidate = f"_{counter}"
                while candidate in free:
                    counter += 1
                    candidate = f"_{counter}"
                ren[s] = candidate
                counter += 1
    factors = [rename_symbols(f, ren) for f in factors]

    new_body: ProbExpr = factors[0] if len(factors) == 1 else Product(tuple(factors))
    if binders:
        renamed_bound = set(ren.values())
        order: list[str] = []
        for f in factors:
            for s in _term_syms(f):
                if s in renamed_bound and s not in order:
                    order.append(s)
        return Sum(tuple(order), new_body)
    return new_body


def canonicalize(e: ProbExpr) -> ProbExpr:
    """Idempotent canonical form; struct_eq compares these for equality."""
    cur = _order(_normalize(e))
    for _ in range(4):
        nxt = _order(_normalize(cur))
        if nxt == cur:
            return cur
        cur = nxt
    raise ExprError("canonicalization did not converge")


def struct_eq(a: ProbExpr, b: ProbExpr) -> bool:
    return canonicalize(a) == canonicalize(b)


# ---------------------------------------------------------------------------
# text form

def to_text(e: ProbExpr) -> str:
    if isinstance(e, Term):
        return _term_text(e)
    if isinstance(e, Sum):
        return f"sum{{{', '.join(e.binders)}}} {to_text(e.body)}"
    parts = []
    for f in e.factors:
        text = to_text(f)
        parts.append(f"({text})" if not isinstance(f, Term) else text)
    return " * ".join(parts)


_PUNCT = ("{", "}", "(", ")", "|", "=", ",", "*")


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    """Tokens as (kind, value, line, column); kinds: ident, num, punct, end."""
    out = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            out.append(("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            out.append(("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            while j < len(text) and text[j] == "'":
                j += 1
            out.append(("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    out.append(("end", "", line, col))
    return out


class _ExprParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str, int, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int, int]:
        kind_, value_, line, col = self.peek()
        if kind_ != kind or (value is not None and value_ != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {value_!r}", line, col)
        return self.next()

    def at_punct(self, value: str) -> bool:
        kind, value_, _, _ = self.peek()
        return kind == "punct" and value_ == value

    def parse(self) -> ProbExpr:
        e = self.parse_expr()
        kind, value, line, col = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {value!r}", line, col)
        return e

    def parse_expr(self) -> ProbExpr:
        kind, value, _, _ = self.peek()
        if kind == "ident" and value == "sum":
            self.next()
            self.expect("punct", "{")
            binders = [self.expect("ident")[1]]
            while self.at_punct(","):
                self.next()
                binders.append(self.expect("ident")[1])
            self.expect("punct", "}")
            body = self.parse_expr()
            return Sum(tuple(binders), body)
        return self.parse_product()

    def parse_product(self) -> ProbExpr:
        factors = [self.parse_atom()]
        while self.at_punct("*"):
            self.next()
            factors.append(self.parse_atom())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def parse_atom(self) -> ProbExpr:
        if self.at_punct("("):
            self.next()
            e = self.parse_expr()
            self.expect("punct", ")")
            return e
        return self.parse_term()

    def parse_regime(self) -> Regime:
        kind, value, line, col = self.expect("ident")
        if value == "q" and self.at_punct("{"):
            self.next()
            active = [int(self.expect("num")[1])]
            while self.at_punct(","):
                self.next()
                active.append(int(self.expect("num")[1]))
            self.expect("punct", "}")
            return Regime(frozenset(active))
        if value.startswith("q") and value[1:].isdigit():
            return Regime.prefix(int(value[1:]))
        raise ParseError(f"expected a regime like q0 or q{{1,2}}, found {value!r}", line, col)

    def parse_term(self) -> Term:
        regime = self.parse_regime()
        self.expect("punct", "(")
        deps = self.parse_entries()
        conds: tuple[Entry, ...] = ()
        if self.at_punct("|"):
            self.next()
            conds = self.parse_entries()
        self.expect("punct", ")")
        return Term(regime, deps, conds)

    def parse_entries(self) -> tuple[Entry, ...]:
        entries = [self.parse_entry()]
        while self.at_punct(","):
            self.next()
            entries.append(self.parse_entry())
        return tuple(entries)

    def parse_entry(self) -> Entry:
        name = self.expect("ident")[1]
        if not self.at_punct("="):
            return (name, None)
        self.next()
        kind, value, line, col = self.next()
        if kind == "num":
            return (name, Lit(int(value)))
        if kind == "ident":
            return (name, Sym(value))
        raise ParseError(f"expected a value, found {value!r}", line, col)


def parse_expr(text: str) -> ProbExpr:
    return _ExprParser(text).parse()


# ---------------------------------------------------------------------------
# JSON form

def ref_json(ref: ValueRef | None):
    if ref is None:
        return None
    if isinstance(ref, Lit):
        return {"lit": ref.value}
    return {"sym": ref.name}


def ref_from_json(obj) -> ValueRef | None:
    if obj is None:
        return None
    if "lit" in obj:
        return Lit(int(obj["lit"]))
    if "sym" in obj:
        return Sym(str(obj["sym"]))
    raise ExprError(f"bad value reference: {obj!r}")


def to_json(e: ProbExpr) -> dict:
    if isinstance(e, Term):
        return {
            "node": "term",
            "regime": sorted(e.regime.active),
            "dependents": [[n, ref_json(r)] for n, r in e.dependents],
            "conditioners": [[n, ref_json(r)] for n, r in e.conditioners],
        }
    if isinstance(e, Sum):
        return {"node": "sum", "binders": list(e.binders), "body": to_json(e.body)}
    return {"node": "product", "factors": [to_json(f) for f in e.factors]}


def from_json(obj: dict) -> ProbExpr:
    node = obj.get("node")
    if node == "term":
        return Term(
            Regime(frozenset(int(i) for i in obj["regime"])),
            tuple((n, ref_from_json(r)) for n, r in obj["dependents"]),
            tuple((n, ref_from_json(r)) for n, r in obj["conditioners"]),
        )
    if node == "sum":
        return Sum(tuple(obj["binders"]), from_json(obj["body"]))
    if node == "product":
        return Product(tuple(from_json(f) for f in obj["factors"]))
    raise ExprError(f"bad expression node: {node!r}")


def dumps(e: ProbExpr) -> str:
    return json.dumps(to_json(e), sort_keys=True)


@dataclass(frozen=True)
class DerivationStep:
    """One rewrite: rule name, expression before/after, and the side
    condition instance that licensed it."""

    rule: str
    input: ProbExpr
    output: ProbExpr
    justification: object | None = None

    def __post_init__(self) -> None:
        if self.input == self.output:
            raise ExprError(f"step {self.rule!r} does not change the expression")

    def to_json(self) -> dict:
        just = None
        if self.justification is not None and hasattr(self.justification, "to_json"):
            just = self.justification.to_json()
        return {
            "rule": self.rule,
            "input": to_text(self.input),
            "output": to_text(self.output),
            "justification": just,
        }
