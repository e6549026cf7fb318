"""Text surfaces: the graph description language, query strings, and DOT.

Graph files hold one graph each:

    # a comment
    graph fig1 {
      var L @0 role=covariate;
      var D1 @1 role=target;
      edge L -> D1;
      target D1 order=1;
    }

Estimand queries look like ``q[1](Y1 | do D1=d1)``; conditional-independence
queries like ``q[1]: Y1 _||_ Do1 | M1, D1``.  parse_graph and emit_graph
round-trip exactly.
"""

from __future__ import annotations

import re

from .errors import GraphValidationError, ParseError
from .graphs import CiQuery
from .model import (
    BaseDag,
    Estimand,
    Lit,
    Regime,
    Role,
    Swig,
    Sym,
    Variable,
    validate,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>->)
  | (?P<sep>_\|\|_)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*'*)
  | (?P<punct>[{};=@|,:\[\]()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append((kind, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _Tokens:
    def __init__(self, text: str):
        self.items = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.items[self.i]

    def next(self) -> tuple[str, str, int, int]:
        tok = self.items[self.i]
        if tok[0] != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int, int]:
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2], tok[3])
        return tok

    def accept(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        if tok[0] == kind and (value is None or tok[1] == value):
            self.next()
            return True
        return False


def parse_graph(text: str) -> BaseDag:
    """Parse a graph document; raises ParseError with position on syntax
    errors and GraphValidationError on semantic ones."""
    toks = _Tokens(text)
    tok = toks.expect("ident")
    if tok[1] != "graph":
        raise ParseError("expected 'graph'", tok[2], tok[3])
    name = toks.expect("ident")[1]
    toks.expect("punct", "{")

    variables: list[Variable] = []
    edges: set[tuple[str, str]] = set()
    targets: list[tuple[int, int, str]] = []

    while not toks.accept("punct", "}"):
        kind, word, line, col = toks.expect("ident")
        if word == "var":
            vname = toks.expect("ident")[1]
            time = 0
            role = Role.OTHER
            levels = 2
            observed = True
            while not toks.accept("punct", ";"):
                k, v, l2, c2 = toks.next()
                if k == "punct" and v == "@":
                    time = int(toks.expect("num")[1])
                elif k == "ident" and v == "role":
                    toks.expect("punct", "=")
                    rv, rl, rc = toks.expect("ident")[1:4]
                    try:
                        role = Role(rv)
                    except ValueError:
                        raise ParseError(f"unknown role {rv!r}", rl, rc) from None
                elif k == "ident" and v == "levels":
                    toks.expect("punct", "=")
                    levels = int(toks.expect("num")[1])
                elif k == "ident" and v == "unobserved":
                    observed = False
                else:
                    raise ParseError(f"unexpected {v!r} in var declaration", l2, c2)
            variables.append(
                Variable(vname, time=time, role=role, observed=observed, cardinality=levels)
            )
        elif word == "edge":
            a = toks.expect("ident")[1]
            toks.expect("arrow")
            b = toks.expect("ident")[1]
            toks.expect("punct", ";")
            edges.add((a, b))
        elif word == "target":
            tname = toks.expect("ident")[1]
            order = None
            if toks.accept("ident", "order"):
                toks.expect("punct", "=")
                order = int(toks.expect("num")[1])
            toks.expect("punct", ";")
            targets.append((order if order is not None else 10**9, len(targets), tname))
        else:
            raise ParseError(f"expected var, edge, or target, found {word!r}", line, col)
    toks.expect("eof")

    base = BaseDag(
        name=name,
        variables=tuple(variables),
        edges=frozenset(edges),
        targets=tuple(t for _, _, t in sorted(targets)),
    )
    violations = validate(base)
    if violations:
        raise GraphValidationError(violations)
    return base


def emit_graph(base: BaseDag) -> str:
    """Render a graph document that parse_graph maps back to base."""
    lines = [f"graph {base.name} {{"]
    for v in base.variables:
        parts = [f"var {v.name} @{v.time}"]
        if v.role is not Role.OTHER:
            parts.append(f"role={v.role.value}")
        if v.cardinality != 2:
            parts.append(f"levels={v.cardinality}")
        if not v.observed:
            parts.append("unobserved")
        lines.append("  " + " ".join(parts) + ";")
    for a, b in sorted(base.edges):
        lines.append(f"  edge {a} -> {b};")
    for i, t in enumerate(base.targets, start=1):
        lines.append(f"  target {t} order={i};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _parse_regime_index(toks: _Tokens) -> int:
    tok = toks.expect("ident")
    if tok[1] != "q":
        raise ParseError("expected regime marker 'q[n]'", tok[2], tok[3])
    toks.expect("punct", "[")
    n = int(toks.expect("num")[1])
    toks.expect("punct", "]")
    return n


def _parse_value(toks: _Tokens):
    kind, value, line, col = toks.next()
    if kind == "num":
        return Lit(int(value))
    if kind == "ident":
        return Sym(value)
    raise ParseError(f"expected a value, found {value!r}", line, col)


def parse_estimand(text: str, swig: Swig) -> Estimand:
    """Parse ``q[n](Y | do D1=d1, do D2=d2)`` against a SWIG: each ``do X=v``
    pins X's intervention node, plain entries condition as written."""
    toks = _Tokens(text)
    n = _parse_regime_index(toks)
    if n > swig.n_interventions:
        raise ParseError(f"regime index {n} exceeds the {swig.n_interventions} declared targets", 1, 1)
    toks.expect("punct", "(")

    dependents = []
    while True:
        name = toks.expect("ident")[1]
        ref = _parse_value(toks) if toks.accept("punct", "=") else None
        dependents.append((name, ref))
        if not toks.accept("punct", ","):
            break

    conditioners = []
    if toks.accept("punct", "|"):
        while True:
            if toks.accept("ident", "do"):
                tok = toks.expect("ident")
                tname = tok[1]
                if tname not in swig.intervention_of:
                    raise ParseError(f"{tname!r} is not an intervention target", tok[2], tok[3])
                toks.expect("punct", "=")
                conditioners.append((swig.intervention_of[tname], _parse_value(toks)))
            else:
                name = toks.expect("ident")[1]
                ref = _parse_value(toks) if toks.accept("punct", "=") else None
                conditioners.append((name, ref))
            if not toks.accept("punct", ","):
                break
    toks.expect("punct", ")")
    toks.expect("eof")
    return Estimand(
        regime=Regime.prefix(n),
        dependents=tuple(dependents),
        conditioners=tuple(conditioners),
    )


def parse_ci_query(text: str, swig: Swig) -> CiQuery:
    """Parse ``q[s]: X _||_ Y | Z1, Z2`` into a CiQuery."""
    toks = _Tokens(text)
    n = _parse_regime_index(toks)
    if n > swig.n_interventions:
        raise ParseError(f"regime index {n} exceeds the {swig.n_interventions} declared targets", 1, 1)
    toks.expect("punct", ":")

    def name_list() -> frozenset[str]:
        names = [toks.expect("ident")[1]]
        while toks.accept("punct", ","):
            names.append(toks.expect("ident")[1])
        return frozenset(names)

    x = name_list()
    toks.expect("sep")
    y = name_list()
    z: frozenset[str] = frozenset()
    if toks.accept("punct", "|"):
        z = name_list()
    toks.expect("eof")
    for name in (*x, *y, *z):
        swig.var(name)
    return CiQuery(regime=Regime.prefix(n), x=x, y=y, z=z)


def to_dot(swig: Swig, regime: Regime | None = None) -> str:
    """DOT rendering of the regime graph: intervention nodes boxed, hidden
    variables dashed, severed couplings omitted."""
    regime = regime if regime is not None else Regime.observational()
    graph = swig.regime_graph(regime)
    lines = [f'digraph "{swig.base.name}" {{', "  rankdir=LR;"]
    for v in swig.variables:
        attrs = []
        if v.name in swig.target_of:
            attrs.append("shape=box")
        else:
            attrs.append("shape=ellipse")
        if not v.observed:
            attrs.append("style=dashed")
        lines.append(f'  "{v.name}" [{", ".join(attrs)}];')
    for a, b in sorted(graph.edges):
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
