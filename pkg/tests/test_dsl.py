"""Graph documents, query strings, and DOT output."""

from importlib import resources

import pytest

from swigident import (
    CiQuery,
    Estimand,
    GraphValidationError,
    Lit,
    ParseError,
    Regime,
    SwigIdentError,
    Sym,
    ablated_figure1,
    emit_graph,
    figure1,
    figure2,
    figure3,
    parse_ci_query,
    parse_estimand,
    parse_graph,
    to_dot,
    to_swig,
)

FIXTURE_BUILDERS = {
    "fig1": figure1,
    "fig1_ablated": ablated_figure1,
    "fig2_n2": lambda: figure2(2),
    "fig3_n2": lambda: figure3(2),
}


@pytest.mark.parametrize("name", sorted(FIXTURE_BUILDERS))
def test_packaged_fixtures_match_builders(name):
    text = resources.files("swigident").joinpath(f"fixtures/{name}.swig").read_text("utf-8")
    base = FIXTURE_BUILDERS[name]()
    assert parse_graph(text) == base
    assert emit_graph(base) == text


def test_emit_parse_round_trip_with_attributes():
    base = figure1(l_observed=False)
    text = emit_graph(base)
    assert "unobserved" in text
    assert parse_graph(text) == base

    wide = parse_graph(
        "graph wide {\n"
        "  var A @0 levels=4;\n"
        "  var B @1 role=target;\n"
        "  edge A -> B;\n"
        "  target B order=1;\n"
        "}\n"
    )
    assert wide.variables[0].cardinality == 4
    assert parse_graph(emit_graph(wide)) == wide


def test_parse_graph_ignores_comments_and_blank_lines():
    text = (
        "# header comment\n\n"
        "graph g {\n"
        "  var X @0 role=target;  # trailing comment\n"
        "\n"
        "  target X order=1;\n"
        "}\n"
    )
    base = parse_graph(text)
    assert base.name == "g" and base.targets == ("X",)


@pytest.mark.parametrize(
    "text,line,column",
    [
        ("graph g {\n  var X @0\n}", 3, 1),
        ("digraph g {}", 1, 1),
        ("graph g { var X $0; }", 1, 17),
        ("graph g {\n  edge A -> ;\n}", 2, 13),
        ("graph g {\n  var X @0 role=boss;\n}", 2, 17),
    ],
)
def test_parse_graph_reports_positions(text, line, column):
    with pytest.raises(ParseError) as exc:
        parse_graph(text)
    assert exc.value.line == line
    assert exc.value.column == column
    assert f"line {line}, column {column}" in str(exc.value)


def test_parse_graph_runs_validation():
    dup = "graph g {\n  var X @0;\n  var X @1;\n  target X order=1;\n}"
    with pytest.raises(GraphValidationError, match="declared twice"):
        parse_graph(dup)
    cycle = (
        "graph g {\n  var A @0;\n  var B @1 role=target;\n"
        "  edge A -> B;\n  edge B -> A;\n  target B order=1;\n}"
    )
    with pytest.raises(GraphValidationError, match="cycle"):
        parse_graph(cycle)


def test_parse_estimand_maps_do_to_intervention_node(fig1):
    est = parse_estimand("q[1](Y1 | do D1=d1)", fig1)
    assert est == Estimand.of(Regime.prefix(1), ("Y1",), [("Do1", Sym("d1"))])

    est2 = parse_estimand("q[1](Y1=1 | do D1=0, L=l)", fig1)
    assert est2.dependents == (("Y1", Lit(1)),)
    assert est2.conditioners == (("Do1", Lit(0)), ("L", Sym("l")))

    obs = parse_estimand("q[0](M1, Y1 | D1=0)", fig1)
    assert obs.regime == Regime.observational()
    assert obs.dependents == (("M1", None), ("Y1", None))


def test_parse_estimand_errors(fig1):
    with pytest.raises(ParseError, match="exceeds the 1 declared targets"):
        parse_estimand("q[2](Y1 | do D1=d1)", fig1)
    with pytest.raises(ParseError, match="not an intervention target"):
        parse_estimand("q[1](Y1 | do L=0)", fig1)
    with pytest.raises(ParseError):
        parse_estimand("q[1](Y1 | do D1=d1", fig1)


def test_parse_ci_query(fig1):
    q = parse_ci_query("q[1]: Y1 _||_ Do1 | M1, D1", fig1)
    assert q == CiQuery(
        Regime.prefix(1), frozenset({"Y1"}), frozenset({"Do1"}), frozenset({"M1", "D1"})
    )
    bare = parse_ci_query("q[0]: L _||_ D1", fig1)
    assert bare.z == frozenset()
    assert str(bare) == "q0: L _||_ D1"
    with pytest.raises(SwigIdentError, match="unknown variable"):
        parse_ci_query("q[1]: Y1 _||_ Nope", fig1)
    with pytest.raises(ParseError):
        parse_ci_query("q[1]: Y1 Do1", fig1)


def test_to_dot_marks_roles_and_regimes(fig1, fig1_hidden):
    dot0 = to_dot(fig1)
    assert '"Do1" [shape=box];' in dot0
    assert '"D1" -> "Do1";' in dot0  # coupling intact when observational
    dot1 = to_dot(fig1, Regime.prefix(1))
    assert '"D1" -> "Do1";' not in dot1  # severed under intervention
    assert '"Do1" -> "M1";' in dot1
    assert '"L" [shape=ellipse, style=dashed];' in to_dot(fig1_hidden)
