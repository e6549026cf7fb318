"""Command-line front end.

Subcommands: identify, verify, dsep, simulate, dot, fixture.  Exit codes:
0 on success (including a true/false dsep answer), 2 when an estimand is not
identified or a verification fails, 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .dsl import parse_ci_query, parse_estimand, parse_graph, to_dot
from .engine import Derivation, Strategy, identify, verify
from .errors import SwigIdentError
from .expr import to_text
from .graphs import d_separated
from .model import BaseDag, Regime, Variable, to_swig
from .oracle import load_model, random_model, sample

FIXTURES = ("fig1", "fig1_ablated", "fig2_n2", "fig3_n2")


def _default_seed() -> int:
    try:
        return int(os.environ.get("SWIG_IDENT_SEED", "0"))
    except ValueError:
        return 0


def _load_base(path: str, unobserved: list[str]) -> BaseDag:
    with open(path, "r", encoding="utf-8") as fh:
        base = parse_graph(fh.read())
    hidden = {name for group in unobserved for name in group.split(",") if name}
    if hidden:
        unknown = hidden - set(base.names)
        if unknown:
            raise SwigIdentError(f"--unobserved names not in graph: {sorted(unknown)}")
        base = BaseDag(
            name=base.name,
            variables=tuple(
                Variable(v.name, v.time, v.role, v.name not in hidden and v.observed, v.cardinality)
                for v in base.variables
            ),
            edges=base.edges,
            targets=base.targets,
        )
    return base


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_identify(args) -> int:
    base = _load_base(args.graph, args.unobserved)
    swig = to_swig(base)
    estimand = parse_estimand(args.query, swig)
    strategy = Strategy.parse(args.strategy, depth=args.depth)
    derivation = identify(swig, estimand, strategy)
    if args.json:
        _emit(args, _json_dump(derivation.to_json()))
    else:
        lines = [derivation.trace()]
        if derivation.identified:
            lines.append("")
            lines.append(to_text(derivation.final))
        _emit(args, "\n".join(lines) + "\n")
    return 0 if derivation.identified else 2


def cmd_verify(args) -> int:
    base = _load_base(args.graph, args.unobserved)
    swig = to_swig(base)
    with open(args.derivation, "r", encoding="utf-8") as fh:
        derivation = Derivation.from_json(json.load(fh))
    report = verify(derivation, swig, n_models=args.models, seed=args.seed, tol=args.tol)
    if args.json:
        _emit(args, _json_dump(report.to_json()))
    else:
        _emit(args, report.summary() + "\n")
    return 0 if report.passed else 2


def cmd_dsep(args) -> int:
    base = _load_base(args.graph, args.unobserved)
    swig = to_swig(base)
    query = parse_ci_query(args.query, swig)
    result = d_separated(swig, query)
    if args.json:
        _emit(args, _json_dump({"query": query.to_json(), "d_separated": result}))
    else:
        _emit(args, ("true" if result else "false") + "\n")
    return 0


def cmd_simulate(args) -> int:
    base = _load_base(args.graph, args.unobserved)
    swig = to_swig(base)
    if args.model:
        with open(args.model, "r", encoding="utf-8") as fh:
            model = load_model(fh)
        if model.swig.graph != swig.graph:
            raise SwigIdentError("model file does not match the graph")
    else:
        model = random_model(swig, seed=args.seed)
    regime = Regime.prefix(args.regime)
    swig.check_regime(regime)
    dataset = sample(model, regime, args.n, seed=args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            dataset.write_csv(fh)
    else:
        dataset.write_csv(sys.stdout)
    return 0


def cmd_dot(args) -> int:
    base = _load_base(args.graph, args.unobserved)
    swig = to_swig(base)
    regime = Regime.prefix(args.regime)
    swig.check_regime(regime)
    _emit(args, to_dot(swig, regime))
    return 0


def cmd_fixture(args) -> int:
    if args.name not in FIXTURES:
        raise SwigIdentError(f"unknown fixture {args.name!r}; choose from {', '.join(FIXTURES)}")
    text = resources.files("swigident").joinpath(f"fixtures/{args.name}.swig").read_text("utf-8")
    _emit(args, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swigident",
        description="Identify interventional estimands on split-node graphs "
        "and audit the derivations numerically.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        if graph:
            p.add_argument("graph", help="path to a .swig graph file")
        p.add_argument(
            "--unobserved",
            action="append",
            default=[],
            metavar="NAMES",
            help="mark comma-separated variables as unobserved (repeatable)",
        )
        p.add_argument("--out", default=None, help="write output to a file instead of stdout")

    p = sub.add_parser("identify", help="derive an observed-data formula for an estimand")
    common(p)
    p.add_argument("query", help="estimand, e.g. \"q[1](Y1 | do D1=d1)\"")
    p.add_argument(
        "--strategy",
        default="top_down",
        help="backdoor[:vars] | frontdoor[:vars] | sequential_backdoor | "
        "sequential_frontdoor[:vars] | mediator_intervention[:vars] | top_down | bottom_up",
    )
    p.add_argument("--depth", type=int, default=16, help="search depth bound")
    p.add_argument("--json", action="store_true", help="emit the derivation as JSON")
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("verify", help="replay a derivation JSON against random models")
    common(p)
    p.add_argument("derivation", help="path to a derivation JSON file")
    p.add_argument("--models", type=int, default=100)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("dsep", help="answer a d-separation query")
    common(p)
    p.add_argument("query", help="query, e.g. \"q[1]: Y1 _||_ Do1 | M1, D1\"")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_dsep)

    p = sub.add_parser("simulate", help="sample a dataset from a model under a regime")
    common(p)
    p.add_argument("--n", type=int, default=1000, help="number of rows")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--regime", type=int, default=0, help="prefix regime index")
    p.add_argument("--model", default=None, help="model JSON (default: random CPTs)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("dot", help="emit the regime graph as DOT")
    common(p)
    p.add_argument("--regime", type=int, default=0, help="prefix regime index")
    p.set_defaults(fn=cmd_dot)

    p = sub.add_parser("fixture", help="print a bundled example graph")
    p.add_argument("name", help=f"one of: {', '.join(FIXTURES)}")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SwigIdentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
