"""``catfeyn`` command line: wick, translate, amplitude, compose, verify."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .amplitude import (
    AmplitudeError,
    MomentumAssignment,
    amplitude_from_categorical,
    eval_amplitude,
    extract_conservation,
    feynman_rules,
    species_of,
)
from .config import FORMATS, PRESETS, ConfigError, RunConfig, four_momenta, load_config, parse_momenta
from .diagram.graph import FeynmanGraph, GraphError, parse_feynman_graph
from .diagram.ir import (
    DiagramError,
    FormalSum,
    compose_sequential,
    evaluate_numeric,
    linearize,
    new_propagator_count,
    render_dot,
    render_text,
    translate,
)
from .diagram.numeric import MOMENTUM_METHOD
from .fock import FockBasis, FockLayout, FockError, ResourceError
from .lattice import LatticeError
from .opalg import (
    OperatorError,
    OperatorString,
    WickTerm,
    channel_species,
    phi,
    psi,
    psid,
    select_channel,
    smatrix_term,
    wick_expand,
)
from .splitmerge import WEIGHTINGS
from .verify import exit_code, run_verification

_ERRORS = (GraphError, OperatorError, AmplitudeError, ConfigError, DiagramError, FockError, ResourceError,
           LatticeError, OSError)


# -- JSON mirrors of the text forms ------------------------------------------------------------


def term_json(t: WickTerm) -> dict:
    return {
        "text": t.text(),
        "prefactor": {"coupling_order": t.prefactor.order, "coeff": str(t.prefactor.coeff)},
        "labels": list(t.labels),
        "operators": [
            {"symbol": f.name, "kind": f.kind, "arg": f.arg if isinstance(f.arg, str) else str(f.arg)}
            for f in t.remainder
        ],
        "propagators": [{"kind": p.kind, "mass": p.mass, "a": p.a, "b": p.b} for p in t.propagators],
    }


def diagram_json(d) -> dict:
    if isinstance(d, FormalSum):
        return {"formal_sum": [{"coeff": str(c), "diagram": diagram_json(t)} for c, t in d.terms]}
    return {
        "prefactor": d.prefactor.text(),
        "nodes": [{"id": nid, "type": type(n).__name__, **{k: str(v) for k, v in vars(n).items()}}
                  for nid, n in d.nodes],
        "wires": [vars(w) for w in d.wires],
        "term": linearize(d).canonical().text(),
    }


# -- commands ------------------------------------------------------------------------------------


def field_product(order: int, preset: str) -> OperatorString:
    """What ``wick`` expands: the Dyson term (Yukawa) or a plain product of free fields."""
    if preset == "scalar-yukawa":
        return smatrix_term(order)
    labels = tuple(f"x{i}" for i in range(1, order + 1))
    if preset == "real-scalar":
        factors = tuple(phi(x) for x in labels)
    else:
        factors = tuple((psid if i % 2 == 0 else psi)(x) for i, x in enumerate(labels))
    return OperatorString(factors)


def cmd_wick(args, cfg: RunConfig) -> int:
    if args.order is None or args.order < 0:
        raise OperatorError("--order must be a non-negative integer")
    preset = args.theory or cfg.preset
    terms = wick_expand(field_product(args.order, preset))
    if args.channel:
        if preset != "scalar-yukawa":
            raise OperatorError("channels are defined for scalar-yukawa only")
        incoming, outgoing = channel_species(args.channel)
        seen, picked = set(), []
        for t in select_channel(terms, incoming, outgoing):
            if t.key() not in seen:
                seen.add(t.key())
                picked.append(t)
        terms = picked
    fmt = cfg.output_format
    if fmt == "json":
        print(json.dumps([term_json(t) for t in terms], indent=2))
    elif fmt == "canonical":
        for t in terms:
            print(t.canonical().text() if t.is_ladder_term else t.text())
    elif fmt == "text":
        what = f"channel {args.channel}" if args.channel else "all contraction patterns"
        print(f"# {preset}, order {args.order}, {what}: {len(terms)} term(s)")
        for i, t in enumerate(terms):
            print(f"[{i}] {t.canonical().text() if t.is_ladder_term else t.text()}")
    else:
        raise ConfigError("wick supports --format text, canonical or json")
    return 0


def _read_graph(path: str) -> FeynmanGraph:
    return parse_feynman_graph(Path(path).read_text())


def cmd_translate(args, cfg: RunConfig) -> int:
    d = translate(_read_graph(args.graph))
    fmt = cfg.output_format
    if fmt == "dot":
        sys.stdout.write(render_dot(d))
    elif fmt == "json":
        print(json.dumps(diagram_json(d), indent=2))
    elif fmt == "canonical":
        print(linearize(d).canonical().text())
    else:
        sys.stdout.write(render_text(d))
    return 0


def _legs(g: FeynmanGraph):
    incoming = [(species_of(l.species), l.momentum) for l in g.incoming]
    outgoing = [(species_of(l.species), l.momentum) for l in g.outgoing]
    return incoming, outgoing


def _print_amplitude(label: str, e, fmt: str):
    ia, delta = extract_conservation(e)
    if fmt == "json":
        return {"method": label, "iA": ia.to_json(), "delta": delta.to_json()}
    if fmt == "canonical":
        print(e.text())
    else:
        print(f"[{label}] iA = {ia.text()}")
        print(f"[{label}] delta = {delta.text()}")
        print(f"[{label}] markup: {ia.latex()}")
    return None


def cmd_amplitude(args, cfg: RunConfig) -> int:
    g = _read_graph(args.graph)
    incoming, outgoing = _legs(g)
    method = args.method or "both"
    results = {}
    if method in ("rules", "both"):
        results["rules"] = feynman_rules(g, symmetrize=True)
    if method in ("categorical", "both"):
        results["categorical"] = amplitude_from_categorical(translate(g), incoming, outgoing)
    fmt = cfg.output_format
    payload = {"amplitudes": [], "verdict": None, "value": None}
    for label, e in results.items():
        j = _print_amplitude(label, e, fmt)
        if j:
            payload["amplitudes"].append(j)
    status = 0
    if method == "both":
        match = results["rules"].text() == results["categorical"].text()
        payload["verdict"] = "MATCH" if match else "MISMATCH"
        if fmt != "json":
            print("MATCH" if match else "MISMATCH")
        status = 0 if match else 1
    if args.momenta:
        spec = parse_momenta(Path(args.momenta).read_text(), cfg.lattice)
        masses = {}
        for leg in g.legs:
            sp = species_of(leg.species)
            masses[leg.momentum] = cfg.theory.meson_mass if sp == "m" else cfg.theory.nucleon_mass
        moms, off = four_momenta(spec, masses)
        assign = MomentumAssignment(moms, cfg.lattice, loop_cutoff=cfg.loop_cutoff, off_shell=off)
        e = next(iter(results.values()))
        value = eval_amplitude(e, assign, epsilon=cfg.theory.epsilon, theory=cfg.theory)
        payload["value"] = [value.real, value.imag]
        if fmt != "json":
            print(f"value = {value.real:.12g} {'+' if value.imag >= 0 else '-'} {abs(value.imag):.12g}i")
    if fmt == "json":
        print(json.dumps(payload, indent=2))
    return status


def cmd_compose(args, cfg: RunConfig) -> int:
    d1 = translate(_read_graph(args.first))
    d2 = translate(_read_graph(args.second))
    fs = compose_sequential(d1, d2)
    fmt = cfg.output_format
    if fmt == "dot":
        sys.stdout.write(render_dot(fs))
    elif fmt == "json":
        print(json.dumps(diagram_json(fs), indent=2))
    else:
        if fmt == "text":
            print(f"# {len(fs)} term(s)")
        for i, (c, t) in enumerate(fs):
            body = linearize(t).canonical().text()
            if fmt == "canonical":
                print(body)
            else:
                print(f"[{i}] coeff {c}, {new_propagator_count(t)} new propagator(s): {body}")
    if args.check:
        layout = FockLayout.yukawa(cfg.lattice, cfg.theory)
        basis = FockBasis(layout, max_particles=cfg.max_particles)
        a = evaluate_numeric(d1, cfg.lattice, cfg.theory, basis=basis, method=MOMENTUM_METHOD)
        b = evaluate_numeric(d2, cfg.lattice, cfg.theory, basis=basis, method=MOMENTUM_METHOD)
        s = evaluate_numeric(fs, cfg.lattice, cfg.theory, basis=basis, method=MOMENTUM_METHOD)
        # the product only closes on the states the first factor keeps inside the basis
        resid = float(np.abs(s - b @ a).max())
        ok = resid <= 1e-8
        print(f"{'PASS' if ok else 'FAIL'} numeric check on {len(basis)} states: residual {resid:.3e}")
        return 0 if ok else 1
    return 0


def cmd_verify(args, cfg: RunConfig) -> int:
    results = run_verification(cfg, log=print)
    failed = [r for r in results if not (r.passed or r.waived)]
    print(f"# {len(results) - len(failed)}/{len(results)} passed or waived")
    return exit_code(results)


# -- parser ----------------------------------------------------------------------------------------


def _common_options(default):
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--config", help="INI config file (default: $CATFEYN_CONFIG)")
    common.add_argument("--format", choices=FORMATS, dest="output_format")
    common.add_argument("--weighting", choices=WEIGHTINGS)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--loop-cutoff", type=int, dest="loop_cutoff")
    return common


def build_parser() -> argparse.ArgumentParser:
    # options are accepted before or after the subcommand; the subcommand copies
    # set no defaults so they cannot overwrite values given before it
    parser = argparse.ArgumentParser(prog="catfeyn", description=__doc__, parents=[_common_options(None)])
    common = _common_options(argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"catfeyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wick", parents=[common], help="list Wick terms")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--channel", help="e.g. 'NN->NN', 'NA->NA', 'm->NA'")
    p.add_argument("--theory", choices=PRESETS)
    p.set_defaults(func=cmd_wick)

    p = sub.add_parser("translate", parents=[common], help="Feynman graph file to categorical diagram")
    p.add_argument("graph")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("amplitude", parents=[common], help="scattering amplitude of a graph file")
    p.add_argument("graph")
    p.add_argument("momenta", nargs="?", help="momenta file for a numeric value")
    p.add_argument("--method", choices=("rules", "categorical", "both"))
    p.set_defaults(func=cmd_amplitude)

    p = sub.add_parser("compose", parents=[common], help="sequential composition of two graph files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--check", action="store_true", help="re-check the matrix identity numerically")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            output_format=args.output_format, weighting=args.weighting, epsilon=args.epsilon,
            loop_cutoff=args.loop_cutoff,
        )
        return args.func(args, cfg)
    except _ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
