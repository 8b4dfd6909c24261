"""Command-line front end (``ticklab``).

Exit codes: 0 success, 2 input error (bad flags, invalid model, a model
that never ticks), 3 no convergence or a partial certificate. Artifacts
are written before a nonzero exit whenever one exists.
"""
import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__, jsonio, stats
from .certbound import BoundCertificate, certified_upper_bound
from .continuum import (
    classical_generator_limit,
    continuous_moments_classical,
    cyclic_family,
    identity_family,
    oneway_family,
    quantum_generator_limit,
    quantum_identity_family,
    qubit_family,
    qubit_limit_generator,
)
from .errors import NoConvergence, TickLabError
from .heurisearch import F_objective, adam_minimize, neg_G
from .models import from_dict, load_model
from .witness import (
    accuracy_report,
    classical_bound_estimate,
    finite_length_witness,
    optimize_qubit_pmf,
    qubit_family_pmf,
    reference_tables,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOCONV = 3

MODEL_KINDS = ("multicyclic", "oneway", "cyclic", "qubit", "qutrit")


class ConfigError(TickLabError):
    pass


def _default_threads():
    raw = os.environ.get("TICKLAB_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


# argument parsing -------------------------------------------------------

def _model_args(p):
    p.add_argument("--model", required=True, help="zoo name (" + ", ".join(MODEL_KINDS) + ") or file:PATH")
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--start-L", dest="start_L", type=int, help="shift the multicyclic start state for this L")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override its values")
    common.add_argument("--output", "-o", help="write to this file instead of standard output")

    parser = argparse.ArgumentParser(prog="ticklab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ticklab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("stats", parents=[common], help="mean, variance and accuracy of a model")
    _model_args(p)
    p.add_argument("--pmf-terms", type=int, default=0)
    subparsers["stats"] = p

    p = sub.add_parser("pmf", parents=[common], help="tick-time pmf and survival as CSV")
    _model_args(p)
    p.add_argument("--N", type=int, default=20, help="number of steps")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    subparsers["pmf"] = p

    p = sub.add_parser("witness", parents=[common], help="accuracy or finite-length witness")
    _model_args(p)
    p.add_argument("--kind", choices=("accuracy", "finite_length"), default="accuracy")
    p.add_argument("--L", type=int)
    p.add_argument("--certificate", help="certificate JSON from the bound subcommand")
    subparsers["witness"] = p

    p = sub.add_parser("bound", parents=[common], help="certified upper bound on max p(L)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--err", type=float, default=1e-2)
    p.add_argument("--delta0", type=float, default=0.1)
    p.add_argument("--refine-factor", dest="refine_factor", type=int, default=2)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--max-points-per-stage", dest="max_points_per_stage", type=int, default=200_000_000)
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    subparsers["bound"] = p

    p = sub.add_parser("search", parents=[common], help="Adam search over classical clocks")
    p.add_argument("--objective", choices=("pl", "F"), default="pl")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--trace", help="write per-restart initial/final objective CSV here")
    subparsers["search"] = p

    p = sub.add_parser("limit", parents=[common], help="continuous-time limit of a family")
    p.add_argument("--family", choices=("oneway", "cyclic", "identity", "qubit", "qidentity"), required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--deltas", default="1e-2,5e-3,2.5e-3", help="comma-separated, decreasing")
    subparsers["limit"] = p

    p = sub.add_parser("table", parents=[common], help="recompute reference tables")
    p.add_argument("name", choices=("qpca", "optk", "fig3"))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    subparsers["table"] = p
    return parser, subparsers


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(subparser, path):
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "config")}
    converted = {}
    for key, raw in read_config(path).items():
        if key not in actions:
            raise ConfigError(f"unknown configuration key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{key} = {raw!r} is not one of {list(action.choices)}")
        converted[key] = value
        action.required = False
    subparser.set_defaults(**converted)


def parse_args(argv):
    parser, subparsers = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        command = next((a for a in argv if a in subparsers), None)
        if command is None:
            parser.error("--config needs a subcommand")
        _apply_config(subparsers[command], known.config)
    return parser.parse_args(argv)


# helpers ------------------------------------------------------------------

def _model_from_args(args):
    if args.model.startswith("file:"):
        return load_model(args.model[len("file:"):])
    if args.model not in MODEL_KINDS:
        raise ConfigError(f"unknown model {args.model!r}")
    spec = {"kind": args.model}
    for key in ("d", "k", "q", "u"):
        value = getattr(args, key)
        if value is not None:
            spec[key] = value
    if args.start_L is not None:
        spec["L"] = args.start_L
    if args.model == "multicyclic" and "k" not in spec:
        raise ConfigError("multicyclic model needs --k")
    return from_dict(spec)


def _write(args, text):
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])
    return buf.getvalue()


# subcommands ---------------------------------------------------------------

def cmd_stats(args):
    model = _model_from_args(args)
    st = stats.tick_statistics(model, args.pmf_terms)
    _write(args, jsonio.dumps(st))
    return EXIT_OK


def cmd_pmf(args):
    model = _model_from_args(args)
    pmf, surv = stats.pmf_series(model, args.N)
    rows = [(L, float(p), float(f)) for L, (p, f) in enumerate(zip(pmf, surv), 1)]
    if args.format == "json":
        _write(args, jsonio.dumps({"L": [r[0] for r in rows], "pL": [r[1] for r in rows], "survival": [r[2] for r in rows]}))
    else:
        _write(args, _csv(("L", "pL", "survival"), rows))
    return EXIT_OK


def cmd_witness(args):
    model = _model_from_args(args)
    if args.kind == "accuracy":
        report = accuracy_report(model)
    else:
        if args.L is None:
            raise ConfigError("finite_length witness needs --L")
        cert = None
        if args.certificate:
            with open(args.certificate, encoding="utf-8") as fh:
                cert = BoundCertificate.from_dict(json.load(fh))
        report = finite_length_witness(model, args.L, cert)
    _write(args, jsonio.dumps(report))
    return EXIT_OK


def cmd_bound(args):
    cert = certified_upper_bound(
        args.d, args.L, args.err, threads=args.threads, refine_factor=args.refine_factor,
        delta0=args.delta0, max_points_per_stage=args.max_points_per_stage, progress=not args.quiet,
    )
    _write(args, jsonio.dumps(cert))
    return EXIT_NOCONV if cert.partial else EXIT_OK


def cmd_search(args):
    if args.objective == "pl":
        if args.L is None:
            raise ConfigError("objective pl needs --L")
        objective = neg_G(args.L)
    else:
        objective = F_objective()
    result = adam_minimize(objective, args.d, args.restarts, args.steps, args.lr, args.seed, args.threads)
    payload = result.to_dict()
    payload["best_value"] = -result.best_objective if args.objective == "pl" else result.best_objective
    if args.trace:
        rows = [(i, a, b) for i, (a, b) in enumerate(result.objective_trace_summary)]
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv(("restart", "initial", "final"), rows))
    _write(args, jsonio.dumps(payload))
    return EXIT_OK


def cmd_limit(args):
    deltas = [float(x) for x in args.deltas.split(",") if x.strip()]
    quantum = args.family in ("qubit", "qidentity")
    if quantum:
        family = qubit_family() if args.family == "qubit" else quantum_identity_family(args.d)
        report = quantum_generator_limit(family, deltas)
    else:
        family = {
            "oneway": lambda: oneway_family(args.d, args.alpha),
            "cyclic": lambda: cyclic_family(args.d, args.q),
            "identity": lambda: identity_family(args.d),
        }[args.family]()
        report = classical_generator_limit(family, deltas)
    payload = report.to_dict()
    payload["family"] = args.family
    if report.exists and not quantum:
        try:
            st = continuous_moments_classical(report.generator)
            payload["continuous"] = st.to_dict()
            payload["R_continuous"] = None if st.accuracy_infinite else st.accuracy
        except TickLabError as exc:
            payload["continuous"] = None
            payload["notes"].append(str(exc))
    if report.exists and quantum:
        g = report.generator
        payload["V"] = {"re": g.V.real.tolist(), "im": g.V.imag.tolist()}
        payload["H"] = {"re": g.H.real.tolist(), "im": g.H.imag.tolist()}
        if args.family == "qubit":
            payload["expected_limit_error"] = float(np.abs(report.limit - qubit_limit_generator()).max())
    _write(args, jsonio.dumps(payload))
    return EXIT_OK


def _table_rows(name):
    tables = reference_tables()
    if name == "optk":
        header = ["d"] + [f"d+{j}" for j in range(1, 11)]
        rows = [[d] + [classical_bound_estimate(d, d + j)[1] for j in range(1, 11)] for d in range(3, 11)]
        return header, rows
    if name == "qpca":
        header = [
            "L", "quantum_reference", "estimate_reference", "upper_bound_reference",
            "estimate_recomputed", "quantum_family_recomputed", "quantum_optimized_recomputed",
        ]
        rows = []
        for L, (qref, eref, ubref) in sorted(tables.qpca.items()):
            rows.append([
                L, qref, eref, ubref, classical_bound_estimate(2, L)[0],
                qubit_family_pmf(L), optimize_qubit_pmf(L).value,
            ])
        return header, rows
    header = ["L", "classical_bound", "quantum_fixed", "quantum_optimized"]
    rows = []
    for L, (_, _, ubref) in sorted(tables.qpca.items()):
        rows.append([L, ubref, qubit_family_pmf(L), optimize_qubit_pmf(L).value])
    return header, rows


def cmd_table(args):
    header, rows = _table_rows(args.name)
    if args.format == "json":
        _write(args, jsonio.dumps({"columns": header, "rows": rows}))
    else:
        _write(args, _csv(header, rows))
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "pmf": cmd_pmf,
    "witness": cmd_witness,
    "bound": cmd_bound,
    "search": cmd_search,
    "limit": cmd_limit,
    "table": cmd_table,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except (TickLabError, OSError) as exc:
        print(f"ticklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except NoConvergence as exc:
        print(f"ticklab: NoConvergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except TickLabError as exc:
        print(f"ticklab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"ticklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
