"""``slhnet`` command-line interface.

Exit codes: 0 success, 1 diagnostics (syntax, network rules, invariants,
bad arguments), 2 numerical failure.  Command-line flags override the
netlist's ``run { ... }`` block.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from .dynamics import (
    NumericalError,
    evolve_master,
    evolve_zakai,
    heisenberg_coefficients,
    normalized,
    run_tasks,
    simulate_record,
)
from .netlist import Diagnostic, NetlistDocument, NetlistError, parse_netlist, validate_document
from .network import NetworkError, reduce
from .serialize import array_to_json, spaces_to_json, triple_to_json

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_NUMERICAL = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slhnet", description="Reduce and simulate SLH quantum networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt_choices, fmt_default):
        p.add_argument("file", help="netlist file ('-' for stdin)")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=fmt_choices, default=fmt_default)
        p.add_argument("--tol", type=float, help="invariant tolerance (default 1e-10)")

    common(sub.add_parser("reduce", help="reduce the network to a single triple"), ["json", "text"], "json")
    common(sub.add_parser("check", help="check network rules and component invariants"), ["json", "text"], "text")
    p = sub.add_parser("heisenberg", help="coefficients of the Heisenberg equation of an operator")
    common(p, ["json", "text"], "json")
    p.add_argument("--op", required=True, help="operator expression, e.g. \"a(c)\"")
    for name, helptext in (("simulate", "integrate the master equation"),
                           ("filter", "simulate homodyne records and run the Zakai filter")):
        p = sub.add_parser(name, help=helptext)
        common(p, ["csv", "json"], "csv")
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--obs", action="append", default=[], help="observable expression (repeatable)")
        if name == "filter":
            p.add_argument("--channel", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--runs", type=int)
    return parser


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _setting(args, doc: NetlistDocument, key: str, default=None):
    v = getattr(args, key, None)
    if v is None:
        v = doc.run.get(key, default)
    if v is None:
        raise NetlistError([Diagnostic("error", f"{key} not given on the command line or in a run block", 1, 1)])
    return v


def _tol(args, doc) -> float:
    return float(_setting(args, doc, "tol", 1e-10))


def _reduced(doc: NetlistDocument, tol: float):
    diags, _ = validate_document(doc, tol)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise NetlistError(errors)
    try:
        red = reduce(doc.network())
    except NetworkError as exc:
        raise NetlistError([Diagnostic("error", str(exc), 1, 1)]) from None
    return red, red.triple.embed(doc.signature), diags


def _observables(args, doc: NetlistDocument) -> dict:
    exprs = list(args.obs)
    if not exprs:
        exprs = [f"n({f.label})" for f in doc.spaces if f.kind == "fock"]
    return {e: doc.expression(e) for e in exprs}


def _time_settings(args, doc):
    dt, T = float(_setting(args, doc, "dt")), float(_setting(args, doc, "T"))
    if not (np.isfinite(dt) and np.isfinite(T)) or dt <= 0 or T < 0:
        raise NetlistError([Diagnostic("error", "need dt > 0 and T >= 0", 1, 1)])
    return dt, T


def cmd_reduce(args, doc) -> str:
    red, g, _ = _reduced(doc, _tol(args, doc))
    if args.format == "text":
        lines = [f"channels: {g.n}", f"spaces: {[f.label for f in g.signature]}",
                 f"order: {red.chain_report['channels']}"]
        return "\n".join(lines) + "\n"
    return json.dumps(triple_to_json(g, red.chain_report)) + "\n"


def cmd_check(args, doc) -> tuple[str, int]:
    diags, report = validate_document(doc, _tol(args, doc))
    code = EXIT_DIAGNOSTICS if any(d.severity == "error" for d in diags) else EXIT_OK
    if args.format == "json":
        out = {"ok": code == EXIT_OK, "components": report,
               "diagnostics": [d.__dict__ for d in diags]}
        return json.dumps(out) + "\n", code
    lines = [f"{r['component']}: channels={r['channels']} unitarity_error={r['unitarity_error']:.3e} "
             f"hermiticity_error={r['hermiticity_error']:.3e}" for r in report]
    lines += [str(d) for d in diags]
    lines.append("ok" if code == EXIT_OK else "failed")
    return "\n".join(lines) + "\n", code


def cmd_heisenberg(args, doc) -> str:
    _, g, _ = _reduced(doc, _tol(args, doc))
    X = doc.expression(args.op)
    c = heisenberg_coefficients(g, X)
    if args.format == "text":
        return f"drift:\n{c.drift.data}\n"
    n = g.n
    out = {
        "operator": args.op,
        "spaces": spaces_to_json(g.signature),
        "channels": n,
        "drift": array_to_json(c.drift.data),
        "dA_dagger_coeff": [array_to_json(c.dA_dagger_coeff.data[i, 0]) for i in range(n)],
        "dA_coeff": [array_to_json(c.dA_coeff.data[0, j]) for j in range(n)],
        "gauge_coeff": [[array_to_json(c.gauge_coeff.data[i, j]) for j in range(n)] for i in range(n)],
    }
    return json.dumps(out) + "\n"


def cmd_simulate(args, doc) -> str:
    _, g, _ = _reduced(doc, _tol(args, doc))
    dt, T = _time_settings(args, doc)
    obs = _observables(args, doc)
    rho0 = doc.initial_state(g.signature)
    traj = evolve_master(g, rho0, dt, T, obs, store_states=False)
    if args.format == "json":
        return json.dumps({"t": traj.times.tolist(),
                           "expectations": {k: [[v.real, v.imag] for v in vals]
                                            for k, vals in traj.expectations.items()}}) + "\n"
    return traj.to_csv()


def cmd_filter(args, doc) -> str:
    _, g, _ = _reduced(doc, _tol(args, doc))
    dt, T = _time_settings(args, doc)
    channel = int(_setting(args, doc, "channel", 0))
    seed = int(_setting(args, doc, "seed", 0))
    runs = int(_setting(args, doc, "runs", 1))
    if not 0 <= channel < g.n:
        raise NetlistError([Diagnostic("error", f"channel {channel} out of range 0..{g.n - 1}", 1, 1)])
    if runs < 1:
        raise NetlistError([Diagnostic("error", "runs must be at least 1", 1, 1)])
    obs = _observables(args, doc)
    rho0 = doc.initial_state(g.signature)

    def one(task: int):
        dy = simulate_record(g, channel, rho0, dt, T, seed, task)
        traj = evolve_zakai(g, channel, rho0, dy, dt, obs)
        return dy, traj, normalized(traj)

    results = run_tasks(one, runs)
    names = list(obs)
    if args.format == "json":
        return json.dumps([{"run": r, "t": traj.times.tolist(), "dy": dy.tolist(),
                            "norm": traj.extra["norm"].real.tolist(),
                            "estimates": {k: [[v.real, v.imag] for v in est[k]] for k in names}}
                           for r, (dy, traj, est) in enumerate(results)]) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "t", "dy", "norm", *[f"{p}[{n}]" for n in names for p in ("re", "im")]])
    for r, (dy, traj, est) in enumerate(results):
        for k, t in enumerate(traj.times):
            inc = dy[k - 1] if k else 0.0
            row = [r, repr(float(t)), repr(float(inc)), repr(float(traj.extra["norm"][k].real))]
            for n in names:
                v = complex(est[n][k])
                row += [repr(v.real), repr(v.imag)]
            w.writerow(row)
    return buf.getvalue()


COMMANDS = {"reduce": cmd_reduce, "check": cmd_check, "heisenberg": cmd_heisenberg,
            "simulate": cmd_simulate, "filter": cmd_filter}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"slhnet: error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    try:
        doc = parse_netlist(_read(args.file))
        result = COMMANDS[args.command](args, doc)
        code = EXIT_OK
        if isinstance(result, tuple):
            result, code = result
    except NetlistError as exc:
        for d in exc.diagnostics:
            print(f"{args.file}:{d}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except OSError as exc:
        print(f"slhnet: error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"slhnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(result)
    else:
        sys.stdout.write(result)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
