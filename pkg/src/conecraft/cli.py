"""Command-line interface.

Every command prints its result (CSV, JSON or a plain table) to stdout or
to ``-o FILE``.  A run manifest accompanies each result: it is written to
``FILE.manifest.json`` next to an output file, or to stderr otherwise.

Exit codes: 0 success, 1 a verification suite found a violated bound,
2 bad usage or invalid parameters, 3 a simulation hit the qubit cap.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from ._util import fmt, set_default_threads
from .bounds import (
    PATH,
    SQUARE_GRID,
    DecayModel,
    dmera_bounds,
    dmera_error_bound,
    improved_stability_bound,
    kim_optimal_cutoff,
    ri_bounds,
    ri_error_bound,
    table1_csv,
    table1_row,
)
from .cone import cone_to_json, extract_effective_circuit, trace_cone
from .mixing import (
    build_transfer_operator,
    certify_mixing,
    estimate_delta_sup,
    mixing_profile,
    mixing_time_bound,
    profile_header_json,
    profile_to_csv,
)
from .scheme import (
    SIM_CAP_DENSITY,
    SchemeError,
    build_dmera,
    build_mps,
    build_ri,
    parse_scheme,
    scheme_totals,
    serialize_scheme,
)
from .sim import CapExceeded, HeisenbergOperator, local_observable, observable_from_json, pauli_string
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Provenance record for one CLI invocation.

    Two manifests that agree on everything except ``timestamp`` describe
    runs with bit-identical numeric output.
    """

    command: str
    params: dict
    seed: int | None
    version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    timestamp: str = ""

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "version": self.version,
            "inputs": self.inputs,
            "timestamp": self.timestamp,
        }
        return json.dumps(doc, sort_keys=True, indent=2)


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ----------------------------------------------------------------------
# input helpers


def _load_scheme(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read scheme file {path}: {exc.strerror}") from None
    return parse_scheme(text)


def _labels(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"qubit list must be comma-separated integers, got {text!r}") from None
    if not out:
        raise UsageError("qubit list is empty")
    return out


def _load_observable(spec: str, scheme) -> HeisenbergOperator:
    """``PAULIS@labels`` such as ``ZZ@3,4``, or a JSON file ``{support, matrix}``."""
    if "@" in spec and not Path(spec).exists():
        word, _, where = spec.partition("@")
        labels = _labels(where)
        word = word.upper()
        if len(word) != len(labels) or set(word) - set("IXYZ"):
            raise UsageError(f"observable {spec!r}: need one of I, X, Y, Z per listed qubit")
        if len(labels) > SIM_CAP_DENSITY:
            raise CapExceeded(f"observable acts on {len(labels)} qubits, cap is {SIM_CAP_DENSITY}", scheme.T)
        wires = [scheme.wire_of(q) for q in labels]
        return local_observable(pauli_string(word), wires, scheme.T)
    try:
        text = Path(spec).read_text()
    except OSError:
        raise UsageError(f"observable {spec!r} is neither PAULIS@qubits nor a readable file") from None
    return observable_from_json(text, scheme)


def _input_digests(args) -> dict[str, str]:
    out = {}
    for name in ("scheme", "observable"):
        p = getattr(args, name, None)
        if p and Path(p).is_file():
            out[p] = sha256_file(p)
    return out


def _params(args) -> dict:
    skip = {"func", "output", "threads", "emit_circuit"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, command: str, text: str, extra_files: tuple[str, ...] = ()) -> None:
    manifest = RunManifest(
        command=command,
        params=_params(args),
        seed=getattr(args, "seed", None),
        inputs=_input_digests(args),
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    if args.output:
        Path(args.output).write_text(text)
        Path(args.output + ".manifest.json").write_text(manifest.to_json() + "\n")
    else:
        sys.stdout.write(text)
        sys.stderr.write(manifest.to_json() + "\n")
    for f in extra_files:
        Path(f + ".manifest.json").write_text(manifest.to_json() + "\n")


# ----------------------------------------------------------------------
# scheme


def cmd_scheme_build(args) -> int:
    common = dict(gate_source=args.gates, seed=args.seed, translation_invariant=args.translation_invariant)
    if args.preset == "dmera":
        if args.bath is not None or args.dim is not None or args.side is not None:
            raise UsageError("dmera takes no --bath, --dim or --side")
        scheme = build_dmera(args.T, args.D, **common)
    elif args.preset == "mps":
        if args.dim is not None or args.side is not None:
            raise UsageError("mps takes --bath, not --dim/--side")
        scheme = build_mps(args.T, 1 if args.bath is None else args.bath, args.D, **common)
    else:
        if args.bath is not None:
            raise UsageError("ri takes --dim and --side, not --bath")
        if args.dim is None or args.side is None:
            raise UsageError("ri needs --dim and --side")
        scheme = build_ri(args.dim, args.side, args.T, args.D, **common)
    _emit(args, "scheme build", serialize_scheme(scheme) + "\n")
    return EXIT_OK


def cmd_scheme_info(args) -> int:
    scheme = _load_scheme(args.scheme)
    tot = scheme_totals(scheme)
    lines = [
        f"name    {scheme.name}",
        f"T       {scheme.T}",
        f"D       {scheme.D}",
        f"bath    {scheme.bath_size}",
        f"final   {len(scheme.live_wires(scheme.T))} qubits",
        f"total   {tot.total_gates} gates, {tot.total_qubits} qubits",
        "",
        "iter  gates  new  live",
    ]
    for row in tot.per_iteration:
        lines.append(f"{row['iteration']:>4}  {row['gates']:>5}  {row['new_qubits']:>3}  {row['live']:>4}")
    _emit(args, "scheme info", "\n".join(lines) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# cone


def _circuit_json(circuit, scheme) -> str:
    steps = []
    for step in circuit.steps:
        if step[0] == "prep":
            steps.append({"op": "prep", "qubit": step[1], "state": [[fmt(z.real), fmt(z.imag)] for z in step[2].ravel()]})
        elif step[0] == "gate":
            s = step[1]
            steps.append(
                {"op": "gate", "slot": s.index, "iteration": s.iteration, "layer": s.layer,
                 "qubits": list(s.edge), "gate": s.gate.label}
            )
        else:
            steps.append({"op": "trace", "qubits": list(step[1])})
    doc = {"boundary": list(circuit.boundary), "observable_support": sorted(circuit.observable_support), "steps": steps}
    return json.dumps(doc, indent=1)


def cmd_cone(args) -> int:
    scheme = _load_scheme(args.scheme)
    support = [scheme.wire_of(q) for q in _labels(args.support)]
    cone = trace_cone(scheme, support, args.from_iter)
    if args.json:
        text = cone_to_json(cone) + "\n"
    else:
        lines = [f"N_U {cone.N_U}", f"N_Q {cone.N_Q}", "", "iter  gates  qubits  support"]
        for k in range(scheme.T, args.from_iter, -1):
            row = cone.per_iteration[k]
            lines.append(
                f"{k:>4}  {len(row['gates']):>5}  {len(row['qubits']):>6}  {len(cone.support_trace[k - 1]):>7}"
            )
        text = "\n".join(lines) + "\n"
    extra = ()
    if args.emit_circuit:
        circuit = extract_effective_circuit(cone)
        Path(args.emit_circuit).write_text(_circuit_json(circuit, scheme) + "\n")
        extra = (args.emit_circuit,)
    _emit(args, "cone", text, extra)
    return EXIT_OK


# ----------------------------------------------------------------------
# mixing


def cmd_mixing_profile(args) -> int:
    scheme = _load_scheme(args.scheme)
    obs = _load_observable(args.observable, scheme)
    prof = mixing_profile(scheme, obs, t_min=args.from_iter, observable_id=args.observable)
    text = profile_to_csv(prof)
    if args.json:
        doc = json.loads(profile_header_json(prof))
        doc["values"] = {str(t): fmt(v) for t, v in prof.values.items()}
        text = json.dumps(doc, sort_keys=True) + "\n"
    _emit(args, "mixing profile", text)
    return EXIT_OK


def cmd_mixing_certify(args) -> int:
    scheme = _load_scheme(args.scheme)
    obs = _load_observable(args.observable, scheme)
    mode = "exact" if args.exact else "sampled"
    res = certify_mixing(scheme, obs, args.iter, args.samples, args.seed, mode)
    _emit(args, "mixing certify", res.to_json() + "\n")
    return EXIT_OK


def cmd_mixing_sup(args) -> int:
    scheme = _load_scheme(args.scheme)
    if args.samples < 0:
        raise UsageError("--samples must be non-negative")
    val = estimate_delta_sup(scheme, args.radius, args.iter, args.samples, args.seed)
    doc = {"radius": args.radius, "iteration": args.iter, "samples": args.samples, "delta_sup_lower": fmt(val)}
    _emit(args, "mixing sup", json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_mixing_transfer(args) -> int:
    scheme = _load_scheme(args.scheme)
    op = build_transfer_operator(scheme)
    res = mixing_time_bound(op, args.n_max, seed=args.seed)
    doc = {
        "bath_qubits": len(op.bath),
        "mixing": op.mixing,
        "eigenvalue_moduli": [fmt(abs(z)) for z in op.eigenvalues],
        "norms": [fmt(res.norms[n]) for n in sorted(res.norms)],
        "envelope": [fmt(res.envelope[n]) for n in sorted(res.envelope)],
        "t1": res.t1(args.eps),
        "eps": fmt(args.eps),
    }
    _emit(args, "mixing transfer", json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# bounds


def _check_positive_rate(lam: float) -> None:
    if not lam > 0:
        raise UsageError(f"--lam must be positive, got {lam}")


def cmd_bounds_table1(args) -> int:
    _check_positive_rate(args.lam)
    rows = [
        table1_row("dmera", args.lam, args.eps_U, args.eps_P, args.D, args.T),
        table1_row("mps", args.lam, args.eps_U, args.eps_P, args.D, args.T),
        table1_row("ri", args.lam, args.eps_U, args.eps_P, args.D, args.T, d=args.d),
    ]
    if args.json:
        text = "[" + ",\n".join(r.to_json() for r in rows) + "]\n"
    else:
        text = table1_csv(rows)
    _emit(args, "bounds table1", text)
    return EXIT_OK


def cmd_bounds_stability(args) -> int:
    scheme = _load_scheme(args.scheme)
    obs = _load_observable(args.observable, scheme)
    prof = mixing_profile(scheme, obs, t_min=args.from_iter)
    scale = obs.norm()
    scaled = {k: v / scale for k, v in prof.values.items()}
    counts = {}
    for k in range(args.from_iter, scheme.T + 1):
        c = trace_cone(scheme, obs.support, k)
        counts[k] = (c.N_U, c.N_Q)
    lines = ["t,delta,N_U,N_Q,bound_main,bound_corollary"]
    for t in range(args.from_iter, scheme.T + 1):
        main = scale * improved_stability_bound(scaled, args.eps_U, args.eps_P, counts, t, "main")
        cor = scale * improved_stability_bound(scaled, args.eps_U, args.eps_P, counts, t, "corollary")
        lines.append(f"{t},{fmt(prof.values[t])},{counts[t][0]},{counts[t][1]},{fmt(main)},{fmt(cor)}")
    _emit(args, "bounds stability", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bounds_dmera(args) -> int:
    _check_positive_rate(args.lam)
    lines = ["t,radius,N_U,N_Q,error"]
    for t in range(args.T + 1):
        b = dmera_bounds(args.T, t, args.D, args.R)
        err = dmera_error_bound(args.T, t, args.D, args.R, args.eps_U, args.eps_P, args.lam)
        lines.append(f"{t},{fmt(b.radius)},{fmt(b.N_U)},{fmt(b.N_Q)},{fmt(err)}")
    _emit(args, "bounds dmera", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bounds_ri(args) -> int:
    _check_positive_rate(args.lam)
    geom = {1: PATH, 2: SQUARE_GRID}[args.d]
    lines = ["t,N_Q,N_U,error"]
    for t in range(args.T + 1):
        nq, nu = ri_bounds(geom, args.T, t, args.D, args.R)
        err = ri_error_bound(geom, args.T, t, args.D, args.R, args.eps_U, args.eps_P, args.lam, args.form)
        lines.append(f"{t},{fmt(nq)},{fmt(nu)},{fmt(err)}")
    _emit(args, "bounds ri", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bounds_cutoff(args) -> int:
    model = DecayModel(args.c, args.alpha, args.gamma, args.floor)
    res = kim_optimal_cutoff(model, args.D, args.eps, args.T, args.r)
    doc = {"t_0": fmt(res.t_0), "t_0_unclamped": fmt(res.t_0_unclamped), "error": fmt(res.error)}
    _emit(args, "bounds cutoff", json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    if args.trials is not None and args.trials < 0:
        raise UsageError("--trials must be non-negative")
    report = run_suite(args.suite, args.trials, args.seed, args.threads)
    _emit(args, "verify", report.to_json() + "\n")
    if not report.passed:
        sys.stderr.write(f"{len(report.failures)} of {report.trials} trials violated their bound\n")
        return EXIT_VERIFY
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def _add_output(p) -> None:
    p.add_argument("-o", "--output", metavar="FILE", help="write the result here (manifest goes to FILE.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conecraft", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    sub = parser.add_subparsers(dest="command", required=True)

    # scheme
    sp = sub.add_parser("scheme", help="build or inspect interaction schemes")
    ssub = sp.add_subparsers(dest="action", required=True)
    b = ssub.add_parser("build", help="build a preset scheme")
    b.add_argument("--preset", choices=("dmera", "mps", "ri"), required=True)
    b.add_argument("--T", type=int, required=True)
    b.add_argument("--D", type=int, required=True)
    b.add_argument("--bath", type=int, default=None, help="bath qubits (mps)")
    b.add_argument("--dim", type=int, default=None, choices=(1, 2), help="lattice dimension (ri)")
    b.add_argument("--side", type=int, default=None, help="bath side length (ri)")
    b.add_argument("--gates", choices=("random", "cnot", "cz", "swap"), default="random")
    b.add_argument("--translation-invariant", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    _add_output(b)
    b.set_defaults(func=cmd_scheme_build)
    i = ssub.add_parser("info", help="summarize a scheme file")
    i.add_argument("--scheme", required=True)
    _add_output(i)
    i.set_defaults(func=cmd_scheme_info)

    # cone
    c = sub.add_parser("cone", help="trace a past causal cone")
    c.add_argument("--scheme", required=True)
    c.add_argument("--support", required=True, help='final-graph qubits, e.g. "3,4"')
    c.add_argument("--from-iter", type=int, required=True)
    c.add_argument("--emit-circuit", metavar="FILE", default=None)
    c.add_argument("--json", action="store_true")
    _add_output(c)
    c.set_defaults(func=cmd_cone)

    # mixing
    mp = sub.add_parser("mixing", help="mixing profiles, certification and sampling")
    msub = mp.add_subparsers(dest="action", required=True)
    prof = msub.add_parser("profile")
    prof.add_argument("--scheme", required=True)
    prof.add_argument("--observable", required=True, help="PAULIS@qubits (e.g. ZZ@3,4) or a JSON file")
    prof.add_argument("--from-iter", type=int, default=0)
    prof.add_argument("--json", action="store_true")
    _add_output(prof)
    prof.set_defaults(func=cmd_mixing_profile)
    cert = msub.add_parser("certify")
    cert.add_argument("--scheme", required=True)
    cert.add_argument("--observable", required=True)
    cert.add_argument("--iter", type=int, required=True)
    cert.add_argument("--samples", type=int, default=1000)
    cert.add_argument("--seed", type=int, default=0)
    cert.add_argument("--exact", action="store_true", help="average over every stabilizer state")
    _add_output(cert)
    cert.set_defaults(func=cmd_mixing_certify)
    sup = msub.add_parser("sup")
    sup.add_argument("--scheme", required=True)
    sup.add_argument("--radius", type=int, default=0)
    sup.add_argument("--iter", type=int, required=True)
    sup.add_argument("--samples", type=int, default=64)
    sup.add_argument("--seed", type=int, default=0)
    _add_output(sup)
    sup.set_defaults(func=cmd_mixing_sup)
    tr = msub.add_parser("transfer", help="bath transfer operator of a translation-invariant MPS scheme")
    tr.add_argument("--scheme", required=True)
    tr.add_argument("--n-max", type=int, default=20)
    tr.add_argument("--eps", type=float, default=1e-2)
    tr.add_argument("--seed", type=int, default=0)
    _add_output(tr)
    tr.set_defaults(func=cmd_mixing_transfer)

    # bounds
    bp = sub.add_parser("bounds", help="closed-form error and resource bounds")
    bsub = bp.add_subparsers(dest="action", required=True)
    t1 = bsub.add_parser("table1")
    t1.add_argument("--lam", type=float, required=True)
    t1.add_argument("--eps-U", dest="eps_U", type=float, required=True)
    t1.add_argument("--eps-P", dest="eps_P", type=float, required=True)
    t1.add_argument("--D", type=int, required=True)
    t1.add_argument("--T", type=int, required=True)
    t1.add_argument("--d", type=int, default=2)
    t1.add_argument("--json", action="store_true")
    _add_output(t1)
    t1.set_defaults(func=cmd_bounds_table1)
    st = bsub.add_parser("stability")
    st.add_argument("--scheme", required=True)
    st.add_argument("--observable", required=True)
    st.add_argument("--eps-U", dest="eps_U", type=float, required=True)
    st.add_argument("--eps-P", dest="eps_P", type=float, required=True)
    st.add_argument("--from-iter", type=int, default=0)
    _add_output(st)
    st.set_defaults(func=cmd_bounds_stability)
    dm = bsub.add_parser("dmera")
    ri = bsub.add_parser("ri")
    for p in (dm, ri):
        p.add_argument("--T", type=int, required=True)
        p.add_argument("--D", type=int, required=True)
        p.add_argument("--R", type=float, default=1.0)
        p.add_argument("--lam", type=float, required=True)
        p.add_argument("--eps-U", dest="eps_U", type=float, required=True)
        p.add_argument("--eps-P", dest="eps_P", type=float, required=True)
        _add_output(p)
    dm.set_defaults(func=cmd_bounds_dmera)
    ri.add_argument("--d", type=int, choices=(1, 2), default=1)
    ri.add_argument("--form", choices=("closed", "asymptotic"), default="closed")
    ri.set_defaults(func=cmd_bounds_ri)
    cu = bsub.add_parser("cutoff")
    cu.add_argument("--c", type=float, required=True)
    cu.add_argument("--alpha", type=float, default=0.0)
    cu.add_argument("--gamma", type=float, required=True)
    cu.add_argument("--floor", type=float, default=0.0)
    cu.add_argument("--D", type=int, required=True)
    cu.add_argument("--eps", type=float, required=True)
    cu.add_argument("--T", type=int, required=True)
    cu.add_argument("--r", type=float, default=1.0)
    _add_output(cu)
    cu.set_defaults(func=cmd_bounds_cutoff)

    # verify
    v = sub.add_parser("verify", help="run a bound-verification suite")
    v.add_argument("--suite", choices=sorted(SUITES), required=True)
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)
    _add_output(v)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        sys.stderr.write("conecraft: error: --threads must be at least 1\n")
        return EXIT_USAGE
    set_default_threads(args.threads)
    try:
        return args.func(args)
    except CapExceeded as exc:
        sys.stderr.write(f"conecraft: qubit cap exceeded: {exc}\n")
        return EXIT_CAP
    except (UsageError, SchemeError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"conecraft: error: {msg}\n")
        return EXIT_USAGE
    finally:
        set_default_threads(None)


if __name__ == "__main__":
    sys.exit(main())
