"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or validation error,
3 resource cap exceeded.  ``--config FILE`` supplies option defaults as a
JSON object keyed by option name; explicit flags override it.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import __version__
from . import photonics as ph
from . import statevector as sv
from .errors import CapExceededError, ProtocolError, QuadratureError
from .protocol import (
    FeasibilityParams,
    LatticeGeometry,
    ProtocolProgram,
    build_cluster_program,
    check_feasibility,
    load_program,
)
from .runner import ENGINES, disentangle_emitter, run, run_lossy_cluster
from .stabilizer import StabilizerTableau, contains, graph_stabilizer, verify_graph_state
from .tensornet import (
    TORIC_CONVENTIONS,
    StepTensor,
    TensorNetwork,
    check_isometry,
    contract_protocol_network,
    contract_torus,
    extract_step_tensor,
    local_unitary_distance,
    read_tensor_binary,
    toric_tensor,
    verify_toric_stabilizers,
    write_tensor_binary,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- output helpers ---------------------------------------------------------------------


def provenance(args, program: ProtocolProgram | None = None, **extra) -> dict:
    out = {"tool": "photonic_queue", "version": __version__, "command": args.command,
           "argv": list(args.argv), "seed": getattr(args, "seed", 0)}
    if getattr(args, "engine", None):
        out["engine"] = args.engine
    if program is not None:
        out["program_sha256"] = program.digest()
    out.update(extra)
    return out


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def emit_json(args, payload: dict) -> None:
    text = json.dumps(_to_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_csv(args, header, rows, prov: dict) -> None:
    buf = io.StringIO(newline="")
    comments = [f"{k}={json.dumps(_to_jsonable(v), sort_keys=True)}" for k, v in sorted(prov.items())]
    ph.write_csv(buf, header, rows, comments)
    if getattr(args, "output", None):
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _caps(args) -> dict:
    return {"pure": getattr(args, "max_pure_qubits", None), "mixed": getattr(args, "max_mixed_qubits", None)}


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None


def _program_from_args(args) -> ProtocolProgram:
    if getattr(args, "program", None):
        if getattr(args, "builtin", None):
            raise UsageError("give either --program or --builtin, not both")
        try:
            return load_program(args.program)
        except FileNotFoundError:
            raise UsageError(f"file not found: {args.program}") from None
    if getattr(args, "builtin", None) == "cluster":
        if args.n is None or args.k is None:
            raise UsageError("--builtin cluster needs --n and --k")
        return build_cluster_program(args.n, args.k)
    raise UsageError("give --program PATH or --builtin cluster")


# -- generate / verify --------------------------------------------------------------------


def cmd_generate(args) -> int:
    program = _program_from_args(args)
    if args.engine == "density" and not args.output:
        raise UsageError("--engine density writes a binary file; give --output")
    result = run(program, args.engine, args.seed, caps=_caps(args))
    disentangled = False
    if args.disentangle:
        result, byproduct = disentangle_emitter(result)
        disentangled = True
    prov = provenance(args, program)
    meta = {"provenance": prov, "program": program.to_dict(), "disentangled": disentangled,
            "measurements": result.measurements}
    if args.engine == "density":
        with open(args.output, "wb") as fh:
            sv.write_density_binary(result.state, fh, extra=_to_jsonable(meta))
        return EXIT_OK
    if args.engine == "stabilizer":
        meta.update(kind="tableau", state=result.state.to_dict())
    else:
        meta.update(kind="statevector", state=result.state.to_dict())
    emit_json(args, meta)
    return EXIT_OK


def _graph_report_statevector(state: sv.PureState, geometry: LatticeGeometry, tol: float) -> dict:
    rows = []
    for v in geometry.vertices:
        op = graph_stabilizer(geometry, v, state.n)
        e = sv.expectation(state, op)
        rows.append({"vertex": v, "operator": str(op), "expectation": e,
                     "pass": abs(e - 1.0) <= tol})
    failing = [r["vertex"] for r in rows if not r["pass"]]
    return {"verdict": not failing, "failing_vertices": failing, "stabilizers": rows, "tol": tol}


def _load_state_file(path):
    obj = _load_json(path)
    kind = obj.get("kind")
    if kind == "tableau":
        return obj, StabilizerTableau.from_dict(obj["state"])
    if kind == "statevector":
        return obj, sv.PureState.from_dict(obj["state"])
    raise UsageError(f"{path}: unknown state kind {kind!r}")


def cmd_verify(args) -> int:
    if args.tensor:
        t, _ = _read_tensor(args.tensor)
        rep = check_isometry(t, args.tol if args.tol is not None else 1e-12)
        emit_json(args, {"provenance": provenance(args), "check": "isometry", "report": rep.to_dict()})
        return EXIT_OK if rep.passed else EXIT_FAIL
    if not args.state:
        raise UsageError("give --state PATH or --tensor PATH")
    obj, state = _load_state_file(args.state)
    program = ProtocolProgram.from_dict(obj["program"]) if "program" in obj else None
    check = args.check
    if check is None:
        check = "graph" if program is not None and program.name == "cluster" else "toric" if "torus" in obj else "replay"
    tol = args.tol if args.tol is not None else (1e-8 if check == "toric" else 1e-10)
    payload = {"provenance": provenance(args, program), "check": check}
    if check == "graph":
        N = args.n if args.n is not None else (program.N if program else None)
        K = args.k if args.k is not None else (program.K if program else None)
        if N is None or K is None:
            raise UsageError("graph check needs --n and --k for this state file")
        geometry = LatticeGeometry.cluster(N, K)
        if obj.get("disentangled") or args.without_emitter:
            geometry = geometry.without_emitter()
        if isinstance(state, StabilizerTableau):
            report = verify_graph_state(state, geometry).to_dict()
        else:
            report = _graph_report_statevector(state, geometry, tol)
    elif check == "toric":
        tx = args.tx if args.tx is not None else obj.get("torus", {}).get("Tx")
        ty = args.ty if args.ty is not None else obj.get("torus", {}).get("Ty")
        if tx is None or ty is None:
            raise UsageError("toric check needs --tx and --ty")
        if not isinstance(state, sv.PureState):
            raise UsageError("toric check needs a statevector state file")
        report = verify_toric_stabilizers(state, tx, ty, args.convention, tol).to_dict()
        report["verdict"] = report["pass"]
    elif check == "replay":
        if program is None:
            raise UsageError("replay check needs a state file with an embedded program")
        engine = "stabilizer" if isinstance(state, StabilizerTableau) else "statevector"
        seed = obj.get("provenance", {}).get("seed") or 0
        ref = run(program, engine, seed, caps=_caps(args))
        if obj.get("disentangled"):
            ref, _ = disentangle_emitter(ref)
        if engine == "stabilizer":
            mismatched = [str(g) for g in ref.state.generators() if contains(state, g) != 1]
            report = {"verdict": not mismatched, "mismatched_generators": mismatched}
        else:
            fid = sv.fidelity_pure(state, ref.state)
            report = {"verdict": abs(fid - 1.0) <= tol, "fidelity": fid, "tol": tol}
    else:
        raise UsageError(f"unknown check {check!r}")
    payload["report"] = report
    emit_json(args, payload)
    return EXIT_OK if report["verdict"] else EXIT_FAIL


# -- tensors ----------------------------------------------------------------------------


def _read_tensor(path):
    try:
        with open(path, "rb") as fh:
            return read_tensor_binary(fh)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None


def _tensor_from_args(args) -> tuple:
    if getattr(args, "tensor", None):
        t, header = _read_tensor(args.tensor)
        return t, None, header
    if args.builtin == "toric":
        return toric_tensor(args.normalization), None, {}
    program = _program_from_args(args)
    k = args.step if args.step is not None else program.K
    if not 1 <= k <= program.K:
        raise UsageError(f"--step must lie in 1..{program.K}")
    return extract_step_tensor(program, k), program, {}


def _tensor_summary(t: StepTensor) -> dict:
    return {"header": t.header(), "isometry": check_isometry(t).to_dict(),
            "nonzero_entries": int(np.count_nonzero(np.abs(t.data) > 1e-15))}


def cmd_extract_tensor(args) -> int:
    t, program, _ = _tensor_from_args(args)
    prov = provenance(args, program, step=args.step)
    if args.output:
        with open(args.output, "wb") as fh:
            write_tensor_binary(t, fh, extra={"provenance": _to_jsonable(prov)})
        sys.stdout.write(json.dumps(_to_jsonable(_tensor_summary(t)), sort_keys=True) + "\n")
    else:
        emit_json(args, {"provenance": prov, **_tensor_summary(t)})
    return EXIT_OK


def cmd_check_isometry(args) -> int:
    t, program, _ = _tensor_from_args(args)
    rep = check_isometry(t, args.tol)
    emit_json(args, {"provenance": provenance(args, program), "report": rep.to_dict()})
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_contract(args) -> int:
    program = _program_from_args(args)
    net = TensorNetwork.from_program(program)
    cap = args.max_pure_qubits
    payload = {"provenance": provenance(args, program)}
    if args.outcome is not None:
        bits = args.outcome.strip()
        if any(c not in "01" for c in bits):
            raise UsageError("--outcome must be a bit string (qubit 0 first)")
        amp = contract_protocol_network(net, [int(c) for c in bits], cap=cap)
        payload["amplitude"] = [amp.real, amp.imag]
        if args.compare:
            ref = run(program, "statevector", caps=_caps(args)).state
            idx = sum(int(c) << q for q, c in enumerate(bits))
            payload["statevector_amplitude"] = [ref.amplitudes[idx].real, ref.amplitudes[idx].imag]
            payload["abs_difference"] = abs(amp - ref.amplitudes[idx])
    else:
        state = contract_protocol_network(net, cap=cap)
        payload["kind"] = "statevector"
        payload["state"] = state.to_dict()
        if args.compare:
            ref = run(program, "statevector", caps=_caps(args)).state
            aligned = sv.align_global_phase(state.amplitudes, ref.amplitudes)
            payload["max_abs_difference"] = float(np.max(np.abs(aligned - ref.amplitudes)))
    emit_json(args, payload)
    return EXIT_OK


def cmd_toric(args) -> int:
    t = toric_tensor(args.normalization)
    state = contract_torus(t, args.tx, args.ty)
    reports = {c: verify_toric_stabilizers(state, args.tx, args.ty, c, args.tol) for c in TORIC_CONVENTIONS}
    passing = [c for c, r in reports.items() if r.passed]
    payload = {
        "provenance": provenance(args),
        "torus": {"Tx": args.tx, "Ty": args.ty, "normalization": args.normalization},
        "isometry": check_isometry(t, 1e-15).to_dict(),
        "gram_diagonal": float(np.real(t.gram()[0, 0])),
        "conventions": {c: {"pass": r.passed,
                            "expectations": [e["expectation"] for e in r.expectations]}
                        for c, r in reports.items()},
        "passing_conventions": passing,
    }
    ok = len(passing) == 1
    if args.candidate:
        program = load_program(args.candidate)
        k = program.K
        cand = extract_step_tensor(program, k)
        fit = local_unitary_distance(cand, toric_tensor(0.5), restarts=args.restarts, seed=args.seed)
        payload["candidate"] = {"program_sha256": program.digest(),
                                "isometry": check_isometry(cand).to_dict(), **fit.to_dict(),
                                "match": fit.distance <= args.distance_tol}
        ok = ok and fit.distance <= args.distance_tol
    if args.state_output:
        with open(args.state_output, "w", newline="\n") as fh:
            obj = {"provenance": payload["provenance"], "kind": "statevector",
                   "torus": payload["torus"], "state": state.to_dict()}
            fh.write(json.dumps(_to_jsonable(obj), sort_keys=True) + "\n")
    emit_json(args, payload)
    return EXIT_OK if ok else EXIT_FAIL


# -- photonics ------------------------------------------------------------------------------


def _eta(v):
    return math.inf if v is None else float(v)


def _fidelity_value(args) -> dict:
    kind = args.kind
    if kind in ("gate-z", "overlap"):
        if args.x is None:
            raise UsageError(f"{kind} needs --x")
        x = float(args.x)
        shape = args.shape
        w = ph._packet(shape, x)
        out = {"shape": shape, "x": x,
               "overlap_closed": ph.scattered_overlap(w, 1.0, "closed").real,
               "overlap_quadrature": ph.scattered_overlap(w, 1.0, "frequency").real}
        if kind == "overlap":
            out["overlap_time_domain"] = ph.scattered_overlap(w, 1.0, "time").real
            return out
        out["fidelity_closed"] = ph.fidelity_from_overlap(out["overlap_closed"])
        out["fidelity_quadrature"] = ph.fidelity_from_overlap(out["overlap_quadrature"])
        return out
    if kind == "gate-x":
        if args.T is None:
            raise UsageError("gate-x needs --T")
        kw = {"gamma_l": args.gamma_l} if args.shape == "lorentzian" else {"B": args.B}
        if None in kw.values():
            raise UsageError("gate-x needs --gamma-l (lorentzian) or --B (gaussian)")
        closed = ph.cnot_completion_error(args.shape, T=args.T, method="closed", **kw)
        quad = ph.cnot_completion_error(args.shape, T=args.T, method="quadrature", **kw)
        return {"shape": args.shape, "T": args.T, **kw, "eps_closed": closed, "eps_quadrature": quad,
                "fidelity_closed": ph.cnot_fidelity(closed), "fidelity_quadrature": ph.cnot_fidelity(quad)}
    if kind == "loss":
        if args.n is None or args.m is None:
            raise UsageError("loss needs --n and --m")
        el = _eta(args.eta_l if args.eta_l is not None else args.eta)
        er = _eta(args.eta_r if args.eta_r is not None else args.eta)
        model = ph.loss_fidelity_model(args.n, args.m, el, er)
        out = {"N": args.n, "M": args.m, "eta_l": el, "eta_r": er, "model": model,
               "scaling_form": ph.loss_fidelity_model(args.n, args.m, el, er, form="scaling"),
               "size_criterion": args.n * args.m * ((0 if math.isinf(el) else 1 / el)
                                                      + (0 if math.isinf(er) else 2 / er))}
        K = args.n * args.m
        if float(K).is_integer() and not args.no_oracle:
            _, oracle = run_lossy_cluster(args.n, int(K), el, er, caps=_caps(args))
            out["oracle"] = oracle
            out["abs_difference"] = abs(model - oracle)
        return out
    raise UsageError(f"unknown fidelity kind {kind!r}")


def _sweep_grid(args) -> dict:
    grid = {}
    if args.op in ("gate-z", "gate-x"):
        if not args.x:
            raise UsageError(f"sweep {args.op} needs --x start:stop:count")
        grid["x"] = ph.parse_grid(args.x)
        if np.any(grid["x"] <= 0):
            raise UsageError("--x values must be positive")
    else:
        grid["N"] = ph.parse_grid(args.n_grid)
        grid["M"] = ph.parse_grid(args.m_grid)
        grid["eta"] = ph.parse_grid(args.eta_grid)
    return grid


def _run_sweep(args) -> int:
    if args.op is None:
        raise UsageError("sweep needs an operation: gate-z, gate-x, or loss")
    header, rows = ph.fidelity_sweep(args.op, _sweep_grid(args))
    prov = provenance(args, op=args.op)
    if args.format == "json":
        emit_json(args, {"provenance": prov, "columns": header, "rows": rows})
    else:
        emit_csv(args, header, rows, prov)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    if args.kind == "sweep":
        return _run_sweep(args)
    payload = {"provenance": provenance(args), **_fidelity_value(args)}
    if args.format == "csv":
        keys = [k for k in payload if k != "provenance"]
        emit_csv(args, keys, [[payload[k] for k in keys]], payload["provenance"])
    else:
        emit_json(args, payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _run_sweep(args)


def cmd_feasibility(args) -> int:
    for name in ("T", "B", "gamma_r"):
        if getattr(args, name) is None:
            raise UsageError(f"feasibility needs --{name.replace('_', '-')}")
    params = FeasibilityParams(T=args.T, B=args.B, gamma_r=args.gamma_r, tau=args.tau,
                               gamma_l=args.gamma_l, L=args.L, c=args.c, margin=args.margin)
    report = check_feasibility(params)
    emit_json(args, {"provenance": provenance(args), **report.to_dict()})
    return EXIT_OK if report.verdict else EXIT_FAIL


# -- parser -----------------------------------------------------------------------------------


def _common(p, seed=True):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="measurement seed (default 0)")


def _caps_args(p):
    p.add_argument("--max-pure-qubits", type=int, default=None,
                   help="statevector cap (env PHOTONIC_QUEUE_MAX_PURE_QUBITS, default 22)")
    p.add_argument("--max-mixed-qubits", type=int, default=None,
                   help="density-matrix cap (env PHOTONIC_QUEUE_MAX_MIXED_QUBITS, default 12)")


def _program_args(p):
    p.add_argument("--program", help="program JSON file")
    p.add_argument("--builtin", choices=["cluster"], help="built-in program")
    p.add_argument("--n", type=int, help="queue length N")
    p.add_argument("--k", type=int, help="number of steps K")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photonic-queue", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run a protocol program and write the final state")
    _common(p)
    _program_args(p)
    _caps_args(p)
    p.add_argument("--engine", choices=ENGINES, default="stabilizer")
    p.add_argument("--disentangle", action="store_true", help="measure out the emitter (cluster only)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="verify a state or tensor file")
    _common(p, seed=False)
    _caps_args(p)
    p.add_argument("--state", help="state JSON from generate or toric")
    p.add_argument("--tensor", help="tensor binary from extract-tensor")
    p.add_argument("--check", choices=["graph", "toric", "replay"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--without-emitter", action="store_true")
    p.add_argument("--tx", type=int)
    p.add_argument("--ty", type=int)
    p.add_argument("--convention", choices=TORIC_CONVENTIONS, default="bond-vertex")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_verify)

    for name, func in (("extract-tensor", cmd_extract_tensor), ("check-isometry", cmd_check_isometry)):
        p = sub.add_parser(name, help="step tensor of a program" if name == "extract-tensor"
                           else "isometry test of a step tensor")
        _common(p, seed=False)
        p.add_argument("--program", help="program JSON file")
        p.add_argument("--builtin", choices=["cluster", "toric"])
        p.add_argument("--tensor", help="tensor binary file")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--step", type=int, help="step index (default K)")
        p.add_argument("--normalization", type=float, default=0.5, help="toric tensor prefactor")
        if name == "check-isometry":
            p.add_argument("--tol", type=float, default=1e-12)
        p.set_defaults(func=func)

    p = sub.add_parser("contract", help="contract the protocol tensor network")
    _common(p, seed=False)
    _program_args(p)
    _caps_args(p)
    p.add_argument("--outcome", help="bit string, qubit 0 first; omit for the full state")
    p.add_argument("--compare", action="store_true", help="also run the statevector engine")
    p.set_defaults(func=cmd_contract)

    p = sub.add_parser("toric", help="contract the toric tensor on a torus and test stabilizers")
    _common(p)
    p.add_argument("--tx", type=int, default=2)
    p.add_argument("--ty", type=int, default=2)
    p.add_argument("--normalization", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--candidate", help="toric program JSON to compare up to local unitaries")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--distance-tol", type=float, default=1e-6)
    p.add_argument("--state-output", help="also write the torus state JSON here")
    p.set_defaults(func=cmd_toric)

    def sweep_args(p):
        p.add_argument("--x", help="grid start:stop:count or comma list")
        p.add_argument("--n-grid", default="2", help="N values for the loss sweep")
        p.add_argument("--m-grid", default="1:5:5", help="M values for the loss sweep")
        p.add_argument("--eta-grid", default="20,50,100", help="cooperativities for the loss sweep")
        p.add_argument("--both-shapes", action="store_true", help="accepted for clarity; sweeps list both shapes")
        p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("fidelity", help="gate and loss fidelity models")
    _common(p, seed=False)
    _caps_args(p)
    p.add_argument("kind", choices=["gate-z", "gate-x", "overlap", "loss", "sweep"])
    p.add_argument("op", nargs="?", choices=["gate-z", "gate-x", "loss"], help="sweep operation")
    p.add_argument("--shape", choices=["lorentzian", "gaussian"], default="lorentzian")
    p.add_argument("--T", type=float)
    p.add_argument("--gamma-l", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=float)
    p.add_argument("--eta", type=float, default=None, help="both cooperativities (default: no loss)")
    p.add_argument("--eta-l", type=float)
    p.add_argument("--eta-r", type=float)
    p.add_argument("--no-oracle", action="store_true", help="skip the density-matrix oracle")
    sweep_args(p)
    p.set_defaults(func=cmd_fidelity, format=None)

    p = sub.add_parser("sweep", help="parameter sweep as CSV")
    _common(p, seed=False)
    p.add_argument("op", choices=["gate-z", "gate-x", "loss"])
    sweep_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("feasibility", help="timing hierarchy check")
    _common(p, seed=False)
    p.add_argument("--tau", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--gamma-r", type=float)
    p.add_argument("--gamma-l", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--margin", type=float, default=10.0)
    p.set_defaults(func=cmd_feasibility)
    return parser


def _apply_config(parser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = _load_json(known.config)
    if not isinstance(cfg, dict):
        raise UsageError(f"{known.config}: config must be a JSON object")
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(command)
    if target is None:
        return
    dests = {a.dest for a in target._actions}
    values = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in dests or dest in ("config", "func", "help"):
            raise UsageError(f"{known.config}: unknown option {key!r} for {command}")
        values[dest] = value
    target.set_defaults(**values)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if args.command == "fidelity" and args.format is None:
        args.format = "csv" if args.kind == "sweep" else "json"
    try:
        return args.func(args)
    except (UsageError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except QuadratureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
