"""Command-line front end.

Every JSON output carries a ``manifest`` block (command, inputs, seed,
tolerance override, toolkit version) so identical invocations produce
byte-identical files. Wall-clock time is only recorded with ``--timing``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import DEFAULT_TOLERANCES
from .controllability import lie_closure
from .device import (
    DeviceTopology,
    GateProgram,
    RegisterState,
    compile_qft,
    lower_to_controls,
    run_program,
    ternary_tree,
)
from .gates import GateSpec, gate_matrix
from .hamiltonians import CellParams, build_cell_operators, load_default_params
from .lattice import load_lattice_config, trajectory_csv
from .linalg import StructureError
from .synthesis import ControlSequence, SynthesisError, effect_unitary, find_identity_sequence

CONFIG_ENV = "NHCONTROL_CONFIG_DIR"

log = logging.getLogger("nhcontrol")


class DomainError(Exception):
    pass


def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DomainError(f"{what} file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DomainError(f"{what} file {path} is not valid JSON: {exc}")


def _load_params(args):
    if args.params:
        try:
            return CellParams.from_dict(_load_json(args.params, "params"))
        except (TypeError, ValueError) as exc:
            raise DomainError(f"params file {args.params}: {exc}")
    cfg_dir = os.environ.get(CONFIG_ENV)
    if cfg_dir and (Path(cfg_dir) / "cell_params.json").exists():
        return CellParams.from_dict(_load_json(Path(cfg_dir) / "cell_params.json", "params"))
    return load_default_params()


def _manifest(args, inputs, outputs=()):
    out = {
        "schema": "run_manifest/1",
        "command": args.command,
        "inputs": {k: str(v) for k, v in sorted(inputs.items()) if v is not None},
        "seed": args.seed,
        "tolerance_override": args.tol,
        "outputs": list(outputs),
        "version": __version__,
    }
    if args.timing:
        out["wall_clock_s"] = round(time.perf_counter() - args._t0, 3)
    return out


def _emit(args, name, payload, inputs, csv_text=None):
    """Write JSON (and optional CSV) to ``--out`` or stdout."""
    files = []
    if args.out:
        files.append(f"{name}.json")
        if csv_text is not None:
            files.append(f"{name}.csv")
    payload = dict(payload)
    payload["manifest"] = _manifest(args, inputs, files)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)
        if csv_text is not None:
            (out / f"{name}.csv").write_text(csv_text)
    elif args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(text)


def _tolerances(args, field):
    if args.tol is None:
        return DEFAULT_TOLERANCES
    return DEFAULT_TOLERANCES.with_overrides(**{field: args.tol})


def _base_sequence(args, ops, params):
    if getattr(args, "base", None):
        try:
            return ControlSequence.from_dict(_load_json(args.base, "base sequence"))
        except (KeyError, TypeError, StructureError) as exc:
            raise DomainError(f"base sequence {args.base}: {exc}")
    return find_identity_sequence(ops, seed=args.seed, T=params.T)


def cmd_check(args):
    params = _load_params(args)
    ops = build_cell_operators(params)
    rank_tol = args.tol if args.tol is not None else DEFAULT_TOLERANCES.rank
    report = lie_closure(ops.generators, rank_tol=rank_tol)
    _emit(args, "closure_report", report.to_dict(include_basis=args.basis), {"params": args.params})
    return 0


def cmd_synth_identity(args):
    params = _load_params(args)
    ops = build_cell_operators(params)
    tol = _tolerances(args, "identity_objective")
    seq = find_identity_sequence(ops, seed=args.seed, T=params.T, max_restarts=args.restarts, tol=tol)
    _emit(args, "identity_sequence", seq.to_dict(), {"params": args.params}, seq.to_csv())
    return 0


def _gate_spec(text):
    if os.path.exists(text):
        return GateSpec.from_dict(_load_json(text, "gate spec"))
    try:
        return GateSpec.from_dict(json.loads(text))
    except json.JSONDecodeError:
        raise DomainError(f"--gate is neither a file nor inline JSON: {text!r}")


def cmd_synth_gate(args):
    params = _load_params(args)
    ops = build_cell_operators(params)
    spec = _gate_spec(args.gate)
    base = _base_sequence(args, ops, params)
    tol = _tolerances(args, "synthesis")
    seq = effect_unitary(ops, base, gate_matrix(spec), tol=tol)
    payload = seq.to_dict()
    payload["gate"] = spec.to_dict()
    payload["verification"]["phase_aligned_distance"] = payload["verification"].pop("distance")
    _emit(args, "gate_sequence", payload, {"params": args.params, "base": args.base, "gate": args.gate}, seq.to_csv())
    return 0


def _topology(args, n):
    if args.topology:
        return DeviceTopology.from_dict(_load_json(args.topology, "topology"))
    return ternary_tree(n)


def cmd_compile_qft(args):
    topo = _topology(args, args.n)
    prog = compile_qft(topo, args.n)
    payload = prog.to_dict()
    payload["topology"] = topo.to_dict()
    _emit(args, "qft_program", payload, {"topology": args.topology})
    return 0


def _load_program(path):
    try:
        return GateProgram.from_dict(_load_json(path, "program"))
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"program {path}: {exc}")


def cmd_run(args):
    prog = _load_program(args.program)
    if args.state:
        try:
            state = RegisterState.from_dict(_load_json(args.state, "state"))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"state {args.state}: {exc}")
    else:
        state = RegisterState.basis(prog.n, args.basis)
    out = run_program(state, prog)
    _emit(args, "state", out.to_dict(), {"program": args.program, "state": args.state})
    return 0


def cmd_lower(args):
    params = _load_params(args)
    ops = build_cell_operators(params)
    prog = _load_program(args.program)
    topo = _topology(args, prog.n)
    base = _base_sequence(args, ops, params)
    tol = _tolerances(args, "synthesis")
    lowering = lower_to_controls(prog, ops, base, topo, synth=lambda o, b, u: effect_unitary(o, b, u, tol=tol))
    payload = lowering.to_dict()
    payload["base"] = base.to_dict()
    _emit(args, "lowering", payload, {"params": args.params, "program": args.program, "base": args.base})
    return 0


def cmd_emulate(args):
    cfg = load_lattice_config(_load_json(args.config, "lattice config"))
    text = trajectory_csv(
        cfg["schedule"], cfg["coeffs"], cfg["epsilon"], cfg["steps"], cfg["initial"], cfg["observables"]
    )
    if args.format == "json" or args.out:
        payload = {
            "schema": "trajectory/1",
            "schedule": cfg["schedule"].to_dict(),
            "csv": text,
        }
        _emit(args, "trajectory", payload, {"config": args.config}, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_selftest(args):
    from .acceptance import run_all

    results = run_all(quick=args.quick, seed=args.seed)
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="cell parameter JSON (default: packaged config)")
    common.add_argument("--seed", type=int, default=0, help="RNG seed for identity search")
    common.add_argument("--tol", type=float, default=None, help="override the command's main tolerance")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None, help="stdout format (default json; csv for emulate)")
    common.add_argument("--timing", action="store_true", help="record wall-clock time in the manifest")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nhcontrol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nhcontrol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="Lie-closure controllability report")
    p.add_argument("--basis", action="store_true", help="include the closure basis")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synth-identity", parents=[common], help="identity-root control sequence")
    p.add_argument("--restarts", type=int, default=200)
    p.set_defaults(func=cmd_synth_identity)

    p = sub.add_parser("synth-gate", parents=[common], help="control sequence for a cell gate")
    p.add_argument("--gate", required=True, help='gate spec JSON file or inline JSON, e.g. \'{"kind": "toffoli"}\'')
    p.add_argument("--base", help="base identity sequence JSON (default: search with --seed)")
    p.set_defaults(func=cmd_synth_gate)

    p = sub.add_parser("compile-qft", parents=[common], help="QFT gate program")
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--topology", help="topology JSON (default: ternary tree over n atoms)")
    p.set_defaults(func=cmd_compile_qft)

    p = sub.add_parser("run", parents=[common], help="simulate a gate program")
    p.add_argument("--program", required=True)
    p.add_argument("--state", help="input state JSON (default: basis state --basis)")
    p.add_argument("--basis", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lower", parents=[common], help="lower a program to control sequences")
    p.add_argument("--program", required=True)
    p.add_argument("--base", help="base identity sequence JSON (default: search with --seed)")
    p.add_argument("--topology")
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("emulate", parents=[common], help="lattice field emulation trajectory")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("selftest", parents=[common], help="run the acceptance checks")
    p.add_argument("--quick", action="store_true", help="skip the slow synthesis criteria")
    p.set_defaults(func=cmd_selftest)
    return parser


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._t0 = time.perf_counter()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except SynthesisError as exc:
        print(f"error: synthesis: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str, sort_keys=True), file=sys.stderr)
    except (StructureError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except MemoryError as exc:
        print(f"error: resource limit: {exc}", file=sys.stderr)
    return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
