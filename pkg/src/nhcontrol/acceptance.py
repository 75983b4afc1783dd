"""Acceptance checks shared by ``nhcontrol selftest`` and the test suite.

Each check returns a :class:`Result`; reference values come from independent
oracles (SVD rank, central differences, numpy FFT, dense ``scipy`` expm).
"""

import contextlib
import io
import itertools
import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .controllability import lie_closure, stacked_rank
from .device import (
    CellOp,
    GateProgram,
    RegisterState,
    compile_qft,
    dft_matrix,
    lower_to_controls,
    program_unitary,
    route_to_common_cell,
    run_program,
    ternary_tree,
    toy_topology,
)
from .gates import GateSpec, gate_matrix, toffoli, toffoli_generator
from .hamiltonians import build_cell_operators, load_default_params
from .lattice import (
    effective_hamiltonian,
    emulate_field,
    heisenberg_defect,
    pauli_decompose,
    pauli_reconstruct,
    regroup_schedule,
)
from .linalg import expm_hermitian, phase_aligned_distance
from .synthesis import (
    N_SEGMENTS,
    control_jacobian,
    effect_unitary,
    evolution,
    find_identity_sequence,
)


@dataclass
class Result:
    criterion: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{status} [{self.criterion}] {self.name} ({self.seconds:.1f}s) {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


class Context:
    """Lazily shared fixtures: cell operators and the identity base sequence."""

    def __init__(self, seed=0):
        self.seed = seed
        self.params = load_default_params()
        self.ops = build_cell_operators(self.params)
        self._base = None
        self.base_seconds = 0.0

    @property
    def base(self):
        if self._base is None:
            t0 = time.perf_counter()
            self._base = find_identity_sequence(self.ops, seed=self.seed, T=self.params.T)
            self.base_seconds = time.perf_counter() - t0
        return self._base


def _timed(fn):
    def wrapper(ctx):
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    return wrapper


@_timed
def check_controllability(ctx):
    t0 = time.perf_counter()
    rep = lie_closure(ctx.ops.generators)
    elapsed = time.perf_counter() - t0
    svd_rank = stacked_rank(rep.basis, 1e-8)
    ok = (rep.dim_reached == 64 or (rep.dim_reached == 63 and not rep.identity_reached)) and svd_rank == rep.dim_reached
    return Result(1, "controllability", ok and elapsed < 10.0,
                  {"dim": rep.dim_reached, "svd_rank": svd_rank, "verdict": rep.verdict, "runtime_s": elapsed})


@_timed
def check_identity(ctx):
    seq = ctx.base
    c = np.asarray(seq.strengths)
    u64 = evolution(ctx.ops, c, seq.T)
    u8 = evolution(ctx.ops, c[:8], seq.T)
    dist = float(np.linalg.norm(u64 - np.eye(8)))
    # nearest 8th root for each eigenvalue; all eight roots must be hit
    ang = np.angle(np.linalg.eigvals(u8))
    k = np.rint(ang / (np.pi / 4))
    phase_err = float(np.max(np.abs(ang - k * np.pi / 4)))
    distinct = len(set((k.astype(int) % 8).tolist())) == 8
    ok = len(c) == N_SEGMENTS and bool(np.all(c > 0)) and dist < 1e-6 and phase_err < 1e-7 and distinct
    ok = ok and ctx.base_seconds < 300.0
    return Result(2, "identity synthesis", ok,
                  {"identity_distance": dist, "root_phase_error": phase_err, "restart": seq.verification.get("restart"),
                   "search_s": ctx.base_seconds})


@_timed
def check_jacobian(ctx):
    seq = ctx.base
    c = np.asarray(seq.strengths, dtype=float)
    jac = control_jacobian(ctx.ops, seq)
    h = 1e-6
    worst = 0.0
    for k in range(N_SEGMENTS):
        e = np.zeros_like(c)
        e[k] = h
        fd = (evolution(ctx.ops, c + e, seq.T) - evolution(ctx.ops, c - e, seq.T)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(fd - jac[k]) / np.linalg.norm(jac[k])))
    return Result(3, "jacobian vs central differences", worst < 1e-6, {"max_rel_error": worst})


GATE_TARGETS = (
    ("toffoli", GateSpec.toffoli(), 8),
    ("perm(1,2)", GateSpec.perm(1, 2), 16),
    ("perm(2,3)", GateSpec.perm(2, 3), 16),
    ("condphase(1,2,pi/32)", GateSpec.cond_phase(1, 2, math.pi / 32), 16),
)


@_timed
def check_gates(ctx):
    detail = {}
    ok = True
    for name, spec, max_m in GATE_TARGETS:
        t0 = time.perf_counter()
        target = gate_matrix(spec)
        seq = effect_unitary(ctx.ops, ctx.base, target)
        elapsed = time.perf_counter() - t0
        u = np.linalg.matrix_power(evolution(ctx.ops, seq.strengths, seq.T), seq.m)
        dist = phase_aligned_distance(u, target)[0]
        good = dist < 1e-8 and seq.m <= max_m and elapsed < 120.0
        ok = ok and good
        detail[name] = f"m={seq.m} d={dist:.2e} t={elapsed:.0f}s"
    return Result(4, "gate synthesis", ok, detail)


@_timed
def check_toffoli_forms(ctx):
    h = toffoli_generator()
    idem = float(np.max(np.abs(h @ h - h)))
    dist = float(np.linalg.norm(expm(-1j * math.pi * h) - toffoli()))
    dist_eig = float(np.linalg.norm(expm_hermitian(h, math.pi) - toffoli()))
    ok = idem < 1e-14 and dist < 1e-12 and dist_eig < 1e-12
    return Result(5, "toffoli closed forms", ok, {"idempotency": idem, "exp_distance": max(dist, dist_eig)})


@_timed
def check_qft(ctx):
    d3 = phase_aligned_distance(program_unitary(compile_qft(ternary_tree(3), 3)), dft_matrix(3))[0]
    t0 = time.perf_counter()
    prog = compile_qft(toy_topology(), 9)
    dim = 512
    rng = np.random.default_rng(2024)
    worst = 0.0
    for x in rng.choice(dim, size=20, replace=False):
        out = run_program(RegisterState.basis(9, int(x)), prog).amplitudes
        ref = np.zeros(dim, dtype=complex)
        ref[x] = 1.0
        ref = np.sqrt(dim) * np.fft.ifft(ref)
        worst = max(worst, phase_aligned_distance(out[:, None], ref[:, None])[0])
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    out = run_program(RegisterState(9, v), prog).amplitudes
    worst = max(worst, phase_aligned_distance(out[:, None], (np.sqrt(dim) * np.fft.ifft(v))[:, None])[0])
    elapsed = time.perf_counter() - t0
    ok = d3 < 1e-8 and worst < 1e-8 and elapsed < 30.0
    return Result(6, "qft correctness", ok,
                  {"n3_distance": d3, "n9_distance": worst, "exchanges_n9": prog.exchange_count, "runtime_s": elapsed})


@_timed
def check_routing(ctx):
    detail = {}
    ok = True
    for n in (3, 9, 27):
        topo = ternary_tree(n)
        longest = max(len(route_to_common_cell(topo, q)[0]) for q in itertools.combinations(range(1, n + 1), 3))
        bound = 6 * math.log(n, 3)
        ok = ok and longest <= bound + 1e-12
        detail[f"n{n}"] = f"{longest}<={bound:.0f}"
    # one routed 3-qubit Toffoli on the n=9 register, priced with the actual m
    topo = toy_topology()
    atoms = (1, 5, 9)
    moves, host, slots = route_to_common_cell(topo, atoms)
    prog = GateProgram(9)
    prog.add_exchanges(moves)
    prog.steps.append(CellOp(topo.triads[host], toffoli(), "toffoli"))
    prog.add_exchanges(moves[::-1])
    low = lower_to_controls(prog, ctx.ops, ctx.base, topo)
    budget = 64 * 16 * 12 * math.log(9, 3)
    ok = ok and low.total_intervals <= budget
    detail["intervals"] = f"{low.total_intervals}<={budget:.0f}"
    return Result(7, "routing bound", ok, detail)


@_timed
def check_lattice(ctx):
    rng = np.random.default_rng(7)

    def rand_herm(scale=1.0):
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        return scale * (a + a.conj().T) / 2

    rt = max(float(np.linalg.norm(pauli_reconstruct(pauli_decompose(h)) - h)) for h in map(lambda _: rand_herm(), range(100)))
    sched = regroup_schedule(3, 3)
    coeffs = [[pauli_decompose(rand_herm(0.3)) for _ in triads] for triads in sched.periods]
    psi = rng.normal(size=512) + 1j * rng.normal(size=512)
    psi /= np.linalg.norm(psi)
    init = RegisterState(9, psi)
    exact = expm(-1j * effective_hamiltonian(sched, coeffs) * 0.6) @ psi
    defects = []
    for eps in (0.02, 0.01):
        out = emulate_field(sched, coeffs, eps, round(0.6 / eps), init).amplitudes
        defects.append(float(np.linalg.norm(out - exact)))
    ratio = defects[0] / defects[1]
    obs = [("Z", (1,)), ("X", (5,)), ("ZZ", (4, 5)), ("Y", (9,))]
    heis = [heisenberg_defect(sched, coeffs, eps, init, obs) for eps in (0.01, 0.005)]
    heis_ratio = heis[0] / heis[1]
    ok = rt < 1e-12 and 1.6 <= ratio <= 2.4 and heis[0] < 0.05 and 1.6 <= heis_ratio <= 2.4
    return Result(8, "lattice emulation", ok,
                  {"roundtrip": rt, "trotter_ratio": ratio, "heisenberg_defect": heis[0], "heisenberg_ratio": heis_ratio})


def _cli_invocations(tmp, ctx):
    base = tmp / "base.json"
    base.write_text(ctx.base.to_json())
    prog = GateProgram(3, [CellOp((1, 2, 3), gate_matrix(GateSpec.perm(2, 3)), "p23")])
    (tmp / "prog.json").write_text(json.dumps(prog.to_dict()))
    (tmp / "empty.json").write_text(json.dumps(GateProgram(3).to_dict()))
    (tmp / "lattice.json").write_text(json.dumps({
        "schema": "lattice_config/1", "rows": 1, "cols": 3, "epsilon": 0.05, "steps": 6,
        "default": {"terms": {"ZZI": 0.5, "XII": 0.3}}, "observables": [["Z", [1]], ["X", [1]]],
    }))
    return {
        "check": ["check"],
        "synth-identity": ["synth-identity"],
        "synth-gate": ["synth-gate", "--base", str(base), "--gate", '{"kind": "perm", "i": 2, "j": 3}'],
        "compile-qft": ["compile-qft", "--n", "9"],
        "run": ["run", "--program", str(tmp / "empty.json"), "--basis", "5"],
        "lower": ["lower", "--program", str(tmp / "prog.json"), "--base", str(base)],
        "emulate": ["emulate", "--config", str(tmp / "lattice.json")],
    }


@_timed
def check_determinism(ctx):
    from .cli import dispatch

    detail = {}
    ok = True
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        for name, argv in _cli_invocations(tmp, ctx).items():
            blobs = []
            for run in ("a", "b"):
                out = tmp / f"{name}-{run}"
                with contextlib.redirect_stdout(io.StringIO()):
                    code = dispatch(argv + ["--out", str(out)])
                files = sorted(p for p in out.iterdir() if p.suffix == ".json") if code == 0 else []
                blobs.append((code, [p.name for p in files], [p.read_bytes() for p in files]))
            same = blobs[0][0] == 0 and blobs[0][1] and blobs[0] == blobs[1]
            ok = ok and bool(same)
            detail[name] = "same" if same else f"differs(exit={blobs[0][0]})"
    return Result(9, "cli determinism", ok, detail)


CHECKS = (
    check_controllability,
    check_identity,
    check_jacobian,
    check_gates,
    check_toffoli_forms,
    check_qft,
    check_routing,
    check_lattice,
    check_determinism,
)
SLOW = {check_identity, check_jacobian, check_gates, check_routing, check_determinism}


def run_all(quick=False, seed=0, echo=print):
    ctx = Context(seed)
    results = []
    for check in CHECKS:
        if quick and check in SLOW:
            continue
        res = check(ctx)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
