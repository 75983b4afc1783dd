import itertools
import math

import numpy as np
import pytest

from nhcontrol.device import (
    CellOp,
    Exchange,
    GateProgram,
    MAX_QUBITS,
    RegisterState,
    apply_cell_op,
    compile_qft,
    dft_matrix,
    exchange,
    lower_to_controls,
    program_unitary,
    route_to_common_cell,
    run_program,
    ternary_tree,
    toy_topology,
)
from nhcontrol.gates import GateSpec, gate_matrix, toffoli
from nhcontrol.linalg import StructureError, phase_aligned_distance
from nhcontrol.synthesis import ControlSequence

from conftest import random_unitary


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return RegisterState(n, v / np.linalg.norm(v))


def dense_cell_operator(n, triad, u):
    """Full 2^n matrix of ``u`` on ``triad`` built by explicit index arithmetic."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    bits = [a - 1 for a in triad]
    for x in range(dim):
        local_x = sum(((x >> b) & 1) << (2 - i) for i, b in enumerate(bits))
        rest = x & ~sum(1 << b for b in bits)
        for local_y in range(8):
            y = rest | sum(((local_y >> (2 - i)) & 1) << b for i, b in enumerate(bits))
            out[y, x] += u[local_y, local_x]
    return out


def test_cell_op_identity(rng):
    s = random_state(rng, 5)
    assert np.array_equal(apply_cell_op(s, (1, 3, 5), np.eye(8)).amplitudes, s.amplitudes)


def test_cell_op_matches_dense_n3(rng):
    u = random_unitary(rng)
    s = random_state(rng, 3)
    assert np.allclose(apply_cell_op(s, (3, 2, 1), u).amplitudes, u @ s.amplitudes)


@pytest.mark.parametrize("triad", [(1, 2, 3), (3, 1, 2), (5, 2, 4)])
def test_cell_op_matches_index_oracle(rng, triad):
    u = random_unitary(rng)
    s = random_state(rng, 5)
    ref = dense_cell_operator(5, triad, u) @ s.amplitudes
    assert np.allclose(apply_cell_op(s, triad, u).amplitudes, ref)


def test_toffoli_on_register():
    # atoms 3, 2 are controls (x2, x1 of the cell), atom 1 is the target
    x = 0b110
    out = apply_cell_op(RegisterState.basis(3, x), (3, 2, 1), toffoli())
    assert abs(out.amplitudes[0b111]) == pytest.approx(1.0)


def test_cell_op_index_clash(rng):
    with pytest.raises(StructureError):
        apply_cell_op(random_state(rng, 4), (1, 1, 2), np.eye(8))
    with pytest.raises(StructureError):
        apply_cell_op(random_state(rng, 4), (1, 2, 5), np.eye(8))


def test_exchange_swaps_bits(rng):
    s = RegisterState.basis(4, 0b0010)  # atom 2 set
    out = exchange(s, 2, 4)
    assert abs(out.amplitudes[0b1000]) == 1.0
    r = random_state(rng, 6)
    assert np.array_equal(exchange(exchange(r, 1, 5), 1, 5).amplitudes, r.amplitudes)


def test_exchange_equals_embedded_perm(rng):
    s = random_state(rng, 9)
    triad = (4, 5, 6)
    # atoms 4 and 6 sit at cell qubits 3 and 1
    perm = gate_matrix(GateSpec.perm(3, 1))
    assert np.allclose(exchange(s, 4, 6).amplitudes, apply_cell_op(s, triad, perm).amplitudes)


def test_state_validation():
    with pytest.raises(StructureError):
        RegisterState(2, np.ones(4))
    with pytest.raises(StructureError):
        RegisterState.basis(MAX_QUBITS + 1)
    with pytest.raises(StructureError):
        RegisterState.basis(3, 8)


def test_state_json_round_trip(rng):
    s = random_state(rng, 3)
    back = RegisterState.from_dict(s.to_dict())
    assert np.array_equal(back.amplitudes, s.amplitudes)


def test_toy_topology():
    topo = toy_topology()
    assert topo.triads == ((1, 2, 3), (4, 5, 6), (7, 8, 9), (3, 6, 7))
    assert ternary_tree(9) == topo


def test_ternary_tree_27():
    topo = ternary_tree(27)
    assert topo.n_leaf_cells == 9
    assert topo.triads[-1] == (7, 16, 21)


def exhaustive_min_route(topo, qubits, limit):
    """Shortest exchange sequence by iterative deepening over all edges."""
    edges = topo.edges()
    cells = [set(t) for t in topo.triads]

    def together(pos):
        return any(set(pos) <= c for c in cells)

    def step(pos, a, b):
        return tuple(b if p == a else a if p == b else p for p in pos)

    frontier = {tuple(qubits)}
    for depth in range(limit + 1):
        if any(together(p) for p in frontier):
            return depth
        frontier = {step(p, a, b) for p in frontier for a, b in edges}
    return None


@pytest.mark.parametrize("n", [3, 9])
def test_routing_minimal_against_enumeration(n):
    topo = ternary_tree(n)
    for qs in itertools.combinations(range(1, n + 1), min(3, n)):
        moves, host, slots = route_to_common_cell(topo, qs)
        assert len(moves) == exhaustive_min_route(topo, qs, 6)
        assert set(slots[q] for q in qs) <= set(topo.triads[host])


def test_routing_examples():
    topo = toy_topology()
    assert route_to_common_cell(topo, (1, 2))[0] == []
    moves, host, slots = route_to_common_cell(topo, (1, 4))
    assert len(moves) <= 4
    assert slots[1] in topo.triads[host] and slots[4] in topo.triads[host]


def test_routing_slot_map_is_consistent(rng):
    topo = ternary_tree(27)
    qs = (2, 14, 25)
    moves, host, slots = route_to_common_cell(topo, qs)
    pos = {q: q for q in qs}
    for a, b in moves:
        for q, p in pos.items():
            pos[q] = b if p == a else a if p == b else p
    assert pos == slots
    assert len(moves) <= 6 * math.log(27, 3)


@pytest.mark.parametrize("n", [3, 9, 27])
def test_routing_bound(n):
    topo = ternary_tree(n)
    worst = max(len(route_to_common_cell(topo, q)[0]) for q in itertools.combinations(range(1, n + 1), 3))
    assert worst <= 6 * math.log(n, 3)


def test_qft_single_qubit():
    prog = compile_qft(ternary_tree(1), 1)
    assert len(prog.steps) == 1 and prog.exchange_count == 0
    assert np.allclose(program_unitary(prog), np.array([[1, 1], [1, -1]]) / math.sqrt(2))


def test_qft_three_qubits_is_dft():
    u = program_unitary(compile_qft(ternary_tree(3), 3))
    x = np.arange(8)
    f8 = np.exp(2j * np.pi * np.outer(x, x) / 8) / math.sqrt(8)
    assert phase_aligned_distance(u, f8)[0] < 1e-10


def test_qft_nine_qubits_fft_oracle(rng):
    prog = compile_qft(toy_topology(), 9)
    for x in rng.choice(512, size=20, replace=False):
        out = run_program(RegisterState.basis(9, int(x)), prog).amplitudes
        e = np.zeros(512)
        e[x] = 1
        assert phase_aligned_distance(out, math.sqrt(512) * np.fft.ifft(e))[0] < 1e-8
    s = random_state(rng, 9)
    out = run_program(s, prog).amplitudes
    assert phase_aligned_distance(out, math.sqrt(512) * np.fft.ifft(s.amplitudes))[0] < 1e-8


def test_qft_zero_state_uniform():
    out = run_program(RegisterState.basis(9, 0), compile_qft(toy_topology(), 9)).amplitudes
    assert np.max(np.abs(out - 1 / math.sqrt(512))) < 1e-9


def test_qft_program_structure():
    prog = compile_qft(toy_topology(), 9)
    assert prog.exchange_count == sum(isinstance(s, Exchange) for s in prog.steps)
    for step in prog.steps:
        if isinstance(step, CellOp):
            assert step.unitary.shape == (8, 8)
            assert step.atoms in toy_topology().triads
        else:
            assert toy_topology().host_triad((step.a, step.b)) is not None


def test_dft_matrix_helper():
    assert np.allclose(dft_matrix(2), np.fft.ifft(np.eye(4), axis=0) * 2)


def test_run_program_trivial(rng):
    s = random_state(rng, 4)
    assert np.array_equal(run_program(s, GateProgram(4)).amplitudes, s.amplitudes)
    twice = GateProgram(4, [Exchange(1, 3), Exchange(1, 3)])
    assert np.array_equal(run_program(s, twice).amplitudes, s.amplitudes)


def test_norm_and_inner_product_preserved(rng):
    n = 6
    triads = list(itertools.permutations(range(1, n + 1), 3))
    units = [random_unitary(rng) for _ in range(8)]
    steps = []
    for i in range(10_000):
        if i % 3 == 0:
            a, b = rng.choice(np.arange(1, n + 1), size=2, replace=False)
            steps.append(Exchange(int(a), int(b)))
        else:
            steps.append(CellOp(triads[rng.integers(len(triads))], units[i % 8]))
    prog = GateProgram(n, steps)
    s, t = random_state(rng, n), random_state(rng, n)
    v = t.amplitudes - np.vdot(s.amplitudes, t.amplitudes) * s.amplitudes
    t = RegisterState(n, v / np.linalg.norm(v))
    s2, t2 = run_program(s, prog), run_program(t, prog)
    assert abs(np.linalg.norm(s2.amplitudes) - 1) < 1e-9
    assert abs(np.vdot(s2.amplitudes, t2.amplitudes)) < 1e-9


def test_program_json_round_trip(rng):
    prog = compile_qft(ternary_tree(3), 3)
    back = GateProgram.from_dict(prog.to_dict())
    assert np.allclose(program_unitary(back), program_unitary(prog))
    assert back.exchange_count == prog.exchange_count


class CountingSynth:
    def __init__(self, base):
        self.base = base
        self.calls = 0

    def __call__(self, ops, base, target):
        self.calls += 1
        m = 1 if np.allclose(target, np.eye(8)) else 4
        return ControlSequence(self.base.strengths, T=self.base.T, m=m)


def test_lowering_caches_and_counts(ops):
    base = ControlSequence(np.ones(64), T=250.0)
    synth = CountingSynth(base)
    topo = toy_topology()
    prog = GateProgram(9, [CellOp((1, 2, 3), np.eye(8)), Exchange(3, 6), Exchange(3, 6), CellOp((4, 5, 6), np.eye(8))])
    low = lower_to_controls(prog, ops, base, topo, synth=synth)
    assert synth.calls == 2
    assert low.total_intervals == 64 * (1 + 4 + 4 + 1)
    assert [r["m"] for r in low.steps] == [1, 4, 4, 1]
    assert low.to_dict()["schema"] == "lowering/1"


def test_lowering_identity_uses_base(ops, base_seq):
    prog = GateProgram(3, [CellOp((1, 2, 3), np.eye(8))])
    low = lower_to_controls(prog, ops, base_seq)
    (seq,) = low.sequences.values()
    assert seq.m == 1 and np.array_equal(seq.strengths, base_seq.strengths)


def test_lowering_error_names_step(ops):
    from nhcontrol.synthesis import SynthesisError

    def failing(ops, base, target):
        raise SynthesisError("boom")

    prog = GateProgram(3, [CellOp((1, 2, 3), np.eye(8)), CellOp((1, 2, 3), toffoli())])
    calls = iter([ControlSequence(np.ones(64))])

    def synth(o, b, t):
        if np.allclose(t, np.eye(8)):
            return next(calls)
        return failing(o, b, t)

    with pytest.raises(SynthesisError) as info:
        lower_to_controls(prog, ops, ControlSequence(np.ones(64)), synth=synth)
    assert info.value.diagnostics["step"] == 1
