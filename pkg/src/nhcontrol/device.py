"""Multi-cell register simulation, tree routing and program compilation.

Atoms are numbered from 1; atom ``i`` stores bit ``i - 1`` of the register
index. A cell operation on triad ``(a, b, c)`` treats ``a`` as the most
significant bit of the local 3-bit index, so the triad ``(3, 2, 1)`` matches
the cell basis ``|x2 x1 x0>`` exactly.

Exchanges swap the logical states of two atoms that share a triad (a leaf
cell or a higher-level joint triad).
"""

from collections import deque
from dataclasses import dataclass, field
import hashlib
import json
import math

import numpy as np

from . import _kernels
from .gates import GateSpec, HADAMARD, gate_matrix
from .linalg import StructureError
from .synthesis import N_SEGMENTS, SynthesisError, effect_unitary

MAX_QUBITS = 14
NORM_TOL = 1e-10


@dataclass
class RegisterState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise StructureError(f"register size must be in 1..{MAX_QUBITS}, got {self.n}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.n:
            raise StructureError(f"expected {2**self.n} amplitudes, got {self.amplitudes.size}")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > NORM_TOL:
            raise StructureError(f"state norm {np.linalg.norm(self.amplitudes):.12g} differs from 1")

    @classmethod
    def basis(cls, n, x=0):
        if not 0 <= x < 2**n:
            raise StructureError(f"basis index {x} out of range for {n} qubits")
        amp = np.zeros(2**n, dtype=complex)
        amp[x] = 1.0
        return cls(n, amp)

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def to_dict(self):
        return {
            "schema": "register_state/1",
            "n": self.n,
            "amplitudes": [[float(z.real), float(z.imag)] for z in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, d):
        amps = np.array([complex(re, im) for re, im in d["amplitudes"]])
        n = int(d.get("n", round(math.log2(amps.size))))
        return cls(n, amps)


def _check_atoms(n, atoms):
    if len(set(atoms)) != len(atoms):
        raise StructureError(f"atom indices clash: {atoms}")
    for a in atoms:
        if not 1 <= a <= n:
            raise StructureError(f"atom {a} outside register of {n} qubits")


def apply_local(state, atoms, u):
    """Apply a ``2**k`` unitary to ``k <= 3`` atoms; ``atoms[0]`` is most significant."""
    atoms = tuple(int(a) for a in atoms)
    _check_atoms(state.n, atoms)
    u = np.asarray(u, dtype=complex)
    k = len(atoms)
    if u.shape != (2**k, 2**k):
        raise StructureError(f"unitary shape {u.shape} does not match {k} atoms")
    if k == 3:
        out = _kernels.apply_three_qubit(state.amplitudes, u, *(a - 1 for a in atoms))
        return RegisterState(state.n, out)
    n = state.n
    psi = state.amplitudes.reshape((2,) * n)
    axes = [n - a for a in atoms]
    psi = np.moveaxis(psi, axes, list(range(k))).reshape(2**k, -1)
    out = (u @ psi).reshape((2,) * n)
    return RegisterState(n, np.moveaxis(out, list(range(k)), axes).reshape(-1))


def apply_cell_op(state, triad, u):
    """Apply an 8x8 cell unitary to the three atoms of ``triad``."""
    if len(triad) != 3:
        raise StructureError("a cell operation acts on exactly three atoms")
    return apply_local(state, triad, u)


def exchange(state, a, b):
    """Swap the logical states of atoms ``a`` and ``b``."""
    if a == b:
        raise StructureError("exchange needs two distinct atoms")
    _check_atoms(state.n, (a, b))
    return RegisterState(state.n, _kernels.swap_bits(state.amplitudes, a - 1, b - 1))


# -- topology ----------------------------------------------------------------


@dataclass(frozen=True)
class DeviceTopology:
    """Leaf cells plus higher-level joint triads of a ternary tree.

    ``triads`` lists every triad (leaf cells first); ``parents[i]`` is the
    index of the joint triad that triad ``i`` reports to, or ``None`` at the
    root.
    """

    n: int
    triads: tuple
    parents: tuple

    @property
    def cells(self):
        return tuple(t for t, _ in zip(self.triads, range(self.n_leaf_cells)))

    @property
    def n_leaf_cells(self):
        return max(1, self.n // 3) if self.n >= 3 else 1

    def triads_of(self, atom):
        return [i for i, t in enumerate(self.triads) if atom in t]

    def host_triad(self, atoms):
        """Index of the first triad containing all ``atoms``, or ``None``."""
        for i, t in enumerate(self.triads):
            if all(a in t for a in atoms):
                return i
        return None

    def edges(self):
        out = set()
        for t in self.triads:
            for i, a in enumerate(t):
                for b in t[i + 1 :]:
                    out.add((min(a, b), max(a, b)))
        return sorted(out)

    def to_dict(self):
        return {
            "schema": "device_topology/1",
            "n": self.n,
            "triads": [list(t) for t in self.triads],
            "parents": list(self.parents),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n"]), tuple(tuple(t) for t in d["triads"]), tuple(d["parents"]))


def ternary_tree(n):
    """Ternary tree over ``n = 3**L`` atoms.

    Leaf cells hold consecutive atoms. Each group of three sibling triads
    sends one representative to its joint triad: the last atom of the first
    two siblings and the first atom of the third. For ``n = 9`` this gives
    cells (1,2,3), (4,5,6), (7,8,9) under the joint triad (3,6,7).
    """
    if n == 1:
        return DeviceTopology(1, ((1,),), (None,))
    levels = round(math.log(n, 3))
    if 3**levels != n:
        raise StructureError(f"a ternary tree needs 3**L atoms, got {n}")
    triads = [tuple(range(s, s + 3)) for s in range(1, n + 1, 3)]
    parents = [None] * len(triads)
    layer = list(range(len(triads)))
    while len(layer) > 1:
        nxt = []
        for g in range(0, len(layer), 3):
            a, b, c = (triads[i] for i in layer[g : g + 3])
            triads.append(tuple(sorted((a[-1], b[-1], c[0]))))
            parents.append(None)
            for i in layer[g : g + 3]:
                parents[i] = len(triads) - 1
            nxt.append(len(triads) - 1)
        layer = nxt
    return DeviceTopology(n, tuple(triads), tuple(parents))


def toy_topology():
    """Nine atoms in cells (1,2,3), (4,5,6), (7,8,9) with joint triad (3,6,7)."""
    return ternary_tree(9)


def route_to_common_cell(topo, qubits):
    """Fewest exchanges that bring the logical ``qubits`` into one triad.

    Breadth-first search over the positions of the tracked qubits; each move
    swaps a tracked position with any atom sharing a triad with it.

    Returns ``(exchanges, host_triad_index, slot_map)`` where ``slot_map``
    maps each logical qubit to the atom that holds it after the exchanges.
    """
    qubits = tuple(int(q) for q in qubits)
    if not 1 <= len(qubits) <= 3 or len(set(qubits)) != len(qubits):
        raise StructureError(f"route needs 1-3 distinct atoms, got {qubits}")
    _check_atoms(topo.n, qubits)
    neighbours = {a: set() for a in range(1, topo.n + 1)}
    for a, b in topo.edges():
        neighbours[a].add(b)
        neighbours[b].add(a)
    start = qubits
    prev = {start: None}
    queue = deque([start])
    while queue:
        pos = queue.popleft()
        host = topo.host_triad(pos)
        if host is not None:
            moves = []
            cur = pos
            while prev[cur] is not None:
                cur, move = prev[cur]
                moves.append(move)
            return moves[::-1], host, dict(zip(qubits, pos))
        for i, p in enumerate(pos):
            for q in sorted(neighbours[p]):
                nxt = list(pos)
                if q in pos:
                    j = pos.index(q)
                    nxt[i], nxt[j] = q, p
                else:
                    nxt[i] = q
                nxt = tuple(nxt)
                if nxt not in prev:
                    prev[nxt] = (pos, (min(p, q), max(p, q)))
                    queue.append(nxt)
    raise StructureError(f"qubits {qubits} cannot be brought into a common triad")


# -- programs ----------------------------------------------------------------


@dataclass
class CellOp:
    atoms: tuple
    unitary: np.ndarray
    label: str = ""
    gate: dict = None

    def __post_init__(self):
        self.atoms = tuple(int(a) for a in self.atoms)
        self.unitary = np.asarray(self.unitary, dtype=complex)


@dataclass
class Exchange:
    a: int
    b: int


@dataclass
class GateProgram:
    n: int
    steps: list = field(default_factory=list)

    @property
    def exchange_count(self):
        return sum(isinstance(s, Exchange) for s in self.steps)

    def add_exchanges(self, pairs):
        self.steps.extend(Exchange(a, b) for a, b in pairs)

    def to_dict(self):
        steps = []
        for s in self.steps:
            if isinstance(s, Exchange):
                steps.append({"op": "exchange", "a": s.a, "b": s.b})
            else:
                d = {
                    "op": "cell",
                    "atoms": list(s.atoms),
                    "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in s.unitary],
                }
                if s.label:
                    d["label"] = s.label
                if s.gate:
                    d["gate"] = s.gate
                steps.append(d)
        return {
            "schema": "gate_program/1",
            "n": self.n,
            "exchange_count": self.exchange_count,
            "steps": steps,
        }

    @classmethod
    def from_dict(cls, d):
        prog = cls(int(d["n"]))
        for s in d["steps"]:
            if s["op"] == "exchange":
                prog.steps.append(Exchange(int(s["a"]), int(s["b"])))
            elif s["op"] == "cell":
                u = np.array([[complex(re, im) for re, im in row] for row in s["unitary"]])
                prog.steps.append(CellOp(tuple(s["atoms"]), u, s.get("label", ""), s.get("gate")))
            else:
                raise StructureError(f"unknown program step {s['op']!r}")
        if "exchange_count" in d and d["exchange_count"] != prog.exchange_count:
            raise StructureError("exchange_count does not match the step list")
        return prog


def run_program(state, prog):
    if prog.n != state.n:
        raise StructureError(f"program is for {prog.n} qubits, state has {state.n}")
    for step in prog.steps:
        if isinstance(step, Exchange):
            state = exchange(state, step.a, step.b)
        else:
            state = apply_local(state, step.atoms, step.unitary)
    return state


def program_unitary(prog):
    """Dense matrix of a program (columns = images of basis states)."""
    dim = 2**prog.n
    cols = [run_program(RegisterState.basis(prog.n, x), prog).amplitudes for x in range(dim)]
    return np.array(cols).T


def _cell_qubit(triad, atom):
    """Cell qubit index (1..3) of ``atom`` inside ``triad``; first atom is qubit 3."""
    return 3 - triad.index(atom)


def _local_gate(topo, spec_fn, atoms, label):
    """Cell op realizing a gate on logical ``atoms`` that already share a triad."""
    host = topo.host_triad(atoms)
    triad = topo.triads[host]
    if len(triad) < 3:
        # degenerate single-atom register
        return CellOp(triad, HADAMARD, label, {"kind": "split", "qubit": 1})
    spec = spec_fn(*(_cell_qubit(triad, a) for a in atoms))
    return CellOp(triad, gate_matrix(spec), label, spec.to_dict())


def _routed(prog, topo, atoms, spec_fn, label):
    moves, host, slots = route_to_common_cell(topo, atoms)
    prog.add_exchanges(moves)
    prog.steps.append(_local_gate(topo, spec_fn, tuple(slots[a] for a in atoms), label))
    prog.add_exchanges(moves[::-1])


def _routed_swap(prog, topo, a, b):
    moves, host, slots = route_to_common_cell(topo, (a, b))
    prog.add_exchanges(moves)
    prog.steps.append(Exchange(slots[a], slots[b]))
    prog.add_exchanges(moves[::-1])


def compile_qft(topo, n=None):
    """Program for the discrete Fourier transform on ``topo.n`` qubits.

    Bit reversal by routed swaps, then for ``i = 1..n``: conditional phases
    ``pi / 2**(i - j)`` between qubits ``i`` and ``j < i`` (each routed into a
    common triad and routed back), then the split gate on qubit ``i``.
    """
    n = topo.n if n is None else n
    if n != topo.n:
        raise StructureError(f"topology has {topo.n} atoms, asked for {n}")
    prog = GateProgram(n)
    for a in range(1, n // 2 + 1):
        _routed_swap(prog, topo, a, n + 1 - a)
    for i in range(1, n + 1):
        for j in range(1, i):
            phi = math.pi / 2 ** (i - j)
            _routed(
                prog,
                topo,
                (i, j),
                lambda qi, qj, phi=phi: GateSpec.cond_phase(qi, qj, phi),
                f"B({i},{j})",
            )
        _routed(prog, topo, (i,), GateSpec.split, f"A({i})")
    return prog


def dft_matrix(n_qubits):
    dim = 2**n_qubits
    x = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(x, x) / dim) / np.sqrt(dim)


# -- lowering ----------------------------------------------------------------


def fingerprint(u, decimals=10):
    data = np.round(np.asarray(u, dtype=complex), decimals) + 0.0
    return hashlib.sha1(np.ascontiguousarray(data).tobytes()).hexdigest()[:16]


@dataclass
class Lowering:
    steps: list
    sequences: dict
    total_intervals: int
    synthesized: int

    def to_dict(self):
        return {
            "schema": "lowering/1",
            "total_intervals": self.total_intervals,
            "synthesized": self.synthesized,
            "steps": self.steps,
            "sequences": {k: v.to_dict() for k, v in sorted(self.sequences.items())},
        }


def _exchange_unitary(topo, a, b):
    host = topo.host_triad((a, b))
    if host is None:
        raise StructureError(f"atoms {a} and {b} share no triad; exchange not realizable")
    triad = topo.triads[host]
    spec = GateSpec.perm(_cell_qubit(triad, a), _cell_qubit(triad, b))
    return triad, gate_matrix(spec)


def lower_to_controls(prog, ops, base_seq, topo=None, synth=effect_unitary):
    """Map every program step to a cell control sequence.

    Cell ops are synthesized directly; exchanges become the permutation of
    the two slots inside a triad that holds both atoms. Sequences are cached
    by a fingerprint of the 8x8 target, and the interval count sums
    ``64 * m`` over the steps (idle cells run the identity sequence in
    parallel and add no time).
    """
    if topo is None:
        topo = ternary_tree(prog.n)
    cache = {}
    records = []
    total = 0
    for idx, step in enumerate(prog.steps):
        if isinstance(step, Exchange):
            atoms, target = _exchange_unitary(topo, step.a, step.b)
            kind = "exchange"
        else:
            atoms, target = step.atoms, step.unitary
            kind = "cell"
            if target.shape != (8, 8):
                raise StructureError(f"step {idx}: only 8x8 cell operations can be lowered")
        key = fingerprint(target)
        if key not in cache:
            try:
                cache[key] = synth(ops, base_seq, target)
            except SynthesisError as exc:
                exc.diagnostics["step"] = idx
                raise SynthesisError(f"step {idx} ({kind} on {atoms}): {exc}", **exc.diagnostics) from exc
        seq = cache[key]
        intervals = N_SEGMENTS * seq.m
        total += intervals
        records.append(
            {"step": idx, "kind": kind, "atoms": list(atoms), "sequence": key, "m": seq.m, "intervals": intervals}
        )
    return Lowering(records, cache, total, len(cache))


def program_to_json(prog):
    return json.dumps(prog.to_dict(), indent=2, sort_keys=True)
