"""Pauli expansion of cell Hamiltonians and period-3 triad emulation on a lattice.

A triad ``(a, b, c)`` is ordered like a device cell: ``a`` is the most
significant bit of the local 3-bit index. Pauli labels are three characters
from ``IXYZ`` in the same order, so ``"ZII"`` is sigma_z on the first atom of
the triad.
"""

from dataclasses import dataclass
import csv
import io
import itertools
import json

import numpy as np

from . import _kernels
from .device import MAX_QUBITS, RegisterState
from .linalg import StructureError, as_hermitian

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
LABELS = "IXYZ"
MAX_EMULATION_QUBITS = 12

_STRINGS = ["".join(p) for p in itertools.product(LABELS, repeat=3)]
_BASIS = np.array(
    [np.kron(np.kron(PAULI[s[0]], PAULI[s[1]]), PAULI[s[2]]) for s in _STRINGS]
)


@dataclass
class PauliDecomposition:
    """Real coefficients of a 3-qubit Hermitian operator in the Pauli basis.

    ``coeffs[p0, p1, p2]`` multiplies ``sigma_p0 (x) sigma_p1 (x) sigma_p2``
    with ``p = 0, 1, 2, 3`` for ``I, X, Y, Z``. Cell qubits are numbered
    1..3 from the first (most significant) triad position.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(4, 4, 4)

    @classmethod
    def zero(cls):
        return cls(np.zeros((4, 4, 4)))

    @property
    def offset(self):
        return float(self.coeffs[0, 0, 0])

    def _terms(self, order):
        out = {}
        for idx in itertools.product(range(4), repeat=3):
            support = tuple(q + 1 for q, p in enumerate(idx) if p)
            if len(support) == order and self.coeffs[idx] != 0.0:
                key = support if order > 1 else support[0]
                paulis = "".join(LABELS[p].lower() for p in idx if p)
                out.setdefault(key, {})[paulis] = float(self.coeffs[idx])
        return out

    @property
    def one_body(self):
        """``{qubit: {alpha: A}}``"""
        return self._terms(1)

    @property
    def two_body(self):
        """``{(i, j): {alpha beta: B}}``"""
        return self._terms(2)

    @property
    def three_body(self):
        """``{(1, 2, 3): {alpha beta gamma: C}}``"""
        return self._terms(3)

    def to_dict(self):
        terms = {
            s: float(c) for s, c in zip(_STRINGS, self.coeffs.reshape(-1)) if c != 0.0
        }
        return {"terms": terms}

    @classmethod
    def from_dict(cls, d):
        coeffs = np.zeros(64)
        for label, value in d.get("terms", {}).items():
            label = label.upper()
            if len(label) != 3 or any(ch not in LABELS for ch in label):
                raise StructureError(f"bad Pauli label {label!r}")
            coeffs[_STRINGS.index(label)] = float(value)
        if "offset" in d:
            coeffs[0] += float(d["offset"])
        return cls(coeffs)


def pauli_decompose(h):
    """Expand an 8x8 Hermitian ``h`` as ``sum_P tr(h P) / 8 * P``."""
    h = as_hermitian(h)
    if h.shape != (8, 8):
        raise StructureError(f"expected an 8x8 operator, got {h.shape}")
    coeffs = np.real(np.einsum("kab,ba->k", _BASIS, h)) / 8.0
    return PauliDecomposition(coeffs)


def pauli_reconstruct(d):
    return np.einsum("k,kab->ab", d.coeffs.reshape(-1), _BASIS)


def pauli_operator(label, atom_positions, n):
    """Register-level Pauli string: ``label[i]`` acts on ``atom_positions[i]``."""
    out = np.array([[1.0 + 0j]])
    ops = dict(zip(atom_positions, label.upper()))
    for atom in range(n, 0, -1):
        out = np.kron(out, PAULI[ops.get(atom, "I")])
    return out


# -- regrouping schedule -----------------------------------------------------


@dataclass(frozen=True)
class RegroupSchedule:
    rows: int
    cols: int
    periods: tuple

    def partition(self, step):
        """Triads in use at (0-based) ``step``; repeats with period 3."""
        return self.periods[step % 3]

    @property
    def n_atoms(self):
        return self.rows * self.cols

    def atom(self, r, c):
        return r * self.cols + c + 1

    def adjacent_pairs(self):
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                if c + 1 < self.cols:
                    out.append((self.atom(r, c), self.atom(r, c + 1)))
                if r + 1 < self.rows:
                    out.append((self.atom(r, c), self.atom(r + 1, c)))
        return out

    def to_dict(self):
        return {
            "rows": self.rows,
            "cols": self.cols,
            "periods": [[list(t) for t in p] for p in self.periods],
        }


def _connected_triads(rows, cols):
    """All connected 3-atom shapes (lines and L's) as sorted atom tuples."""
    def atom(r, c):
        return r * cols + c + 1

    def nbrs(r, c):
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            if 0 <= r + dr < rows and 0 <= c + dc < cols:
                yield r + dr, c + dc

    shapes = set()
    for r in range(rows):
        for c in range(cols):
            for a in nbrs(r, c):
                for b in nbrs(*a):
                    if b != (r, c):
                        shapes.add(tuple(sorted((atom(r, c), atom(*a), atom(*b)))))
                for b in nbrs(r, c):
                    if b != a:
                        shapes.add(tuple(sorted((atom(r, c), atom(*a), atom(*b)))))
    return sorted(shapes)


def regroup_schedule(rows, cols, max_nodes=200_000):
    """Three partitions of a ``rows x cols`` lattice into connected triads.

    Every pair of lattice neighbours shares a triad in at least one period.
    The partitions are found by a deterministic depth-first search that
    prefers triads covering not-yet-covered neighbour pairs and, where the
    lattice allows it, makes the three partitions distinct; a lattice with
    no such schedule (for example a 1 x 6 chain) raises ``StructureError``.
    """
    if rows < 1 or cols < 1 or (rows * cols) % 3:
        raise StructureError(f"lattice {rows}x{cols} cannot be split into triads")
    n = rows * cols
    shapes = _connected_triads(rows, cols)
    by_atom = {a: [t for t in shapes if t[0] == a] for a in range(1, n + 1)}
    edges = set()
    for r in range(rows):
        for c in range(cols):
            a = r * cols + c + 1
            if c + 1 < cols:
                edges.add((a, a + 1))
            if r + 1 < rows:
                edges.add((a, a + cols))

    def covers(t):
        return {(x, y) for x, y in itertools.combinations(t, 2) if (x, y) in edges}

    budget = [max_nodes]
    periods = []
    distinct = [True]

    def fill(period, used, uncovered, left):
        # period: triads chosen so far for the current partition
        budget[0] -= 1
        if budget[0] < 0:
            raise StructureError(f"no regrouping schedule found for {rows}x{cols} within search budget")
        if len(used) == n:
            if distinct[0] and tuple(period) in periods:
                return False
            periods.append(tuple(period))
            ok = next_period(uncovered, left - 1)
            if not ok:
                periods.pop()
            return ok
        first = min(set(range(1, n + 1)) - used)
        # each remaining partition (this one included) covers at most 2 pairs per triad
        capacity = 2 * ((n - len(used)) // 3 + (left - 1) * (n // 3))
        if len(uncovered) > capacity:
            return False
        cands = [t for t in by_atom[first] if not used.intersection(t)]
        seen = {t for p in periods for t in p}
        cands.sort(key=lambda t: (-len(covers(t) & uncovered), t in seen))
        for t in cands:
            period.append(t)
            if fill(period, used | set(t), uncovered - covers(t), left):
                return True
            period.pop()
        return False

    def next_period(uncovered, left):
        if left == 0:
            return not uncovered
        return fill([], set(), uncovered, left)

    found = next_period(frozenset(edges), 3)
    if not found:
        # tiny lattices admit only one partition; allow repeats
        distinct[0] = False
        budget[0] = max_nodes
        found = next_period(frozenset(edges), 3)
    if not found:
        raise StructureError(f"no regrouping schedule covers all neighbours of a {rows}x{cols} lattice")
    return RegroupSchedule(rows, cols, tuple(periods))


# -- emulation ---------------------------------------------------------------


def _as_coefficient_fn(coeffs):
    if callable(coeffs):
        return coeffs

    def lookup(step, period, q):
        return coeffs[period][q]

    return lookup


def _triad_unitary(d, epsilon):
    h = pauli_reconstruct(d)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * epsilon)) @ v.conj().T


def emulate_field(schedule, coeffs, epsilon, steps, initial, observer=None):
    """Advance ``initial`` through ``steps`` control periods of length ``epsilon``.

    At step ``t`` the partition ``t mod 3`` is active and every triad ``q`` in
    it applies ``exp(-i H_{q,p} epsilon)``. ``coeffs`` is either a nested
    ``[period][triad]`` list of :class:`PauliDecomposition` or a callable
    ``(step, period, triad_index) -> PauliDecomposition``. ``observer`` is
    called as ``observer(step, state)`` before the first and after every step.
    """
    n = schedule.n_atoms
    if n > MAX_EMULATION_QUBITS:
        raise MemoryError(f"emulation is capped at {MAX_EMULATION_QUBITS} atoms, lattice has {n}")
    if initial.n != n:
        raise StructureError(f"initial state has {initial.n} qubits, lattice has {n}")
    fn = _as_coefficient_fn(coeffs)
    psi = initial.amplitudes.copy()
    if observer is not None:
        observer(0, RegisterState(n, psi))
    for t in range(steps):
        p = t % 3
        for q, triad in enumerate(schedule.partition(t)):
            u = _triad_unitary(fn(t, p, q), epsilon)
            psi = _kernels.apply_three_qubit(psi, u, *(a - 1 for a in triad))
        if observer is not None:
            observer(t + 1, RegisterState(n, psi))
    return RegisterState(n, psi)


def effective_hamiltonian(schedule, coeffs, step=0):
    """``sum_{p, q} H_{q,p} / 3`` on the full register (dense)."""
    n = schedule.n_atoms
    if n > MAX_QUBITS:
        raise MemoryError("dense effective Hamiltonian too large")
    fn = _as_coefficient_fn(coeffs)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for p in range(3):
        for q, triad in enumerate(schedule.periods[p]):
            d = fn(step + p, p, q)
            for label, c in zip(_STRINGS, d.coeffs.reshape(-1)):
                if c != 0.0:
                    h += c * pauli_operator(label, triad, n)
    return h / 3.0


def expectation(state, op):
    psi = state.amplitudes
    return complex(np.vdot(psi, op @ psi))


def heisenberg_defect(schedule, coeffs, epsilon, initial, observables, cycles=1):
    """Compare emulated ``d<O>/dtau`` with ``<i [H_eff, O]>`` at the initial state.

    The derivative is the finite difference over ``3 * cycles`` steps
    (``tau = 3 * cycles * epsilon``). Returns the largest absolute mismatch.
    """
    n = schedule.n_atoms
    h_eff = effective_hamiltonian(schedule, coeffs)
    final = emulate_field(schedule, coeffs, epsilon, 3 * cycles, initial)
    tau = 3 * cycles * epsilon
    worst = 0.0
    for label, atoms in observables:
        o = pauli_operator(label, atoms, n)
        rate = (expectation(final, o) - expectation(initial, o)).real / tau
        predicted = expectation(initial, 1j * (h_eff @ o - o @ h_eff)).real
        worst = max(worst, abs(rate - predicted))
    return worst


def trajectory_csv(schedule, coeffs, epsilon, steps, initial, observables):
    """CSV rows ``step, tau, <O_1>, ...`` for Pauli ``observables``.

    ``observables`` are ``(label, atoms)`` pairs, e.g. ``("Z", (5,))``.
    """
    n = schedule.n_atoms
    ops = [pauli_operator(label, atoms, n) for label, atoms in observables]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "tau"] + [f"{label}@{'-'.join(map(str, atoms))}" for label, atoms in observables])

    def observer(step, state):
        w.writerow([step, repr(step * epsilon)] + [repr(expectation(state, o).real) for o in ops])

    emulate_field(schedule, coeffs, epsilon, steps, initial, observer=observer)
    return buf.getvalue()


def load_lattice_config(path_or_dict):
    """Parse a lattice emulation config.

    Schema ``lattice_config/1``::

        {"rows": 3, "cols": 3, "epsilon": 0.01, "steps": 30,
         "coefficients": {"0": {"0": {"terms": {"ZZI": 0.5}}, ...}, ...},
         "default": {"terms": {...}},
         "initial": {"basis": 0} | {"amplitudes": [[re, im], ...]},
         "observables": [["Z", [1]], ["XX", [1, 2]]]}

    ``coefficients`` maps period (0..2) to triad index to a decomposition;
    missing entries fall back to ``default`` (zero when absent).
    """
    if isinstance(path_or_dict, dict):
        cfg = path_or_dict
    else:
        with open(path_or_dict) as fh:
            cfg = json.load(fh)
    rows, cols = int(cfg["rows"]), int(cfg["cols"])
    schedule = regroup_schedule(rows, cols)
    default = PauliDecomposition.from_dict(cfg.get("default", {}))
    table = cfg.get("coefficients", {})
    coeffs = []
    for p in range(3):
        row = table.get(str(p), {})
        coeffs.append(
            [
                PauliDecomposition.from_dict(row[str(q)]) if str(q) in row else default
                for q in range(len(schedule.periods[p]))
            ]
        )
    n = rows * cols
    init = cfg.get("initial", {"basis": 0})
    if "amplitudes" in init:
        initial = RegisterState.from_dict({"n": n, "amplitudes": init["amplitudes"]})
    else:
        initial = RegisterState.basis(n, int(init.get("basis", 0)))
    observables = [(label, tuple(atoms)) for label, atoms in cfg.get("observables", [["Z", [1]]])]
    return {
        "schedule": schedule,
        "coeffs": coeffs,
        "epsilon": float(cfg.get("epsilon", 0.01)),
        "steps": int(cfg.get("steps", 30)),
        "initial": initial,
        "observables": observables,
    }
