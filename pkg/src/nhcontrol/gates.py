"""Closed-form cell-level target unitaries and their generators.

Qubit ``q`` of a cell (1, 2 or 3) is bit ``q - 1`` of the 8-dimensional basis
index, the same convention as :mod:`nhcontrol.hamiltonians`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .hamiltonians import CELL_ATOMS, CELL_DIM, atom_bit
from .linalg import StructureError

KINDS = ("toffoli", "perm", "split", "cond_phase")

SQRT2 = math.sqrt(2.0)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2
# A = exp(-i pi/sqrt(8) M) with this M
SPLIT_EXPONENT = np.array([[1 - SQRT2, 1], [1, -1 - SQRT2]], dtype=complex)


@dataclass(frozen=True)
class GateSpec:
    kind: str
    qubits: tuple = ()
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructureError(f"unknown gate kind {self.kind!r}")
        need = {"toffoli": 0, "perm": 2, "split": 1, "cond_phase": 2}[self.kind]
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        if len(qs) != need:
            raise StructureError(f"{self.kind} takes {need} qubit indices, got {qs}")
        if any(q not in CELL_ATOMS for q in qs):
            raise StructureError(f"cell qubit indices must be in {CELL_ATOMS}, got {qs}")
        if len(set(qs)) != len(qs):
            raise StructureError(f"qubit indices must be distinct, got {qs}")

    @classmethod
    def toffoli(cls):
        return cls("toffoli")

    @classmethod
    def perm(cls, i, j):
        return cls("perm", (i, j))

    @classmethod
    def split(cls, q):
        return cls("split", (q,))

    @classmethod
    def cond_phase(cls, control, target, phi):
        return cls("cond_phase", (control, target), float(phi))

    def to_dict(self):
        out = {"schema": "gate_spec/1", "kind": self.kind}
        if self.kind == "perm":
            out["i"], out["j"] = self.qubits
        elif self.kind == "split":
            out["qubit"] = self.qubits[0]
        elif self.kind == "cond_phase":
            out["control"], out["target"] = self.qubits
            out["phi"] = self.phi
        return out

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "toffoli":
            return cls.toffoli()
        if kind == "perm":
            return cls.perm(d["i"], d["j"])
        if kind == "split":
            return cls.split(d["qubit"])
        if kind == "cond_phase":
            return cls.cond_phase(d["control"], d["target"], d["phi"])
        raise StructureError(f"unknown gate kind {kind!r}")


def embed(op, qubits):
    """Lift a ``2**k x 2**k`` operator on cell ``qubits`` to the 8-dim cell.

    ``qubits[0]`` is the most significant bit of ``op``'s local index.
    """
    op = np.asarray(op, dtype=complex)
    k = len(qubits)
    if op.shape != (2**k, 2**k):
        raise StructureError(f"operator shape {op.shape} does not match {k} qubits")
    bits = [atom_bit(q) for q in qubits]
    mask = sum(1 << b for b in bits)
    out = np.zeros((CELL_DIM, CELL_DIM), dtype=complex)
    for x in range(CELL_DIM):
        rest = x & ~mask
        lx = sum(((x >> b) & 1) << (k - 1 - r) for r, b in enumerate(bits))
        for ly in range(2**k):
            y = rest | sum(((ly >> (k - 1 - r)) & 1) << b for r, b in enumerate(bits))
            out[y, x] = op[ly, lx]
    return out


_SWAP = np.eye(4)[[0, 2, 1, 3]]
_SWAP_PROJECTOR = np.zeros((4, 4))
_SWAP_PROJECTOR[1:3, 1:3] = [[0.5, -0.5], [-0.5, 0.5]]
_TOFFOLI_PROJECTOR = np.zeros((CELL_DIM, CELL_DIM))
_TOFFOLI_PROJECTOR[6:, 6:] = [[0.5, -0.5], [-0.5, 0.5]]


def gate_matrix(spec):
    """8x8 unitary of ``spec`` in the cell computational basis."""
    if spec.kind == "toffoli":
        return np.eye(CELL_DIM, dtype=complex)[[0, 1, 2, 3, 4, 5, 7, 6]]
    if spec.kind == "perm":
        return embed(_SWAP, spec.qubits)
    if spec.kind == "split":
        return embed(HADAMARD, spec.qubits)
    phase = np.diag([1, 1, 1, np.exp(1j * spec.phi)])
    return embed(phase, spec.qubits)


def gate_generator(spec):
    """``(H_cal, epsilon)`` with ``exp(-i H_cal epsilon) == gate_matrix(spec)``.

    ``H_cal`` has spectral norm 1 unless the gate is the identity, in which
    case both are zero.
    """
    if spec.kind == "toffoli":
        return _TOFFOLI_PROJECTOR.astype(complex), math.pi
    if spec.kind == "perm":
        return embed(_SWAP_PROJECTOR, spec.qubits), math.pi
    if spec.kind == "split":
        norm = 2 * SQRT2
        return embed(SPLIT_EXPONENT / norm, spec.qubits), math.pi
    if spec.phi == 0.0:
        return np.zeros((CELL_DIM, CELL_DIM), dtype=complex), 0.0
    gen = np.diag([0, 0, 0, -math.copysign(1.0, spec.phi)])
    return embed(gen, spec.qubits), abs(spec.phi)


def toffoli():
    return gate_matrix(GateSpec.toffoli())


def toffoli_generator():
    return gate_generator(GateSpec.toffoli())[0]
