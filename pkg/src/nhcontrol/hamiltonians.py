"""Unit-cell operators: drift H0 and the two control patterns P_S, P_omega.

Basis ordering is ``|x2 x1 x0>`` with ``x = sum_r x_r 2**r``; atom ``i`` stores
bit ``i - 1``. Control strengths multiply fixed reference patterns, so a
segment Hamiltonian is ``H0 + C * P`` with ``C`` near 1 for the default values.
"""

from dataclasses import dataclass, asdict, fields
from importlib import resources
import json

import numpy as np

from .linalg import expm_hermitian

CELL_ATOMS = (1, 2, 3)
CELL_DIM = 8


def atom_bit(atom):
    """Bit position (0-based) that stores the state of 1-based ``atom``."""
    return atom - 1


PERTURBATIONS = ("S", "omega")


@dataclass(frozen=True)
class CellParams:
    D12: float = 1.1
    D23: float = 0.946
    D13: float = 0.86
    V1: float = 0.3
    V2: float = 0.33
    V3: float = 0.24
    Delta1: float = 0.1
    Delta2: float = 0.11
    Delta3: float = 0.312
    A1: float = 0.0
    A2: float = 0.0
    A3: float = 0.0
    T: float = 250.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not np.isfinite(val) or isinstance(val, complex):
                raise ValueError(f"{f.name} must be a finite real number")
        if self.T <= 0:
            raise ValueError("segment duration T must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known - {"schema"}
        if extra:
            raise ValueError(f"unknown CellParams fields: {sorted(extra)}")
        return cls(**{k: float(v) for k, v in data.items() if k in known})

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_default_params():
    """Default cell parameters from the packaged ``default_cell.json``."""
    text = resources.files("nhcontrol.data").joinpath("default_cell.json").read_text()
    return CellParams.from_dict(json.loads(text))


@dataclass(frozen=True)
class CellOperators:
    H0: np.ndarray
    P_omega: np.ndarray
    P_S: np.ndarray

    def pattern(self, which):
        if which == "S":
            return self.P_S
        if which == "omega":
            return self.P_omega
        raise ValueError(f"unknown perturbation {which!r}")

    @property
    def generators(self):
        return [self.H0, self.P_omega, self.P_S]


def _bits(x):
    return [(x >> atom_bit(a)) & 1 for a in CELL_ATOMS]


def build_cell_operators(p):
    """Populate H0, P_omega, P_S for the cell described by ``p``.

    H0 carries the flip-flop couplings ``D_ij`` between states that trade one
    excitation between atoms i and j, plus summed detunings on the diagonal.
    P_omega flips a single atom with amplitude ``V_i``; P_S is diagonal with
    summed Stark shifts.
    """
    coupling = {(1, 2): p.D12, (2, 3): p.D23, (1, 3): p.D13}
    detuning = (p.A1, p.A2, p.A3)
    amp = (p.V1, p.V2, p.V3)
    shift = (p.Delta1, p.Delta2, p.Delta3)

    h0 = np.zeros((CELL_DIM, CELL_DIM))
    p_omega = np.zeros((CELL_DIM, CELL_DIM))
    p_s = np.zeros((CELL_DIM, CELL_DIM))
    for x in range(CELL_DIM):
        occ = _bits(x)
        h0[x, x] = sum(d for d, o in zip(detuning, occ) if o)
        p_s[x, x] = sum(s for s, o in zip(shift, occ) if o)
        for (i, j), d in coupling.items():
            if occ[i - 1] != occ[j - 1]:
                y = x ^ (1 << atom_bit(i)) ^ (1 << atom_bit(j))
                h0[x, y] = d
        for i in CELL_ATOMS:
            p_omega[x, x ^ (1 << atom_bit(i))] = amp[i - 1]
    return CellOperators(H0=h0.astype(complex), P_omega=p_omega.astype(complex), P_S=p_s.astype(complex))


def perturbation_for_segment(k):
    """Pattern id for 1-based segment ``k``: S on odd, omega on even."""
    return "S" if k % 2 == 1 else "omega"


def segment_propagator(ops, which, C, T):
    """``exp(-i (H0 + C P_which) T)``."""
    if not np.isfinite(C):
        raise ValueError("control strength must be finite")
    return expm_hermitian(ops.H0 + C * ops.pattern(which), T)
