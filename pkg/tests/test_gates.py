import math

import numpy as np
import pytest

from nhcontrol.gates import GateSpec, embed, gate_generator, gate_matrix, toffoli, toffoli_generator
from nhcontrol.linalg import StructureError, expm_hermitian, phase_aligned_distance

SPECS = [
    GateSpec.toffoli(),
    GateSpec.perm(1, 2),
    GateSpec.perm(2, 3),
    GateSpec.perm(1, 3),
    GateSpec.split(1),
    GateSpec.split(3),
    GateSpec.cond_phase(1, 2, math.pi / 32),
    GateSpec.cond_phase(3, 1, -0.4),
    GateSpec.cond_phase(2, 3, 0.0),
]


def test_toffoli_truth_table():
    u = toffoli()
    for x in range(8):
        x2, x1, x0 = (x >> 2) & 1, (x >> 1) & 1, x & 1
        y = (x2 << 2) | (x1 << 1) | (x0 ^ (x1 & x2))
        assert u[y, x] == 1


def test_toffoli_generator_block():
    h = toffoli_generator()
    block = np.zeros((8, 8))
    block[6:, 6:] = [[0.5, -0.5], [-0.5, 0.5]]
    assert np.array_equal(h, block)
    assert np.max(np.abs(h @ h - h)) < 1e-14
    assert gate_generator(GateSpec.toffoli())[1] == math.pi


def test_perm_semantics():
    u = gate_matrix(GateSpec.perm(1, 2))
    state = np.zeros(8)
    state[2] = 1.0  # |010>
    assert np.argmax(np.abs(u @ state)) == 1


def test_split_involutory():
    a = gate_matrix(GateSpec.split(1))
    assert np.allclose(a @ a, np.eye(8), atol=1e-15)
    # qubit 1 is bit 0: |000> -> (|000> + |001>)/sqrt2
    assert np.allclose(a[:, 0], np.eye(8)[0] / math.sqrt(2) + np.eye(8)[1] / math.sqrt(2))


def test_cond_phase_zero_is_identity():
    assert np.allclose(gate_matrix(GateSpec.cond_phase(1, 2, 0.0)), np.eye(8))
    h, eps = gate_generator(GateSpec.cond_phase(1, 2, 0.0))
    assert eps == 0 and not np.any(h)


def test_cond_phase_on_11():
    phi = 0.3
    u = gate_matrix(GateSpec.cond_phase(1, 3, phi))
    expected = np.ones(8, dtype=complex)
    expected[[5, 7]] = np.exp(1j * phi)
    assert np.allclose(u, np.diag(expected))
    h, eps = gate_generator(GateSpec.cond_phase(1, 3, phi))
    # rank one on the pair: -|11><11| tensored with identity on qubit 2
    assert np.allclose(h, -np.diag([0, 0, 0, 0, 0, 1, 0, 1])) and eps == phi


def test_cond_phase_inverse():
    b = gate_matrix(GateSpec.cond_phase(2, 1, 0.9))
    assert np.allclose(b @ gate_matrix(GateSpec.cond_phase(2, 1, -0.9)), np.eye(8))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: str(s.to_dict()))
def test_generator_reproduces_gate(spec):
    h, eps = gate_generator(spec)
    u = gate_matrix(spec)
    assert np.allclose(h, h.conj().T)
    assert phase_aligned_distance(expm_hermitian(h, eps), u)[0] < 1e-12
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-14)


def test_split_closed_form_exponent():
    # exp(-i pi / sqrt8 * M) equals the Hadamard on one qubit exactly
    m = np.array([[1 - math.sqrt(2), 1], [1, -1 - math.sqrt(2)]])
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    assert np.linalg.norm(expm_hermitian(m / math.sqrt(8), math.pi) - had) < 1e-14


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_spec_json_round_trip(spec):
    assert GateSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("bad", [lambda: GateSpec.perm(1, 1), lambda: GateSpec.split(4), lambda: GateSpec.cond_phase(0, 2, 1.0)])
def test_invalid_indices(bad):
    with pytest.raises(StructureError):
        bad()


def test_embed_ordering():
    x = np.array([[0, 1], [1, 0]])
    assert np.allclose(embed(x, (3,)), np.kron(x, np.eye(4)))
    assert np.allclose(embed(x, (1,)), np.kron(np.eye(4), x))
