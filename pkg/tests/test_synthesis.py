import math

import numpy as np
import pytest

from nhcontrol.gates import GateSpec, gate_matrix
from nhcontrol.linalg import StructureError, expm_hermitian, phase_aligned_distance
from nhcontrol.synthesis import (
    ControlSequence,
    IllConditionedError,
    NewtonError,
    NoConvergenceError,
    control_jacobian,
    effect_unitary,
    evolution,
    find_identity_sequence,
    identity_objective,
    newton_refine,
    solve_delta,
    total_evolution,
)


def dense_evolution(ops, strengths, T):
    """Independent product of segment exponentials, first segment acting first."""
    u = np.eye(8, dtype=complex)
    for k, c in enumerate(strengths, start=1):
        p = ops.P_S if k % 2 else ops.P_omega
        u = expm_hermitian(ops.H0 + c * p, T) @ u
    return u


def test_evolution_matches_dense_product(ops, rng):
    c = rng.uniform(0.5, 2.0, size=10)
    assert np.linalg.norm(evolution(ops, c, 250.0) - dense_evolution(ops, c, 250.0)) < 1e-10


def test_identity_objective_oracle(ops, rng):
    c8 = rng.uniform(0.2, 3.0, size=8)
    lam = np.linalg.eigvals(dense_evolution(ops, c8, 250.0))
    target = np.zeros(9)
    target[0], target[-1] = 1, -1
    ref = float(np.sum(np.abs(np.poly(lam) - target) ** 2))
    assert identity_objective(ops, c8) == pytest.approx(ref, rel=1e-8)


def test_identity_objective_shape(ops):
    with pytest.raises(StructureError):
        identity_objective(ops, np.ones(7))


def test_identity_sequence_properties(ops, base_seq):
    c = np.asarray(base_seq.strengths)
    assert c.shape == (64,) and np.all(c > 0)
    assert np.allclose(c, np.tile(c[:8], 8))
    assert np.linalg.norm(dense_evolution(ops, c, 250.0) - np.eye(8)) < 1e-6
    lam = np.linalg.eigvals(dense_evolution(ops, c[:8], 250.0))
    # eigenvalues are the 8 distinct 8th roots of unity
    assert np.max(np.abs(lam**8 - 1)) < 1e-6
    k = np.rint(np.angle(lam) / (np.pi / 4)).astype(int) % 8
    assert sorted(k) == list(range(8))


def test_identity_search_deterministic(ops, base_seq):
    again = find_identity_sequence(ops, seed=0)
    assert np.array_equal(again.strengths, base_seq.strengths)


def test_identity_search_exhausts_restarts(ops):
    with pytest.raises(NoConvergenceError) as info:
        find_identity_sequence(ops, seed=0, max_restarts=1)
    assert "best_objective" in info.value.diagnostics


def test_jacobian_finite_difference(ops, rng):
    c = rng.uniform(0.5, 2.0, size=64)
    seq = ControlSequence(c, T=250.0)
    jac = control_jacobian(ops, seq)
    h = 1e-6
    for k in rng.choice(64, size=6, replace=False):
        e = np.zeros(64)
        e[k] = h
        fd = (dense_evolution(ops, c + e, 250.0) - dense_evolution(ops, c - e, 250.0)) / (2 * h)
        assert np.linalg.norm(fd - jac[k]) / np.linalg.norm(jac[k]) < 1e-6


def test_solve_delta_recovers_known_variation(ops, base_seq, rng):
    jac = control_jacobian(ops, base_seq)
    u = total_evolution(ops, base_seq)
    d0 = rng.normal(size=64) * 1e-3
    x = np.einsum("k,kab->ab", d0, jac) @ u.conj().T
    h = 1j * x  # -i H = x
    delta, cond = solve_delta(jac, h, 1.0, U=u)
    assert cond < 1e6
    assert np.allclose(delta, d0, atol=1e-9)


def test_solve_delta_ill_conditioned():
    with pytest.raises(IllConditionedError):
        solve_delta(np.zeros((64, 8, 8)), np.eye(8), 1.0)


def test_newton_reaches_nearby_target(ops, base_seq, rng):
    d = rng.normal(size=64) * 2e-4
    target = dense_evolution(ops, base_seq.strengths + d, 250.0)
    seq = newton_refine(ops, base_seq, np.zeros(64), target, phase_free=False)
    assert np.linalg.norm(evolution(ops, seq.strengths, 250.0) - target) < 1e-10


def test_newton_failure_reports(ops, base_seq):
    with pytest.raises(NewtonError) as info:
        newton_refine(ops, base_seq, np.zeros(64), gate_matrix(GateSpec.toffoli()), max_iter=1)
    assert info.value.diagnostics["trace"]


def test_effect_identity_target(ops, base_seq):
    seq = effect_unitary(ops, base_seq, np.eye(8))
    assert seq.m == 1
    assert np.array_equal(seq.strengths, base_seq.strengths)


@pytest.mark.parametrize(
    "spec",
    [GateSpec.cond_phase(1, 2, math.pi / 32), GateSpec.perm(2, 3)],
    ids=["condphase", "perm23"],
)
def test_effect_unitary_small_gates(ops, base_seq, spec):
    target = gate_matrix(spec)
    seq = effect_unitary(ops, base_seq, target)
    u = np.linalg.matrix_power(dense_evolution(ops, seq.strengths, 250.0), seq.m)
    assert phase_aligned_distance(u, target)[0] < 1e-8
    assert seq.m <= 16
    assert seq.verification["distance"] < 1e-8


def test_sequence_serialization(base_seq, tmp_path):
    seq = ControlSequence(base_seq.strengths + 0.01, T=250.0, m=4, delta=np.full(64, 0.01))
    d = seq.to_dict()
    assert d["schema"] == "control_sequence/1"
    assert [s["perturbation"] for s in d["segments"][:2]] == ["S", "omega"]
    back = ControlSequence.from_dict(d)
    assert np.array_equal(back.strengths, seq.strengths) and back.m == 4
    rows = seq.to_csv().strip().splitlines()
    assert rows[0] == "k,perturbation,C_k,delta_C_k" and len(rows) == 65


def test_negative_strength_warns():
    seq = ControlSequence(np.r_[-0.1, np.ones(63)], T=250.0)
    assert seq.notes


def test_sequence_rejects_bad_segments(base_seq):
    d = base_seq.to_dict()
    d["segments"] = d["segments"][:-1]
    with pytest.raises(StructureError):
        ControlSequence.from_dict(d)
