"""Lie-algebra closure of a generator set under commutation.

Generators are multiplied by ``i`` and treated as vectors in the real space of
skew-Hermitian N x N matrices (dimension N**2). The closure is grown breadth
first by commutator depth, with modified Gram-Schmidt (one re-orthogonalization
pass) deciding admission.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import StructureError, as_hermitian


@dataclass
class ClosureReport:
    dim_reached: int
    target_dim: int
    rank_tolerance: float
    generations_used: int
    basis: list = field(default_factory=list, repr=False)
    identity_reached: bool = True

    @property
    def verdict(self):
        if self.dim_reached == self.target_dim:
            return "completely controllable"
        if self.dim_reached == self.target_dim - 1 and not self.identity_reached:
            return "controllable up to global phase"
        return "not controllable"

    @property
    def controllable(self):
        return self.verdict != "not controllable"

    def to_dict(self, include_basis=False):
        out = {
            "schema": "closure_report/1",
            "dim_reached": self.dim_reached,
            "target_dim": self.target_dim,
            "rank_tolerance": self.rank_tolerance,
            "generations_used": self.generations_used,
            "verdict": self.verdict,
        }
        if include_basis:
            out["basis"] = [
                [[[z.real, z.imag] for z in row] for row in b] for b in self.basis
            ]
        return out


def _vec(x):
    return np.concatenate([x.real.ravel(), x.imag.ravel()])


def _unvec(v, n):
    half = n * n
    return (v[:half] + 1j * v[half:]).reshape(n, n)


class _Basis:
    def __init__(self, dim, width, tol):
        self.rows = np.zeros((dim, width))
        self.size = 0
        self.tol = tol

    def admit(self, x):
        v = _vec(x)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return False
        v = v / norm
        q = self.rows[: self.size]
        for _ in range(2):
            for row in q:
                v -= (row @ v) * row
        resid = np.linalg.norm(v)
        if resid <= self.tol:
            return False
        self.rows[self.size] = v / resid
        self.size += 1
        return True


def lie_closure(generators, rank_tol=1e-8, max_generations=None):
    """Grow the Lie algebra spanned by ``i * generators``.

    ``rank_tol`` applies to the residual of each normalized candidate after
    projection onto the accumulated basis.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    gens = [as_hermitian(g) for g in generators]
    if not gens:
        raise StructureError("at least one generator is required")
    n = gens[0].shape[0]
    if any(g.shape != (n, n) for g in gens):
        raise StructureError("generators have mismatched dimensions")
    target = n * n
    skew = [1j * g for g in gens]

    basis = _Basis(target, 2 * target, rank_tol)
    frontier = [x for x in skew if basis.admit(x)]
    generations = 0
    while frontier and basis.size < target:
        if max_generations is not None and generations >= max_generations:
            break
        fresh = []
        for x in frontier:
            for g in skew:
                c = x @ g - g @ x
                if basis.admit(c):
                    fresh.append(c)
                    if basis.size == target:
                        break
            if basis.size == target:
                break
        if fresh:
            generations += 1
        frontier = fresh

    mats = [_unvec(v, n) for v in basis.rows[: basis.size]]
    ident = _vec(1j * np.eye(n)) / np.sqrt(n)
    q = basis.rows[: basis.size]
    identity_reached = bool(np.linalg.norm(ident - q.T @ (q @ ident)) < 1e-6)
    return ClosureReport(
        dim_reached=basis.size,
        target_dim=target,
        rank_tolerance=rank_tol,
        generations_used=generations,
        basis=mats,
        identity_reached=identity_reached,
    )


def stacked_rank(matrices, rel_tol=1e-8):
    """Rank of a set of matrices by SVD of their stacked real vectorizations."""
    a = np.array([_vec(np.asarray(m, dtype=complex)) for m in matrices])
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.count_nonzero(s > rel_tol * s[0])) if s.size else 0
