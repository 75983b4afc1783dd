"""Numerical tolerances shared across the toolkit.

Units: energies in E_u, times in hbar/E_u, hbar = 1.
"""

from dataclasses import dataclass, asdict, replace


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    unitary: float = 1e-10
    # distance from the branch cut under which an eigenphase counts as -pi
    branch_cut: float = 1e-9
    degenerate_gap: float = 1e-8
    rank: float = 1e-8
    identity_objective: float = 1e-18
    identity_distance: float = 1e-6
    root_phase: float = 1e-7
    newton: float = 1e-10
    newton_max_iter: int = 50
    synthesis: float = 1e-8
    max_condition: float = 1e12

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)


DEFAULT_TOLERANCES = Tolerances()
