"""Dense complex matrix kernel.

Exponentials and logarithms go through Hermitian eigendecomposition (or the
complex Schur form for unitaries), so structure is preserved exactly up to
rounding. hbar = 1 throughout: ``expm_hermitian(H, t) = exp(-i H t)``.
"""

import warnings

import numpy as np
from scipy.linalg import schur

from . import _kernels
from .config import DEFAULT_TOLERANCES


class StructureError(ValueError):
    """Input violates a structural precondition (shape, symmetry, index)."""


class DegenerateBranchWarning(RuntimeWarning):
    pass


def as_hermitian(h, tol=DEFAULT_TOLERANCES.hermitian):
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {h.shape}")
    defect = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if defect > tol:
        raise StructureError(f"matrix is not Hermitian (asymmetry {defect:.3e})")
    return h


def as_unitary(u, tol=DEFAULT_TOLERANCES.unitary):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {u.shape}")
    defect = unitarity_defect(u)
    if defect > tol:
        raise StructureError(f"matrix is not unitary (defect {defect:.3e})")
    return u


def unitarity_defect(u):
    u = np.asarray(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))


def expm_hermitian(h, t=1.0):
    """Return ``exp(-i h t)`` for Hermitian ``h``."""
    h = as_hermitian(h)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def expm_hermitian_batch(hs, t):
    """Vectorized ``expm_hermitian`` over a stack of Hermitian matrices.

    No symmetry check; callers build the stack from certified operators.
    """
    w, v = np.linalg.eigh(hs)
    return (v * np.exp(-1j * w * t)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def _phases(u, tol):
    """Schur-diagonalize a unitary; return eigen-angles theta with
    ``u = Z diag(exp(-i theta)) Z^dag`` and theta in (-pi, pi]."""
    tmat, z = schur(np.asarray(u, dtype=complex), output="complex")
    lam = np.diag(tmat)
    theta = -np.angle(lam)
    # -pi and +pi are the same eigenvalue -1; always take +pi
    theta = np.where(theta < -np.pi + tol, theta + 2 * np.pi, theta)
    return theta, z


def principal_log_unitary(u, tol=DEFAULT_TOLERANCES):
    """Hermitian ``L`` with spectrum in (-pi, pi] such that ``exp(-i L) = u``.

    Eigenvalue -1 maps to eigenphase +pi. A repeated -1 eigenvalue triggers
    :class:`DegenerateBranchWarning`; the returned ``L`` is still valid.
    """
    u = as_unitary(u, tol.unitary)
    theta, z = _phases(u, tol.branch_cut)
    on_cut = np.abs(theta - np.pi) < tol.branch_cut
    if np.count_nonzero(on_cut) > 1:
        warnings.warn(
            f"eigenvalue -1 has multiplicity {np.count_nonzero(on_cut)}; "
            "all copies mapped to eigenphase +pi",
            DegenerateBranchWarning,
            stacklevel=2,
        )
    theta = np.where(on_cut, np.pi, theta)
    log = (z * theta) @ z.conj().T
    return 0.5 * (log + log.conj().T)


def char_poly(u):
    """Monic characteristic polynomial coefficients, highest degree first.

    Uses the Faddeev-LeVerrier recurrence from the kernel backend.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {u.shape}")
    if u.shape[0] > 64:
        raise StructureError("char_poly supports dimension <= 64")
    return _kernels.charpoly(u)


def divided_difference_kernel(w, t):
    """Matrix ``K[a, b]`` of divided differences of ``f(x) = exp(-i x t)``.

    Written as ``-i t exp(-i t mean) sinc(t half_gap)``, which is exact off the
    diagonal and reduces to the derivative ``-i t exp(-i w t)`` on it, so no
    special-casing of near-degenerate pairs is needed.
    """
    mean = 0.5 * (w[..., :, None] + w[..., None, :])
    half_gap = 0.5 * (w[..., :, None] - w[..., None, :])
    return -1j * t * np.exp(-1j * t * mean) * np.sinc(t * half_gap / np.pi)


def dexpm_from_eig(w, v, p, t):
    pt = v.conj().T @ p @ v
    return v @ (pt * divided_difference_kernel(w, t)) @ v.conj().T


def dexpm_direction(h, p, t=1.0):
    """Directional derivative ``d/ds exp(-i (h + s p) t)`` at ``s = 0``."""
    h = as_hermitian(h)
    p = np.asarray(p, dtype=complex)
    if p.shape != h.shape:
        raise StructureError(f"shape mismatch {h.shape} vs {p.shape}")
    w, v = np.linalg.eigh(h)
    return dexpm_from_eig(w, v, p, t)


def phase_aligned_distance(u, v):
    """``min_phi ||u - exp(i phi) v||_F`` and the minimizing phase."""
    u = np.asarray(u)
    v = np.asarray(v)
    overlap = np.vdot(v, u)
    phi = float(np.angle(overlap)) if abs(overlap) > 0 else 0.0
    return float(np.linalg.norm(u - np.exp(1j * phi) * v)), phi


def skew_hermitian_basis(n):
    """Orthonormal basis of u(n) under ``<A, B> = Re tr(A^dag B)``.

    Ordered: ``i E_aa`` diagonal elements first, then the symmetric and
    antisymmetric off-diagonal pairs for ``a < b``.
    """
    basis = []
    for a in range(n):
        m = np.zeros((n, n), dtype=complex)
        m[a, a] = 1j
        basis.append(m)
    s = 1 / np.sqrt(2)
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[a, b], m[b, a] = s, -s
            basis.append(m)
            m = np.zeros((n, n), dtype=complex)
            m[a, b] = m[b, a] = 1j * s
            basis.append(m)
    return np.array(basis)


def traceless_skew_hermitian_basis(n):
    """Orthonormal basis of su(n): off-diagonal pairs plus Gell-Mann diagonals."""
    full = skew_hermitian_basis(n)
    basis = list(full[n:])
    for ell in range(1, n):
        d = np.zeros(n)
        d[:ell] = 1.0
        d[ell] = -ell
        basis.append(np.diag(1j * d / np.linalg.norm(d)))
    return np.array(basis)


def coordinates(x, basis):
    """Real coordinates of skew-Hermitian matrices (last two axes) in ``basis``."""
    return np.real(np.einsum("kab,...ab->...k", basis.conj(), x))
