"""Pure-numpy reference versions of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics; ``nhcontrol._kernels`` picks one at import time.
"""

import numpy as np


def charpoly(a):
    """Monic characteristic polynomial by the Faddeev-LeVerrier recurrence.

    Coefficients are returned highest degree first, ``coeffs[0] == 1``.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    eye = np.eye(n, dtype=complex)
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def chain_product(mats):
    """Ordered product ``mats[-1] @ ... @ mats[0]`` (first factor acts first)."""
    mats = np.asarray(mats, dtype=complex)
    out = np.eye(mats.shape[1], dtype=complex)
    for m in mats:
        out = m @ out
    return out


def apply_three_qubit(state, u, q2, q1, q0):
    """Apply an 8x8 ``u`` to bits ``(q2, q1, q0)`` of a state vector.

    ``q2`` is the most significant bit of the local 3-bit index.
    """
    state = np.asarray(state, dtype=complex)
    n = state.size.bit_length() - 1
    psi = state.reshape((2,) * n)
    # axis 0 of the reshaped tensor is the most significant register bit
    axes = [n - 1 - q2, n - 1 - q1, n - 1 - q0]
    psi = np.moveaxis(psi, axes, [0, 1, 2]).reshape(8, -1)
    out = (np.asarray(u, dtype=complex) @ psi).reshape((2,) * n)
    return np.moveaxis(out, [0, 1, 2], axes).reshape(-1).copy()


def swap_bits(state, a, b):
    """Exchange register bits ``a`` and ``b`` (0-based) of a state vector."""
    state = np.asarray(state, dtype=complex)
    idx = np.arange(state.size)
    ba = (idx >> a) & 1
    bb = (idx >> b) & 1
    diff = ba ^ bb
    src = idx ^ ((diff << a) | (diff << b))
    return state[src]
