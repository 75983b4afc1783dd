"""Piecewise-constant control synthesis for a single cell.

A control sequence is 64 segments of duration ``T``; segment ``k`` (1-based)
evolves under ``H0 + C_k P_S`` for odd ``k`` and ``H0 + C_k P_omega`` for even
``k``. Segment 1 acts first, so the total evolution is the ordered product
``U_64 ... U_2 U_1`` raised to the repetition count ``m``.

The pipeline is:

1. ``find_identity_sequence``: 8 positive strengths whose 8-segment evolution
   has the eight 8th roots of unity as eigenvalues, tiled 8 times so that the
   64-segment product is the identity.
2. ``control_jacobian`` / ``solve_delta``: first-order strength variations
   realizing a small generator.
3. ``newton_refine``: iterate the linear solve with the exact residual
   generator until the target is hit.
4. ``effect_unitary``: split a large target into ``m`` equal steps and follow
   the path ``exp(-i s L / m)``, ``s`` in (0, 1], with Newton corrections.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import logging
import math
import warnings

import numpy as np
from scipy.optimize import least_squares, minimize

from . import _kernels
from .config import DEFAULT_TOLERANCES
from .hamiltonians import CELL_DIM, CellParams, perturbation_for_segment
from .linalg import (
    DegenerateBranchWarning,
    StructureError,
    char_poly,
    coordinates,
    divided_difference_kernel,
    expm_hermitian_batch,
    phase_aligned_distance,
    principal_log_unitary,
    skew_hermitian_basis,
    traceless_skew_hermitian_basis,
)

log = logging.getLogger(__name__)

N_SEGMENTS = CELL_DIM**2
ROOT_ORDER = 8
DEFAULT_T = CellParams().T
REPETITIONS = (1, 2, 4, 8, 16)

_U_BASIS = skew_hermitian_basis(CELL_DIM)
_SU_BASIS = traceless_skew_hermitian_basis(CELL_DIM)
# lambda^8 - 1
_ROOT_POLY = np.zeros(ROOT_ORDER + 1, dtype=complex)
_ROOT_POLY[0], _ROOT_POLY[-1] = 1.0, -1.0


class SynthesisError(RuntimeError):
    """Base class for synthesis failures; ``diagnostics`` carries details."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoConvergenceError(SynthesisError):
    pass


class IllConditionedError(SynthesisError):
    pass


class NewtonError(SynthesisError):
    pass


class SequenceWarning(UserWarning):
    pass


@dataclass
class ControlSequence:
    """64 segment strengths with duration ``T`` and repetition count ``m``.

    ``delta`` holds the variation from the base (identity) sequence when the
    sequence was produced by refinement; ``verification`` collects post-hoc
    checks; ``trace`` is the Newton convergence history.
    """

    strengths: np.ndarray
    T: float = DEFAULT_T
    m: int = 1
    delta: np.ndarray = None
    verification: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.strengths = np.asarray(self.strengths, dtype=float).copy()
        if self.strengths.shape != (N_SEGMENTS,):
            raise StructureError(
                f"a control sequence has exactly {N_SEGMENTS} segments, got {self.strengths.shape}"
            )
        if not np.all(np.isfinite(self.strengths)):
            raise StructureError("control strengths must be finite")
        if self.m < 1:
            raise StructureError("repetition count m must be positive")
        if self.T <= 0:
            raise StructureError("segment duration must be positive")
        if self.delta is None:
            self.delta = np.zeros(N_SEGMENTS)
        self.delta = np.asarray(self.delta, dtype=float).copy()
        if np.any(self.strengths <= 0):
            msg = "some control strengths are not positive"
            if msg not in self.notes:
                self.notes.append(msg)

    @property
    def segments(self):
        return [
            {"k": k, "perturbation": perturbation_for_segment(k), "C": float(c)}
            for k, c in enumerate(self.strengths, start=1)
        ]

    @property
    def intervals(self):
        return N_SEGMENTS * self.m

    def to_dict(self):
        out = {
            "schema": "control_sequence/1",
            "T": float(self.T),
            "m": int(self.m),
            "segments": self.segments,
        }
        if np.any(self.delta):
            out["delta_C"] = [float(d) for d in self.delta]
        if self.verification:
            out["verification"] = _jsonable(self.verification)
        if self.notes:
            out["warnings"] = list(self.notes)
        return out

    @classmethod
    def from_dict(cls, d):
        segs = sorted(d["segments"], key=lambda s: s["k"])
        if [s["k"] for s in segs] != list(range(1, N_SEGMENTS + 1)):
            raise StructureError("segments must be numbered 1..64")
        for s in segs:
            if s.get("perturbation", perturbation_for_segment(s["k"])) != perturbation_for_segment(s["k"]):
                raise StructureError(f"segment {s['k']} has the wrong perturbation id")
        return cls(
            strengths=[s["C"] for s in segs],
            T=float(d["T"]),
            m=int(d.get("m", 1)),
            delta=d.get("delta_C"),
            verification=dict(d.get("verification", {})),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "perturbation", "C_k", "delta_C_k"])
        for seg, d in zip(self.segments, self.delta):
            w.writerow([seg["k"], seg["perturbation"], repr(seg["C"]), repr(float(d))])
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _patterns(ops, n):
    """Stack of patterns for segments 1..n (S, omega, S, ...)."""
    pair = np.array([ops.P_S, ops.P_omega])
    return pair[np.arange(n) % 2]


def _segment_eig(ops, strengths):
    strengths = np.asarray(strengths, dtype=float)
    pats = _patterns(ops, strengths.size)
    hs = ops.H0[None] + strengths[:, None, None] * pats
    w, v = np.linalg.eigh(hs)
    return w, v, pats


def _segment_unitaries(w, v, T):
    return (v * np.exp(-1j * w * T)[:, None, :]) @ np.swapaxes(v.conj(), -1, -2)


def evolution(ops, strengths, T=DEFAULT_T):
    """Ordered product of segment propagators for an arbitrary-length strength list."""
    strengths = np.asarray(strengths, dtype=float)
    if strengths.size == 0:
        return np.eye(CELL_DIM, dtype=complex)
    pats = _patterns(ops, strengths.size)
    us = expm_hermitian_batch(ops.H0[None] + strengths[:, None, None] * pats, T)
    return _kernels.chain_product(us)


def total_evolution(ops, seq):
    """``U(64 T)`` of ``seq`` raised to the power ``seq.m``."""
    u = evolution(ops, seq.strengths, seq.T)
    return np.linalg.matrix_power(u, seq.m) if seq.m > 1 else u


# -- identity root ---------------------------------------------------------


def _root_residual(ops, c8, T):
    d = char_poly(evolution(ops, c8, T)) - _ROOT_POLY
    return np.concatenate([d.real[1:], d.imag[1:]])


def identity_objective(ops, C8, T=DEFAULT_T):
    """Squared distance of the characteristic polynomial of ``U(8T)`` from ``lambda^8 - 1``.

    Zero exactly when the eigenvalues of ``U(8T)`` are the eight distinct 8th
    roots of unity.
    """
    c8 = np.asarray(C8, dtype=float)
    if c8.shape != (ROOT_ORDER,):
        raise StructureError(f"expected {ROOT_ORDER} strengths, got shape {c8.shape}")
    r = _root_residual(ops, c8, T)
    return float(r @ r)


def root_phase_errors(u8):
    """Per-eigenvalue phase distance to the matched 8th root of unity.

    Returns ``(errors, distinct)``; ``distinct`` is True when every root is
    matched by exactly one eigenvalue.
    """
    ang = np.mod(np.angle(np.linalg.eigvals(u8)), 2 * np.pi)
    step = 2 * np.pi / ROOT_ORDER
    idx = np.rint(ang / step).astype(int) % ROOT_ORDER
    err = np.abs(np.angle(np.exp(1j * (ang - idx * step))))
    return err, len(set(idx.tolist())) == ROOT_ORDER


def _verify_identity(ops, c8, T, tol):
    u8 = evolution(ops, c8, T)
    u64 = np.linalg.matrix_power(u8, ROOT_ORDER)
    err, distinct = root_phase_errors(u8)
    dist = float(np.linalg.norm(u64 - np.eye(CELL_DIM)))
    return {
        "objective": identity_objective(ops, c8, T),
        "identity_distance": dist,
        "max_root_phase_error": float(err.max()),
        "roots_distinct": bool(distinct),
        "ok": bool(
            distinct
            and err.max() < tol.root_phase
            and dist < tol.identity_distance
            and np.all(c8 > 0)
        ),
    }


def find_identity_sequence(
    ops,
    seed=0,
    T=DEFAULT_T,
    max_restarts=200,
    start_box=(0.2, 3.0),
    tol=DEFAULT_TOLERANCES,
):
    """Search 8 positive strengths making ``U(8T)`` a nondegenerate 8th root of identity.

    Each restart runs Nelder-Mead from a uniform random start in ``start_box``;
    near-converged points are polished by a finite-difference Levenberg-Marquardt
    pass on the coefficient residuals. Restarts are sequential, so the result
    is a deterministic function of ``seed``.
    """
    rng = np.random.default_rng(seed)
    best = (math.inf, None)
    for trial in range(max_restarts):
        x0 = rng.uniform(*start_box, size=ROOT_ORDER)
        res = minimize(
            lambda c: identity_objective(ops, c, T),
            x0,
            method="Nelder-Mead",
            options={"maxfev": 4000, "xatol": 1e-13, "fatol": 1e-26},
        )
        x, fx = res.x, float(res.fun)
        if tol.identity_objective <= fx < 1e-6:
            lm = least_squares(
                lambda c: _root_residual(ops, c, T),
                x,
                method="lm",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
            )
            fl = identity_objective(ops, lm.x, T)
            if fl < fx:
                x, fx = lm.x, fl
        if fx < best[0]:
            best = (fx, x)
        if fx >= tol.identity_objective or np.any(x <= 0):
            continue
        check = _verify_identity(ops, x, T, tol)
        if not check["ok"]:
            continue
        log.info("identity root found at restart %d (objective %.3e)", trial, fx)
        check.update(seed=seed, restart=trial)
        return ControlSequence(np.tile(x, ROOT_ORDER), T=T, m=1, verification=check)
    raise NoConvergenceError(
        f"no identity root within {max_restarts} restarts",
        best_objective=best[0],
        best_strengths=None if best[1] is None else best[1].tolist(),
    )


# -- linearized control ----------------------------------------------------


def _jacobian(ops, strengths, T):
    """Segment derivatives ``dU/dC_k`` and the product ``U`` itself."""
    w, v, pats = _segment_eig(ops, strengths)
    us = _segment_unitaries(w, v, T)
    n = us.shape[0]
    eye = np.eye(CELL_DIM, dtype=complex)
    prefix = np.empty((n + 1, CELL_DIM, CELL_DIM), dtype=complex)
    suffix = np.empty_like(prefix)
    prefix[0] = suffix[n] = eye
    for k in range(n):
        prefix[k + 1] = us[k] @ prefix[k]
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] @ us[k]
    vh = np.swapaxes(v.conj(), -1, -2)
    kern = divided_difference_kernel(w, T)
    local = v @ ((vh @ pats @ v) * kern) @ vh
    jac = suffix[1:] @ local @ prefix[:-1]
    return jac, prefix[n]


def control_jacobian(ops, seq):
    """``J_k = dU(64T)/dC_k`` for the single 64-segment factor of ``seq``."""
    return _jacobian(ops, seq.strengths, seq.T)[0]


def _linear_system(jac, u, phase_free):
    basis = _SU_BASIS if phase_free else _U_BASIS
    x = jac if u is None else jac @ u.conj().T
    return coordinates(x, basis).T, basis


def solve_delta(J, H_cal, epsilon, U=None, phase_free=False, tol=DEFAULT_TOLERANCES):
    """Least-squares strength variations with ``sum_k J_k dC_k = -i H_cal epsilon``.

    Both sides are expanded in an orthonormal basis of u(8) (64 real
    coordinates). When the current evolution ``U`` is supplied the derivatives
    are right-trivialized (``J_k U^dag``) so the system is posed in the tangent
    space at ``U``. ``phase_free`` drops the identity direction (63 equations),
    solving up to a global phase.

    Returns ``(delta_C, condition_number)``.
    """
    jac = np.asarray(J, dtype=complex)
    a, basis = _linear_system(jac, U, phase_free)
    b = coordinates(-1j * np.asarray(H_cal, dtype=complex) * epsilon, basis)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > tol.max_condition:
        raise IllConditionedError(f"control system condition number {cond:.3e}", condition=cond)
    delta, *_ = np.linalg.lstsq(a, b, rcond=None)
    return delta, cond


def _distance(u, target, phase_free):
    if phase_free:
        return phase_aligned_distance(u, target)
    return float(np.linalg.norm(u - target)), 0.0


def _newton(ops, strengths, T, target, tol, max_iter, phase_free, tols):
    """Damped Newton iteration; returns ``(strengths, distance, phase, trace, ok)``."""
    c = np.asarray(strengths, dtype=float).copy()
    u = evolution(ops, c, T)
    dist, phase = _distance(u, target, phase_free)
    trace = [dist]
    for _ in range(max_iter):
        if dist < tol:
            return c, dist, phase, trace, True
        jac, u = _jacobian(ops, c, T)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBranchWarning)
            resid = principal_log_unitary(target @ u.conj().T, tols)
        try:
            step, _ = solve_delta(jac, resid, 1.0, U=u, phase_free=phase_free, tol=tols)
        except IllConditionedError:
            break
        lam = 1.0
        while lam > 1e-4:
            trial = c + lam * step
            d_trial, p_trial = _distance(evolution(ops, trial, T), target, phase_free)
            if d_trial < dist:
                break
            lam *= 0.5
        else:
            break
        c, dist, phase = trial, d_trial, p_trial
        trace.append(dist)
    return c, dist, phase, trace, dist < tol


def newton_refine(
    ops,
    base_seq,
    delta0,
    U_target,
    tol=DEFAULT_TOLERANCES.newton,
    phase_free=True,
    max_iter=DEFAULT_TOLERANCES.newton_max_iter,
    tols=DEFAULT_TOLERANCES,
):
    """Refine ``base + delta0`` until ``U(64T)`` is within ``tol`` of ``U_target``.

    Each iteration linearizes at the current strengths and solves for the
    residual generator ``L = log(U_target U^dag)``; the step is halved until
    the distance decreases. With ``phase_free`` the distance is the
    phase-aligned one and the residual phase is reported.
    """
    start = base_seq.strengths + np.asarray(delta0, dtype=float)
    c, dist, phase, trace, ok = _newton(
        ops, start, base_seq.T, np.asarray(U_target, dtype=complex), tol, max_iter, phase_free, tols
    )
    if not ok:
        raise NewtonError(
            f"Newton refinement stopped at distance {dist:.3e}", best_distance=dist, trace=trace
        )
    seq = ControlSequence(
        c,
        T=base_seq.T,
        m=1,
        delta=c - base_seq.strengths,
        verification={"step_distance": dist, "residual_phase": phase, "iterations": len(trace) - 1},
        trace=trace,
    )
    return seq


def _expm_at(gen, s):
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(-1j * w * s)) @ v.conj().T


# detour amplitudes tried after the straight path, relative to ||L / m||
DETOUR_AMPLITUDES = (0.5, 1.0, 0.25, 0.75, 1.5)


def step_path(step_log, detour=None):
    """Target path ``s -> exp(-i s L) exp(-i sin(pi s) K)`` from identity to ``exp(-i L)``.

    ``K = 0`` gives the straight one-parameter path; a nonzero ``K`` bends the
    path away from control-space folds while keeping both endpoints fixed.
    """
    if detour is None:
        return lambda s: _expm_at(step_log, s)
    return lambda s: _expm_at(step_log, s) @ _expm_at(detour, math.sin(math.pi * s))


def _follow_path(ops, base, T, path, tols, max_solves=300):
    """Track solutions of ``U(C) = path(s)`` from ``s = 0`` to ``1`` (up to phase)."""
    c = base.copy()
    s, h = 0.0, 0.125
    solves = 0
    while s < 1.0:
        if solves >= max_solves:
            return None, {"stalled_at": s, "solves": solves}
        s_next = min(1.0, s + h)
        final = s_next == 1.0
        c_new, dist, phase, trace, ok = _newton(
            ops,
            c,
            T,
            path(s_next),
            tols.newton if final else 1e-6,
            tols.newton_max_iter if final else 8,
            True,
            tols,
        )
        solves += 1
        if ok:
            c, s = c_new, s_next
            if len(trace) <= 4:
                h = min(2 * h, 0.5)
        else:
            h *= 0.5
            if h < 1e-4:
                return None, {"stalled_at": s, "solves": solves, "distance": dist}
    return c, {"solves": solves, "step_distance": dist, "step_phase": phase}


def _detours(step_log, seed):
    rng = np.random.default_rng(seed)
    scale = np.linalg.norm(step_log, 2)
    yield 0.0, None
    for amp in DETOUR_AMPLITUDES:
        k = rng.normal(size=(CELL_DIM, CELL_DIM)) + 1j * rng.normal(size=(CELL_DIM, CELL_DIM))
        k = k + k.conj().T
        yield amp, k * (amp * scale / np.linalg.norm(k, 2))


def effect_unitary(ops, base_seq, U_target, repetitions=REPETITIONS, tol=DEFAULT_TOLERANCES, seed=1234):
    """Synthesize ``U_target`` (8x8) as ``m`` repetitions of a 64-segment step.

    For each ``m`` in order the step target ``exp(-i L / m)``, with
    ``L = log(U_target)``, is reached by following a path from the identity
    with damped Newton corrections: the straight path first, then a few
    randomly bent paths (seeded, so the result is deterministic). The first
    ``m`` whose ``m``-th power lands within ``tol.synthesis`` (phase-aligned
    Frobenius) of the target is returned.
    """
    target = np.asarray(U_target, dtype=complex)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateBranchWarning)
        gen = principal_log_unitary(target, tol)
    degenerate = any(issubclass(w.category, DegenerateBranchWarning) for w in caught)
    eps = float(np.linalg.norm(gen, 2))
    if eps < 1e-14:
        u_base = total_evolution(ops, base_seq)
        dist, phase = phase_aligned_distance(u_base, target)
        return ControlSequence(
            base_seq.strengths,
            T=base_seq.T,
            m=1,
            verification={"distance": dist, "global_phase": phase, "m": 1, "epsilon": eps},
        )
    candidates = list(repetitions)
    if degenerate:
        # eps sits on the branch cut: halve it by starting at m = 2
        candidates = [m for m in candidates if m >= 2] or [2 * max(repetitions)]
    diagnostics = {}
    for m in candidates:
        attempts = []
        for amp, detour in _detours(gen / m, seed):
            c, info = _follow_path(ops, base_seq.strengths, base_seq.T, step_path(gen / m, detour), tol)
            if c is None:
                attempts.append({"detour": amp, **info})
                continue
            full = np.linalg.matrix_power(evolution(ops, c, base_seq.T), m)
            dist, phase = phase_aligned_distance(full, target)
            info.update(distance=dist, global_phase=phase, m=m, epsilon=eps, detour=amp)
            if dist < tol.synthesis:
                seq = ControlSequence(c, T=base_seq.T, m=m, delta=c - base_seq.strengths, verification=info)
                if seq.notes:
                    warnings.warn(seq.notes[0], SequenceWarning, stacklevel=2)
                return seq
            attempts.append(info)
        diagnostics[m] = attempts
        log.info("m=%d failed after %d paths", m, len(attempts))
    raise SynthesisError("no repetition count reached the target", per_m=diagnostics)
