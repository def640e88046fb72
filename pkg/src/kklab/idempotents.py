"""Idempotents, their associated projections, and path lifting for projections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DomainError, StepSizeError, ValidationError
from .matcore import (
    Matrix,
    adjoint,
    identity_like,
    inv_sqrt,
    inverse,
    op_norm,
    power,
    spectrum,
)

IDEMPOTENT_TOL = 1e-9
PROJECTION_TOL = 1e-8
LIFT_EPS = 0.05


def lift_constant(eps: float) -> float:
    """Left side of the admissibility inequality for the lifting subdivision."""
    a = 1 - (2 + eps) * eps
    return a ** -0.5 + (1 + eps) ** 2 * a ** -1.5


def idempotent_defect(p: Matrix) -> float:
    return op_norm(p @ p - p)


def projection_defect(p: Matrix) -> float:
    return max(idempotent_defect(p), op_norm(p - adjoint(p)))


@dataclass(frozen=True, eq=False)
class IdempotentWitness:
    p: Matrix
    r: Matrix
    z: Matrix
    u: Matrix
    u_inv: Matrix


def associated_projection(p: Matrix, tol: float = IDEMPOTENT_TOL) -> IdempotentWitness:
    """Projection ``r = p p* z^-1`` with the range of ``p``, plus a conjugator.

    ``z = 1 + (p - p*)(p* - p)``.  The conjugator is ``u = 1 + p - r``; it
    satisfies ``u p = p = r u`` and ``u^-1 = 1 - p + r``.
    """
    d = idempotent_defect(p)
    if d > tol:
        raise ValidationError(f"input is not idempotent (defect {d:.3g})")
    one = identity_like(p)
    ps = adjoint(p)
    z = one + (p - ps) @ (ps - p)
    try:
        zi = inverse(z)
    except DomainError as exc:
        raise ValidationError("z is singular: input was not idempotent") from exc
    r = p @ ps @ zi
    u = one + p - r
    u_inv = one - p + r
    return IdempotentWitness(p=p, r=r, z=z, u=u, u_inv=u_inv)


def idem_proj_path(p: Matrix, t: float, r: Matrix | None = None) -> Matrix:
    """Straight line ``(1 - t) p + t r`` from ``p`` to its associated projection."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]", value=t)
    if r is None:
        r = associated_projection(p).r
    return (1 - t) * p + t * r


@dataclass(frozen=True)
class UnitaryLift:
    ts: np.ndarray
    unitaries: List[Matrix]
    anchors: List[int]
    lipschitz: float
    conjugation_error: float
    unitarity_error: float


def grid_lipschitz(ts: Sequence[float], samples: Sequence[Matrix]) -> float:
    """Largest finite-difference slope ``||s_{j+1} - s_j|| / (t_{j+1} - t_j)``."""
    best = 0.0
    for j in range(len(samples) - 1):
        dt = ts[j + 1] - ts[j]
        if dt > 0:
            best = max(best, op_norm(samples[j + 1] - samples[j]) / dt)
    return best


def _polar_unitary(x: Matrix) -> Matrix:
    return x @ inv_sqrt(adjoint(x) @ x)


def unitary_path_lift(ts: Sequence[float], projections: Sequence[Matrix],
                      eps: float = LIFT_EPS, tol: float = PROJECTION_TOL) -> UnitaryLift:
    """Unitaries ``u_j`` with ``u_0 = 1`` and ``u_j p_0 u_j* = p_j``.

    The grid is split into runs on which every sample stays within ``eps`` of
    the run's first sample (the anchor).  Inside a run anchored at ``a``

        x_j = p_j p_a + (1 - p_j)(1 - p_a),   w_j = x_j (x_j* x_j)^{-1/2},

    and ``u_j = w_j u_a``.
    """
    ts = np.asarray(ts, dtype=float)
    if len(ts) != len(projections) or len(ts) == 0:
        raise ValueError("need one time per sample")
    for j, p in enumerate(projections):
        d = projection_defect(p)
        if d > tol:
            raise ValidationError(f"sample {j} is not a projection (defect {d:.3g})")
    one = identity_like(projections[0])
    us: List[Matrix] = [one]
    anchors = [0]
    a = 0
    for j in range(1, len(projections)):
        p = projections[j]
        if op_norm(p - projections[a]) >= eps:
            a = j - 1
            anchors.append(a)
        pa = projections[a]
        x = p @ pa + (one - p) @ (one - pa)
        gap = op_norm(x - one)
        if gap >= 1.0:
            raise StepSizeError(f"samples {a} and {j} too far apart: ||x - 1|| = {gap:.3g}")
        us.append(_polar_unitary(x) @ us[a])
    p0 = projections[0]
    conj = max(op_norm(u @ p0 @ adjoint(u) - p) for u, p in zip(us, projections))
    unit = max(op_norm(adjoint(u) @ u - one) for u in us)
    return UnitaryLift(ts=ts, unitaries=us, anchors=anchors, lipschitz=grid_lipschitz(ts, us),
                       conjugation_error=conj, unitarity_error=unit)


def polar_retract(u: Matrix, t: float) -> Matrix:
    """``u (u* u)^{-t}``; ``t = 1/2`` gives the unitary polar factor."""
    if not 0.0 <= t <= 0.5:
        raise DomainError(f"t={t} outside [0, 1/2]", value=t)
    try:
        inverse(u)
    except DomainError as exc:
        raise DomainError("polar_retract needs an invertible argument") from exc
    if t == 0.0:
        return u
    return u @ power(adjoint(u) @ u, -t)


@dataclass(frozen=True)
class SpectralDistanceReport:
    distance: float
    worst_eigenvalue_offset: float
    margin: float
    holds: bool


def spectral_distance_check(a: Matrix, b: Matrix, slack: float = 1e-8) -> SpectralDistanceReport:
    """Check that each eigenvalue of ``a`` lies within ``||a - b||`` of spectrum(``b``)."""
    nd = op_norm(b @ adjoint(b) - adjoint(b) @ b)
    if nd > 1e-8:
        raise ValidationError(f"b is not normal (defect {nd:.3g})")
    dist = op_norm(a - b)
    sa, sb = spectrum(a), spectrum(b)
    worst = float(np.max(np.min(np.abs(sa[:, None] - sb[None, :]), axis=1)))
    margin = dist - worst
    return SpectralDistanceReport(distance=dist, worst_eigenvalue_offset=worst, margin=margin,
                                  holds=margin >= -slack)
