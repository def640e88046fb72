"""Averaging maps ``p -> sum t_i a_i p a_i*`` corrected by a neutral projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cycles import ControlData, EvenCycle, HomotopyCertificate, certified_path
from .errors import GapError, MatrixError, ValidationError
from .matcore import AugMatrix, comm_norm, op_norm, riesz_half, spectrum

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AveragingData:
    a: Tuple[AugMatrix, ...]
    t: Tuple[float, ...]
    defect: float

    def __post_init__(self):
        if len(self.a) != len(self.t) or not self.a:
            raise ValueError("need one weight per contraction")
        if abs(sum(self.t) - 1.0) > SUM_TOL or min(self.t) < 0 or max(self.t) > 1:
            raise ValueError("weights must lie in [0, 1] and sum to 1")
        worst = max(op_norm(x) for x in self.a)
        if worst > 1 + 1e-12:
            raise ValueError(f"averaging elements must be contractions (norm {worst:.6g})")


def averaging_data(a: Sequence[AugMatrix], t: Sequence[float]) -> AveragingData:
    a = tuple(a)
    one = AugMatrix.identity(a[0].n, a[0].N)
    acc = one - sum((ti * (x @ x.H) for ti, x in zip(t, a)), AugMatrix.zeros(a[0].n, a[0].N))
    return AveragingData(a, tuple(float(x) for x in t), op_norm(acc))


def clock_shift(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Shift ``X e_j = e_{j+1}`` and clock ``Z e_j = w^j e_j`` with ``w = exp(2 pi i / m)``."""
    X = np.roll(np.eye(m), 1, axis=0).astype(np.complex128)
    Z = np.diag(np.exp(2j * np.pi * np.arange(m) / m))
    return X, Z


def weyl_data(m: int, d: int = 1, N: int = 1) -> AveragingData:
    """The ``m^2`` unitaries ``X^a Z^b (x) 1_d`` with equal weights ``1/m^2``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    X, Z = clock_shift(m)
    us = []
    for a in range(m):
        for b in range(m):
            w = np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b)
            us.append(AugMatrix.from_scalar(np.kron(w, np.eye(d)), N))
    return AveragingData(tuple(us), tuple([1.0 / m ** 2] * m ** 2), 0.0)


def neutral_projection(n: int, l: int, N: int) -> AugMatrix:
    """Default ``e = 1_l + 0``."""
    return AugMatrix.from_scalar(np.diag(np.r_[np.ones(l), np.zeros(n - l)]), N)


def _average(b: AugMatrix, data: AveragingData) -> AugMatrix:
    acc = AugMatrix.zeros(b.n, b.N)
    for ti, x in zip(data.t, data.a):
        acc = acc + ti * (x @ b @ x.H)
    return acc


def alpha_bound(p: AugMatrix, data: AveragingData, e: AugMatrix) -> float:
    """Three-term bound on ``||p - alpha(p)||``."""
    tail = sum(ti * op_norm(x) * comm_norm(p, x.H) for ti, x in zip(data.t, data.a))
    return data.defect * (op_norm(p) + op_norm(e)) + tail


def alpha_map(p: AugMatrix, data: AveragingData, e: AugMatrix,
              comm_tol: float = 1e-10) -> AugMatrix:
    """``alpha(p) = sum t_i a_i p a_i* + (e - sum t_i a_i e a_i*)``."""
    if p.n != data.a[0].n or p.N != data.a[0].N or e.n != p.n or e.N != p.N:
        raise MatrixError("shape mismatch between p, e and the averaging data")
    worst = max(comm_norm(e, x) for x in data.a)
    if worst > comm_tol:
        raise ValidationError(f"e does not commute with the averaging data ({worst:.3g})")
    out = _average(p, data) + (e - _average(e, data))
    dist = op_norm(p - out)
    bound = alpha_bound(p, data, e)
    if dist > bound + 1e-10:
        raise ValidationError(f"||p - alpha(p)|| = {dist:.6g} exceeds its bound {bound:.6g}")
    return out


@dataclass(frozen=True, eq=False)
class CompressReport:
    alpha: AugMatrix
    distance: float
    distance_bound: float
    spectral_gap: float
    comm: Tuple[float, ...]
    comm_bound: Tuple[float, ...]
    scalar_error: Optional[float]
    path: Tuple[AugMatrix, ...]
    path_ts: Tuple[float, ...]
    certificate: Optional[HomotopyCertificate] = None


def compress_commutators(p: AugMatrix, data: AveragingData, e: AugMatrix,
                         Y: Sequence[AugMatrix] = (), samples: int = 17,
                         ctrl: Optional[ControlData] = None) -> Tuple[AugMatrix, CompressReport]:
    """``phi(p) = chi(alpha(p))`` and the path ``chi((1 - t) p + t alpha(p))``.

    ``comm_bound[j]`` is twice ``||[alpha(p), y_j]||``: the spectrum of
    ``alpha(p)`` avoids ``(1/4, 3/4)``.  When ``ctrl`` is given the path of
    pairs ``(chi(p_t), e)`` is certified at it.
    """
    al = alpha_map(p, data, e)
    dist = op_norm(p - al)
    if dist >= 0.25:
        raise GapError(f"||p - alpha(p)|| = {dist:.3g} is not below 1/4", distance=dist)
    sp = spectrum(al)
    gap = float(np.min(np.abs(sp.real - 0.5)))
    phi = riesz_half(al)
    comm = tuple(comm_norm(phi, y) for y in Y)
    bound = tuple(2 * comm_norm(al, y) for y in Y)
    scal = None
    if np.max(np.abs(p.scalar - e.scalar)) == 0.0:
        scal = float(np.max(np.abs(phi.scalar - e.scalar)))
    ts = np.linspace(0.0, 1.0, samples)
    path = tuple(riesz_half((1 - t) * p + t * al) for t in ts)
    cert = None
    if ctrl is not None:
        cert = certified_path(lambda t: EvenCycle(riesz_half((1 - t) * p + t * al), e),
                              0.0, 1.0, ctrl)
    return phi, CompressReport(al, dist, alpha_bound(p, data, e), gap, comm, bound, scal,
                               path, tuple(ts), cert)


def partial_trace_oracle(b: AugMatrix, m: int) -> AugMatrix:
    """``1_m (x) tr_1(b) / m`` computed on the dense form."""
    M = b.dense()
    k = M.shape[0] // m
    red = np.einsum("aiaj->ij", M.reshape(m, k, m, k)) / m
    s = b.scalar
    ks = s.shape[0] // m
    red_s = np.einsum("aiaj->ij", s.reshape(m, ks, m, ks)) / m
    return AugMatrix.from_dense(np.kron(np.eye(m), red), np.kron(np.eye(m), red_s))
