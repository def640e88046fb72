"""Conversions between similarity and homotopy of almost-commuting idempotent pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cycles import (
    ControlData,
    EvenCycle,
    HomotopyCertificate,
    OddCycle,
    certified_path,
    certify_path,
    max_comm,
    safe_step_radius,
    self_adjoint_closure,
    stabilize,
    step_size,
    validate_even,
    validate_odd,
)
from .errors import DimensionCapError, StepSizeError, ValidationError
from .idempotents import grid_lipschitz
from .matcore import (
    AugMatrix,
    Matrix,
    block_sum,
    comm_norm,
    identity_like,
    inverse,
    op_norm,
    rotation,
)

# ---------------------------------------------------------------------------
# close idempotents


@dataclass(frozen=True)
class ClosePath:
    ts: np.ndarray
    ps: List[Matrix]
    us: List[Matrix]
    max_norm: float
    lipschitz: float
    endpoint_error: float
    max_u_defect: float
    comm: Dict[int, Tuple[float, float]] = field(default_factory=dict)


def close_path_point(p0: Matrix, p1: Matrix, t: float):
    """``(p_t, u_t, u_t^-1)`` with ``u_t = (1 - r_t)(1 - p0) + r_t p0``."""
    one = identity_like(p0)
    r = (1 - t) * p0 + t * p1
    u = (one - r) @ (one - p0) + r @ p0
    ui = inverse(u)
    return u @ p0 @ ui, u, ui


def connect_close_idempotents(p0: Matrix, p1: Matrix, kappa: float, samples: int = 33,
                              test_ops: Sequence[Matrix] = ()) -> ClosePath:
    """Path of idempotents ``u_t p0 u_t^-1`` from ``p0`` to ``p1``.

    Requires ``||p0 - p1|| <= 1 / (12 kappa^2)``.  ``comm[j]`` holds, for the
    ``j``-th test operator, the worst ``||[c, p_t]||`` and the endpoint
    maximum ``max(||[c, p0]||, ||[c, p1]||)``.
    """
    dist = op_norm(p0 - p1)
    limit = 1.0 / (12 * kappa ** 2)
    if dist > limit + 1e-12:
        raise StepSizeError(f"||p0 - p1|| = {dist:.6g} exceeds 1/(12 kappa^2) = {limit:.6g}")
    ts = np.linspace(0.0, 1.0, samples)
    one = identity_like(p0)
    ps, us = [], []
    for t in ts:
        p, u, _ = close_path_point(p0, p1, t)
        ps.append(p)
        us.append(u)
    comm = {}
    for j, c in enumerate(test_ops):
        ends = max(comm_norm(c, p0), comm_norm(c, p1))
        comm[j] = (max(comm_norm(c, p) for p in ps), ends)
    return ClosePath(
        ts=ts, ps=ps, us=us,
        max_norm=max(op_norm(p) for p in ps),
        lipschitz=grid_lipschitz(ts, ps),
        endpoint_error=op_norm(ps[-1] - p1),
        max_u_defect=max(op_norm(one - u) for u in us),
        comm=comm,
    )


# ---------------------------------------------------------------------------
# similarity to homotopy


def _zero_pad(a: AugMatrix) -> AugMatrix:
    return block_sum(a, AugMatrix.zeros(a.n, a.N))


def similarity_path(c0: EvenCycle, u: OddCycle, component: str = "p") -> Callable[[float], EvenCycle]:
    """Padded ``c0`` with one entry moved to ``v_t (a + 0) v_t^-1``, as a function of ``t``."""
    if component not in ("p", "q"):
        raise ValueError("component must be 'p' or 'q'")
    a0, fixed0 = (c0.p, c0.q) if component == "p" else (c0.q, c0.p)
    n, N = c0.n, c0.N
    one = AugMatrix.identity(n, N)
    A0, F = _zero_pad(a0), _zero_pad(fixed0)
    g, gi = block_sum(one, u.u), block_sum(one, u.u_inv)

    def at(t):
        R = AugMatrix.from_scalar(rotation(t, n), N)
        moving = R @ g @ R.H @ A0 @ R @ gi @ R.H
        return EvenCycle(moving, F) if component == "p" else EvenCycle(F, moving)

    return at


def sim_to_homotopy(c0: EvenCycle, c1: EvenCycle, u: OddCycle, ctrl: ControlData,
                    component: str = "p") -> HomotopyCertificate:
    """Rotation path from ``c0 + 0`` to ``c1 + 0`` when ``u`` conjugates one entry.

    With ``v_t = R_t (1 + u) R_t^T`` the moving entry is ``v_t (a + 0) v_t^-1``,
    ``t`` in ``[0, pi/2]``; the other entry is fixed.  Certified at
    ``(kappa^3, 3 kappa^2 eps)``.
    """
    for c in (c0, c1):
        validate_even(c, ctrl).require()
    validate_odd(u, ctrl).require("conjugator")
    if component == "p":
        a0, a1, fixed0, fixed1 = c0.p, c1.p, c0.q, c1.q
    elif component == "q":
        a0, a1, fixed0, fixed1 = c0.q, c1.q, c0.p, c1.p
    else:
        raise ValueError("component must be 'p' or 'q'")
    if op_norm(fixed0 - fixed1) > 1e-12:
        raise ValidationError("the fixed entries of c0 and c1 differ")
    err = op_norm(u.u @ a0 @ u.u_inv - a1)
    if err > 1e-8:
        raise ValidationError(f"u does not conjugate the moving entries (error {err:.3g})")
    at = similarity_path(c0, u, component)
    F = _zero_pad(fixed0)

    def make(moving):
        return EvenCycle(moving, F) if component == "p" else EvenCycle(F, moving)

    k, e = ctrl.kappa, ctrl.eps
    relax = (k ** 3, 3 * k ** 2 * e)
    cert = certified_path(at, 0.0, np.pi / 2, ctrl, relax)
    exact_end = make(_zero_pad(a1))
    samples = list(cert.samples[:-1]) + [exact_end]
    return certify_path(samples, ctrl, relax, cert.ts)


# ---------------------------------------------------------------------------
# regularization to a padded Lipschitz path

REG_DIM_CAP = 256


def _subdivide(seq_p: Sequence[Matrix], seq_q: Sequence[Matrix], limit: float) -> List[int]:
    """Greedy indices ``0 = i_0 < ... < i_k = last`` with both jumps at most ``limit``."""
    last = len(seq_p) - 1
    if last == 0:
        return [0, 0]
    idx = [0]
    while idx[-1] < last:
        a = idx[-1]
        b = a + 1
        if max(op_norm(seq_p[b] - seq_p[a]), op_norm(seq_q[b] - seq_q[a])) > limit:
            raise StepSizeError(f"samples {a} and {b} are further apart than {limit:.3g}")
        while b < last and max(op_norm(seq_p[b + 1] - seq_p[a]),
                               op_norm(seq_q[b + 1] - seq_q[a])) <= limit:
            b += 1
        idx.append(b)
    return idx


def _swap_rotation(pairs: Sequence[Tuple[int, int]], blocks: int, n: int, t: float) -> np.ndarray:
    """Simultaneous plane rotations by ``t`` in disjoint block pairs."""
    W = np.eye(blocks * n, dtype=np.complex128)
    c, s = np.cos(t), np.sin(t)
    for a, b in pairs:
        ia, ib = slice(a * n, (a + 1) * n), slice(b * n, (b + 1) * n)
        W[ia, ia] = c * np.eye(n)
        W[ib, ib] = c * np.eye(n)
        W[ib, ia] = s * np.eye(n)
        W[ia, ib] = -s * np.eye(n)
    return W


def _split(a: AugMatrix, t: float) -> Tuple[AugMatrix, AugMatrix, AugMatrix, AugMatrix]:
    """2x2 blocks of ``(1 - a) + 0 + R_t (0 + a) R_t^T``: ``(1-a)+a`` at 0, ``1+0`` at pi/2."""
    one = AugMatrix.identity(a.n, a.N)
    c, s = np.cos(t), np.sin(t)
    return (one - (c * c) * a, (-s * c) * a, (-s * c) * a, (c * c) * a)


def _split_block(a: AugMatrix, t: float, flip: bool) -> List[List[AugMatrix]]:
    tl, tr, bl, br = _split(a, t)
    if flip:
        return [[br, bl], [tr, tl]]
    return [[tl, tr], [bl, br]]


def _assemble(diag: Dict[int, AugMatrix], pairs: Dict[int, List[List[AugMatrix]]],
              blocks: int, n: int, N: int) -> AugMatrix:
    """Block matrix from diagonal blocks and 2x2 blocks on positions ``(i, i+1)``."""
    S = np.zeros((blocks * n, blocks * n), dtype=np.complex128)
    F = np.zeros((blocks * n * N, blocks * n * N), dtype=np.complex128)

    def put(i, j, m):
        S[i * n:(i + 1) * n, j * n:(j + 1) * n] = m.scalar
        F[i * n * N:(i + 1) * n * N, j * n * N:(j + 1) * n * N] = m.finite

    for i, m in diag.items():
        put(i, i, m)
    for i, grid in pairs.items():
        for a in range(2):
            for b in range(2):
                put(i + a, i + b, grid[a][b])
    return AugMatrix(S, F)


@dataclass(frozen=True)
class RegularizedPath:
    k: int
    subdivision: List[int]
    cert: HomotopyCertificate
    taus: np.ndarray
    lipschitz: float
    stage_bounds: Tuple[float, ...]
    stage_norms: Tuple[float, ...]


class _Regularizer:
    """Five-stage padded path; stage lengths pi/2, pi/2, 1, pi/2, pi/2."""

    def __init__(self, ps, qs, k, n, N, kappa):
        self.ps, self.qs, self.k, self.n, self.N = ps, qs, k, n, N
        self.kappa = kappa
        self.blocks = 2 * k + 1
        self.one = AugMatrix.identity(n, N)
        self.zero = AugMatrix.zeros(n, N)
        self.lengths = (np.pi / 2, np.pi / 2, 1.0, np.pi / 2, np.pi / 2)
        self.bounds = tuple(np.cumsum((0.0,) + self.lengths))
        # stage (i): ones at 1..k -> ones at odd positions 1, 3, ..., 2k-1
        have = [i for i in range(1, k + 1) if i % 2 == 0]
        need = [i for i in range(k + 1, 2 * k + 1) if i % 2 == 1]
        self.pairs_in = list(zip(have, need))
        # stage (iv): pair 0 -> (0, 1); others chosen to make stage (v) one involution
        self.flip = {0: True}
        content = {0: 0, 1: 1}
        for i in range(1, k):
            a, b = 2 * i, 2 * i + 1
            want_a, want_b = int(a <= k), int(b <= k)
            flip = (want_a, want_b) == (0, 1)
            self.flip[i] = flip
            content[a], content[b] = (0, 1) if flip else (1, 0)
        # stage (v): swap 0 <-> 2k, then fix remaining 1/0 mismatches
        content[2 * k] = content[0]
        ones_wrong = [j for j in range(1, 2 * k + 1) if content[j] == 1 and j > k]
        zeros_wrong = [j for j in range(1, 2 * k + 1) if content[j] == 0 and j <= k]
        assert len(ones_wrong) == len(zeros_wrong)
        self.pairs_out = [(0, 2 * k)] + list(zip(ones_wrong, zeros_wrong))
        self._cache = {}

    def _rot(self, M, pairs, t):
        W = AugMatrix.from_scalar(_swap_rotation(pairs, self.blocks, self.n, t), self.N)
        return W @ M @ W.H

    def _padded_start(self, a):
        d = {0: a}
        for j in range(1, self.k + 1):
            d[j] = self.one
        for j in range(self.k + 1, 2 * self.k + 1):
            d[j] = self.zero
        return _assemble(d, {}, self.blocks, self.n, self.N)

    def _alternating(self, a):
        d = {0: a}
        for i in range(1, self.k + 1):
            d[2 * i - 1], d[2 * i] = self.one, self.zero
        return _assemble(d, {}, self.blocks, self.n, self.N)

    def _final_pattern(self, last):
        d = {2 * self.k: last}
        for i in range(self.k):
            lo, hi = (self.zero, self.one) if self.flip[i] else (self.one, self.zero)
            d[2 * i], d[2 * i + 1] = lo, hi
        return _assemble(d, {}, self.blocks, self.n, self.N)

    def entry(self, seq, s):
        k, n, N = self.k, self.n, self.N
        b = self.bounds
        if s <= b[1]:
            return self._rot(self._padded_start(seq[0]), self.pairs_in, s)
        if s <= b[2]:
            t = np.pi / 2 - (s - b[1])
            pairs = {2 * i - 1: _split_block(seq[i], t, False) for i in range(1, k + 1)}
            return _assemble({0: seq[0]}, pairs, self.blocks, n, N)
        if s <= b[3]:
            t = s - b[2]
            d = {0: seq[0]}
            for i in range(1, k + 1):
                d[2 * i - 1] = close_path_point(self.one - seq[i], self.one - seq[i - 1], t)[0]
                d[2 * i] = seq[i]
            return _assemble(d, {}, self.blocks, n, N)
        if s <= b[4]:
            t = s - b[3]
            pairs = {2 * i: _split_block(self.one - seq[i], t, False) if not self.flip[i]
                     else _split_block(seq[i], t, True) for i in range(k)}
            return _assemble({2 * k: seq[k]}, pairs, self.blocks, n, N)
        t = s - b[4]
        return self._rot(self._final_pattern(seq[k]), self.pairs_out, t)

    def __call__(self, s):
        if s not in self._cache:
            self._cache[s] = EvenCycle(self.entry(self.ps, s), self.entry(self.qs, s))
        return self._cache[s]


def refine_samples(fn: Callable[[float], EvenCycle], ts: Sequence[float],
                   samples: Sequence[EvenCycle], limit: float,
                   max_samples: int = 1 << 14) -> Tuple[List[float], List[EvenCycle]]:
    """Bisect gaps until consecutive samples differ by at most ``limit``."""
    ts, cs = list(ts), list(samples)
    j = 0
    while j < len(ts) - 1:
        if step_size(cs[j], cs[j + 1]) <= limit:
            j += 1
            continue
        if len(ts) >= max_samples:
            raise StepSizeError(f"refinement needs more than {max_samples} samples")
        tm = 0.5 * (ts[j] + ts[j + 1])
        ts.insert(j + 1, tm)
        cs.insert(j + 1, fn(tm))
    return ts, cs


def regularize_homotopy(samples: Sequence[EvenCycle], ctrl: ControlData,
                        n0: int = 65, path_fn: Optional[Callable[[float], EvenCycle]] = None,
                        ts: Optional[Sequence[float]] = None,
                        dim_cap: int = REG_DIM_CAP) -> RegularizedPath:
    """Padded Lipschitz path between the padded endpoints of a sampled path.

    The input samples must validate at ``ctrl``.  With ``path_fn`` and ``ts``
    the samples are first refined so consecutive ones differ by at most
    ``1 / (12 kappa^2)``.  The output connects
    ``(p_i + 1_{nk} + 0_{nk}, q_i + 1_{nk} + 0_{nk})`` and is certified at
    ``(2 kappa, 21 kappa^2 eps)``.  The reported Lipschitz constant is the
    grid slope after reparametrizing to ``[0, 1]``.
    """
    for j, c in enumerate(samples):
        validate_even(c, ctrl).require(f"input sample {j}")
    kappa, eps = ctrl.kappa, ctrl.eps
    if path_fn is not None:
        if ts is None:
            raise ValueError("path_fn needs the sample times")
        _, samples = refine_samples(path_fn, ts, samples, 1.0 / (12 * kappa ** 2))
        for c in samples:
            validate_even(c, ctrl).require("refined sample")
    ps = [c.p for c in samples]
    qs = [c.q for c in samples]
    idx = _subdivide(ps, qs, 1.0 / (12 * kappa ** 2))
    k = len(idx) - 1
    n, N = samples[0].n, samples[0].N
    dim = (2 * k + 1) * n * N
    if dim > dim_cap:
        raise DimensionCapError(
            f"regularized path needs dimension {dim} (k={k} links); cap is {dim_cap}",
            required=dim, cap=dim_cap)
    sub_p = [ps[i] for i in idx]
    sub_q = [qs[i] for i in idx]
    reg = _Regularizer(sub_p, sub_q, k, n, N, kappa)
    total = reg.bounds[-1]
    relax = (2 * kappa, 21 * kappa ** 2 * eps)
    # uniform floor per stage so the measured slope sees every stage
    grid = []
    for a, b in zip(reg.bounds[:-1], reg.bounds[1:]):
        grid.extend(np.linspace(a, b, n0)[:-1])
    grid.append(total)
    rc = ctrl.relaxed(*relax)

    ts = list(grid)
    cs = [reg(t) for t in ts]
    rad = [safe_step_radius(c, rc) for c in cs]
    j = 0
    while j < len(ts) - 1:
        if step_size(cs[j], cs[j + 1]) < 0.8 * rad[j]:
            j += 1
            continue
        tm = 0.5 * (ts[j] + ts[j + 1])
        ts.insert(j + 1, tm)
        cs.insert(j + 1, reg(tm))
        rad.insert(j + 1, safe_step_radius(cs[j + 1], rc))
    cert = certify_path(cs, ctrl, relax, ts)
    taus = np.array(ts) / total
    lip = 0.0
    for a in range(len(cs) - 1):
        dt = taus[a + 1] - taus[a]
        lip = max(lip, step_size(cs[a], cs[a + 1]) / dt)
    stage_norms = []
    for a, b in zip(reg.bounds[:-1], reg.bounds[1:]):
        inside = [c for t, c in zip(ts, cs) if a <= t <= b]
        stage_norms.append(max(max(op_norm(c.p), op_norm(c.q)) for c in inside))
    return RegularizedPath(k=k, subdivision=idx, cert=cert, taus=taus, lipschitz=lip,
                           stage_bounds=reg.bounds, stage_norms=tuple(stage_norms))


# ---------------------------------------------------------------------------
# homotopy to similarity


@dataclass(frozen=True, eq=False)
class SimilarityWitness:
    m: int
    u: AugMatrix
    u_inv: AugMatrix
    identity_error: float
    norm_u: float
    norm_u_inv: float
    comm_u: float
    comm_u_inv: float
    links: int
    max_link_defect: float
    max_link_norm: float
    max_link_inv_norm: float
    log2_budget_M: float
    budget_N: int


@dataclass(frozen=True)
class _Chain:
    v: AugMatrix
    v_inv: AugMatrix
    links: int
    defect: float
    norm: float
    norm_inv: float


def _chain(seq: Sequence[AugMatrix], limit: float) -> _Chain:
    """``v = v_1 ... v_N`` with ``v_i p_{t_i} v_i^-1 = p_{t_{i-1}}``."""
    last = len(seq) - 1
    idx = [0]
    while idx[-1] < last:
        a = idx[-1]
        b = a + 1
        while b < last and op_norm(seq[b + 1] - seq[a]) <= limit:
            b += 1
        idx.append(b)
    one = identity_like(seq[0])
    v, v_inv = one, one
    defect = norm = norm_inv = 0.0
    for a, b in zip(idx[:-1], idx[1:]):
        pa, pb = seq[a], seq[b]
        link = pa @ pb + (one - pa) @ (one - pb)
        d = op_norm(one - link)
        if d > 0.5 + 1e-9:
            raise StepSizeError(f"chain link {a}->{b} has ||1 - v_i|| = {d:.3g}; resample first")
        li = link.inv()
        defect = max(defect, d)
        norm = max(norm, op_norm(link))
        norm_inv = max(norm_inv, op_norm(li))
        v = v @ link
        v_inv = li @ v_inv
    return _Chain(v, v_inv, len(idx) - 1, defect, norm, norm_inv)


def hom_to_sim(c: EvenCycle, samples: Sequence[EvenCycle], ctrl: ControlData,
               path_fn: Optional[Callable[[float], EvenCycle]] = None,
               ts: Optional[Sequence[float]] = None) -> SimilarityWitness:
    """Invertible ``u`` with ``u (p + 1_m + 0_m) u^-1 = q + 1_m + 0_m``.

    ``samples`` is a sampled path with constant scalar parts, starting at the
    padded ``c`` and ending at a pair with equal entries.  Links are formed
    between samples at distance at most ``1 / (16 kappa)``; with ``path_fn``
    and ``ts`` the samples are first refined to that spacing.
    """
    if path_fn is not None:
        if ts is None:
            raise ValueError("path_fn needs the sample times")
        _, samples = refine_samples(path_fn, ts, samples, 1.0 / (16 * ctrl.kappa))
    first, last = samples[0], samples[-1]
    m2 = first.n - c.n
    if m2 < 0 or m2 % 2:
        raise ValidationError("path samples are not a padding of the cycle")
    m = m2 // 2
    padded = stabilize(c, m)
    if step_size(padded, first) > 1e-12:
        raise ValidationError("path does not start at the padded cycle")
    if op_norm(last.p - last.q) > 1e-9:
        raise ValidationError("path does not end at a pair with equal entries")
    for j, s in enumerate(samples):
        if (np.max(np.abs(s.p.scalar - first.p.scalar)) > 1e-12
                or np.max(np.abs(s.q.scalar - first.q.scalar)) > 1e-12):
            raise ValidationError(f"sample {j} changes the scalar part")
    kappa = ctrl.kappa
    limit = 1.0 / (16 * kappa)
    cp = _chain([s.p for s in samples], limit)
    cq = _chain([s.q for s in samples], limit)
    u = cq.v @ cp.v_inv
    u_inv = cp.v @ cq.v_inv
    X = self_adjoint_closure(ctrl.X)
    return SimilarityWitness(
        m=m, u=u, u_inv=u_inv,
        identity_error=op_norm(u @ padded.p @ u_inv - padded.q),
        norm_u=op_norm(u), norm_u_inv=op_norm(u_inv),
        comm_u=max_comm(u, X), comm_u_inv=max_comm(u_inv, X),
        links=cp.links + cq.links,
        max_link_defect=max(cp.defect, cq.defect),
        max_link_norm=max(cp.norm, cq.norm),
        max_link_inv_norm=max(cp.norm_inv, cq.norm_inv),
        log2_budget_M=(100 * kappa) ** 3,
        budget_N=math.ceil(2 ** 13 * kappa ** 3),
    )
