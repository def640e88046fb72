"""Random instances for the property suites.

Test operators are diagonal in the truncated ``l^2`` coordinate: ``x`` acts as
``d_a`` on the ``a``-th basis vector and as a constant on the tail.  An
augmented matrix that is block diagonal in that coordinate (one ``n x n``
block per basis vector, plus the scalar part on the tail) commutes exactly
with every such ``x``.  Almost-commuting instances are obtained by conjugating
with ``exp(eta K)`` for a random finite-part generator ``K``.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np
from scipy.linalg import expm

from .cycles import ControlData, EvenCycle, OddCycle
from .matcore import AugMatrix, op_norm

EPS_FLOOR = 0.1


def cnormal(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(cnormal(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = cnormal(rng, n, n)
    return 0.5 * (a + a.conj().T)


def random_contraction(rng: np.random.Generator, n: int) -> np.ndarray:
    a = cnormal(rng, n, n)
    return a / op_norm(a)


def random_projection(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    u = random_unitary(rng, n)
    return u[:, :rank] @ u[:, :rank].conj().T


def random_idempotent(rng: np.random.Generator, n: int, rank: int, kappa: float = 4.0,
                      tries: int = 200) -> np.ndarray:
    """Non-orthogonal idempotent ``S D S^-1`` with norm at most ``kappa``."""
    if rank in (0, n):
        return np.diag(np.r_[np.ones(rank), np.zeros(n - rank)]).astype(np.complex128)
    target = rng.uniform(1.0, kappa)
    d = np.diag(np.r_[np.ones(rank), np.zeros(n - rank)])
    for _ in range(tries):
        g = cnormal(rng, n, n)
        best = None
        lo, hi = 0.0, 2.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            s = np.eye(n) + mid * g
            p = s @ d @ np.linalg.inv(s)
            nrm = op_norm(p)
            if nrm <= target:
                lo, best = mid, p
            else:
                hi = mid
        if best is not None:
            return best
    return d.astype(np.complex128)


def random_invertible(rng: np.random.Generator, n: int, kappa: float = 3.0) -> np.ndarray:
    """Invertible with ``||u||, ||u^-1|| <= kappa`` (singular values in range)."""
    s = np.exp(rng.uniform(-np.log(kappa), np.log(kappa), size=n))
    return random_unitary(rng, n) @ np.diag(s) @ random_unitary(rng, n)


def diagonal_operators(rng: np.random.Generator, N: int, count: int = 2,
                   complex_phase: bool = False) -> List[AugMatrix]:
    """Diagonal contractions on the truncated coordinate with distinct entries."""
    out = []
    for _ in range(count):
        d = rng.uniform(-1.0, 1.0, size=N)
        tail = rng.uniform(-1.0, 1.0)
        if complex_phase:
            d = d * np.exp(1j * rng.uniform(0, 2 * np.pi, size=N))
        out.append(AugMatrix(np.array([[tail]]), np.diag(d - tail)))
    return out


def diagonal_aug(scalar: np.ndarray, blocks: List[np.ndarray]) -> AugMatrix:
    """``scalar (x) 1`` modified to ``blocks[a]`` on the ``a``-th coordinate."""
    n, N = scalar.shape[0], len(blocks)
    f = np.zeros((n * N, n * N), dtype=np.complex128)
    for a, b in enumerate(blocks):
        idx = np.arange(n) * N + a
        f[np.ix_(idx, idx)] = b - scalar
    return AugMatrix(scalar, f)


def finite_generator(rng: np.random.Generator, n: int, N: int,
                     skew: bool = False) -> AugMatrix:
    """Random finite-part element of norm 1 (optionally skew-Hermitian)."""
    k = cnormal(rng, n * N, n * N)
    if skew:
        k = 0.5 * (k - k.conj().T)
    k = k / op_norm(k)
    return AugMatrix(np.zeros((n, n)), k)


def perturbation(rng: np.random.Generator, n: int, N: int, eta: float,
                 unitary: bool = True):
    """``(g, g^-1)`` with ``g = exp(eta K)`` and ``sigma(g) = 1``."""
    K = finite_generator(rng, n, N, skew=unitary)
    d = K.dense()
    g = expm(eta * d)
    gi = expm(-eta * d)
    one = np.eye(n)
    return AugMatrix.from_dense(g, one), AugMatrix.from_dense(gi, one)


def commuting_idempotent(rng: np.random.Generator, n: int, N: int, rank: int,
                         kappa: float = 1.0, projection: Optional[bool] = None,
                         scalar: Optional[np.ndarray] = None) -> AugMatrix:
    """Idempotent commuting with every operator from :func:`diagonal_operators`.

    Each coordinate block is an idempotent of random rank; the scalar part has
    rank ``rank``.
    """
    proj = kappa <= 1.0 if projection is None else projection

    def one(r):
        return random_projection(rng, n, r) if proj else random_idempotent(rng, n, r, kappa)

    s = one(rank) if scalar is None else scalar
    blocks = [one(int(rng.integers(0, n + 1))) for _ in range(N)]
    return diagonal_aug(s, blocks)


def commuting_invertible(rng: np.random.Generator, n: int, N: int,
                         kappa: float = 2.0, unit_scalar: bool = False) -> AugMatrix:
    s = np.eye(n, dtype=np.complex128) if unit_scalar else random_invertible(rng, n, kappa)
    blocks = [random_invertible(rng, n, kappa) for _ in range(N)]
    return diagonal_aug(s, blocks)


def conjugate(a: AugMatrix, g: AugMatrix, gi: AugMatrix) -> AugMatrix:
    return g @ a @ gi


def even_instance(rng: np.random.Generator, n: int, N: int, kappa: float = 1.0,
                  eta: float = 0.0, n_ops: int = 2, rank: Optional[int] = None):
    """Random ``(EvenCycle, ControlData)`` with measured parameters."""
    from .cycles import max_comm

    rank = int(rng.integers(0, n + 1)) if rank is None else rank
    X = diagonal_operators(rng, N, n_ops)
    p = commuting_idempotent(rng, n, N, rank, kappa)
    q = commuting_idempotent(rng, n, N, rank, kappa)
    if eta > 0:
        g, gi = perturbation(rng, n, N, eta)
        p = conjugate(p, g, gi)
        g, gi = perturbation(rng, n, N, eta)
        q = conjugate(q, g, gi)
    c = EvenCycle(p, q)
    k = max(op_norm(p), op_norm(q), 1.0)
    e = max(max_comm(p, X), max_comm(q, X))
    ctrl = ControlData(X, kappa=k * (1 + 1e-9), eps=max(2 * e, EPS_FLOOR))
    return c, ctrl


def odd_instance(rng: np.random.Generator, n: int, N: int, kappa: float = 2.0,
                 eta: float = 0.0, n_ops: int = 2, unit_scalar: bool = False):
    from .cycles import max_comm

    X = diagonal_operators(rng, N, n_ops)
    u = commuting_invertible(rng, n, N, kappa, unit_scalar)
    if eta > 0:
        g, gi = perturbation(rng, n, N, eta)
        u = conjugate(u, g, gi)
    c = OddCycle(u)
    k = max(op_norm(c.u), op_norm(c.u_inv), 1.0)
    e = max(max_comm(c.u, X), max_comm(c.u_inv, X))
    ctrl = ControlData(X, kappa=k * (1 + 1e-9), eps=max(2 * e, EPS_FLOOR))
    return c, ctrl


def diagonal_cut(rng: np.random.Generator, N: int) -> AugMatrix:
    """Diagonal positive contraction on the truncated coordinate."""
    d = rng.uniform(0.0, 1.0, size=N)
    tail = rng.uniform(0.0, 1.0)
    return AugMatrix(np.array([[tail]], dtype=np.complex128), np.diag(d - tail).astype(np.complex128))


def _stabilizer(rng, p: AugMatrix, n: int, N: int) -> AugMatrix:
    """Block-diagonal ``alpha p + beta (1 - p)`` with scalar part 1."""
    one = AugMatrix.identity(n, N)
    blocks = []
    for a in range(N):
        idx = np.arange(n) * N + a
        pa = p.dense()[np.ix_(idx, idx)]
        al, be = np.exp(rng.normal(scale=0.3) + 1j * rng.uniform(0, 2 * np.pi, size=2))
        blocks.append(al * pa + be * (np.eye(n) - pa))
    return diagonal_aug(np.eye(n, dtype=np.complex128), blocks)


def mv_scenario(rng: np.random.Generator, n: int = 2, N: int = 3, eps: float = 0.0,
                n_ops: int = 2, unit_kappa: float = 1.5):
    """Inputs for the exactness pipeline.

    With ``eps = 0`` every object is block diagonal over the truncated
    coordinate, and ``h`` acts by scalars there, so all commutators vanish.
    With ``eps > 0`` the matrix entries ``p, q, u_h, u_{1-h}`` are conjugated
    by a common ``exp(eps K)``, which keeps ``u p u^-1 = q``.
    """
    X = diagonal_operators(rng, N, n_ops)
    h = diagonal_cut(rng, N)
    l = int(rng.integers(1, n))
    scal = np.diag(np.r_[np.ones(l), np.zeros(n - l)]).astype(np.complex128)
    p = commuting_idempotent(rng, n, N, l, 1.0, scalar=scal)
    u_h = commuting_invertible(rng, n, N, unit_kappa, unit_scalar=True)
    q = u_h @ p @ u_h.inv()
    u_1h = u_h @ _stabilizer(rng, p, n, N)
    if eps > 0:
        g, gi = perturbation(rng, n, N, eps)
        p, q = g @ p @ gi, g @ q @ gi
        u_h, u_1h = g @ u_h @ gi, g @ u_1h @ gi
    return dict(p=p, q=q, h=h, u_h=OddCycle(u_h), u_1h=OddCycle(u_1h), X=tuple(X))
