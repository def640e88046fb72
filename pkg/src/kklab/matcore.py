"""Dense complex matrices and the augmented model of matrices over unitized compacts.

A plain matrix is a 2-D ``complex128`` numpy array.  An :class:`AugMatrix`
stores an ``n x n`` scalar part ``S`` and a finite correction ``F`` of size
``nN x nN`` (``n x n`` blocks of size ``N``).  It stands for the operator
``S (x) 1 + F`` on ``C^n (x) l^2`` where ``F`` lives on the first ``N`` basis
vectors of ``l^2``.  On the complement the operator is ``S`` itself, so norms,
spectra, products and inverses are computed exactly from the truncated block
``S (x) 1_N + F`` together with ``S``.

Eigenvalues and singular values are delegated to LAPACK through numpy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConvergenceError, DomainError, GapError, MatrixError

DIM_CAP = 512
HERMITIAN_TOL = 1e-13
NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-12


def as_mat(x, *, square: bool = False) -> np.ndarray:
    """Return ``x`` as a finite 2-D complex array, rejecting bad input."""
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise MatrixError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixError("matrix has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise MatrixError(f"expected a square matrix, got shape {m.shape}")
    return m


def lift(s: np.ndarray, N: int) -> np.ndarray:
    """``s (x) 1_N`` in block-major order."""
    n = s.shape[0]
    if N == 1:
        return np.array(s, dtype=np.complex128)
    out = np.zeros((n, N, n, N), dtype=np.complex128)
    idx = np.arange(N)
    out[:, idx, :, idx] = s
    return out.reshape(n * N, n * N)


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=np.complex128, copy=True)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class AugMatrix:
    """``scalar (x) 1 + finite`` with an exact scalar part."""

    scalar: np.ndarray
    finite: np.ndarray

    def __post_init__(self):
        s = as_mat(self.scalar, square=True)
        f = as_mat(self.finite, square=True)
        n = s.shape[0]
        if f.shape[0] % n:
            raise MatrixError(f"finite part of size {f.shape[0]} is not a multiple of n={n}")
        object.__setattr__(self, "scalar", _frozen(s))
        object.__setattr__(self, "finite", _frozen(f))

    # construction -------------------------------------------------------
    @classmethod
    def _raw(cls, s: np.ndarray, f: np.ndarray) -> "AugMatrix":
        obj = object.__new__(cls)
        s.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(obj, "scalar", s)
        object.__setattr__(obj, "finite", f)
        return obj

    @classmethod
    def from_scalar(cls, s, N: int) -> "AugMatrix":
        s = as_mat(s, square=True)
        n = s.shape[0]
        return cls(s, np.zeros((n * N, n * N), dtype=np.complex128))

    @classmethod
    def identity(cls, n: int, N: int) -> "AugMatrix":
        return cls.from_scalar(np.eye(n), N)

    @classmethod
    def zeros(cls, n: int, N: int) -> "AugMatrix":
        return cls.from_scalar(np.zeros((n, n)), N)

    @classmethod
    def from_dense(cls, dense, scalar) -> "AugMatrix":
        """Split a truncated block ``dense`` whose tail acts as ``scalar``."""
        s = as_mat(scalar, square=True)
        d = as_mat(dense, square=True)
        N = d.shape[0] // s.shape[0]
        return cls(s, d - lift(s, N))

    # shape --------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.scalar.shape[0]

    @property
    def N(self) -> int:
        return self.finite.shape[0] // self.scalar.shape[0]

    def dense(self) -> np.ndarray:
        """The truncated block ``S (x) 1_N + F``."""
        return self._dense

    @cached_property
    def _dense(self) -> np.ndarray:
        d = lift(self.scalar, self.N) + self.finite
        d.setflags(write=False)
        return d

    def _check(self, other: "AugMatrix"):
        if not isinstance(other, AugMatrix):
            raise MatrixError("expected an AugMatrix operand")
        if other.n != self.n or other.N != self.N:
            raise MatrixError(
                f"shape mismatch: (n={self.n}, N={self.N}) vs (n={other.n}, N={other.N})"
            )

    # algebra ------------------------------------------------------------
    def __add__(self, other):
        if np.isscalar(other):
            return self + other * AugMatrix.identity(self.n, self.N)
        self._check(other)
        return AugMatrix._raw(self.scalar + other.scalar, self.finite + other.finite)

    __radd__ = __add__

    def __neg__(self):
        return AugMatrix._raw(-self.scalar, -self.finite)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return AugMatrix._raw(c * self.scalar, c * self.finite)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        s = self.scalar @ other.scalar
        prod = self.dense() @ other.dense()
        out = AugMatrix._raw(s, prod - lift(s, self.N))
        out.__dict__["_dense"] = prod
        prod.setflags(write=False)
        return out

    @property
    def H(self) -> "AugMatrix":
        return AugMatrix._raw(self.scalar.conj().T.copy(), self.finite.conj().T.copy())

    def inv(self) -> "AugMatrix":
        try:
            s = np.linalg.inv(self.scalar)
            d = np.linalg.inv(self.dense())
        except np.linalg.LinAlgError as exc:
            raise DomainError("AugMatrix is not invertible") from exc
        return AugMatrix._raw(s, d - lift(s, self.N))

    def __repr__(self):
        return f"AugMatrix(n={self.n}, N={self.N})"


Matrix = Union[np.ndarray, AugMatrix]


# generic helpers ------------------------------------------------------------

def _coerce(m: Matrix) -> Matrix:
    return m if isinstance(m, AugMatrix) else as_mat(m)


def adjoint(m: Matrix) -> Matrix:
    m = _coerce(m)
    return m.H if isinstance(m, AugMatrix) else m.conj().T


def inverse(m: Matrix) -> Matrix:
    m = _coerce(m)
    if isinstance(m, AugMatrix):
        return m.inv()
    try:
        return np.linalg.inv(as_mat(m, square=True))
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not invertible") from exc


def identity_like(m: Matrix) -> Matrix:
    if isinstance(m, AugMatrix):
        return AugMatrix.identity(m.n, m.N)
    return np.eye(as_mat(m).shape[0], dtype=np.complex128)


def zeros_like(m: Matrix) -> Matrix:
    if isinstance(m, AugMatrix):
        return AugMatrix.zeros(m.n, m.N)
    return np.zeros_like(as_mat(m))


def amplify(x: Matrix, k: int) -> Matrix:
    """``1_k (x) x``: the diagonal action of ``x`` on ``k`` copies."""
    if k == 1:
        return x
    if isinstance(x, AugMatrix):
        cache = x.__dict__.setdefault("_amplified", {})
        if k not in cache:
            cache[k] = AugMatrix(np.kron(np.eye(k), x.scalar), np.kron(np.eye(k), x.finite))
        return cache[k]
    return np.kron(np.eye(k), as_mat(x))


def kron_scalar(a, x: Matrix) -> Matrix:
    """``a (x) x`` for a plain matrix ``a`` acting on the block index."""
    a = as_mat(a)
    if isinstance(x, AugMatrix):
        return AugMatrix(np.kron(a, x.scalar), np.kron(a, x.finite))
    return np.kron(a, as_mat(x))


def _size(m: Matrix) -> int:
    return m.n if isinstance(m, AugMatrix) else m.shape[0]


def commutator(a: Matrix, b: Matrix) -> Matrix:
    """``ab - ba``; a smaller operand is amplified diagonally to match."""
    a, b = _coerce(a), _coerce(b)
    na, nb = _size(a), _size(b)
    if na != nb:
        small, big = (a, b) if na < nb else (b, a)
        if _size(big) % _size(small):
            raise MatrixError(f"cannot match sizes {na} and {nb}")
        small = amplify(small, _size(big) // _size(small))
        a, b = (small, big) if na < nb else (big, small)
    return a @ b - b @ a


def comm_norm(a: Matrix, b: Matrix) -> float:
    return op_norm(commutator(a, b))


# norms and spectra ----------------------------------------------------------

def op_norm(m: Matrix) -> float:
    """Largest singular value; for an AugMatrix the max over block and tail."""
    if isinstance(m, AugMatrix):
        return max(_sigma_max(m.dense()), _sigma_max(m.scalar))
    return _sigma_max(as_mat(m))


def _sigma_max(m: np.ndarray) -> float:
    try:
        return float(np.linalg.svd(m, compute_uv=False)[0])
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("singular value iteration did not converge") from exc


def is_hermitian(m: Matrix, tol: float = HERMITIAN_TOL) -> bool:
    m = _coerce(m)
    if isinstance(m, AugMatrix):
        return is_hermitian(m.scalar, tol) and is_hermitian(m.finite, tol)
    m = as_mat(m, square=True)
    scale = max(1.0, float(np.max(np.abs(m))))
    return float(np.max(np.abs(m - m.conj().T))) <= tol * scale


def _check_cap(dim: int, cap: int):
    if dim > cap:
        raise MatrixError(f"dimension {dim} exceeds eigensolver cap {cap}")


def _eigvals(m: np.ndarray, cap: int) -> np.ndarray:
    m = as_mat(m, square=True)
    _check_cap(m.shape[0], cap)
    try:
        if is_hermitian(m):
            return np.linalg.eigvalsh(0.5 * (m + m.conj().T)).astype(np.complex128)
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("QR iteration did not converge") from exc


def spectrum(m: Matrix, cap: int = DIM_CAP) -> np.ndarray:
    """Eigenvalues with multiplicity.

    For an AugMatrix this is the spectrum of the truncated block followed by
    the spectrum of the scalar part (which is what the tail contributes).
    """
    if isinstance(m, AugMatrix):
        return np.concatenate([_eigvals(m.dense(), cap), _eigvals(m.scalar, cap)])
    return _eigvals(m, cap)


def spectral_distance(a: Matrix, b: Matrix) -> float:
    """Max over spectrum(a) of the distance to spectrum(b)."""
    sa, sb = spectrum(a), spectrum(b)
    return float(np.max(np.min(np.abs(sa[:, None] - sb[None, :]), axis=1)))


# matrix functions -----------------------------------------------------------

def hermitian_function(m: Matrix, f: Callable[[np.ndarray], np.ndarray]) -> Matrix:
    """Apply ``f`` to the eigenvalues of a Hermitian matrix."""
    if isinstance(m, AugMatrix):
        s = hermitian_function(m.scalar, f)
        d = hermitian_function(m.dense(), f)
        return AugMatrix.from_dense(d, s)
    m = as_mat(m, square=True)
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * f(w)) @ v.conj().T


def inv_sqrt(p: Matrix, eta: float = np.inf) -> Matrix:
    """``p^{-1/2}`` for Hermitian ``p`` whose eigenvalues are at least ``1/eta``."""
    p = _coerce(p)
    if not is_hermitian(p, 1e-10):
        raise DomainError("inv_sqrt needs a Hermitian argument")
    floor = 1.0 / eta if eta > 0 else np.inf
    lo = float(np.min(spectrum(p).real))
    if lo <= 0 or lo < floor * (1 - 1e-12):
        raise DomainError(f"eigenvalue {lo!r} is below the threshold {floor!r}", value=lo)
    return hermitian_function(p, lambda w: 1.0 / np.sqrt(w))


def power(p: Matrix, s: float) -> Matrix:
    """``p^s`` for positive definite ``p``."""
    lo = float(np.min(spectrum(p).real))
    if lo <= 0:
        raise DomainError(f"power needs a positive argument, min eigenvalue {lo!r}", value=lo)
    return hermitian_function(p, lambda w: w ** s)


def _sign_newton(z: np.ndarray, max_iter: int, tol: float) -> np.ndarray:
    n = z.shape[0]
    scaling = True
    for _ in range(max_iter):
        if scaling:
            _, logdet = np.linalg.slogdet(z)
            mu = np.exp(-logdet / n)
        else:
            mu = 1.0
        zi = np.linalg.inv(z)
        znew = 0.5 * (mu * z + zi / mu)
        step = float(np.linalg.norm(znew - z, 2))
        z = znew
        if step <= tol * max(1.0, float(np.linalg.norm(z, 2))):
            return z
        if step < 1e-2:
            scaling = False
    raise ConvergenceError(f"sign iteration did not converge in {max_iter} steps")


def _riesz_dense(m: np.ndarray, gap_tol: float, max_iter: int, tol: float) -> np.ndarray:
    m = as_mat(m, square=True)
    ev = _eigvals(m, DIM_CAP)
    dist = float(np.min(np.abs(ev.real - 0.5)))
    if dist <= gap_tol:
        raise GapError(f"spectrum is within {dist:.3g} of the line Re z = 1/2", distance=dist)
    if is_hermitian(m):
        return hermitian_function(m, lambda w: (w > 0.5).astype(float))
    eye = np.eye(m.shape[0])
    return 0.5 * (eye + _sign_newton(2 * m - eye, max_iter, tol))


def riesz_half(m: Matrix, gap_tol: float = 1e-8, max_iter: int = NEWTON_MAX_ITER,
               tol: float = NEWTON_TOL) -> Matrix:
    """Spectral idempotent for the part of the spectrum with real part above 1/2."""
    if isinstance(m, AugMatrix):
        s = _riesz_dense(m.scalar, gap_tol, max_iter, tol)
        d = _riesz_dense(m.dense(), gap_tol, max_iter, tol)
        return AugMatrix.from_dense(d, s)
    return _riesz_dense(m, gap_tol, max_iter, tol)


# structure ------------------------------------------------------------------

def scalar_part(a: AugMatrix) -> np.ndarray:
    return a.scalar


def block_sum(*ms: Matrix) -> Matrix:
    """Block-diagonal concatenation."""
    if not ms:
        raise MatrixError("block_sum needs at least one operand")
    if all(isinstance(m, AugMatrix) for m in ms):
        N = ms[0].N
        if any(m.N != N for m in ms):
            raise MatrixError("block_sum operands have different truncation depths")
        return AugMatrix(_block_diag([m.scalar for m in ms]), _block_diag([m.finite for m in ms]))
    if any(isinstance(m, AugMatrix) for m in ms):
        raise MatrixError("block_sum operands must be of the same kind")
    return _block_diag([as_mat(m) for m in ms])


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=np.complex128)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def block_matrix(rows: Sequence[Sequence[Matrix]]) -> Matrix:
    """Assemble a block matrix; all blocks must be of one kind and size."""
    flat = [m for row in rows for m in row]
    if all(isinstance(m, AugMatrix) for m in flat):
        return AugMatrix(
            np.block([[m.scalar for m in row] for row in rows]),
            np.block([[m.finite for m in row] for row in rows]),
        )
    return np.block([[as_mat(m) for m in row] for row in rows])


def sub_block(m: Matrix, i: int, j: int, size: int) -> Matrix:
    """Block ``(i, j)`` when ``m`` is viewed as a grid of ``size x size`` blocks."""
    if isinstance(m, AugMatrix):
        N = m.N
        return AugMatrix(
            m.scalar[i * size:(i + 1) * size, j * size:(j + 1) * size],
            m.finite[i * size * N:(i + 1) * size * N, j * size * N:(j + 1) * size * N],
        )
    return m[i * size:(i + 1) * size, j * size:(j + 1) * size]


def permute_blocks(m: Matrix, perm: Sequence[int], size: int) -> Matrix:
    """Conjugate by the permutation sending block ``perm[k]`` to position ``k``."""
    if isinstance(m, AugMatrix):
        N = m.N
        idx_s = np.concatenate([np.arange(p * size, (p + 1) * size) for p in perm])
        idx_f = np.concatenate([np.arange(p * size * N, (p + 1) * size * N) for p in perm])
        return AugMatrix(m.scalar[np.ix_(idx_s, idx_s)], m.finite[np.ix_(idx_f, idx_f)])
    idx = np.concatenate([np.arange(p * size, (p + 1) * size) for p in perm])
    return m[np.ix_(idx, idx)]


def comm_product_bound(n: int, m: float, delta: float) -> float:
    """Bound ``n m^(n-1) delta`` on ``[x, y_1...y_n]`` for factors of norm ``<= m``."""
    if n < 1 or m < 0 or delta < 0:
        raise MatrixError("comm_product_bound needs n >= 1, m >= 0, delta >= 0")
    return n * m ** (n - 1) * delta


def unitary_power(u, t: float) -> np.ndarray:
    """``exp(t log u)`` for a unitary matrix ``u`` (principal branch)."""
    from scipy.linalg import schur

    u = as_mat(u, square=True)
    T, Q = schur(u, output="complex")
    theta = np.angle(np.diag(T))
    return (Q * np.exp(1j * t * theta)) @ Q.conj().T


def rotation(t: float, n: int, sign: int = 1) -> np.ndarray:
    """``[[cos t, -sign sin t], [sign sin t, cos t]] (x) 1_n``."""
    c, s = np.cos(t), np.sin(t)
    return np.kron(np.array([[c, -sign * s], [sign * s, c]]), np.eye(n)).astype(np.complex128)
