"""Creation operators on a truncated full Fock space and level-function experiments.

Basis words are tuples of letters ``1..n``; level ``l`` holds the ``n^l`` words
of length ``l`` and the truncation keeps levels ``0..L-1``.  ``T_i`` prepends
the letter ``i`` and kills the top level.

Two routes compute the same quantities.  The sparse route builds the
operators as ``scipy.sparse`` matrices and is limited by a dimension cap.  The
reduced route uses that every word in the ``T_i`` and ``T_i*`` reduces to
``T_a T_b*`` (or 0), a partial permutation of the basis, so an operator of the
form ``D T`` with ``D`` acting by a scalar on each level has norm equal to the
largest weight over the columns that survive.  That model works at any depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionCapError, DomainError

FOCK_DIM_CAP = 20000
Word = Tuple[Tuple[int, bool], ...]


def fock_dimension(n: int, L: int) -> int:
    return (n ** L - 1) // (n - 1)


@dataclass(frozen=True)
class FockSpace:
    n: int
    L: int
    cap: int = FOCK_DIM_CAP

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("alphabet size must be at least 2")
        if self.L < 1:
            raise ValueError("need at least one level")
        dim = fock_dimension(self.n, self.L)
        if dim > self.cap:
            raise DimensionCapError(
                f"Fock space n={self.n}, L={self.L} needs dimension {dim} (about n^L = "
                f"{self.n ** self.L}); cap is {self.cap}", required=dim, cap=self.cap)

    @property
    def dim(self) -> int:
        return fock_dimension(self.n, self.L)

    @property
    def level_offsets(self) -> np.ndarray:
        return np.array([fock_dimension(self.n, l) for l in range(self.L + 1)])

    def index(self, word: Sequence[int]) -> int:
        v = 0
        for c in word:
            if not 1 <= c <= self.n:
                raise ValueError(f"letter {c} outside 1..{self.n}")
            v = v * self.n + (c - 1)
        if len(word) >= self.L:
            raise ValueError("word longer than the truncation")
        return fock_dimension(self.n, len(word)) + v

    def word(self, idx: int) -> Tuple[int, ...]:
        off = self.level_offsets
        l = int(np.searchsorted(off, idx, side="right") - 1)
        v = idx - off[l]
        out = []
        for _ in range(l):
            out.append(v % self.n + 1)
            v //= self.n
        return tuple(reversed(out))

    def levels(self) -> np.ndarray:
        """Level of every basis position."""
        off = self.level_offsets
        return np.repeat(np.arange(self.L), np.diff(off))


def cuntz_gen(f: FockSpace, i: int) -> sp.csr_matrix:
    """``T_i e_w = e_{i w}``, zero on the top level."""
    if not 1 <= i <= f.n:
        raise ValueError(f"generator index {i} outside 1..{f.n}")
    rows, cols = [], []
    off = f.level_offsets
    for l in range(f.L - 1):
        m = f.n ** l
        v = np.arange(m)
        cols.append(off[l] + v)
        rows.append(off[l + 1] + (i - 1) * m + v)
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(f.dim, f.dim))


def parse_word(text: str) -> Word:
    """``"T1 T2*"`` or ``"T1T2*"`` to ``((1, False), (2, True))``; empty string is 1."""
    out = []
    s = text.replace(" ", "")
    j = 0
    while j < len(s):
        if s[j] != "T":
            raise ValueError(f"bad word {text!r}")
        j += 1
        k = j
        while k < len(s) and s[k].isdigit():
            k += 1
        if k == j:
            raise ValueError(f"bad word {text!r}")
        idx = int(s[j:k])
        star = k < len(s) and s[k] == "*"
        out.append((idx, star))
        j = k + 1 if star else k
    return tuple(out)


def word_name(word: Word) -> str:
    return "".join(f"T{i}{'*' if s else ''}" for i, s in word) or "1"


def word_operator(f: FockSpace, word: Word) -> sp.csr_matrix:
    """Product ``S_1 ... S_m`` of truncated ``T_i`` and ``T_i*``."""
    out = sp.identity(f.dim, format="csr")
    for i, star in word:
        t = cuntz_gen(f, i)
        out = out @ (t.T.tocsr() if star else t)
    return out.tocsr()


def all_words(n: int, max_len: int) -> List[Word]:
    letters = [(i, s) for i in range(1, n + 1) for s in (False, True)]
    words: List[Word] = [()]
    layer: List[Word] = [()]
    for _ in range(max_len):
        layer = [w + (x,) for w in layer for x in letters]
        words.extend(layer)
    return words


# ---------------------------------------------------------------------------
# level functions


def profile_f(x):
    """Plateau bump: 0, up on ``[1/6, 2/6]``, 1, down on ``[4/6, 5/6]``, 0.

    Accepts a float, a ``Fraction`` (exact result) or an array.
    """
    if isinstance(x, Fraction):
        if x < 0 or x > 1:
            raise DomainError(f"x={x} outside [0, 1]", value=float(x))
        if x <= Fraction(1, 6) or x >= Fraction(5, 6):
            return Fraction(0)
        if x < Fraction(2, 6):
            return 6 * x - 1
        if x <= Fraction(4, 6):
            return Fraction(1)
        return 5 - 6 * x
    a = np.asarray(x, dtype=float)
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError("argument outside [0, 1]", value=float(a.min() if a.min() < 0 else a.max()))
    y = np.clip(np.minimum(6 * a - 1, 5 - 6 * a), 0.0, 1.0)
    return float(y) if y.ndim == 0 else y


@dataclass(frozen=True)
class LevelOperator:
    """Scalar ``values[l]`` on level ``l``; values are exact rationals."""

    values: Tuple[Fraction, ...]

    def __post_init__(self):
        if any(v < 0 or v > 1 for v in self.values):
            raise ValueError("level values must lie in [0, 1]")

    @property
    def array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def on(self, f: FockSpace) -> sp.dia_matrix:
        vals = self.array[: f.L]
        return sp.diags(np.repeat(vals, np.diff(f.level_offsets)), format="csr")


def half_up(k: int) -> int:
    return -(-k // 2)


def min_depth(k: int) -> int:
    return 2 * k + half_up(k) + 2


def make_h(L: int, k: int, which: int) -> LevelOperator:
    """``h_0(l) = f(((l-k) mod k)/k)`` for ``l >= k``; ``h_1 = 1 - h_0`` from ``k + ceil(k/2)``."""
    if k < 2 or 2 * k + half_up(k) >= L:
        raise DomainError(f"depth L={L} insufficient for k={k}: need L > {2 * k + half_up(k)}",
                          value=L)
    h0 = [profile_f(Fraction((l - k) % k, k)) if l >= k else Fraction(0) for l in range(L)]
    if which == 0:
        return LevelOperator(tuple(h0))
    if which == 1:
        s = k + half_up(k)
        return LevelOperator(tuple(1 - v if l >= s else Fraction(0) for l, v in enumerate(h0)))
    raise ValueError("which must be 0 or 1")


@dataclass(frozen=True)
class BlockStructure:
    """Consecutive level blocks of length ``period`` starting at ``offset``."""

    offset: int
    period: int

    @classmethod
    def plain(cls, k: int) -> "BlockStructure":
        return cls(k, k)

    @classmethod
    def shifted(cls, k: int) -> "BlockStructure":
        return cls(k + half_up(k), k)

    def block(self, l: int) -> Optional[int]:
        return None if l < self.offset else (l - self.offset) // self.period

    def ranges(self, L: int) -> List[Tuple[int, int]]:
        out = []
        a = self.offset
        while a < L:
            out.append((a, min(a + self.period, L) - 1))
            a += self.period
        return out

    def same(self, l1: int, l2: int) -> bool:
        b = self.block(l1)
        return b is not None and b == self.block(l2)


def structure(k: int, which) -> Tuple[BlockStructure, ...]:
    if which == 0:
        return (BlockStructure.plain(k),)
    if which == 1:
        return (BlockStructure.shifted(k),)
    if which == "both":
        return (BlockStructure.plain(k), BlockStructure.shifted(k))
    raise ValueError("which must be 0, 1 or 'both'")


def block_pinch(f: FockSpace, bs: Sequence[BlockStructure], M) -> sp.csr_matrix:
    """Keep the entries whose row and column levels share a block in every structure."""
    if isinstance(bs, BlockStructure):
        bs = (bs,)
    M = sp.coo_matrix(M)
    lev = f.levels()
    lr, lc = lev[M.row], lev[M.col]
    keep = np.ones(len(M.data), dtype=bool)
    for b in bs:
        br = np.where(lr >= b.offset, (lr - b.offset) // b.period, -1)
        bc = np.where(lc >= b.offset, (lc - b.offset) // b.period, -2)
        keep &= br == bc
    return sp.csr_matrix((M.data[keep], (M.row[keep], M.col[keep])), shape=M.shape)


def compress(f: FockSpace, M, top: Optional[int] = None) -> np.ndarray:
    """Dense compression to levels ``<= top`` (default ``L - 2``)."""
    top = f.L - 2 if top is None else top
    m = f.level_offsets[top + 1]
    return np.asarray(sp.csr_matrix(M)[:m, :m].todense())


def dense_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


# ---------------------------------------------------------------------------
# reduced model


def reduce_word(word: Word) -> Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """``(a, b)`` with ``word = T_a T_b*`` on the full Fock space, or ``None`` for 0."""
    a: List[int] = []
    b: List[int] = []
    for i, star in reversed(word):
        if not star:
            a.insert(0, i)
        elif a:
            if a[0] != i:
                return None
            a.pop(0)
        else:
            b.append(i)
    return tuple(a), tuple(b)


def word_level_map(word: Word, l: int, L: int) -> Optional[int]:
    """Output level of a column at level ``l``, or ``None`` when truncation kills it."""
    for i, star in reversed(word):
        if star:
            if l == 0:
                return None
            l -= 1
        else:
            if l >= L - 1:
                return None
            l += 1
    return l


def reduced_norm(word: Word, weight, L: int, top: Optional[int] = None) -> float:
    """``||D T||`` compressed to levels ``<= top`` where ``D`` has weight ``weight(l_out, l_in)``."""
    top = L - 2 if top is None else top
    red = reduce_word(word)
    if red is None:
        return 0.0
    a, b = red
    best = 0.0
    for l in range(len(b), top + 1):
        out = word_level_map(word, l, L)
        if out is None or out > top:
            continue
        best = max(best, abs(float(weight(out, l))))
    return best


def level_comm(h: LevelOperator, L: int, top: Optional[int] = None) -> float:
    """``||[h, T_i]||`` on levels ``<= top``: the largest step ``|h(l+1) - h(l)|``."""
    top = L - 2 if top is None else top
    v = h.values
    steps = [abs(v[l + 1] - v[l]) for l in range(top)]
    return float(max(steps, default=Fraction(0)))


def pinch_distance(h: LevelOperator, word: Word, bs: Sequence[BlockStructure], L: int,
                   top: Optional[int] = None) -> float:
    """``||h T - pinch(h T)||`` through the reduced model."""
    vals = h.values

    def weight(lo, li):
        kept = all(b.same(lo, li) for b in bs)
        return 0 if kept else vals[lo]

    return reduced_norm(word, weight, L, top)


def product_level(*hs: LevelOperator) -> LevelOperator:
    vals = hs[0].values
    for h in hs[1:]:
        vals = tuple(a * b for a, b in zip(vals, h.values))
    return LevelOperator(vals)


def unit_defect(h0: LevelOperator, h1: LevelOperator, start: int, top: int) -> Fraction:
    """``max |h0 + h1 - 1|`` over levels ``start..top``, in exact arithmetic."""
    return max((abs(h0.values[l] + h1.values[l] - 1) for l in range(start, top + 1)),
               default=Fraction(0))


def sparse_pinch_distance(f: FockSpace, h: LevelOperator, word: Word,
                          bs: Sequence[BlockStructure]) -> float:
    M = h.on(f) @ word_operator(f, word)
    return dense_norm(compress(f, M - block_pinch(f, bs, M)))


def sparse_comm(f: FockSpace, h: LevelOperator, i: int) -> float:
    H, T = h.on(f), cuntz_gen(f, i)
    return dense_norm(compress(f, H @ T - T @ H))


# ---------------------------------------------------------------------------
# decay experiment


@dataclass(frozen=True)
class DecayRow:
    n: int
    k: int
    L: int
    quantity: str
    value: float


def decay_experiment(n: int, k_list: Iterable[int], L_rule=min_depth,
                     words: Optional[Sequence[Word]] = None,
                     sparse: bool = False, cap: int = FOCK_DIM_CAP) -> List[DecayRow]:
    """Commutator, unit-defect and pinch-distance rows for each ``k``.

    ``sparse=True`` builds the operators explicitly (and enforces the
    dimension cap); otherwise the reduced model is used.
    """
    words = all_words(n, 2) if words is None else list(words)
    rows: List[DecayRow] = []
    for k in k_list:
        L = L_rule(k)
        if L < min_depth(k):
            raise DomainError(f"depth rule gives L={L} < {min_depth(k)} for k={k}", value=L)
        h0, h1 = make_h(L, k, 0), make_h(L, k, 1)
        h01 = product_level(h0, h1)
        top = L - 2
        b0, b01 = structure(k, 0), structure(k, "both")
        if sparse:
            f = FockSpace(n, L, cap)
            c0 = max(sparse_comm(f, h0, i) for i in range(1, n + 1))
            c1 = max(sparse_comm(f, h1, i) for i in range(1, n + 1))
        else:
            c0, c1 = level_comm(h0, L), level_comm(h1, L)

        def add(q, v):
            rows.append(DecayRow(n, k, L, q, float(v)))

        add("comm_h0", c0)
        add("comm_h1", c1)
        add("k_comm_h0", k * c0)
        add("unit_defect", unit_defect(h0, h1, k + half_up(k), top))
        for w in words:
            name = word_name(w)
            if sparse:
                d0 = sparse_pinch_distance(f, h0, w, b0)
                d01 = sparse_pinch_distance(f, h01, w, b01)
            else:
                d0 = pinch_distance(h0, w, b0, L)
                d01 = pinch_distance(h01, w, b01, L)
            add(f"pinch0:{name}", d0)
            add(f"pinch01:{name}", d01)
    return rows


def fitted_exponents(rows: Sequence[DecayRow]) -> Dict[str, Optional[float]]:
    """Slope of ``log value`` against ``log k`` per quantity (positive values only)."""
    by: Dict[str, List[Tuple[int, float]]] = {}
    for r in rows:
        by.setdefault(r.quantity, []).append((r.k, r.value))
    out: Dict[str, Optional[float]] = {}
    for q, pts in by.items():
        pts = [(k, v) for k, v in pts if v > 0]
        if len(pts) < 2 or len({k for k, _ in pts}) < 2:
            out[q] = None
            continue
        ks, vs = zip(*pts)
        out[q] = float(np.polyfit(np.log(ks), np.log(vs), 1)[0])
    return out


def cross_check(n: int, L: int, k: int, words: Optional[Sequence[Word]] = None,
                levels: Optional[Sequence[LevelOperator]] = None) -> float:
    """Largest gap between the sparse and reduced routes at a small depth."""
    f = FockSpace(n, L)
    words = all_words(n, 2) if words is None else list(words)
    if levels is None:
        levels = [make_h(L, k, 0), make_h(L, k, 1)]
    worst = 0.0
    for h in levels:
        for i in range(1, n + 1):
            worst = max(worst, abs(sparse_comm(f, h, i) - level_comm(h, L)))
        for which in (0, 1, "both"):
            bs = structure(k, which)
            for w in words:
                worst = max(worst, abs(sparse_pinch_distance(f, h, w, bs)
                                       - pinch_distance(h, w, bs, L)))
    return worst
