"""Almost-commuting idempotent pairs and invertibles, with certified homotopies.

An even cycle is a pair ``(p, q)`` of idempotents whose scalar parts have the
same rank; an odd cycle is an invertible ``u``.  Both are measured against a
:class:`ControlData` ``(X, kappa, eps)``: norms at most ``kappa`` and
commutators with every ``x`` in ``X`` below ``eps``.

Path components are never decided.  A path is witnessed by a
:class:`HomotopyCertificate`: a list of samples that all validate at a stated
relaxation, and consecutive steps smaller than the sample's safe radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MatrixError, StepSizeError, ValidationError
from .idempotents import associated_projection, idempotent_defect, polar_retract
from .matcore import (
    AugMatrix,
    adjoint,
    block_sum,
    comm_norm,
    hermitian_function,
    op_norm,
    rotation,
    unitary_power,
)

STRICT_SLACK = 1e-12
NORM_SLACK = 1e-12
IDEMPOTENT_TOL = 1e-9
CLASS_GUARD = 0.1
LOOP_SAMPLES = 65
MAX_SAMPLES = 4097


@dataclass(frozen=True, eq=False)
class ControlData:
    """Test operators ``X`` (contractions), norm budget and commutator budget."""

    X: Tuple[AugMatrix, ...]
    kappa: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(self.X))
        if self.kappa < 1:
            raise MatrixError(f"kappa must be >= 1, got {self.kappa}")
        if not self.eps > 0:
            raise MatrixError(f"eps must be > 0, got {self.eps}")
        for i, x in enumerate(self.X):
            nx = op_norm(x)
            if nx > 1 + 1e-12:
                raise MatrixError(f"test operator {i} has norm {nx:.6g} > 1")

    def relaxed(self, kappa: float, eps: float) -> "ControlData":
        return ControlData(self.X, kappa, eps)

    def with_X(self, X: Sequence[AugMatrix]) -> "ControlData":
        return ControlData(tuple(X), self.kappa, self.eps)


def self_adjoint_closure(X: Sequence[AugMatrix], tol: float = 1e-14) -> Tuple[AugMatrix, ...]:
    """``X`` together with the adjoints of its non-self-adjoint members."""
    out = list(X)
    for x in X:
        if op_norm(x - x.H) > tol:
            out.append(x.H)
    return tuple(out)


# cycles ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvenCycle:
    p: AugMatrix
    q: AugMatrix

    def __post_init__(self):
        if (self.p.n, self.p.N) != (self.q.n, self.q.N):
            raise MatrixError("p and q must have matching shapes")

    @property
    def n(self) -> int:
        return self.p.n

    @property
    def N(self) -> int:
        return self.p.N


@dataclass(frozen=True, eq=False)
class OddCycle:
    u: AugMatrix
    u_inv: AugMatrix = None

    def __post_init__(self):
        if self.u_inv is None:
            object.__setattr__(self, "u_inv", self.u.inv())
        err = op_norm(self.u @ self.u_inv - 1)
        if err > 1e-9:
            raise ValidationError(f"u_inv is not the inverse of u (error {err:.3g})")

    @property
    def n(self) -> int:
        return self.u.n

    @property
    def N(self) -> int:
        return self.u.N


Cycle = Union[EvenCycle, OddCycle]


@dataclass(frozen=True)
class LoopCycle:
    """Sampled loop on a uniform grid of ``[0, 1]``."""

    samples: Tuple[AugMatrix, ...]
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.kind not in ("even", "odd"):
            raise ValueError("kind must be 'even' or 'odd'")

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.samples))


# validation -----------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound - self.measured


@dataclass(frozen=True)
class ValidationReport:
    checks: Tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def require(self, what: str = "cycle") -> "ValidationReport":
        if not self.passed:
            bad = ", ".join(f"{c.name}: {c.measured:.6g} vs {c.bound:.6g}" for c in self.failures())
            raise ValidationError(f"{what} failed validation ({bad})", report=self)
        return self


def max_comm(a: AugMatrix, X: Sequence[AugMatrix]) -> float:
    return max((comm_norm(a, x) for x in X), default=0.0)


def _norm_check(name, value, kappa):
    return Check(name, value, kappa, value <= kappa + NORM_SLACK * max(1.0, kappa))


def _comm_check(name, value, eps):
    return Check(name, value, eps, value <= eps - STRICT_SLACK)


def k0_class(p: AugMatrix) -> int:
    """Rank of the scalar idempotent ``sigma(p)`` via its associated projection."""
    r = associated_projection(p.scalar).r
    tr = float(np.trace(r).real)
    k = int(round(tr))
    if abs(tr - k) >= CLASS_GUARD:
        raise ValidationError(f"trace {tr:.6g} of the scalar projection is not near an integer")
    return k


def validate_even(c: EvenCycle, ctrl: ControlData) -> ValidationReport:
    checks = [
        Check("idempotent_p", idempotent_defect(c.p), IDEMPOTENT_TOL,
              idempotent_defect(c.p) <= IDEMPOTENT_TOL),
        Check("idempotent_q", idempotent_defect(c.q), IDEMPOTENT_TOL,
              idempotent_defect(c.q) <= IDEMPOTENT_TOL),
        _norm_check("norm_p", op_norm(c.p), ctrl.kappa),
        _norm_check("norm_q", op_norm(c.q), ctrl.kappa),
        _comm_check("comm_p", max_comm(c.p, ctrl.X), ctrl.eps),
        _comm_check("comm_q", max_comm(c.q, ctrl.X), ctrl.eps),
    ]
    try:
        kp, kq = k0_class(c.p), k0_class(c.q)
        checks.append(Check("class", float(abs(kp - kq)), 0.0, kp == kq))
    except ValidationError:
        checks.append(Check("class", float("inf"), 0.0, False))
    return ValidationReport(tuple(checks))


def validate_odd(c: OddCycle, ctrl: ControlData) -> ValidationReport:
    return ValidationReport((
        _norm_check("norm_u", op_norm(c.u), ctrl.kappa),
        _norm_check("norm_u_inv", op_norm(c.u_inv), ctrl.kappa),
        _comm_check("comm_u", max_comm(c.u, ctrl.X), ctrl.eps),
        _comm_check("comm_u_inv", max_comm(c.u_inv, ctrl.X), ctrl.eps),
    ))


def validate(c: Cycle, ctrl: ControlData) -> ValidationReport:
    return validate_even(c, ctrl) if isinstance(c, EvenCycle) else validate_odd(c, ctrl)


# partial order --------------------------------------------------------------

def param_leq(a: ControlData, b: ControlData) -> bool:
    """``(X, kappa, eps) <= (Y, lam, delta)``.

    Holds when ``delta <= eps``, ``lam <= kappa`` and every ``x`` has some
    ``y`` with ``||x - y|| <= (eps - delta) / (2 lam)``.
    """
    if b.eps > a.eps or b.kappa > a.kappa:
        return False
    radius = (a.eps - b.eps) / (2 * b.kappa)
    for x in a.X:
        near = False
        for y in b.X:
            if (x.n, x.N) == (y.n, y.N) and op_norm(x - y) <= radius:
                near = True
                break
        if not near:
            return False
    return True


def forget_control(c: Cycle, source: ControlData, target: ControlData) -> Cycle:
    """Regard a cycle valid at ``source`` as a cycle at the weaker ``target``."""
    if not param_leq(target, source):
        raise ValidationError("forget_control needs target <= source in the control order")
    validate(c, source).require("cycle at source control")
    validate(c, target).require("cycle at target control")
    return c


# basic operations -----------------------------------------------------------

def add_even(c1: EvenCycle, c2: EvenCycle) -> EvenCycle:
    return EvenCycle(block_sum(c1.p, c2.p), block_sum(c1.q, c2.q))


def add_odd(c1: OddCycle, c2: OddCycle) -> OddCycle:
    return OddCycle(block_sum(c1.u, c2.u), block_sum(c1.u_inv, c2.u_inv))


def _pad(a: AugMatrix, m: int) -> AugMatrix:
    N = a.N
    pad = np.diag(np.r_[np.ones(m), np.zeros(m)])
    return block_sum(a, AugMatrix.from_scalar(pad, N))


def stabilize(c: EvenCycle, m: int) -> EvenCycle:
    """``(p + 1_m + 0_m, q + 1_m + 0_m)`` as block sums."""
    if m == 0:
        return c
    return EvenCycle(_pad(c.p, m), _pad(c.q, m))


def scalar_aug(s, N: int) -> AugMatrix:
    return AugMatrix.from_scalar(s, N)


def conj(g: AugMatrix, a: AugMatrix, g_inv: Optional[AugMatrix] = None) -> AugMatrix:
    return g @ a @ (g.inv() if g_inv is None else g_inv)


# homotopy certificates ------------------------------------------------------

def safe_step_radius(c: Cycle, ctrl: ControlData) -> float:
    """``min(eps - max||[p,x]||, eps - max||[q,x]||) / 4`` capped at ``1/2``."""
    if isinstance(c, EvenCycle):
        worst = max(max_comm(c.p, ctrl.X), max_comm(c.q, ctrl.X))
    else:
        worst = max(max_comm(c.u, ctrl.X), max_comm(c.u_inv, ctrl.X))
    delta = min(0.25 * (ctrl.eps - worst), 0.5)
    if delta <= 0:
        raise ValidationError(f"non-positive safe radius {delta:.3g}: cycle sits on the boundary")
    return delta


def step_size(a: Cycle, b: Cycle) -> float:
    if isinstance(a, EvenCycle):
        return max(op_norm(a.p - b.p), op_norm(a.q - b.q))
    return max(op_norm(a.u - b.u), op_norm(a.u_inv - b.u_inv))


@dataclass(frozen=True, eq=False)
class HomotopyCertificate:
    samples: Tuple[Cycle, ...]
    ctrl: ControlData
    step_radii: Tuple[float, ...]
    relaxation: Tuple[float, float]
    ts: Tuple[float, ...] = ()

    @property
    def relaxed_ctrl(self) -> ControlData:
        return self.ctrl.relaxed(*self.relaxation)

    @property
    def start(self) -> Cycle:
        return self.samples[0]

    @property
    def end(self) -> Cycle:
        return self.samples[-1]


def certify_path(samples: Sequence[Cycle], ctrl: ControlData,
                 relaxation: Optional[Tuple[float, float]] = None,
                 ts: Sequence[float] = ()) -> HomotopyCertificate:
    """Validate every sample at the relaxation and every step against its radius."""
    if not samples:
        raise ValueError("a certificate needs at least one sample")
    relaxation = (ctrl.kappa, ctrl.eps) if relaxation is None else tuple(relaxation)
    rc = ctrl.relaxed(*relaxation)
    radii = []
    for j, c in enumerate(samples):
        validate(c, rc).require(f"sample {j}")
        radii.append(safe_step_radius(c, rc))
    for j in range(len(samples) - 1):
        s = step_size(samples[j], samples[j + 1])
        if s >= radii[j]:
            raise StepSizeError(f"step {j} has size {s:.3g} >= safe radius {radii[j]:.3g}")
    return HomotopyCertificate(tuple(samples), ctrl, tuple(radii), relaxation, tuple(ts))


@dataclass(frozen=True)
class CertificateReport:
    valid: bool
    n_samples: int
    relaxation: Tuple[float, float]
    worst_step_ratio: float
    worst_norm: float
    worst_comm: float
    problems: Tuple[str, ...] = ()


def check_certificate(cert: HomotopyCertificate) -> CertificateReport:
    """Re-derive validity from the raw samples, ignoring stored radii."""
    rc = cert.relaxed_ctrl
    problems = []
    worst_norm = worst_comm = worst_ratio = 0.0
    radii = []
    for j, c in enumerate(cert.samples):
        rep = validate(c, rc)
        for chk in rep.checks:
            if chk.name.startswith("norm"):
                worst_norm = max(worst_norm, chk.measured)
            if chk.name.startswith("comm"):
                worst_comm = max(worst_comm, chk.measured)
        if not rep.passed:
            problems.append(f"sample {j}: " + ", ".join(c.name for c in rep.failures()))
        try:
            radii.append(safe_step_radius(c, rc))
        except ValidationError:
            radii.append(0.0)
    for j in range(len(cert.samples) - 1):
        s = step_size(cert.samples[j], cert.samples[j + 1])
        ratio = s / radii[j] if radii[j] > 0 else np.inf
        worst_ratio = max(worst_ratio, ratio)
        if ratio >= 1:
            problems.append(f"step {j}: size {s:.3g} vs radius {radii[j]:.3g}")
    if len(cert.step_radii) != len(cert.samples):
        problems.append("stored radii do not match the sample count")
    return CertificateReport(not problems, len(cert.samples), tuple(cert.relaxation),
                             worst_ratio, worst_norm, worst_comm, tuple(problems))


def concat_certificates(certs: Sequence[HomotopyCertificate]) -> HomotopyCertificate:
    """Join paths end to end; the relaxation is the loosest of the parts."""
    kappa = max(c.relaxation[0] for c in certs)
    eps = max(c.relaxation[1] for c in certs)
    samples: List[Cycle] = []
    for c in certs:
        samples.extend(c.samples if not samples else c.samples[1:])
    return certify_path(samples, certs[0].ctrl, (kappa, eps))


def sample_path(fn: Callable[[float], Cycle], t0: float, t1: float, ctrl: ControlData,
                n0: int = 9, fill: float = 0.8,
                max_samples: int = MAX_SAMPLES) -> Tuple[np.ndarray, List[Cycle]]:
    """Sample ``fn`` on ``[t0, t1]``, bisecting until every step is inside its radius."""
    ts = list(np.linspace(t0, t1, n0))
    cs = [fn(t) for t in ts]
    rad = [safe_step_radius(c, ctrl) for c in cs]
    j = 0
    while j < len(ts) - 1:
        if step_size(cs[j], cs[j + 1]) < fill * rad[j]:
            j += 1
            continue
        if len(ts) >= max_samples:
            raise StepSizeError(f"path needs more than {max_samples} samples")
        tm = 0.5 * (ts[j] + ts[j + 1])
        cm = fn(tm)
        ts.insert(j + 1, tm)
        cs.insert(j + 1, cm)
        rad.insert(j + 1, safe_step_radius(cm, ctrl))
    return np.array(ts), cs


def certified_path(fn: Callable[[float], Cycle], t0: float, t1: float, ctrl: ControlData,
                   relaxation: Optional[Tuple[float, float]] = None,
                   **kw) -> HomotopyCertificate:
    relaxation = (ctrl.kappa, ctrl.eps) if relaxation is None else tuple(relaxation)
    ts, cs = sample_path(fn, t0, t1, ctrl.relaxed(*relaxation), **kw)
    return certify_path(cs, ctrl, relaxation, ts)


# group-law witnesses --------------------------------------------------------

def inverse_even(c: EvenCycle, ctrl: ControlData) -> Tuple[EvenCycle, HomotopyCertificate]:
    """Return ``(q, p)`` and the rotation path ``(p+q, R_t (q+p) R_t*)``.

    The path runs over ``t`` in ``[0, pi/2]`` and ends at ``(p+q, p+q)``.
    """
    validate_even(c, ctrl).require()
    pq = block_sum(c.p, c.q)
    qp = block_sum(c.q, c.p)
    n, N = c.n, c.N

    def at(t):
        R = scalar_aug(rotation(t, n, sign=-1), N)
        return EvenCycle(pq, R @ qp @ R.H)

    return EvenCycle(c.q, c.p), certified_path(at, 0.0, np.pi / 2, ctrl)


def odd_doubling_path(c: OddCycle, t: float) -> OddCycle:
    """``(u+1) R(t) (1+u^-1) R(t)^T``, from ``u + u^-1`` at 0 to ``1`` at ``pi/2``."""
    n, N = c.n, c.N
    one = AugMatrix.identity(n, N)
    R = scalar_aug(rotation(t, n), N)
    a, a_inv = block_sum(c.u, one), block_sum(c.u_inv, one)
    b, b_inv = block_sum(one, c.u_inv), block_sum(one, c.u)
    return OddCycle(a @ R @ b @ R.H, R @ b_inv @ R.H @ a_inv)


def inverse_odd(c: OddCycle, ctrl: ControlData) -> Tuple[OddCycle, HomotopyCertificate]:
    """Return ``u^-1`` and the doubling path certified at ``(2 kappa, eps)``."""
    validate_odd(c, ctrl).require()
    cert = certified_path(lambda t: odd_doubling_path(c, t), 0.0, np.pi / 2, ctrl,
                          (2 * ctrl.kappa, ctrl.eps))
    return OddCycle(c.u_inv, c.u), cert


# normalization --------------------------------------------------------------

def _rank_frame(s: np.ndarray) -> Tuple[np.ndarray, int]:
    """Unitary ``U`` with ``U s U* = 1_l + 0`` for a scalar projection ``s``."""
    h = 0.5 * (s + s.conj().T)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    l = int(np.sum(w > 0.5))
    return v[:, order].conj().T, l


def _unit_form(l: int, n: int) -> np.ndarray:
    return np.diag(np.r_[np.ones(l), np.zeros(n - l)]).astype(np.complex128)


def _snap_scalar(a: AugMatrix, s: np.ndarray, tol: float = 1e-9) -> AugMatrix:
    err = float(np.max(np.abs(a.scalar - s)))
    if err > tol:
        raise ValidationError(f"scalar part is {err:.3g} away from its normal form")
    return AugMatrix.from_dense(a.dense(), s)


def is_unit_form(c: EvenCycle, tol: float = 0.0) -> bool:
    l = int(round(float(np.trace(c.p.scalar).real)))
    target = _unit_form(l, c.n)
    return (np.max(np.abs(c.p.scalar - target)) <= tol
            and np.max(np.abs(c.q.scalar - target)) <= tol
            and idempotent_defect(c.p) <= IDEMPOTENT_TOL
            and op_norm(c.p - c.p.H) <= 1e-9 and op_norm(c.q - c.q.H) <= 1e-9)


def normalize_even(c: EvenCycle, ctrl: ControlData) -> Tuple[EvenCycle, HomotopyCertificate]:
    """Connect ``c`` to a projection pair with scalar parts ``1_l + 0``.

    Idempotents are first pushed to their associated projections along the
    straight line, then both entries are rotated by scalar unitaries.  The
    path is certified at ``(kappa, 4 eps)``.
    """
    validate_even(c, ctrl).require()
    relax = (ctrl.kappa, 4 * ctrl.eps)
    if is_unit_form(c):
        return c, certify_path([c], ctrl, relax)
    certs = []
    p, q = c.p, c.q
    if op_norm(p - p.H) > 1e-12 or op_norm(q - q.H) > 1e-12:
        r, s = associated_projection(p).r, associated_projection(q).r

        def line(t):
            return EvenCycle((1 - t) * p + t * r, (1 - t) * q + t * s)

        certs.append(certified_path(line, 0.0, 1.0, ctrl, relax))
        p, q = r, s
    U, l = _rank_frame(p.scalar)
    V, _ = _rank_frame(q.scalar)
    N = c.N

    def turn(t):
        Ut = scalar_aug(unitary_power(U, t), N)
        Vt = scalar_aug(unitary_power(V, t), N)
        return EvenCycle(Ut @ p @ Ut.H, Vt @ q @ Vt.H)

    rot = certified_path(turn, 0.0, 1.0, ctrl, relax)
    target = _unit_form(l, c.n)
    last = rot.samples[-1]
    out = EvenCycle(_snap_scalar(last.p, target), _snap_scalar(last.q, target))
    certs.append(certify_path(list(rot.samples[:-1]) + [out], ctrl, relax))
    cert = concat_certificates(certs) if len(certs) > 1 else certs[0]
    return out, cert


def normalize_odd(c: OddCycle, ctrl: ControlData) -> Tuple[OddCycle, HomotopyCertificate]:
    """Connect ``u`` to ``w u`` with ``w = sigma(u^-1)`` so the scalar part is 1.

    ``w`` is reached from 1 by the unitary path to its polar factor followed
    by the reversed polar retraction.  The path ``w_t u`` is certified at
    ``(kappa^2, kappa eps)``.
    """
    validate_odd(c, ctrl).require()
    relax = (ctrl.kappa ** 2, ctrl.kappa * ctrl.eps)
    n, N = c.n, c.N
    w = np.array(c.u_inv.scalar)
    if np.max(np.abs(w - np.eye(n))) == 0.0:
        return c, certify_path([c], ctrl, relax)
    polar = polar_retract(w, 0.5)
    ww = w.conj().T @ w

    def g(t):
        # t in [0, 1]: unitary leg; t in [1, 2]: from the polar factor back to w
        if t <= 1.0:
            gt = unitary_power(polar, t)
            return gt, gt.conj().T
        s = 0.5 * (2.0 - t)
        gt = polar_retract(w, s)
        gi = hermitian_function(ww, lambda x: x ** s) @ np.linalg.inv(w)
        return gt, gi

    def at(t):
        gt, gi = g(t)
        G, Gi = scalar_aug(gt, N), scalar_aug(gi, N)
        return OddCycle(G @ c.u, c.u_inv @ Gi)

    path = certified_path(at, 0.0, 2.0, ctrl, relax)
    last = path.samples[-1]
    one = np.eye(n, dtype=np.complex128)
    out = OddCycle(_snap_scalar(last.u, one), _snap_scalar(last.u_inv, one))
    cert = certify_path(list(path.samples[:-1]) + [out], ctrl, relax, path.ts)
    return out, cert


# loops ----------------------------------------------------------------------

@dataclass(frozen=True)
class LoopReport:
    endpoint_gap: float
    endpoint_finite: float
    scalar_drift: float
    passed: bool


def check_loop(loop: LoopCycle, tol: float = 1e-9) -> LoopReport:
    s = loop.samples
    gap = op_norm(s[0] - s[-1])
    fin = max(float(np.max(np.abs(s[0].finite))), float(np.max(np.abs(s[-1].finite))))
    drift = max(float(np.max(np.abs(a.scalar - s[0].scalar))) for a in s)
    return LoopReport(gap, fin, drift, gap <= tol and fin <= tol and drift <= tol)
