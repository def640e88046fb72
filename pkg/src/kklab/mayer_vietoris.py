"""Boundary map for a cut element, its exactness pipeline, and the odd-loop bridge."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cycles import (
    LOOP_SAMPLES,
    Check,
    ControlData,
    EvenCycle,
    HomotopyCertificate,
    LoopCycle,
    OddCycle,
    ValidationReport,
    certified_path,
    max_comm,
    normalize_odd,
    self_adjoint_closure,
    validate_odd,
)
from .errors import DomainError, ValidationError
from .homotopy import sim_to_homotopy
from .matcore import (
    AugMatrix,
    amplify,
    block_matrix,
    block_sum,
    op_norm,
    rotation,
    spectrum,
)

SCALAR_TOL = 1e-12


def _one(n, N):
    return AugMatrix.identity(n, N)


def _unit_projection(n: int, N: int) -> AugMatrix:
    """``1_n + 0_n`` as a scalar augmented matrix."""
    return block_sum(_one(n, N), AugMatrix.zeros(n, N))


def _scalar_dev(a: AugMatrix, s) -> float:
    return float(np.max(np.abs(a.scalar - s)))


# ---------------------------------------------------------------------------
# cut elements


@dataclass(frozen=True, eq=False)
class CutElement:
    """Positive contraction ``h`` acting diagonally on matrix entries."""

    h: AugMatrix
    comm: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.h.n != 1:
            raise ValueError("a cut element acts on one copy of the base space")
        herm = op_norm(self.h - self.h.H)
        if herm > 1e-12:
            raise DomainError(f"h is not self-adjoint (defect {herm:.3g})", value=herm)
        sp = spectrum(self.h).real
        if sp.min() < -1e-9 or sp.max() > 1 + 1e-9:
            raise DomainError(f"spectrum of h leaves [0, 1]: [{sp.min():.3g}, {sp.max():.3g}]",
                              value=float(sp.min() if sp.min() < 0 else sp.max()))

    def on(self, n: int) -> AugMatrix:
        return amplify(self.h, n)

    def family(self, X: Sequence[AugMatrix]) -> Tuple[AugMatrix, ...]:
        """``h(1 - h) X`` together with ``h``."""
        one = AugMatrix.identity(1, self.h.N)
        g = self.h @ (one - self.h)
        return tuple(g @ x for x in X) + (self.h,)


def cut_element(h: AugMatrix, X: Sequence[AugMatrix] = ()) -> CutElement:
    return CutElement(h, tuple(op_norm(h @ x - x @ h) for x in X))


# ---------------------------------------------------------------------------
# c, d, v


@dataclass(frozen=True, eq=False)
class BoundaryWitness:
    u: OddCycle
    c: AugMatrix
    d: AugMatrix
    v: AugMatrix
    v_inv: AugMatrix
    out: EvenCycle
    kappa: float
    eps: float
    norm_v: float
    norm_v_inv: float
    norm_bound: float
    closeness: float
    closeness_bound: float
    scalar_cd: float
    scalar_dc: float
    product_error: float
    inverse_error: float


def make_cdv(u: OddCycle, h: CutElement, ctrl: Optional[ControlData] = None) -> BoundaryWitness:
    """``c = hu + (1 - h)``, ``d = hu^-1 + (1 - h)`` and the 2x2 matrix ``v``.

    ``v`` is the product of two upper unipotents around a lower one, times the
    rotation ``[[0, 1], [-1, 0]]``; the closed form is checked against it.
    ``kappa`` and ``eps`` come from ``ctrl`` when given, otherwise they are the
    measured norms and commutators with ``h``.
    """
    n, N = u.n, u.N
    one = _one(n, N)
    if _scalar_dev(u.u, np.eye(n)) > SCALAR_TOL or _scalar_dev(u.u_inv, np.eye(n)) > SCALAR_TOL:
        raise ValidationError("u must have scalar part 1")
    H = h.on(n)
    ui = u.u_inv
    c = H @ u.u + (one - H)
    d = H @ ui + (one - H)
    cd, dc = c @ d, d @ c
    zero = AugMatrix.zeros(n, N)
    v = block_matrix([[c @ (dc - 2 * one), one - cd], [dc - one, -d]])
    v_inv = block_matrix([[-d, dc - one], [one - cd, c @ (dc - 2 * one)]])
    f1 = block_matrix([[one, c], [zero, one]])
    f2 = block_matrix([[one, zero], [-d, one]])
    f4 = block_matrix([[zero, one], [-one, zero]])
    prod = f1 @ f2 @ f1 @ f4
    P = _unit_projection(n, N)
    out = EvenCycle(v @ P @ v_inv, P)

    measured_k = max(op_norm(u.u), op_norm(ui), 1.0)
    measured_e = max(op_norm(H @ u.u - u.u @ H), op_norm(H @ ui - ui @ H))
    kappa = ctrl.kappa if ctrl is not None else measured_k
    eps = ctrl.eps if ctrl is not None else measured_e
    target = H @ (one - H) @ (u.u + ui - 2 * one)
    clos = max(op_norm(cd - one - target), op_norm(dc - one - target))
    nv, nvi = op_norm(v), op_norm(v_inv)
    bound = (kappa + 2) ** 3
    if ctrl is not None and max(nv, nvi) > bound + 1e-6:
        raise ValidationError(f"||v|| = {max(nv, nvi):.6g} exceeds (kappa+2)^3 = {bound:.6g}")
    inv_err = max(op_norm(v @ v_inv - block_sum(one, one)), op_norm(v_inv - v.inv()))
    return BoundaryWitness(
        u=u, c=c, d=d, v=v, v_inv=v_inv, out=out, kappa=kappa, eps=eps,
        norm_v=nv, norm_v_inv=nvi, norm_bound=bound,
        closeness=clos, closeness_bound=(kappa + 1) * eps,
        scalar_cd=_scalar_dev(cd, np.eye(n)), scalar_dc=_scalar_dev(dc, np.eye(n)),
        product_error=op_norm(prod - v), inverse_error=inv_err,
    )


@dataclass(frozen=True, eq=False)
class BoundaryReport:
    witness: BoundaryWitness
    normalization: HomotopyCertificate
    measured_kappa: float
    measured_eps: float
    kappa_budget: float
    eps_budget: float


def boundary(w: OddCycle, h: CutElement, ctrl: ControlData) -> Tuple[EvenCycle, BoundaryReport]:
    """Even cycle ``(v (1+0) v^-1, 1+0)`` for the normalized form ``u`` of ``w``.

    ``ctrl.X`` is the base family; ``w`` is validated against ``h(1-h)X`` and
    ``h``.  The output is measured against ``X`` and ``h``.  Budgets use the
    normalized parameters ``(kappa^2, kappa eps)``.
    """
    cut_ctrl = ctrl.with_X(h.family(ctrl.X))
    validate_odd(w, cut_ctrl).require("w")
    u, cert = normalize_odd(w, cut_ctrl)
    ku, eu = ctrl.kappa ** 2, ctrl.kappa * ctrl.eps
    wit = make_cdv(u, h, cut_ctrl.relaxed(ku, eu))
    out = wit.out
    fam = self_adjoint_closure(tuple(ctrl.X) + (h.h,))
    mk = max(op_norm(out.p), op_norm(out.q))
    me = max(max_comm(out.p, fam), max_comm(out.q, fam))
    return out, BoundaryReport(wit, cert, mk, me, 3 ** 6 * ku ** 6, 2 ** 16 * ku ** 5 * eu)


# ---------------------------------------------------------------------------
# exactness


def combine_params(u_h: OddCycle, u_1h: OddCycle, p: AugMatrix, h: CutElement,
                   X: Sequence[AugMatrix] = (), Y: Sequence[AugMatrix] = ()) -> Tuple[float, float]:
    """Measured ``(nu, gamma)`` for the combination hypotheses."""
    one = _one(p.n, p.N)
    one1 = AugMatrix.identity(1, p.N)
    nu = max(op_norm(u_h.u), op_norm(u_h.u_inv), op_norm(u_1h.u), op_norm(u_1h.u_inv),
             op_norm(p), op_norm(one - p), 1.0)
    hx = [h.h @ x for x in X] + [h.h] + list(Y)
    cx = [(one1 - h.h) @ x for x in X] + [h.h] + list(Y)
    vals = [max_comm(u_h.u, hx), max_comm(u_h.u_inv, hx),
            max_comm(u_1h.u, cx), max_comm(u_1h.u_inv, cx),
            max_comm(p, list(X) + list(Y) + [h.h]),
            max((op_norm(h.h @ x - x @ h.h) for x in X), default=0.0)]
    return nu, max(vals) * (1 + 1e-9) + 1e-15


def combine_units(u_h: OddCycle, u_1h: OddCycle, p: AugMatrix, h: CutElement,
                  X: Sequence[AugMatrix] = (), Y: Sequence[AugMatrix] = (),
                  nu: Optional[float] = None, gamma: Optional[float] = None
                  ) -> Tuple[OddCycle, ValidationReport]:
    """``u = u_{1-h}(1 - p) + u_h p`` and the five estimates for it.

    ``nu`` defaults to the largest of the norms of the units, their inverses,
    ``p`` and ``1 - p``.  ``gamma`` defaults to the largest commutator of the
    inputs with ``h``, ``X`` and ``Y`` (so ``Y_h = Y_{1-h} = Y``).
    """
    n, N = p.n, p.N
    one = _one(n, N)
    H = h.on(n)
    u = u_1h.u @ (one - p) + u_h.u @ p
    try:
        u_inv = u.inv()
    except DomainError as exc:
        smin = float(np.linalg.svd(u.dense(), compute_uv=False)[-1])
        raise DomainError(f"combined unit is not invertible (smallest singular value {smin:.3g})",
                          value=smin) from exc
    if nu is None or gamma is None:
        mnu, mgamma = combine_params(u_h, u_1h, p, h, X, Y)
        nu = mnu if nu is None else nu
        gamma = mgamma if gamma is None else gamma
    one1 = AugMatrix.identity(1, N)
    hh = [h.h @ (one1 - h.h) @ x for x in X]
    checks = [
        Check("scalar_part", max(_scalar_dev(u, np.eye(n)), _scalar_dev(u_inv, np.eye(n))),
              SCALAR_TOL, False),
        Check("norm", max(op_norm(u), op_norm(u_inv)), 2 * nu ** 2, False),
        Check("comm_Y", max_comm(u, list(Y)) if Y else 0.0, 12 * nu ** 2 * gamma, False),
        Check("comm_h", max(op_norm(u @ H - H @ u), op_norm(u_inv @ H - H @ u_inv)),
              4 * nu * gamma, False),
        Check("comm_hX", max_comm(u, hh) if hh else 0.0, 10 * nu * gamma, False),
    ]
    checks = [Check(c.name, c.measured, c.bound, c.measured <= c.bound) for c in checks]
    return OddCycle(u, u_inv), ValidationReport(tuple(checks))


@dataclass(frozen=True, eq=False)
class WPair:
    w: AugMatrix
    w_inv: AugMatrix
    inverse_error: float
    conjugation_error: float
    norm_w: float
    norm_w_inv: float


def make_w(u_1h: OddCycle, p: AugMatrix, q: AugMatrix, tol: float = 1e-8) -> WPair:
    """``w = [[u(1-p), -q], [p, (1-p)u^-1]]`` with its closed-form inverse."""
    n, N = p.n, p.N
    one = _one(n, N)
    u, ui = u_1h.u, u_1h.u_inv
    err = op_norm(u @ p @ ui - q)
    if err > tol:
        raise ValidationError(f"u p u^-1 differs from q by {err:.3g}")
    a, b = u @ (one - p), (one - p) @ ui
    w = block_matrix([[a, -q], [p, b]])
    w_inv = block_matrix([[b, p], [-q, a]])
    P = _unit_projection(n, N)
    return WPair(
        w=w, w_inv=w_inv,
        inverse_error=max(op_norm(w @ w_inv - block_sum(one, one)),
                          op_norm(w_inv @ w - block_sum(one, one))),
        conjugation_error=op_norm(w @ P @ w_inv - block_sum(one - q, p)),
        norm_w=op_norm(w), norm_w_inv=op_norm(w_inv),
    )


def involution(q: AugMatrix) -> AugMatrix:
    """``[[1-q, q], [q, 1-q]]``; squares to 1 when ``q`` is idempotent."""
    one = _one(q.n, q.N)
    return block_matrix([[one - q, q], [q, one - q]])


@dataclass(frozen=True, eq=False)
class ExactnessReport:
    combine: ValidationReport
    witness: BoundaryWitness
    wpair: WPair
    u: OddCycle
    nu: float
    gamma: float
    identities: Dict[str, float]
    margins: Dict[str, float]
    budgets: Dict[str, float]
    certificates: Dict[str, HomotopyCertificate] = field(default_factory=dict)

    @property
    def max_identity_error(self) -> float:
        return max(self.identities.values())


def exactness_pipeline(p: AugMatrix, q: AugMatrix, h: CutElement, u_h: OddCycle,
                       u_1h: OddCycle, X: Sequence[AugMatrix], Y: Sequence[AugMatrix] = (),
                       certify: bool = True, eps_floor: float = 0.1) -> ExactnessReport:
    """Show that the boundary of the combined unit is the class of ``(p, q)``.

    Requires ``u_h p u_h^-1 = q = u_{1-h} p u_{1-h}^-1``.  The chain is the
    conjugation of ``v (1+0) v^-1`` by ``w v^-1`` to ``(1-q) + p``, the
    conjugation of the second entry ``1+0`` by the involution to
    ``(1-q) + q``, and the rotation of both entries to ``p + (1-q)`` and
    ``q + (1-q)``.  Certificates use measured control data against ``X`` and
    ``h``.
    """
    n, N = p.n, p.N
    one = _one(n, N)
    for name, un in (("u_h", u_h), ("u_{1-h}", u_1h)):
        err = op_norm(un.u @ p @ un.u_inv - q)
        if err > 1e-8:
            raise ValidationError(f"stage combine: {name} does not conjugate p to q ({err:.3g})")
    nu, gamma = combine_params(u_h, u_1h, p, h, X, Y)
    u, rep = combine_units(u_h, u_1h, p, h, X, Y, nu, gamma)
    try:
        wit = make_cdv(u, h)
    except ValidationError as exc:
        raise ValidationError(f"stage boundary: {exc}") from exc
    try:
        wp = make_w(u_1h, p, q)
    except ValidationError as exc:
        raise ValidationError(f"stage w: {exc}") from exc
    P = _unit_projection(n, N)
    g = wit.v @ wp.w_inv          # v w^-1
    g_inv = wp.w @ wit.v_inv      # w v^-1
    J = involution(q)
    lhs = g_inv @ wit.out.p @ g
    identities = {
        "conjugation_vw": op_norm(lhs - wp.w @ P @ wp.w_inv),
        "w_conjugation": wp.conjugation_error,
        "w_inverse": wp.inverse_error,
        "involution_square": op_norm(J @ J - block_sum(one, one)),
        "involution_conjugation": op_norm(J @ P @ J - block_sum(one - q, q)),
        "v_inverse": wit.inverse_error,
        "v_product": wit.product_error,
    }
    fam = self_adjoint_closure(tuple(X) + (h.h,))
    margins = {
        "norm_vw": max(op_norm(g), op_norm(g_inv)),
        "comm_vw": max(max_comm(g, fam), max_comm(g_inv, fam)),
        "comm_boundary": max(max_comm(wit.out.p, fam), max_comm(wit.out.q, fam)),
        "comm_u": max(max_comm(u.u, fam), max_comm(u.u_inv, fam)),
        "closeness": wit.closeness,
    }
    budgets = {
        "norm_vw": (2 * nu) ** 8,
        "comm_vw": 2 ** 37 * nu ** 26 * gamma,
        "norm_w": (2 * nu) ** 2,
    }
    certs: Dict[str, HomotopyCertificate] = {}
    if certify:
        a = block_sum(one - q, p)
        b = block_sum(one - q, q)
        items = [wit.out.p, P, a, b, g, g_inv, J]
        kappa = max(op_norm(m) for m in items) * (1 + 1e-9)
        eps = max(max(max_comm(m, fam) for m in items) * 2, eps_floor)
        ctrl = ControlData(fam, kappa, eps)
        certs["conjugate_by_wv"] = sim_to_homotopy(
            wit.out, EvenCycle(a, P), OddCycle(g_inv, g), ctrl, "p")
        certs["involution"] = sim_to_homotopy(
            EvenCycle(a, P), EvenCycle(a, b), OddCycle(J, J), ctrl, "q")

        def rot(t):
            R = AugMatrix.from_scalar(rotation(t, n), N)
            return EvenCycle(R @ a @ R.H, R @ b @ R.H)

        certs["rotation"] = certified_path(rot, 0.0, np.pi / 2, ctrl)
        end = certs["rotation"].end
        identities["rotation_end"] = max(op_norm(end.p - block_sum(p, one - q)),
                                         op_norm(end.q - block_sum(q, one - q)))
    return ExactnessReport(rep, wit, wp, u, nu, gamma, identities, margins, budgets, certs)


def fitted_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# odd loops


def odd_loop_from_invertible(u: OddCycle, samples: int = LOOP_SAMPLES) -> LoopCycle:
    """Loop ``p_t = v_t (1+0) v_t^-1`` with ``v_t = R_t (1+u) R_t^T (u^-1+1)``.

    ``R_t`` is the rotation by ``pi t / 2``.  Both endpoints are ``1+0``.
    """
    n, N = u.n, u.N
    if _scalar_dev(u.u, np.eye(n)) > SCALAR_TOL:
        raise ValidationError("u must have scalar part 1")
    one = _one(n, N)
    P = _unit_projection(n, N)
    a, ai = block_sum(one, u.u), block_sum(one, u.u_inv)
    b, bi = block_sum(u.u_inv, one), block_sum(u.u, one)
    out: List[AugMatrix] = []
    for t in np.linspace(0.0, 1.0, samples):
        R = AugMatrix.from_scalar(rotation(np.pi * t / 2, n), N)
        vt = R @ a @ R.H @ b
        vti = bi @ R @ ai @ R.H
        out.append(vt @ P @ vti)
    return LoopCycle(tuple(out), "even")
