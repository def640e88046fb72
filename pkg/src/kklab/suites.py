"""Randomized verification trials, one function per suite.

A trial function takes ``(rng, trial, dims, tol)`` and returns a list of
:class:`Outcome` rows.  A row passes when ``measured <= bound``; every bound
already includes its stated tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping

import numpy as np
from scipy.linalg import expm

from .averaging import compress_commutators, partial_trace_oracle, weyl_data
from .cycles import (
    ControlData,
    EvenCycle,
    OddCycle,
    check_certificate,
    inverse_even,
    inverse_odd,
    max_comm,
    normalize_even,
    normalize_odd,
    validate_even,
    validate_odd,
)
from .generators import (
    EPS_FLOOR,
    cnormal,
    commuting_idempotent,
    diagonal_cut,
    diagonal_operators,
    even_instance,
    mv_scenario,
    odd_instance,
    perturbation,
    random_contraction,
    random_hermitian,
    random_idempotent,
    random_projection,
    random_unitary,
)
from .homotopy import connect_close_idempotents, hom_to_sim, sim_to_homotopy, similarity_path
from .idempotents import (
    associated_projection,
    grid_lipschitz,
    idem_proj_path,
    spectral_distance_check,
    unitary_path_lift,
)
from .matcore import AugMatrix, block_sum, comm_norm, inv_sqrt, op_norm, riesz_half
from .mayer_vietoris import CutElement, exactness_pipeline, fitted_exponent, make_cdv, make_w

DEFAULT_DIMS = {"n": 8, "N": 3}

DEFAULT_TOL = {
    "identity": 1e-9,
    "projection": 1e-8,
    "slack": 1e-8,
    "conjugation": 1e-7,
    "lift_slack": 0.05,
    "close_lipschitz": 1.02,
    "endpoint": 1e-9,
    "norm_slack": 1e-6,
    "exact": 1e-10,
    "commutant": 1e-8,
    "oracle": 1e-10,
    "exponent_lo": 0.8,
    "exponent_hi": 1.2,
}

DELTAS = (0.0, 0.1, 0.25, 0.4)
ETAS = (1.0, 2.0, 5.0)
MV_EPS = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class Outcome:
    tag: str
    instance: str
    bound: float
    measured: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.bound)


TrialFn = Callable[[np.random.Generator, int, Mapping[str, int], Mapping[str, float]], List[Outcome]]


def _size(rng, dims, lo=2, cap=8):
    return int(rng.integers(lo, min(dims.get("n", cap), cap) + 1))


def _trunc(dims, cap=3):
    return int(min(dims.get("N", cap), cap))


# --------------------------------------------------------------------------- matcore

def projection_commutator(rng, n: int, delta: float):
    """``(||[chi(x), c]||, ||[x, c]|| / (1 - 2 delta))`` for a random gapped ``x``."""
    k = int(rng.integers(1, n))
    lo = rng.uniform(-1.0, delta, size=k)
    hi = rng.uniform(1 - delta, 2.0, size=n - k)
    ev = np.r_[lo, hi]
    ev[0], ev[-1] = delta, 1 - delta          # touch the gap edges
    U = random_unitary(rng, n)
    x = U @ np.diag(ev) @ U.conj().T
    x = 0.5 * (x + x.conj().T)
    c = random_contraction(rng, n)
    return comm_norm(riesz_half(x), c), comm_norm(x, c) / (1 - 2 * delta)


def optimality_gap(delta: float) -> float:
    """``|  ||[chi(x), c]|| - ||[x, c]|| / (1 - 2 delta) |`` for ``x = diag(delta, 1 - delta)``."""
    x = np.diag([delta, 1 - delta]).astype(np.complex128)
    c = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    return abs(comm_norm(riesz_half(x), c) - comm_norm(x, c) / (1 - 2 * delta))


def inverse_root_pair(rng, n: int, eta: float):
    """``(||c^-1/2 - d^-1/2||, eta^1.5 ||c - d|| / 2)`` for ``c, d >= 1/eta``."""
    def positive():
        U = random_unitary(rng, n)
        ev = 1 / eta + rng.exponential(0.5, size=n)
        ev[int(rng.integers(n))] = 1 / eta
        return U @ np.diag(ev) @ U.conj().T

    c = positive()
    if rng.random() < 0.5:
        d = positive()
    else:
        h = random_hermitian(rng, n)
        h = h - np.min(np.linalg.eigvalsh(h)) * np.eye(n)
        d = c + rng.uniform(1e-4, 0.3) * h / max(op_norm(h), 1e-300)
    d = 0.5 * (d + d.conj().T)
    return op_norm(inv_sqrt(c) - inv_sqrt(d)), 0.5 * eta ** 1.5 * op_norm(c - d)


def matcore_trial(rng, trial, dims, tol) -> List[Outcome]:
    n = _size(rng, dims)
    m = _size(rng, dims)
    out = []
    a, b = cnormal(rng, n, n), cnormal(rng, m, m)
    gap = abs(op_norm(block_sum(a, b)) - max(op_norm(a), op_norm(b)))
    out.append(Outcome("block-sum-norm", f"n={n},m={m}", tol["identity"], gap))

    delta = DELTAS[trial % len(DELTAS)]
    lhs, rhs = projection_commutator(rng, n, delta)
    out.append(Outcome("gapped-projection-commutator", f"n={n},delta={delta}",
                       rhs + tol["slack"], lhs))
    if trial < len(DELTAS):
        out.append(Outcome("gapped-projection-optimality", f"delta={delta}",
                           tol["exact"], optimality_gap(delta)))

    eta = ETAS[trial % len(ETAS)]
    lhs, rhs = inverse_root_pair(rng, n, eta)
    out.append(Outcome("inverse-root-lipschitz", f"n={n},eta={eta}", rhs + tol["slack"], lhs))

    bn = random_hermitian(rng, n)
    rep = spectral_distance_check(bn + 0.3 * cnormal(rng, n, n), bn)
    out.append(Outcome("spectral-distance", f"n={n}", rep.distance + tol["slack"],
                       rep.worst_eigenvalue_offset))

    S = np.eye(n) + 0.3 * cnormal(rng, n, n)
    ev = np.r_[rng.uniform(-1, 0.3, size=n // 2), rng.uniform(0.7, 2, size=n - n // 2)]
    ev = ev + 1j * rng.uniform(-0.5, 0.5, size=n)
    M = S @ np.diag(ev) @ np.linalg.inv(S)
    chi = riesz_half(M)
    out.append(Outcome("riesz-idempotent", f"n={n}", tol["identity"], op_norm(chi @ chi - chi)))
    out.append(Outcome("riesz-commutes", f"n={n}", tol["slack"], comm_norm(chi, M)))

    N = _trunc(dims)
    A = AugMatrix(cnormal(rng, 2, 2), cnormal(rng, 2 * N, 2 * N))
    B = AugMatrix(cnormal(rng, 2, 2), cnormal(rng, 2 * N, 2 * N))
    sc = float(np.max(np.abs((A @ B).scalar - A.scalar @ B.scalar)))
    out.append(Outcome("scalar-part-multiplicative", f"N={N}", 0.0, sc))
    return out


# --------------------------------------------------------------------------- idempotent

def idempotent_trial(rng, trial, dims, tol) -> List[Outcome]:
    n = _size(rng, dims)
    rank = int(rng.integers(1, n))
    kappa = float(rng.uniform(1.0, 4.0))
    p = random_idempotent(rng, n, rank, kappa)
    one = np.eye(n)
    norm_p = op_norm(p)
    inst = f"n={n},rank={rank},norm={norm_p:.4f}"
    out = [
        Outcome("idempotent-norm-symmetry", inst, tol["identity"], abs(op_norm(one - p) - norm_p)),
        Outcome("idempotent-skew-part", inst, norm_p + tol["identity"], op_norm(p - p.conj().T)),
        Outcome("idempotent-reflection-norm", inst, 2 * kappa + tol["identity"],
                op_norm(2 * p - one)),
    ]
    w = associated_projection(p)
    r = w.r
    out += [
        Outcome("associated-projection-idempotent", inst, tol["projection"], op_norm(r @ r - r)),
        Outcome("associated-projection-selfadjoint", inst, tol["projection"],
                op_norm(r - r.conj().T)),
        Outcome("associated-projection-conjugator", inst, tol["projection"],
                op_norm(w.u @ p @ w.u_inv - r)),
        Outcome("associated-projection-range", inst, tol["projection"],
                max(op_norm(r @ p - p), op_norm(p @ r - r))),
    ]
    # a second idempotent at a random distance
    g = expm(rng.uniform(1e-3, 0.5) * cnormal(rng, n, n))
    p2 = g @ p @ np.linalg.inv(g)
    r2 = associated_projection(p2, tol=1e-8).r
    out.append(Outcome("associated-projection-contractive", inst,
                       op_norm(p - p2) + tol["slack"], op_norm(r - r2)))
    t = float(rng.uniform())
    c = random_contraction(rng, n)
    rt = idem_proj_path(p, t, r)
    bound = (1 + 2 * t) * comm_norm(p, c) + t * comm_norm(p, c.conj().T)
    out.append(Outcome("idempotent-path-commutator", f"{inst},t={t:.4f}",
                       bound + tol["slack"], comm_norm(rt, c)))
    if trial % 5 == 0:
        out.extend(projection_path_lift(rng, n, tol))
    return out


def projection_path_lift(rng, n: int, tol, samples: int = 201) -> List[Outcome]:
    """Lift a smooth conjugation path of projections and compare slopes."""
    rank = int(rng.integers(1, n))
    P = random_projection(rng, n, rank)
    K = cnormal(rng, n, n)
    K = 0.5 * (K - K.conj().T)
    K = K / op_norm(K)
    speed = float(rng.uniform(0.2, 3.0))
    ts = np.linspace(0.0, 1.0, samples)
    ps = []
    for t in ts:
        U = expm(t * speed * K)
        q = U @ P @ U.conj().T
        ps.append(0.5 * (q + q.conj().T))
    L = grid_lipschitz(ts, ps)
    lift = unitary_path_lift(ts, ps)
    inst = f"n={n},rank={rank},L={L:.4f}"
    return [
        Outcome("unitary-lift-conjugation", inst, tol["conjugation"], lift.conjugation_error),
        Outcome("unitary-lift-lipschitz", inst, 3 * L + tol["lift_slack"], lift.lipschitz),
        Outcome("unitary-lift-unitarity", inst, tol["projection"], lift.unitarity_error),
    ]


# --------------------------------------------------------------------------- cycles

def _cert_rows(tag, inst, cert) -> List[Outcome]:
    rep = check_certificate(cert)
    return [Outcome(tag, inst, 1.0 - 1e-12 if rep.valid else -1.0, rep.worst_step_ratio)]


def cycles_trial(rng, trial, dims, tol) -> List[Outcome]:
    n = _size(rng, dims, cap=3)
    N = _trunc(dims, 2)
    kappa = 1.0 if trial % 2 == 0 else 2.0
    c, ctrl = even_instance(rng, n, N, kappa=kappa, eta=0.01)
    inst = f"n={n},N={N},kappa={ctrl.kappa:.4f}"
    v = validate_even(c, ctrl)
    out = [Outcome("even-cycle-membership", inst, 0.0, 0.0 if v.passed else 1.0)]
    _, cert = inverse_even(c, ctrl)
    out += _cert_rows("even-inverse-rotation", inst, cert)
    _, cert = normalize_even(c, ctrl)
    out += _cert_rows("even-normal-form", inst, cert)
    u, octrl = odd_instance(rng, n, N, kappa=1.5, eta=0.01)
    inst = f"n={n},N={N},kappa={octrl.kappa:.4f}"
    v = validate_odd(u, octrl)
    out.append(Outcome("odd-cycle-membership", inst, 0.0, 0.0 if v.passed else 1.0))
    _, cert = inverse_odd(u, octrl)
    out += _cert_rows("odd-inverse-rotation", inst, cert)
    _, cert = normalize_odd(u, octrl)
    out += _cert_rows("odd-normal-form", inst, cert)
    return out


# --------------------------------------------------------------------------- homotopy

def threshold_pair(rng, n: int):
    """Idempotents ``p0, p1`` with ``||p0 - p1||`` at ``1/(12 kappa^2)`` and ``kappa``."""
    rank = int(rng.integers(1, n))
    p0 = random_idempotent(rng, n, rank, float(rng.uniform(1.0, 3.0)))
    kappa = op_norm(p0) + 1.0 / 12
    target = 1.0 / (12 * kappa ** 2)
    K = cnormal(rng, n, n)
    K = K / op_norm(K)

    def at(s):
        g = expm(s * K)
        return g @ p0 @ np.linalg.inv(g)

    hi = 1e-3
    while op_norm(at(hi) - p0) < target:
        hi *= 2
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if op_norm(at(mid) - p0) <= target:
            lo = mid
        else:
            hi = mid
    return p0, at(lo), kappa


def close_idempotents_rows(rng, n: int, tol) -> List[Outcome]:
    p0, p1, kappa = threshold_pair(rng, n)
    ops = [random_contraction(rng, n) for _ in range(2)]
    path = connect_close_idempotents(p0, p1, kappa, test_ops=ops)
    dist = op_norm(p0 - p1)
    inst = f"n={n},kappa={kappa:.4f},dist={dist:.6g}"
    out = [
        Outcome("close-path-norm", inst, 2 * kappa, path.max_norm),
        Outcome("close-path-lipschitz", inst, tol["close_lipschitz"], path.lipschitz),
        Outcome("close-path-endpoint", inst, tol["endpoint"], path.endpoint_error),
    ]
    for j, (along, ends) in sorted(path.comm.items()):
        out.append(Outcome("close-path-commutator", f"{inst},op={j}",
                           21 * kappa ** 2 * ends + tol["slack"], along))
    return out


def roundtrip_rows(rng, n: int, N: int, tol) -> List[Outcome]:
    """Similarity to homotopy and back on ``(p0, g p0 g^-1)``."""
    kappa = 1.0 if rng.random() < 0.5 else 2.0
    X = diagonal_operators(rng, N, 2)
    rank = int(rng.integers(0, n + 1))
    p0 = commuting_idempotent(rng, n, N, rank, kappa)
    h, hi = perturbation(rng, n, N, 0.01)
    p0 = h @ p0 @ hi
    g, gi = perturbation(rng, n, N, float(rng.uniform(0.05, 0.5)), unitary=rng.random() < 0.5)
    p1 = g @ p0 @ gi
    k = max(op_norm(p0), op_norm(p1), op_norm(g), op_norm(gi), 1.0) * (1 + 1e-9)
    e = max(max_comm(a, X) for a in (p0, p1, g, gi))
    ctrl = ControlData(X, k, max(2 * e, EPS_FLOOR))
    c0, c1, u = EvenCycle(p0, p1), EvenCycle(p1, p1), OddCycle(g, gi)
    cert = sim_to_homotopy(c0, c1, u, ctrl)
    rep = check_certificate(cert)
    inst = f"n={n},N={N},kappa={k:.4f}"
    want = (k ** 3, 3 * k ** 2 * ctrl.eps)
    relax_err = max(abs(a - b) / b for a, b in zip(rep.relaxation, want))
    out = [
        Outcome("similarity-homotopy-certificate", inst, 1.0 - 1e-12 if rep.valid else -1.0,
                rep.worst_step_ratio),
        Outcome("similarity-homotopy-relaxation", inst, 1e-12, relax_err),
    ]
    z = AugMatrix.zeros(n, N)
    padded = EvenCycle(block_sum(p0, z), block_sum(p1, z))
    hctrl = ControlData(X, max(max(op_norm(s.p) for s in cert.samples), 1.0) * (1 + 1e-9), ctrl.eps)
    wit = hom_to_sim(padded, cert.samples, hctrl,
                     path_fn=similarity_path(c0, u), ts=cert.ts)
    out.append(Outcome("homotopy-similarity-identity", inst, tol["conjugation"],
                       wit.identity_error))
    return out


def homotopy_trial(rng, trial, dims, tol) -> List[Outcome]:
    n = _size(rng, dims)
    out = close_idempotents_rows(rng, n, tol)
    out += roundtrip_rows(rng, _size(rng, dims, lo=1, cap=4), _trunc(dims, 2), tol)
    return out


# --------------------------------------------------------------------------- mv

def cdv_rows(rng, n: int, N: int, tol) -> List[Outcome]:
    eta = float(rng.choice([0.0, 1e-3, 1e-2, 1e-1]))
    u, _ = odd_instance(rng, n, N, kappa=float(rng.uniform(1.0, 3.0)), eta=eta, unit_scalar=True)
    h = CutElement(diagonal_cut(rng, N))
    H = h.on(n)
    kappa = max(op_norm(u.u), op_norm(u.u_inv), 1.0)
    comm = max(op_norm(H @ u.u - u.u @ H), op_norm(H @ u.u_inv - u.u_inv @ H))
    eps = max(comm * (1 + 1e-6), 1e-12)
    ctrl = ControlData((), kappa, eps)
    wit = make_cdv(u, h, ctrl)
    inst = f"n={n},N={N},eta={eta},kappa={kappa:.4f}"
    return [
        Outcome("boundary-v-norm", inst, (kappa + 2) ** 3 + tol["norm_slack"],
                max(wit.norm_v, wit.norm_v_inv)),
        Outcome("boundary-closeness", inst, (kappa + 1) * eps * (1 - 1e-12), wit.closeness),
        Outcome("boundary-scalar-part", inst, 0.0, max(wit.scalar_cd, wit.scalar_dc)),
        Outcome("boundary-v-factorization", inst, tol["slack"],
                max(wit.product_error, wit.inverse_error)),
    ]


def w_rows(rng, tol, eps: float = 0.0) -> List[Outcome]:
    s = mv_scenario(rng, eps=eps)
    wp = make_w(s["u_1h"], s["p"], s["q"])
    inst = f"eps={eps}"
    return [
        Outcome("w-inverse", inst, tol["identity"], wp.inverse_error),
        Outcome("w-conjugation", inst, tol["identity"], wp.conjugation_error),
    ]


def pipeline_rows(seed_rng, tol, eps_list=MV_EPS, certify: bool = True) -> List[Outcome]:
    """Exactness chain on one commuting scenario and its perturbations."""
    state = seed_rng.integers(0, 2 ** 63)
    out = []

    def run(eps):
        s = mv_scenario(np.random.Generator(np.random.Philox(key=int(state))), eps=eps)
        return exactness_pipeline(s["p"], s["q"], CutElement(s["h"]), s["u_h"], s["u_1h"],
                                  s["X"], certify=certify)

    base = run(0.0)
    out.append(Outcome("exactness-identities", "eps=0", tol["exact"], base.max_identity_error))
    for name, val in sorted(base.margins.items()):
        if name != "norm_vw":
            out.append(Outcome(f"exactness-margin-{name}", "eps=0", tol["exact"], val))
    reps = [run(e) for e in eps_list]
    for e, rep in zip(eps_list, reps):
        out.append(Outcome("exactness-identities", f"eps={e}", tol["slack"],
                           rep.max_identity_error))
    for name in sorted(reps[0].margins):
        if name == "norm_vw":
            continue
        k = fitted_exponent(eps_list, [r.margins[name] for r in reps])
        inst = f"margin={name}"
        out.append(Outcome("exactness-margin-exponent-upper", inst, tol["exponent_hi"], k))
        out.append(Outcome("exactness-margin-exponent-lower", inst, -tol["exponent_lo"], -k))
    return out


def mv_trial(rng, trial, dims, tol) -> List[Outcome]:
    out = cdv_rows(rng, _size(rng, dims, lo=1, cap=3), _trunc(dims), tol)
    out += w_rows(rng, tol, eps=float(rng.choice([0.0, 1e-2])))
    if trial % 5 == 0:
        out += pipeline_rows(rng, tol)
    return out


# --------------------------------------------------------------------------- averaging

def averaging_rows(rng, m: int, d: int, N: int, tol) -> List[Outcome]:
    data = weyl_data(m, d, N)
    l = int(rng.integers(1, d))
    e0 = np.diag(np.r_[np.ones(l), np.zeros(d - l)]).astype(np.complex128)
    p0 = commuting_idempotent(rng, d, N, l, 1.0, scalar=e0)
    p = AugMatrix.from_dense(np.kron(np.eye(m), p0.dense()), np.kron(np.eye(m), p0.scalar))
    e = AugMatrix.from_scalar(np.kron(np.eye(m), e0), N)
    g, gi = perturbation(rng, m * d, N, float(rng.uniform(0.0, 0.03)))
    p = g @ p @ gi
    Y = [data.a[1], data.a[m]]                  # Z and X, tensored with 1
    phi, rep = compress_commutators(p, data, e, Y)
    oracle = partial_trace_oracle(p, m)
    diff = rep.alpha - oracle
    entry = float(max(np.max(np.abs(diff.dense())), np.max(np.abs(diff.scalar))))
    inst = f"m={m},d={d},N={N}"
    return [
        Outcome("averaging-commutant", inst, tol["commutant"], max(rep.comm)),
        Outcome("averaging-oracle", inst, tol["oracle"], entry),
        Outcome("averaging-distance", inst, rep.distance_bound + tol["slack"], rep.distance),
        Outcome("averaging-projection", inst, tol["projection"],
                max(op_norm(phi @ phi - phi), op_norm(phi - phi.H))),
        Outcome("averaging-scalar-part", inst, tol["exact"],
                rep.scalar_error if rep.scalar_error is not None else 0.0),
    ]


def averaging_trial(rng, trial, dims, tol) -> List[Outcome]:
    m = 2 + trial % 2
    return averaging_rows(rng, m, 2, _trunc(dims, 2), tol)


SUITES: Dict[str, TrialFn] = {
    "matcore": matcore_trial,
    "idempotent": idempotent_trial,
    "cycles": cycles_trial,
    "homotopy": homotopy_trial,
    "mv": mv_trial,
    "averaging": averaging_trial,
}

SUITE_IDS = {name: i for i, name in enumerate(SUITES)}

DEFAULT_TRIALS = {
    "matcore": 200,
    "idempotent": 200,
    "cycles": 6,
    "homotopy": 20,
    "mv": 10,
    "averaging": 20,
}


def trial_rng(seed: int, suite: str, trial: int) -> np.random.Generator:
    """Philox stream keyed by ``(seed, suite id << 32 | trial)``."""
    key = np.array([seed % 2 ** 64, (SUITE_IDS[suite] << 32) | trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
