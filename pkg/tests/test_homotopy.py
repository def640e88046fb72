import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kklab.cycles import (ControlData, EvenCycle, OddCycle, check_certificate, max_comm,
                          stabilize)
from kklab.errors import DimensionCapError, StepSizeError, ValidationError
from kklab.generators import (commuting_idempotent, diagonal_operators, perturbation,
                              random_idempotent)
from kklab.homotopy import (
    close_path_point, connect_close_idempotents, hom_to_sim, regularize_homotopy,
    sim_to_homotopy, similarity_path,
)
from kklab.matcore import AugMatrix, block_sum, op_norm, rotation
from kklab.suites import DEFAULT_TOL, close_idempotents_rows, roundtrip_rows, threshold_pair

seeds = st.integers(0, 2 ** 32 - 1)


def gen(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def test_equal_endpoints_give_constant_path(rng):
    p = random_idempotent(rng, 4, 2, 2.0)
    path = connect_close_idempotents(p, p, op_norm(p))
    assert all(np.allclose(q, p, atol=1e-13) for q in path.ps)


def test_threshold_pair_is_at_threshold(rng):
    p0, p1, kappa = threshold_pair(rng, 4)
    assert op_norm(p0 - p1) == pytest.approx(1 / (12 * kappa ** 2), rel=1e-9)
    path = connect_close_idempotents(p0, p1, kappa)
    assert path.endpoint_error <= 1e-9
    _, u, ui = close_path_point(p0, p1, 1.0)
    assert op_norm(u @ p0 @ ui - p1) <= 1e-9
    assert path.max_u_defect <= 1 / 6 + 1e-12


def test_too_far_rejected(rng):
    p0, p1, kappa = threshold_pair(rng, 3)
    with pytest.raises(StepSizeError):
        connect_close_idempotents(p0, 2 * p1 - p0, kappa)


@given(seeds, st.integers(2, 8))
def test_close_path_conclusions(seed, n):
    for o in close_idempotents_rows(gen(seed), n, DEFAULT_TOL):
        assert o.passed, o


@settings(max_examples=15)
@given(seeds, st.integers(1, 4))
def test_similarity_homotopy_roundtrip(seed, n):
    for o in roundtrip_rows(gen(seed), n, 2, DEFAULT_TOL):
        assert o.passed, o


def _commuting_ctrl(rng, N=2):
    return ControlData(diagonal_operators(rng, N), 1.0 + 1e-9, 0.1)


def test_identity_conjugator_gives_constant_path(rng):
    ctrl = _commuting_ctrl(rng)
    p = commuting_idempotent(rng, 2, 2, 1)
    c = EvenCycle(p, p)
    one = AugMatrix.identity(2, 2)
    cert = sim_to_homotopy(c, c, OddCycle(one, one), ctrl)
    z = block_sum(p, AugMatrix.zeros(2, 2))
    assert all(op_norm(s.p - z) < 1e-12 for s in cert.samples)


def test_scalar_permutation_validates_at_base_params(rng):
    ctrl = _commuting_ctrl(rng)
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), 2)
    swap = AugMatrix.from_scalar(np.array([[0, 1], [1, 0]]), 2)
    Q = swap @ P @ swap
    cert = sim_to_homotopy(EvenCycle(P, Q), EvenCycle(Q, Q), OddCycle(swap, swap), ctrl)
    assert check_certificate(cert).valid
    assert all(max_comm(s.p, ctrl.X) == 0.0 for s in cert.samples)


def test_sim_to_homotopy_rejects_wrong_conjugator(rng):
    ctrl = _commuting_ctrl(rng)
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), 2)
    Q = AugMatrix.from_scalar(np.diag([0.0, 1.0]), 2)
    one = AugMatrix.identity(2, 2)
    with pytest.raises(ValidationError):
        sim_to_homotopy(EvenCycle(P, Q), EvenCycle(Q, Q), OddCycle(one, one), ctrl)


def test_random_conjugate_margins(rng):
    X = diagonal_operators(rng, 2)
    p = commuting_idempotent(rng, 2, 2, 1)
    g, gi = perturbation(rng, 2, 2, 0.05)
    q = g @ p @ gi
    k = 1.0 + 1e-9
    eps = 2 * max(max_comm(a, X) for a in (p, q, g, gi))
    ctrl = ControlData(X, k, eps)
    cert = sim_to_homotopy(EvenCycle(p, q), EvenCycle(q, q), OddCycle(g, gi), ctrl)
    worst = max(max_comm(s.p, X) for s in cert.samples)
    assert worst <= 3 * k ** 2 * eps


def test_trivial_hom_to_sim(rng):
    ctrl = _commuting_ctrl(rng)
    p = commuting_idempotent(rng, 2, 2, 1)
    c = EvenCycle(p, p)
    wit = hom_to_sim(c, [c, c], ctrl)
    assert op_norm(wit.u - AugMatrix.identity(2, 2)) < 1e-12
    assert wit.m == 0


def test_hom_to_sim_rejects_scalar_motion(rng):
    ctrl = _commuting_ctrl(rng)
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), 2)
    Q = AugMatrix.from_scalar(np.diag([0.0, 1.0]), 2)
    swap = AugMatrix.from_scalar(np.array([[0, 1], [1, 0]]), 2)
    c0 = EvenCycle(P, Q)
    cert = sim_to_homotopy(c0, EvenCycle(Q, Q), OddCycle(swap, swap), ctrl)
    padded = EvenCycle(block_sum(P, AugMatrix.zeros(2, 2)), block_sum(Q, AugMatrix.zeros(2, 2)))
    with pytest.raises(ValidationError):
        hom_to_sim(padded, cert.samples, ctrl)
    with pytest.raises(ValidationError):
        hom_to_sim(c0, cert.samples, ctrl)


def test_hom_to_sim_needs_refinement_for_coarse_samples(rng):
    ctrl = _commuting_ctrl(rng)
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), 2)

    def fn(t):
        R = AugMatrix.from_scalar(rotation(t, 1), 2)
        return EvenCycle(R @ P @ R.H, P)

    c = fn(0.0)
    end = EvenCycle(fn(np.pi / 2).p, fn(np.pi / 2).p)
    with pytest.raises((StepSizeError, ValidationError)):
        hom_to_sim(c, [c, end], ctrl)


def _slow_rotation(N=2, angle=0.25):
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), N)

    def fn(t):
        R = AugMatrix.from_scalar(rotation(angle * t, 1), N)
        return EvenCycle(R @ P @ R.H, P)

    return fn


def test_regularize_constant_path(rng):
    ctrl = _commuting_ctrl(rng)
    fn = _slow_rotation(angle=0.0)
    reg = regularize_homotopy([fn(0.0), fn(1.0)], ctrl, n0=9)
    assert reg.k == 1
    assert check_certificate(reg.cert).valid


def test_regularize_slow_rotation(rng):
    ctrl = _commuting_ctrl(rng)
    fn = _slow_rotation(angle=0.25)
    ts = np.linspace(0, 1, 3)
    reg = regularize_homotopy([fn(t) for t in ts], ctrl, n0=17, path_fn=fn, ts=ts)
    assert check_certificate(reg.cert).valid
    assert reg.lipschitz <= 16 * ctrl.kappa
    assert max(reg.stage_norms) <= 2 * ctrl.kappa
    nk = 2 * reg.k          # base size is 2
    one, zero = AugMatrix.identity(nk, 2), AugMatrix.zeros(nk, 2)
    for t, c in ((0.0, reg.cert.start), (1.0, reg.cert.end)):
        want = fn(t)
        assert op_norm(c.p - block_sum(block_sum(want.p, one), zero)) < 1e-9
        assert op_norm(c.q - block_sum(block_sum(want.q, one), zero)) < 1e-9


def test_regularize_dimension_cap(rng):
    ctrl = _commuting_ctrl(rng)
    fn = _slow_rotation(angle=1.2)
    ts = np.linspace(0, 1, 3)
    with pytest.raises(DimensionCapError):
        regularize_homotopy([fn(t) for t in ts], ctrl, path_fn=fn, ts=ts, dim_cap=8)
