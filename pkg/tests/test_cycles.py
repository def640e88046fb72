import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kklab.cycles import (
    ControlData, EvenCycle, LoopCycle, OddCycle, add_even, certified_path, certify_path,
    check_certificate, check_loop, forget_control, inverse_even, inverse_odd, is_unit_form,
    k0_class, max_comm, normalize_even, normalize_odd, param_leq, safe_step_radius, stabilize,
    step_size, validate_even, validate_odd,
)
from kklab.errors import MatrixError, StepSizeError, ValidationError
from kklab.generators import diagonal_operators, even_instance, odd_instance, random_unitary
from kklab.matcore import AugMatrix, op_norm, riesz_half

seeds = st.integers(0, 2 ** 32 - 1)


def gen(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def unit_pair(l, n, N):
    s = np.diag(np.r_[np.ones(l), np.zeros(n - l)])
    P = AugMatrix.from_scalar(s, N)
    return EvenCycle(P, P)


def test_control_data_checks(rng):
    X = diagonal_operators(rng, 3)
    with pytest.raises(MatrixError):
        ControlData(X, 0.5, 0.1)
    with pytest.raises(MatrixError):
        ControlData(X, 1.0, 0.0)
    with pytest.raises(MatrixError):
        ControlData([2 * X[0]], 1.0, 0.1)


def test_zero_pair_and_unit_pair_validate(rng):
    ctrl = ControlData(diagonal_operators(rng, 3), 1.0, 0.1)
    z = AugMatrix.zeros(2, 3)
    assert validate_even(EvenCycle(z, z), ctrl).passed
    c = unit_pair(1, 2, 3)
    assert validate_even(c, ctrl).passed
    assert k0_class(c.p) == 1


def test_class_mismatch_fails(rng):
    ctrl = ControlData(diagonal_operators(rng, 3), 1.0, 0.1)
    a, b = unit_pair(1, 2, 3), unit_pair(2, 2, 3)
    rep = validate_even(EvenCycle(a.p, b.p), ctrl)
    assert not rep.passed and not rep["class"].passed
    with pytest.raises(ValidationError):
        rep.require()


@given(seeds, st.integers(1, 3), st.sampled_from([1.0, 2.0]))
def test_random_instances_validate(seed, n, kappa):
    c, ctrl = even_instance(gen(seed), n, 2, kappa=kappa, eta=0.01)
    rep = validate_even(c, ctrl)
    assert rep.passed
    assert rep["comm_p"].measured == pytest.approx(max_comm(c.p, ctrl.X))


def test_param_order(rng):
    X = diagonal_operators(rng, 3)
    a = ControlData(X, 2.0, 0.2)
    assert param_leq(a, a)
    b = ControlData(tuple(X) + tuple(diagonal_operators(rng, 3)), 1.5, 0.1)
    assert param_leq(a, b)
    assert not param_leq(b, a)
    far = ControlData(diagonal_operators(rng, 3), 1.0, 0.2)
    assert not param_leq(ControlData(X, 1.0, 0.2), far)


def test_forget_control(rng):
    c, ctrl = even_instance(rng, 2, 2, eta=0.01)
    assert forget_control(c, ctrl, ctrl) is c
    assert forget_control(c, ctrl, ctrl.relaxed(ctrl.kappa, 2 * ctrl.eps)) is c
    with pytest.raises(ValidationError):
        forget_control(c, ctrl, ctrl.relaxed(ctrl.kappa, ctrl.eps / 2))


def test_sum_with_zero_and_stabilize(rng):
    c, ctrl = even_instance(rng, 2, 2, eta=0.01)
    z = AugMatrix.zeros(2, 2)
    s = add_even(c, EvenCycle(z, z))
    assert np.allclose(s.p.dense()[:4, :4], c.p.dense())
    assert stabilize(c, 0) is c
    st2 = stabilize(c, 2)
    assert st2.n == c.n + 4
    assert op_norm(st2.p) == pytest.approx(max(op_norm(c.p), 1.0))
    assert max_comm(st2.p, ctrl.X) == pytest.approx(max_comm(c.p, ctrl.X), abs=1e-14)
    assert validate_even(st2, ctrl).passed


def test_inverse_even_certificate(rng):
    c, ctrl = even_instance(rng, 2, 2, eta=0.01)
    inv, cert = inverse_even(c, ctrl)
    assert check_certificate(cert).valid
    assert np.array_equal(inv.p.dense(), c.q.dense())


def test_inverse_odd_certificate(rng):
    u, ctrl = odd_instance(rng, 2, 2, eta=0.01)
    inv, cert = inverse_odd(u, ctrl)
    rep = check_certificate(cert)
    assert rep.valid and rep.relaxation == (2 * ctrl.kappa, ctrl.eps)
    assert op_norm(cert.end.u - AugMatrix.identity(4, 2)) < 1e-12


def test_normalize_even_already_normal(rng):
    ctrl = ControlData(diagonal_operators(rng, 2), 1.0, 0.1)
    c = unit_pair(1, 2, 2)
    out, cert = normalize_even(c, ctrl)
    assert out is c and len(cert.samples) == 1


def test_normalize_even_rotates_scalar_parts(rng):
    N = 2
    U, V = random_unitary(rng, 3), random_unitary(rng, 3)
    s = np.diag([1.0, 1.0, 0.0])
    c = EvenCycle(AugMatrix.from_scalar(U @ s @ U.conj().T, N),
                  AugMatrix.from_scalar(V @ s @ V.conj().T, N))
    ctrl = ControlData(diagonal_operators(rng, N), 1.0 + 1e-9, 0.1)
    out, cert = normalize_even(c, ctrl)
    assert is_unit_form(out)
    assert np.array_equal(out.p.scalar, s)
    assert check_certificate(cert).valid


def test_normalize_even_idempotent_pair(rng):
    c, ctrl = even_instance(rng, 2, 2, kappa=2.0, eta=0.01, rank=1)
    out, cert = normalize_even(c, ctrl)
    rep = check_certificate(cert)
    assert rep.valid and rep.relaxation == (ctrl.kappa, 4 * ctrl.eps)
    assert op_norm(out.p - out.p.H) < 1e-9
    assert is_unit_form(out)


def test_normalize_odd(rng):
    u, ctrl = odd_instance(rng, 2, 2, kappa=2.0, eta=0.01)
    out, cert = normalize_odd(u, ctrl)
    assert np.array_equal(out.u.scalar, np.eye(2))
    assert check_certificate(cert).valid
    v, vctrl = odd_instance(rng, 2, 2, unit_scalar=True)
    same, c2 = normalize_odd(v, vctrl)
    assert same is v and len(c2.samples) == 1


def test_scalar_unitary_normalizes_through_scalars(rng):
    N = 2
    W = random_unitary(rng, 2)
    u = OddCycle(AugMatrix.from_scalar(W, N))
    ctrl = ControlData(diagonal_operators(rng, N), 1.0 + 1e-9, 0.1)
    out, cert = normalize_odd(u, ctrl)
    assert op_norm(out.u - AugMatrix.identity(2, N)) < 1e-9
    assert all(max_comm(s.u, ctrl.X) < 1e-12 for s in cert.samples)


def test_safe_radius_examples(rng):
    ctrl = ControlData(diagonal_operators(rng, 2), 1.0, 0.1)
    c = unit_pair(1, 2, 2)
    assert safe_step_radius(c, ctrl) == pytest.approx(0.1 / 4)
    big = ControlData(ctrl.X, 1.0, 10.0)
    assert safe_step_radius(c, big) == 0.5


def test_interpolation_within_radius_stays_valid(rng):
    c, ctrl = even_instance(rng, 2, 2, eta=0.005, rank=1)
    c2, _ = even_instance(rng, 2, 2, eta=0.005, rank=1)
    delta = safe_step_radius(c, ctrl)
    # move p a little towards a unitary conjugate
    from kklab.generators import perturbation
    g, gi = perturbation(rng, 2, 2, 0.3 * delta)
    q = EvenCycle(g @ c.p @ gi, c.q)
    assert step_size(c, q) < delta
    for t in np.linspace(0, 1, 5):
        mid = EvenCycle(riesz_half((1 - t) * c.p + t * q.p), c.q)
        assert validate_even(mid, ctrl).passed


def test_constant_path_certificate(rng):
    c, ctrl = even_instance(rng, 2, 2)
    cert = certify_path([c, c, c], ctrl)
    assert check_certificate(cert).valid


def test_far_step_rejected(rng):
    ctrl = ControlData(diagonal_operators(rng, 2), 1.0, 0.1)
    a, b = unit_pair(1, 2, 2), unit_pair(1, 2, 2)
    from kklab.matcore import rotation
    R = AugMatrix.from_scalar(rotation(1.0, 1), 2)
    b = EvenCycle(R @ a.p @ R.H, a.q)
    with pytest.raises(StepSizeError):
        certify_path([a, b], ctrl)


def test_certificate_detects_tampering(rng):
    c, ctrl = even_instance(rng, 2, 2, eta=0.01)
    _, cert = inverse_even(c, ctrl)
    from kklab.cycles import HomotopyCertificate
    bad = HomotopyCertificate((cert.samples[0], cert.samples[-1]), cert.ctrl,
                              cert.step_radii[:2], cert.relaxation, ())
    assert not check_certificate(bad).valid


def test_sample_path_cap(rng):
    ctrl = ControlData(diagonal_operators(rng, 2), 1.0, 0.1)
    from kklab.matcore import rotation
    P = unit_pair(1, 2, 2).p

    def fn(t):
        R = AugMatrix.from_scalar(rotation(t, 1), 2)
        return EvenCycle(R @ P @ R.H, P)

    with pytest.raises(StepSizeError):
        certified_path(fn, 0.0, 1.0, ControlData(ctrl.X, 1.0, 1e-9), max_samples=64)


def test_loop_check():
    P = AugMatrix.from_scalar(np.diag([1.0, 0.0]), 2)
    assert check_loop(LoopCycle((P, P, P), "even")).passed
    Q = AugMatrix(P.scalar, 0.1 * np.eye(4))
    assert not check_loop(LoopCycle((P, Q), "even")).passed


@settings(max_examples=10)
@given(seeds)
def test_odd_validation_symmetric(seed):
    u, ctrl = odd_instance(gen(seed), 2, 2, eta=0.01)
    rep = validate_odd(u, ctrl)
    assert rep.passed
    assert validate_odd(OddCycle(u.u_inv, u.u), ctrl).passed
