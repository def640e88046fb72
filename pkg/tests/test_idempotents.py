import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from kklab.errors import DomainError, StepSizeError, ValidationError
from kklab.generators import (cnormal, random_idempotent, random_invertible, random_projection)
from kklab.idempotents import (
    LIFT_EPS, associated_projection, idem_proj_path, lift_constant, polar_retract,
    spectral_distance_check, unitary_path_lift,
)
from kklab.matcore import op_norm, rotation

seeds = st.integers(0, 2 ** 32 - 1)


def gen(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def test_projection_is_its_own_associated_projection(rng):
    p = random_projection(rng, 4, 2)
    w = associated_projection(p)
    assert np.allclose(w.r, p, atol=1e-12)
    assert np.allclose(w.z, np.eye(4), atol=1e-12)


def test_upper_triangular_idempotent():
    p = np.array([[1.0, 1.0], [0.0, 0.0]])
    w = associated_projection(p)
    assert np.allclose(w.r, [[1, 0], [0, 0]], atol=1e-14)
    assert op_norm(w.u @ p @ w.u_inv - w.r) < 1e-14


def test_non_idempotent_rejected():
    with pytest.raises(ValidationError):
        associated_projection(np.array([[1.0, 0.0], [0.0, 0.5]]))


@given(seeds, st.integers(2, 8))
def test_range_equality(seed, n):
    r = gen(seed)
    p = random_idempotent(r, n, int(r.integers(1, n)), 4.0)
    w = associated_projection(p)
    assert op_norm(w.r @ p - p) <= 1e-8
    assert op_norm(p @ w.r - w.r) <= 1e-8
    assert op_norm(w.r @ w.r - w.r) <= 1e-8
    assert op_norm(w.r - w.r.conj().T) <= 1e-8


@given(seeds, st.integers(2, 8))
def test_idempotent_norm_identities(seed, n):
    r = gen(seed)
    p = random_idempotent(r, n, int(r.integers(1, n)), 4.0)
    one = np.eye(n)
    assert abs(op_norm(one - p) - op_norm(p)) <= 1e-9
    assert op_norm(p - p.conj().T) <= op_norm(p) + 1e-9
    assert op_norm(2 * p - one) <= 2 * op_norm(p) + 1e-9


@given(seeds, st.integers(2, 6), st.floats(1e-4, 0.6))
def test_associated_projection_contractive(seed, n, s):
    r = gen(seed)
    p = random_idempotent(r, n, int(r.integers(1, n)), 3.0)
    g = expm(s * cnormal(r, n, n))
    p2 = g @ p @ np.linalg.inv(g)
    d = op_norm(associated_projection(p).r - associated_projection(p2, tol=1e-8).r)
    assert d <= op_norm(p - p2) + 1e-8


def test_path_endpoints(rng):
    p = random_idempotent(rng, 4, 2, 3.0)
    r = associated_projection(p).r
    assert np.array_equal(idem_proj_path(p, 0.0, r), p)
    assert np.allclose(idem_proj_path(p, 1.0, r), r)
    with pytest.raises(DomainError):
        idem_proj_path(p, 1.5)


@given(seeds, st.integers(2, 6), st.floats(0, 1))
def test_path_is_idempotent_with_commutator_bound(seed, n, t):
    r = gen(seed)
    kappa = 3.0
    p = random_idempotent(r, n, int(r.integers(1, n)), kappa)
    rt = idem_proj_path(p, t)
    c = cnormal(r, n, n)
    c /= op_norm(c)
    assert op_norm(rt @ rt - rt) <= 1e-8
    assert op_norm(rt) <= max(op_norm(p), 1.0) + 1e-9
    lhs = op_norm(rt @ c - c @ rt)
    bound = (1 + 2 * t) * op_norm(p @ c - c @ p) + t * op_norm(p @ c.conj().T - c.conj().T @ p)
    assert lhs <= bound + 1e-8


def test_lift_constant_admissible():
    assert lift_constant(LIFT_EPS) <= 3


def test_constant_path_lifts_to_identity(rng):
    p = random_projection(rng, 4, 2)
    lift = unitary_path_lift(np.linspace(0, 1, 5), [p] * 5)
    for u in lift.unitaries:
        assert np.allclose(u, np.eye(4), atol=1e-14)


def test_rotation_path_lift_matches_generator():
    ts = np.linspace(0, 1, 101)
    P = np.diag([1.0, 0.0]).astype(complex)
    ps = [rotation(t, 1) @ P @ rotation(t, 1).T for t in ts]
    lift = unitary_path_lift(ts, ps)
    assert lift.conjugation_error <= 1e-8
    assert lift.unitarity_error <= 1e-8
    assert lift.lipschitz <= 3 * 1.0 + 0.05


def test_lift_rejects_far_samples():
    P = np.diag([1.0, 0.0]).astype(complex)
    Q = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(StepSizeError):
        unitary_path_lift([0.0, 1.0], [P, Q])


@given(seeds, st.integers(2, 6))
def test_smooth_projection_path_lift(seed, n):
    from kklab.suites import DEFAULT_TOL, projection_path_lift
    for o in projection_path_lift(gen(seed), n, DEFAULT_TOL):
        assert o.passed, o


def test_polar_retract_examples(rng):
    q = random_invertible(rng, 3, 1.0)
    for t in (0.0, 0.2, 0.5):
        assert np.allclose(polar_retract(q, t), q, atol=1e-12)
    d = np.diag([0.5, 2.0, 3.0])
    assert np.allclose(polar_retract(d, 0.3), np.diag(np.diag(d) ** 0.4))
    assert np.allclose(polar_retract(d, 0.5), np.eye(3))
    with pytest.raises(DomainError):
        polar_retract(np.diag([1.0, 0.0]), 0.2)


@given(seeds, st.integers(2, 6), st.floats(0, 0.5))
def test_polar_retract_norms(seed, n, t):
    r = gen(seed)
    kappa = 3.0
    u = random_invertible(r, n, kappa)
    ut = polar_retract(u, t)
    assert op_norm(ut) <= kappa * (1 + 1e-9)
    assert op_norm(np.linalg.inv(ut)) <= kappa * (1 + 1e-9)
    half = polar_retract(u, 0.5)
    assert op_norm(half.conj().T @ half - np.eye(n)) <= 1e-9


def test_spectral_distance_examples(rng):
    b = np.diag([0.0, 1.0, 2.0]).astype(complex)
    assert spectral_distance_check(b, b).margin == pytest.approx(0.0)
    e = cnormal(rng, 3, 3)
    rep = spectral_distance_check(b + 0.1 * e / op_norm(e), b)
    assert rep.holds
    with pytest.raises(ValidationError):
        spectral_distance_check(b, np.array([[0, 1], [0, 0]]))


def test_perturbed_projection_spectrum(rng):
    p = random_projection(rng, 5, 2)
    e = cnormal(rng, 5, 5)
    e = 0.5 * (e + e.conj().T)
    delta = 0.05
    a = p + 0.9 * delta * e / op_norm(e)
    ev = np.linalg.eigvalsh(a)
    assert np.all((ev < delta) & (ev > -delta) | (ev > 1 - delta) & (ev < 1 + delta))
