import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkmbs import lie
from mkmbs.lie import DomainError, Formulation, Pose
from mkmbs.oracle import ad_matrix, dexp_series, exp_series, hat, se3_matrix

RNG = np.random.default_rng(20240611)

finite = st.floats(-3.0, 3.0, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def rand_ball(radius, size=3):
    v = RNG.normal(size=size)
    return v / np.linalg.norm(v) * radius * RNG.uniform() ** (1 / 3)


def rand_twist(max_w=math.pi):
    return np.concatenate([rand_ball(max_w), RNG.normal(size=3)])


def rz(angle):
    return lie.exp_so3([0.0, 0.0, angle])


# hat / vee -----------------------------------------------------------------

def test_hat3_zero_and_unit():
    assert np.array_equal(lie.hat3([0, 0, 0]), np.zeros((3, 3)))
    assert np.array_equal(lie.hat3([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(vec3, vec3)
def test_hat3_is_cross_product(w, u):
    np.testing.assert_allclose(lie.hat3(w) @ u, np.cross(w, u), atol=1e-12)
    W = lie.hat3(w)
    assert np.array_equal(W, -W.T)
    np.testing.assert_array_equal(lie.vee3(W), w)


# group laws ------------------------------------------------------------------

@pytest.mark.parametrize("form", list(Formulation))
def test_identity_is_neutral(form):
    C = Pose(lie.exp_so3([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]), form)
    for P in (lie.compose(Pose.identity(form), C), lie.compose(C, Pose.identity(form))):
        np.testing.assert_allclose(P.R, C.R, atol=1e-15)
        np.testing.assert_allclose(P.r, C.r, atol=1e-15)


def test_compose_quarter_turn():
    R90 = rz(math.pi / 2)
    a = Pose(R90, np.array([1.0, 0, 0]), Formulation.SE3)
    b = Pose(np.eye(3), np.array([1.0, 0, 0]), Formulation.SE3)
    P = lie.compose(a, b)
    np.testing.assert_allclose(P.r, [1, 1, 0], atol=1e-15)
    a_dp = Pose(R90, np.array([1.0, 0, 0]), Formulation.DIRECT_PRODUCT)
    b_dp = Pose(np.eye(3), np.array([1.0, 0, 0]), Formulation.DIRECT_PRODUCT)
    P = lie.compose(a_dp, b_dp)
    np.testing.assert_allclose(P.R, R90, atol=1e-15)
    np.testing.assert_allclose(P.r, [2, 0, 0], atol=1e-15)


def test_compose_rejects_mixed_formulations():
    with pytest.raises(ValueError):
        lie.compose(Pose.identity(Formulation.SE3), Pose.identity(Formulation.DIRECT_PRODUCT))


def test_inverse_direct_product_negates_translation():
    R = lie.exp_so3([0.4, -0.1, 0.7])
    inv = lie.inverse(Pose(R, np.array([1.0, 2.0, 3.0]), Formulation.DIRECT_PRODUCT))
    np.testing.assert_array_equal(inv.R, R.T)
    np.testing.assert_array_equal(inv.r, [-1, -2, -3])


@pytest.mark.parametrize("form", list(Formulation))
def test_inverse_round_trip(form):
    for _ in range(20):
        C = lie.exp(rand_twist(), form)
        C = Pose(C.R, C.r * 5.0, form)
        P = lie.compose(C, lie.inverse(C))
        np.testing.assert_allclose(P.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(P.r, np.zeros(3), atol=1e-12)


def test_pose_matrix_layout():
    C = Pose(rz(0.3), np.array([1.0, 2.0, 3.0]))
    M = C.matrix()
    np.testing.assert_array_equal(M[:3, 3], [1, 2, 3])
    np.testing.assert_array_equal(M[3], [0, 0, 0, 1])


def test_formulation_parse():
    assert Formulation.parse("SE3") is Formulation.SE3
    assert Formulation.parse("so3xr3") is Formulation.DIRECT_PRODUCT
    with pytest.raises(ValueError):
        Formulation.parse("se2")


# exp_so3 / log_so3 -------------------------------------------------------------

def test_exp_so3_known_values():
    np.testing.assert_array_equal(lie.exp_so3([0, 0, 0]), np.eye(3))
    np.testing.assert_allclose(lie.exp_so3([math.pi / 2, 0, 0]),
                               [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-15)


def test_exp_so3_matches_series():
    for _ in range(200):
        w = rand_ball(math.pi)
        np.testing.assert_allclose(lie.exp_so3(w), exp_series(hat(w), 30), rtol=0, atol=1e-13)


def test_rodrigues_coefficient_uses_squared_angle():
    # B = (1 - cos t) / t^2; the variant with a single power of t is not an exponential.
    w = np.array([0.0, 0.0, 2.0])
    A, B = lie.rodrigues_coefficients(2.0)
    assert B == pytest.approx((1 - math.cos(2.0)) / 4.0, rel=1e-15)
    W = hat(w)
    wrong = np.eye(3) + A * W + (1 - math.cos(2.0)) / 2.0 * W @ W
    assert np.max(np.abs(wrong - exp_series(W))) > 0.1


def test_exp_so3_orthonormal_on_large_angles():
    for _ in range(200):
        R = lie.exp_so3(rand_ball(10.0))
        assert lie.orthonormality_error(R) <= 1e-13
        assert abs(np.linalg.det(R) - 1) <= 1e-13


def test_log_so3_round_trips():
    np.testing.assert_array_equal(lie.log_so3(np.eye(3)), np.zeros(3))
    w = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(lie.log_so3(lie.exp_so3(w)), w, atol=1e-12)
    for _ in range(200):
        w = rand_ball(math.pi - 1e-3)
        R = lie.exp_so3(w)
        np.testing.assert_allclose(lie.exp_so3(lie.log_so3(R)), R, atol=1e-10)
        assert np.linalg.norm(lie.log_so3(R)) < math.pi


def test_log_so3_near_half_turn():
    w = np.array([0.0, 0.0, math.pi - 1e-6])
    np.testing.assert_allclose(lie.log_so3(lie.exp_so3(w)), w, atol=1e-6)
    axis = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
    w = (math.pi - 1e-6) * axis
    np.testing.assert_allclose(lie.log_so3(lie.exp_so3(w)), w, atol=1e-6)


def test_log_so3_rejects_half_turn():
    with pytest.raises(DomainError):
        lie.log_so3(np.diag([1.0, -1.0, -1.0]))


# exp_se3 / exp_dp --------------------------------------------------------------

def test_exp_se3_pure_translation():
    P = lie.exp_se3([0, 0, 0, 1.0, -2.0, 3.0])
    np.testing.assert_array_equal(P.R, np.eye(3))
    np.testing.assert_array_equal(P.r, [1, -2, 3])
    assert P.formulation is Formulation.SE3


def test_exp_se3_screw_along_axis():
    P = lie.exp_se3([0, 0, math.pi / 2, 0, 0, 1])
    np.testing.assert_allclose(P.R, rz(math.pi / 2), atol=1e-15)
    np.testing.assert_allclose(P.r, [0, 0, 1], atol=1e-15)


def test_exp_se3_matches_matrix_series():
    for _ in range(300):
        X = rand_twist()
        E = exp_series(se3_matrix(X), 30)
        np.testing.assert_allclose(lie.exp_se3(X).matrix()[:3], E[:3], rtol=0, atol=1e-12)


def test_exp_se3_inverse_twist():
    for _ in range(50):
        X = rand_twist()
        P = lie.compose(lie.exp_se3(X), lie.exp_se3(-X))
        np.testing.assert_allclose(P.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(P.r, 0, atol=1e-12)


def test_exp_dp_translation_passes_through():
    P = lie.exp_dp([0, 0, math.pi / 2, 1, 0, 0])
    np.testing.assert_allclose(P.R, rz(math.pi / 2), atol=1e-15)
    np.testing.assert_array_equal(P.r, [1, 0, 0])
    assert P.formulation is Formulation.DIRECT_PRODUCT
    X = rand_twist()
    np.testing.assert_array_equal(lie.exp_dp(X).R, lie.exp_so3(X[:3]))


# algebra -------------------------------------------------------------------------

def test_ad_se3_screw_product():
    np.testing.assert_array_equal(lie.ad_se3(np.zeros(6)), np.zeros((6, 6)))
    for _ in range(50):
        X, Y = rand_twist(), rand_twist()
        w1, v1, w2, v2 = X[:3], X[3:], Y[:3], Y[3:]
        expected = np.concatenate([np.cross(w1, w2), np.cross(w1, v2) - np.cross(w2, v1)])
        np.testing.assert_allclose(lie.ad_se3(X) @ Y, expected, atol=1e-13)
        np.testing.assert_allclose(lie.bracket_se3(X, Y), expected, atol=1e-13)
        np.testing.assert_allclose(lie.ad_se3(X), ad_matrix(X), atol=0)


def test_bracket_antisymmetry_and_jacobi():
    for _ in range(100):
        X, Y, Z = rand_twist(), rand_twist(), rand_twist()
        b = lie.bracket_se3
        np.testing.assert_allclose(b(X, Y), -b(Y, X), atol=1e-13)
        jacobi = b(b(X, Y), Z) + b(b(Y, Z), X) + b(b(Z, X), Y)
        np.testing.assert_allclose(jacobi, 0, atol=1e-12)


def test_bracket_dp():
    X = rand_twist()
    np.testing.assert_array_equal(lie.bracket_dp(X, X), np.zeros(6))
    np.testing.assert_array_equal(lie.bracket_dp([1, 0, 0, 5, 5, 5], [0, 1, 0, 7, 7, 7]),
                                  [0, 0, 1, 0, 0, 0])
    assert np.array_equal(lie.bracket_dp(rand_twist(), rand_twist())[3:], np.zeros(3))


def test_screw_pitch():
    assert lie.screw_pitch([0, 0, 2, 0, 0, 4]) == 2.0
    assert lie.screw_pitch([0, 0, 1, 1, 0, 0]) == 0.0
    X = rand_twist()
    assert lie.screw_pitch(X) * (X[:3] @ X[:3]) == pytest.approx(X[:3] @ X[3:], abs=1e-14)
    with pytest.raises(DomainError):
        lie.screw_pitch([0, 0, 0, 1, 2, 3])


# dexp^-1 ---------------------------------------------------------------------------

def test_dexpinv_at_zero_is_identity():
    eta = RNG.normal(size=3)
    Y = RNG.normal(size=6)
    np.testing.assert_array_equal(lie.dexpinv_so3(np.zeros(3), eta), eta)
    np.testing.assert_array_equal(lie.dexpinv_se3(np.zeros(6), Y), Y)
    np.testing.assert_array_equal(lie.dexpinv_dp(np.zeros(6), Y), Y)


def test_dexpinv_so3_inverts_series_dexp():
    for _ in range(200):
        xi = rand_ball(2.0)
        eta = RNG.normal(size=3)
        D = dexp_series(hat(xi))
        np.testing.assert_allclose(lie.dexpinv_so3(xi, D @ eta), eta, atol=1e-10)


def test_dexpinv_so3_quarter_turn():
    xi = np.array([math.pi / 2, 0, 0])
    expected = np.linalg.inv(dexp_series(hat(xi))) @ [0, 1, 0]
    np.testing.assert_allclose(lie.dexpinv_so3(xi, [0, 1, 0]), expected, atol=1e-13)
    # (I - hat/2 + c hat^2) e_y = (1 - c th^2) e_y - th/2 e_z
    th = math.pi / 2
    c = (1 - th / 2 / math.tan(th / 2)) / th**2
    np.testing.assert_allclose(expected, [0, 1 - c * th**2, -th / 2], atol=1e-13)


def test_dexpinv_se3_matrix_inverts_series_dexp():
    for _ in range(200):
        X = rand_twist(2.0)
        P = dexp_series(ad_matrix(X)) @ lie.dexpinv_se3_matrix(X)
        np.testing.assert_allclose(P, np.eye(6), atol=1e-10)


def test_alternating_sign_series_does_not_invert():
    X = np.array([0.7, 0.2, -0.4, 0.3, 0.1, 0.5])
    P = dexp_series(-ad_matrix(X)) @ lie.dexpinv_se3_matrix(X)
    assert np.max(np.abs(P - np.eye(6))) > 0.1


def test_dexpinv_se3_vector_matches_matrix():
    for _ in range(50):
        X, Y = rand_twist(2.0), RNG.normal(size=6)
        np.testing.assert_allclose(lie.dexpinv_se3(X, Y), lie.dexpinv_se3_matrix(X) @ Y,
                                   atol=1e-12)


def test_dexpinv_se3_angular_block_matches_so3():
    for _ in range(100):
        w, eta = rand_ball(2.0), RNG.normal(size=3)
        X = np.concatenate([w, np.zeros(3)])
        Y = np.concatenate([eta, np.zeros(3)])
        np.testing.assert_allclose(lie.dexpinv_se3(X, Y)[:3], lie.dexpinv_so3(w, eta),
                                   atol=1e-12)


def test_dexpinv_dp_delegates():
    X, Y = rand_twist(2.0), RNG.normal(size=6)
    out = lie.dexpinv_dp(X, Y)
    np.testing.assert_array_equal(out[3:], Y[3:])
    np.testing.assert_allclose(out[:3], lie.dexpinv_so3(X[:3], Y[:3]), atol=0)


@pytest.mark.parametrize("fn", [
    lambda w: lie.dexpinv_so3(w, [1, 0, 0]),
    lambda w: lie.dexpinv_se3(np.concatenate([w, [0, 0, 0]]), np.ones(6)),
    lambda w: lie.dexpinv_dp(np.concatenate([w, [0, 0, 0]]), np.ones(6)),
])
def test_dexpinv_rejects_two_pi(fn):
    with pytest.raises(DomainError):
        fn(np.array([0.0, 0.0, 2 * math.pi]))
    fn(np.array([0.0, 0.0, 2 * math.pi - 1e-3]))


# branch continuity -------------------------------------------------------------------

def _both_branches(monkeypatch, fn, X):
    monkeypatch.setattr(lie, "SMALL_ANGLE", 0.0)
    monkeypatch.setattr(lie, "SMALL_ANGLE_DEXPINV_SE3", 0.0)
    closed = fn(X)
    monkeypatch.setattr(lie, "SMALL_ANGLE", 1.0)
    monkeypatch.setattr(lie, "SMALL_ANGLE_DEXPINV_SE3", 1.0)
    series = fn(X)
    monkeypatch.undo()
    return closed, series


MAPS = {
    "exp_so3": lambda X: lie.exp_so3(X[:3]),
    "exp_se3": lambda X: lie.exp_se3(X).matrix(),
    "dexpinv_so3": lambda X: lie.dexpinv_so3(X[:3], [0.3, -1.2, 0.8]),
    "dexpinv_se3": lambda X: lie.dexpinv_se3(X, [0.3, -1.2, 0.8, 1.1, 0.4, -0.6]),
}


@pytest.mark.parametrize("name", sorted(MAPS))
def test_branches_agree_at_threshold(monkeypatch, name):
    eps = lie.SMALL_ANGLE_DEXPINV_SE3 if name == "dexpinv_se3" else lie.SMALL_ANGLE
    axis = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    for t in (eps * (1 - 1e-3), eps * (1 + 1e-3)):
        X = np.concatenate([t * axis, [0.4, 1.0, -0.7]])
        closed, series = _both_branches(monkeypatch, MAPS[name], X)
        np.testing.assert_allclose(closed, series, rtol=0, atol=1e-12)


def test_maps_match_oracle_on_both_sides_of_threshold():
    axis = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    v = np.array([0.4, 1.0, -0.7])
    for eps in (lie.SMALL_ANGLE, lie.SMALL_ANGLE_DEXPINV_SE3):
        for X in (np.concatenate([eps * (1 - 1e-3) * axis, v]),
                  np.concatenate([eps * (1 + 1e-3) * axis, v])):
            np.testing.assert_allclose(lie.exp_se3(X).matrix()[:3],
                                       exp_series(se3_matrix(X))[:3], atol=1e-12)
            np.testing.assert_allclose(lie.dexpinv_se3_matrix(X),
                                       np.linalg.inv(dexp_series(ad_matrix(X))), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-8, 0.2), vec3)
def test_dexpinv_se3_small_angles_accurate(theta, v):
    X = np.concatenate([[theta, 0.0, 0.0], v])
    np.testing.assert_allclose(lie.dexpinv_se3_matrix(X),
                               np.linalg.inv(dexp_series(ad_matrix(X))), atol=1e-11)
