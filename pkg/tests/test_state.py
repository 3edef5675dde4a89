import math

import numpy as np
import pytest

from mkmbs import lie
from mkmbs.lie import Formulation, Pose
from mkmbs.state import (AlgebraElement, MbsConfig, MbsState, config_compose, state_compose,
                         state_dexpinv, state_exp)

RNG = np.random.default_rng(7)
FORMS = list(Formulation)


def rand_state(n, form):
    poses = [lie.exp(np.concatenate([RNG.normal(size=3), RNG.normal(size=3)]), form)
             for _ in range(n)]
    return MbsState(MbsConfig.from_poses(poses), RNG.normal(size=(n, 6)))


def rand_element(n, scale=1.0):
    return AlgebraElement(scale * RNG.normal(size=(n, 6)), RNG.normal(size=(n, 6)))


def assert_state_close(a, b, atol):
    np.testing.assert_allclose(a.q.R, b.q.R, atol=atol)
    np.testing.assert_allclose(a.q.r, b.q.r, atol=atol)
    np.testing.assert_allclose(a.V, b.V, atol=atol)


@pytest.mark.parametrize("form", FORMS)
def test_identity_state_is_neutral(form):
    X = rand_state(3, form)
    assert_state_close(state_compose(MbsState.identity(3, form), X), X, 0)
    assert_state_close(state_compose(X, MbsState.identity(3, form)), X, 1e-15)


@pytest.mark.parametrize("form", FORMS)
def test_single_body_compose_matches_pose_law(form):
    a, b = rand_state(1, form), rand_state(1, form)
    c = state_compose(a, b)
    P = lie.compose(a.q.poses[0], b.q.poses[0])
    np.testing.assert_allclose(c.q.R[0], P.R, atol=1e-15)
    np.testing.assert_allclose(c.q.r[0], P.r, atol=1e-15)
    np.testing.assert_array_equal(c.V, a.V + b.V)


@pytest.mark.parametrize("form", FORMS)
def test_compose_associative(form):
    for _ in range(10):
        a, b, c = (rand_state(2, form) for _ in range(3))
        assert_state_close(state_compose(state_compose(a, b), c),
                           state_compose(a, state_compose(b, c)), 1e-12)


def test_compose_rejects_mismatch():
    with pytest.raises(ValueError):
        config_compose(MbsConfig.identity(2, Formulation.SE3), MbsConfig.identity(3, Formulation.SE3))
    with pytest.raises(ValueError):
        config_compose(MbsConfig.identity(1, Formulation.SE3),
                       MbsConfig.identity(1, Formulation.DIRECT_PRODUCT))


def test_state_velocity_shape_checked():
    with pytest.raises(ValueError):
        MbsState(MbsConfig.identity(2, Formulation.SE3), np.zeros((3, 6)))


@pytest.mark.parametrize("form", FORMS)
def test_exp_of_zero_is_identity(form):
    X = state_exp(AlgebraElement.zeros(2), form)
    assert_state_close(X, MbsState.identity(2, form), 0)


def test_exp_single_body_screw():
    x = AlgebraElement(np.array([[0, 0, math.pi / 2, 0, 0, 1]], float), np.zeros((1, 6)))
    X = state_exp(x, Formulation.SE3)
    np.testing.assert_allclose(X.q.R[0], lie.exp_so3([0, 0, math.pi / 2]), atol=1e-15)
    np.testing.assert_allclose(X.q.r[0], [0, 0, 1], atol=1e-15)
    np.testing.assert_array_equal(X.V, np.zeros((1, 6)))


@pytest.mark.parametrize("form", FORMS)
def test_exp_is_componentwise(form):
    x = rand_element(2)
    X = state_exp(x, form)
    for i in range(2):
        P = lie.exp(x.vel[i], form)
        np.testing.assert_array_equal(X.q.R[i], P.R)
        np.testing.assert_array_equal(X.q.r[i], P.r)
    np.testing.assert_array_equal(X.V, x.acc)


@pytest.mark.parametrize("form", FORMS)
def test_exp_inverse_element(form):
    x = rand_element(3)
    assert_state_close(state_compose(state_exp(x, form), state_exp(-x, form)),
                       MbsState.identity(3, form), 1e-12)


@pytest.mark.parametrize("form", FORMS)
def test_dexpinv_at_zero_and_acc_passthrough(form):
    y = rand_element(2)
    out = state_dexpinv(AlgebraElement.zeros(2), y, form)
    np.testing.assert_array_equal(out.vel, y.vel)
    out = state_dexpinv(rand_element(2, 0.5), y, form)
    assert out.acc is y.acc


@pytest.mark.parametrize("form", FORMS)
def test_dexpinv_matches_single_body(form):
    x, y = rand_element(2, 0.5), rand_element(2)
    out = state_dexpinv(x, y, form)
    for i in range(2):
        np.testing.assert_allclose(out.vel[i], lie.dexpinv(x.vel[i], y.vel[i], form), atol=0)


def test_algebra_arithmetic():
    x, y = rand_element(2), rand_element(2)
    z = 2.0 * x + (-y)
    np.testing.assert_array_equal(z.vel, 2.0 * x.vel - y.vel)
    np.testing.assert_array_equal((x * 3.0).acc, 3.0 * x.acc)


def test_from_poses_validates():
    with pytest.raises(ValueError):
        MbsConfig.from_poses([])
    with pytest.raises(ValueError):
        MbsConfig.from_poses([Pose.identity(Formulation.SE3),
                              Pose.identity(Formulation.DIRECT_PRODUCT)])
