"""Independent reference computations for testing the integrator and Lie maps.

The heavy-top reference uses quaternions and an adaptive Dormand-Prince pair,
and the exponential and its differential are summed as plain matrix series, so
none of it depends on the closed forms being tested.  ``log_so3`` is used only
to measure distances between rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dae import DaeModel
from .lie import log_so3
from .state import AlgebraElement, MbsConfig, config_compose, state_exp


# --------------------------------------------------------------------------
# Matrix series
# --------------------------------------------------------------------------

def exp_series(A: np.ndarray, terms: int = 30) -> np.ndarray:
    """``sum A^k / k!`` with scaling and squaring."""
    A = np.asarray(A, dtype=float)
    norm = float(np.abs(A).sum(axis=1).max()) if A.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    B = A / 2.0**squarings
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms + 1):
        term = term @ B / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def dexp_series(adX: np.ndarray, terms: int = 40) -> np.ndarray:
    """``sum ad^k / (k+1)!``, the right-trivialized differential of exp.

    This is the sign convention whose inverse is ``I - ad/2 + ...``; the
    alternating variant inverts to ``I + ad/2 + ...`` instead.
    """
    adX = np.asarray(adX, dtype=float)
    out = np.eye(adX.shape[0])
    term = np.eye(adX.shape[0])
    for k in range(1, terms + 1):
        term = term @ adX / (k + 1)
        out = out + term
    return out


def hat(w) -> np.ndarray:
    x, y, z = (float(e) for e in w)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def se3_matrix(X) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:3, :3] = hat(X[:3])
    out[:3, 3] = X[3:]
    return out


def ad_matrix(X) -> np.ndarray:
    """Matrix of ``Y -> [X, Y]`` on se(3), built from hats."""
    out = np.zeros((6, 6))
    W = hat(X[:3])
    out[:3, :3] = W
    out[3:, :3] = hat(X[3:])
    out[3:, 3:] = W
    return out


# --------------------------------------------------------------------------
# Quaternion heavy-top reference
# --------------------------------------------------------------------------

def quat_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of ``(w, x, y, z)`` quaternions."""
    pw, pv = p[0], p[1:]
    qw, qv = q[0], q[1:]
    return np.concatenate([[pw * qw - pv @ qv], pw * qv + qw * pv + np.cross(pv, qv)])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method, sign fixed to ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    cand = [tr, R[0, 0], R[1, 1], R[2, 2]]
    k = int(np.argmax(cand))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return -q if q[0] < 0 else q


@dataclass(frozen=True)
class AdaptiveSolverSettings:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    initial_step: float = 1e-4
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial step must be positive")


class ReferenceError(RuntimeError):
    """The step-size controller could not meet the tolerances."""


@dataclass(frozen=True)
class ReferenceTrajectory:
    t: np.ndarray  # (k,)
    quat: np.ndarray  # (k, 4)
    omega: np.ndarray  # (k, 3) body frame
    com: np.ndarray  # (k, 3) world frame
    steps: int

    def rotation(self, i: int) -> np.ndarray:
        return quat_to_matrix(self.quat[i])


# Dormand-Prince 5(4) coefficients.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])


def _dp_step(f, t, y, h):
    ks = []
    for c, row in zip(_DP_C, _DP_A):
        yi = y + h * sum((a * k for a, k in zip(row, ks)), np.zeros_like(y))
        ks.append(f(t + c * h, yi))
    K = np.array(ks)
    y5 = y + h * (_DP_B5 @ K)
    y4 = y + h * (_DP_B4 @ K)
    return y5, y5 - y4


def adaptive_integrate(f, y0: np.ndarray, t_eval, settings: AdaptiveSolverSettings,
                       project=None) -> tuple[np.ndarray, int]:
    """Dormand-Prince 5(4) with local extrapolation, landing on every ``t_eval``.

    ``project`` is applied to the state after each accepted step.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) < 0):
        raise ValueError("t_eval must be non-decreasing")
    y = np.asarray(y0, dtype=float).copy()
    t = float(t_eval[0])
    h = settings.initial_step
    out = [y.copy()]
    steps = 0
    for target in t_eval[1:]:
        while t < target:
            if steps >= settings.max_steps:
                raise ReferenceError(f"step cap {settings.max_steps} reached at t={t:.6g}")
            last = h >= target - t
            hs = target - t if last else h
            y_new, err_vec = _dp_step(f, t, y, hs)
            scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
            if err <= 1.0:
                t = float(target) if last else t + hs
                y = project(y_new) if project is not None else y_new
                steps += 1
            factor = 0.9 * err ** -0.2 if err > 0 else 5.0
            h_next = hs * min(5.0, max(0.2, factor))
            if not last or err > 1.0:
                h = h_next
            if h < 1e-14 * max(1.0, abs(t)):
                raise ReferenceError(f"step size underflow at t={t:.6g}")
        out.append(y.copy())
    return np.array(out), steps


def heavy_top_reference(t_end: float, settings: AdaptiveSolverSettings | None = None,
                        t_eval=None, inertia=None, mass=None, r0=None, omega0=None,
                        gravity=(0.0, 0.0, 0.0)) -> ReferenceTrajectory:
    """Euler's equations about the pivot in quaternion form.

    Defaults are the benchmark heavy top: ``Theta = diag(.36, .306, .09)``,
    ``m = 21.6``, ``r0 = (.5, 0, 0)``, ``omega0 = (0, 20 pi, 10 pi)``, starting
    from the identity orientation.  The body rotates about a fixed pivot, so
    its motion is fully described by orientation and body angular velocity;
    the COM sits at ``R r0``.
    """
    settings = settings or AdaptiveSolverSettings()
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    theta0 = np.diag([0.36, 0.306, 0.09]) if inertia is None else np.asarray(inertia, float)
    m = 21.6 if mass is None else float(mass)
    r0 = np.array([0.5, 0.0, 0.0]) if r0 is None else np.asarray(r0, float)
    w0 = (np.array([0.0, 20 * math.pi, 10 * math.pi]) if omega0 is None
          else np.asarray(omega0, float))
    g = np.asarray(gravity, dtype=float)
    theta_p = theta0 + m * ((r0 @ r0) * np.eye(3) - np.outer(r0, r0))
    theta_p_inv = np.linalg.inv(theta_p)

    def rhs(_t, y):
        q, w = y[:4], y[4:]
        torque = np.cross(r0, m * (quat_to_matrix(q).T @ g)) if g.any() else 0.0
        wdot = theta_p_inv @ (torque - np.cross(w, theta_p @ w))
        qdot = 0.5 * quat_multiply(q, np.concatenate([[0.0], w]))
        return np.concatenate([qdot, wdot])

    def renormalize(y):
        y = y.copy()
        y[:4] /= np.linalg.norm(y[:4])
        return y

    t_eval = np.array([0.0, t_end]) if t_eval is None else np.asarray(t_eval, dtype=float)
    if t_eval[0] != 0.0:
        t_eval = np.concatenate([[0.0], t_eval])
    y0 = np.concatenate([[1.0, 0.0, 0.0, 0.0], w0])
    Y, steps = adaptive_integrate(rhs, y0, t_eval, settings, project=renormalize)
    quats = Y[:, :4]
    com = np.array([quat_to_matrix(q) @ r0 for q in quats])
    return ReferenceTrajectory(t_eval, quats, Y[:, 4:], com, steps)


def orientation_error(R: np.ndarray, R_ref: np.ndarray) -> float:
    """Geodesic angle between two rotations, ``|log(R_ref^T R)|``."""
    return float(np.linalg.norm(log_so3(R_ref.T @ R)))


# --------------------------------------------------------------------------
# Finite-difference checks
# --------------------------------------------------------------------------

def _perturb(q: MbsConfig, direction: np.ndarray) -> MbsConfig:
    x = AlgebraElement(direction.reshape(q.n, 6), np.zeros((q.n, 6)))
    return config_compose(q, state_exp(x, q.formulation).q)


def fd_jacobian(model: DaeModel, q: MbsConfig, eps: float = 1e-6) -> np.ndarray:
    """Central differences of ``g(q exp(eps e_i))`` over the 6n velocity directions."""
    nv = 6 * q.n
    J = np.empty((model.m_constraints, nv))
    for i in range(nv):
        e = np.zeros(nv)
        e[i] = eps
        J[:, i] = (model.constraint(_perturb(q, e)) - model.constraint(_perturb(q, -e))) / (2 * eps)
    return J


def fd_acc_rhs(model: DaeModel, q: MbsConfig, V: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """``-(d/dt J) V`` along the constant-velocity motion ``q exp(t V)``."""
    flat = np.asarray(V, dtype=float).reshape(-1)
    Jp = model.jacobian(_perturb(q, eps * flat))
    Jm = model.jacobian(_perturb(q, -eps * flat))
    return -((Jp - Jm) @ flat) / (2 * eps)

