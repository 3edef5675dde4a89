"""Benchmark mechanisms built from rigid boxes and spherical joints.

Every mechanism is assembled by :class:`SphericalJointSystem`, which supplies
constraint, Jacobian and acceleration right-hand side for either formulation.
A joint connects a point on one body (or a fixed world point) to a point on
another.  Ground joints are resolved in the body frame under SE(3) and in the
world frame under SO(3) x R^3; joints between two bodies are resolved in the
world frame.  With these choices the Jacobians reproduce the classical
heavy-top and double-pendulum systems block for block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dae import DaeModel, consistent_velocity
from .lie import Formulation, _cross
from .state import MbsConfig, MbsState

ALUMINIUM_DENSITY = 2700.0  # kg/m^3
STANDARD_GRAVITY = 9.81  # m/s^2


@dataclass(frozen=True)
class BodyParams:
    mass: float
    inertia: np.ndarray  # 3x3, COM frame
    attachments: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("body mass must be positive")
        I = np.asarray(self.inertia, dtype=float)
        if not np.allclose(I, I.T) or np.linalg.eigvalsh(I).min() <= 0:
            raise ValueError("inertia must be symmetric positive definite")

    @classmethod
    def box(cls, a: float, b: float, c: float, density: float = ALUMINIUM_DENSITY,
            attachments=()) -> "BodyParams":
        """Homogeneous box with side lengths ``a, b, c`` along the COM frame axes."""
        m = density * a * b * c
        inertia = m / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])
        return cls(m, inertia, tuple(np.asarray(p, dtype=float) for p in attachments))


@dataclass(frozen=True)
class SphericalJoint:
    """Coincidence of point ``a`` and point ``b``; ``g = p_a - p_b``.

    A body index of ``None`` denotes the ground, in which case the point is a
    fixed world position.
    """

    body_a: int | None
    point_a: np.ndarray
    body_b: int | None
    point_b: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.body_a is None and self.body_b is None:
            raise ValueError("a joint needs at least one moving body")
        if self.body_a is not None and self.body_a == self.body_b:
            raise ValueError("a joint must connect two different bodies")
        object.__setattr__(self, "point_a_f", tuple(np.asarray(self.point_a, float).tolist()))
        object.__setattr__(self, "point_b_f", tuple(np.asarray(self.point_b, float).tolist()))

    @property
    def ground_body(self) -> int | None:
        """Index of the moving body of a ground joint, else ``None``."""
        if self.body_a is None:
            return self.body_b
        if self.body_b is None:
            return self.body_a
        return None


class SphericalJointSystem(DaeModel):
    """Rigid bodies with COM reference frames coupled by spherical joints."""

    def __init__(self, bodies: list[BodyParams], joints: list[SphericalJoint],
                 formulation: Formulation | str, gravity=(0.0, 0.0, 0.0),
                 name: str = "mechanism"):
        if not bodies:
            raise ValueError("at least one body required")
        self.bodies = list(bodies)
        self.joints = list(joints)
        self.formulation = Formulation.parse(formulation)
        self.gravity = np.asarray(gravity, dtype=float)
        self._name = name
        self.n_bodies = len(bodies)
        self.m_constraints = 3 * len(joints)
        n = self.n_bodies
        M = np.zeros((6 * n, 6 * n))
        for i, body in enumerate(bodies):
            M[6 * i:6 * i + 3, 6 * i:6 * i + 3] = body.inertia
            M[6 * i + 3:6 * i + 6, 6 * i + 3:6 * i + 6] = body.mass * np.eye(3)
        self._M = M
        self._inertia = [np.asarray(b.inertia, dtype=float) for b in bodies]
        self._mass = np.array([b.mass for b in bodies])
        self._inertia_f = [I.tolist() for I in self._inertia]
        self._mass_f = [float(b.mass) for b in bodies]
        self._g = self.gravity.tolist()
        self._se3 = self.formulation is Formulation.SE3

    @property
    def name(self) -> str:
        return self._name

    def joint_slices(self) -> list[slice]:
        return [slice(3 * k, 3 * k + 3) for k in range(len(self.joints))]

    # -- dynamics --------------------------------------------------------

    def mass_matrix(self, q: MbsConfig) -> np.ndarray:
        return self._M

    def forces(self, q: MbsConfig, V: np.ndarray, t: float) -> np.ndarray:
        se3 = self.formulation is Formulation.SE3
        gx, gy, gz = self._g
        Rs = q.R.tolist() if se3 else None
        Q = []
        for i, (w0, w1, w2, v0, v1, v2) in enumerate(V.tolist()):
            (a, b, c), (d, e, f), (g, h, k) = self._inertia_f[i]
            Q.extend(_cross(-w0, -w1, -w2, a * w0 + b * w1 + c * w2,
                            d * w0 + e * w1 + f * w2, g * w0 + h * w1 + k * w2))
            m = self._mass_f[i]
            if se3:
                (r00, r01, r02), (r10, r11, r12), (r20, r21, r22) = Rs[i]
                c0, c1, c2 = _cross(w0, w1, w2, v0, v1, v2)
                Q.append(m * (r00 * gx + r10 * gy + r20 * gz - c0))
                Q.append(m * (r01 * gx + r11 * gy + r21 * gz - c1))
                Q.append(m * (r02 * gx + r12 * gy + r22 * gz - c2))
            else:
                Q.extend((m * gx, m * gy, m * gz))
        return np.array(Q)

    def energies(self, q: MbsConfig, V: np.ndarray) -> tuple[float, float]:
        T = 0.0
        U = 0.0
        for i in range(self.n_bodies):
            w, v = V[i, :3], V[i, 3:]
            # |v| is the COM speed in both formulations (body or spatial frame).
            T += 0.5 * (w @ self._inertia[i] @ w + self._mass[i] * (v @ v))
            U -= self._mass[i] * (self.gravity @ q.r[i])
        return float(T), float(U)

    # -- kinematics ------------------------------------------------------

    def _body_resolved(self, joint: SphericalJoint) -> bool:
        return self.formulation is Formulation.SE3 and joint.ground_body is not None

    def _ground_terms(self, jt: SphericalJoint, R: list, r: list):
        """Sign and body-frame offset ``R^T (r - c)`` of a body-resolved ground joint."""
        i = jt.ground_body
        sign, c = (1.0, jt.point_b_f) if jt.body_a == i else (-1.0, jt.point_a_f)
        return sign, _mtv(R[i], [r[i][0] - c[0], r[i][1] - c[1], r[i][2] - c[2]])

    def constraint(self, q: MbsConfig) -> np.ndarray:
        R, r = q.R.tolist(), q.r.tolist()
        g = []
        for jt in self.joints:
            pa = _world_point(R, r, jt.body_a, jt.point_a_f)
            pb = _world_point(R, r, jt.body_b, jt.point_b_f)
            d = [pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]]
            if self._body_resolved(jt):
                d = _mtv(R[jt.ground_body], d)
            g.extend(d)
        return np.array(g)

    def _point_jacobian(self, R: list, body: int, s) -> list:
        """3x6 derivative of the world point ``r + R s`` w.r.t. the body velocity."""
        Rb = R[body]
        # row k of -(R hat(s)) is s x R_k
        rows = []
        for k in range(3):
            x, y, z = Rb[k]
            lin = Rb[k] if self._se3 else _EYE[k]
            rows.append([*_cross(s[0], s[1], s[2], x, y, z), *lin])
        return rows

    def jacobian(self, q: MbsConfig) -> np.ndarray:
        R, r = q.R.tolist(), q.r.tolist()
        J = np.zeros((self.m_constraints, 6 * self.n_bodies))
        for k, jt in enumerate(self.joints):
            rows = slice(3 * k, 3 * k + 3)
            if self._body_resolved(jt):
                i = jt.ground_body
                sign, (x, y, z) = self._ground_terms(jt, R, r)
                # g = sign * (R^T (r - c) + s); derivative (hat(R^T (r - c)), I)
                J[rows, 6 * i:6 * i + 6] = [[0.0, -sign * z, sign * y, sign, 0.0, 0.0],
                                            [sign * z, 0.0, -sign * x, 0.0, sign, 0.0],
                                            [-sign * y, sign * x, 0.0, 0.0, 0.0, sign]]
                continue
            if jt.body_a is not None:
                J[rows, 6 * jt.body_a:6 * jt.body_a + 6] += self._point_jacobian(
                    R, jt.body_a, jt.point_a_f)
            if jt.body_b is not None:
                J[rows, 6 * jt.body_b:6 * jt.body_b + 6] -= self._point_jacobian(
                    R, jt.body_b, jt.point_b_f)
        return J

    def _point_bias(self, R: list, V: list, body: int, s) -> list:
        """``(d/dt J_p) V`` for the world point ``r + R s``."""
        w0, w1, w2, v0, v1, v2 = V[body]
        ws = _cross(w0, w1, w2, *s)
        if self._se3:
            u = _cross(w0, w1, w2, v0 + ws[0], v1 + ws[1], v2 + ws[2])
        else:
            u = _cross(w0, w1, w2, *ws)
        return _mv(R[body], u)

    def acc_rhs(self, q: MbsConfig, V: np.ndarray) -> np.ndarray:
        R, r, Vl = q.R.tolist(), q.r.tolist(), V.tolist()
        eta = []
        for jt in self.joints:
            if self._body_resolved(jt):
                sign, d = self._ground_terms(jt, R, r)
                w0, w1, w2, v0, v1, v2 = Vl[jt.ground_body]
                dd = _cross(*d, w0, w1, w2)
                eta.extend(-sign * e for e in _cross(dd[0] + v0, dd[1] + v1, dd[2] + v2,
                                                     w0, w1, w2))
                continue
            bias = [0.0, 0.0, 0.0]
            if jt.body_a is not None:
                pa = self._point_bias(R, Vl, jt.body_a, jt.point_a_f)
                bias = [bias[k] + pa[k] for k in range(3)]
            if jt.body_b is not None:
                pb = self._point_bias(R, Vl, jt.body_b, jt.point_b_f)
                bias = [bias[k] - pb[k] for k in range(3)]
            eta.extend(-e for e in bias)
        return np.array(eta)


_EYE = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _mv(R: list, s) -> list:
    return [R[0][0] * s[0] + R[0][1] * s[1] + R[0][2] * s[2],
            R[1][0] * s[0] + R[1][1] * s[1] + R[1][2] * s[2],
            R[2][0] * s[0] + R[2][1] * s[1] + R[2][2] * s[2]]


def _mtv(R: list, s) -> list:
    return [R[0][0] * s[0] + R[1][0] * s[1] + R[2][0] * s[2],
            R[0][1] * s[0] + R[1][1] * s[1] + R[2][1] * s[2],
            R[0][2] * s[0] + R[1][2] * s[1] + R[2][2] * s[2]]


def _world_point(R: list, r: list, body: int | None, s) -> list:
    if body is None:
        return [float(e) for e in s]
    p = _mv(R[body], s)
    return [r[body][0] + p[0], r[body][1] + p[1], r[body][2] + p[2]]


@dataclass
class ModelPreset:
    """Initial data and parameters of one benchmark."""

    name: str
    bodies: list[BodyParams]
    anchors: list[np.ndarray]
    gravity: np.ndarray
    q0: MbsConfig
    seed: np.ndarray  # (n, 6)
    free_slots: str = "linear"
    joint_names: list[str] = field(default_factory=list)

    def initial_state(self, model: DaeModel) -> MbsState:
        V0 = consistent_velocity(model, self.q0, self.seed, free=self.free_slots)
        return MbsState(self.q0, V0)


def _config(formulation: Formulation, rotations, positions) -> MbsConfig:
    return MbsConfig(np.array(rotations, dtype=float), np.array(positions, dtype=float),
                     formulation)


def _rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def heavy_top(formulation, gravity=None) -> tuple[SphericalJointSystem, ModelPreset]:
    """Aluminium box 0.1 x 0.2 x 0.4 m on a fixed pivot, no external loads."""
    formulation = Formulation.parse(formulation)
    body = BodyParams(21.6, np.diag([0.36, 0.306, 0.09]))
    r0 = np.array([0.5, 0.0, 0.0])  # pivot -> COM, body frame
    g = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
    joint = SphericalJoint(0, -r0, None, np.zeros(3), name="pivot")
    model = SphericalJointSystem([body], [joint], formulation, g, name="heavy_top")
    q0 = _config(formulation, [np.eye(3)], [r0])
    seed = np.array([[0.0, 20 * math.pi, 10 * math.pi, 0.0, 0.0, 0.0]])
    preset = ModelPreset("heavy_top", [body], [np.zeros(3)], g, q0, seed,
                         joint_names=["pivot"])
    return model, preset


_LINK = (0.2, 0.1, 0.05)


def _pendulum_links() -> tuple[BodyParams, BodyParams]:
    a = _LINK[0]
    half = np.array([a / 2, 0.0, 0.0])
    link = BodyParams.box(*_LINK, attachments=(-half, half))
    return link, link


def double_pendulum(formulation, gravity=None) -> tuple[SphericalJointSystem, ModelPreset]:
    """Two aluminium links 0.2 x 0.1 x 0.05 m, ground joint plus interbody joint."""
    formulation = Formulation.parse(formulation)
    link1, link2 = _pendulum_links()
    a = _LINK[0]
    r0 = np.array([-a / 2, 0.0, 0.0])  # COM1 -> ground joint
    r10 = np.array([a / 2, 0.0, 0.0])  # COM1 -> joint 2
    r20 = np.array([-a / 2, 0.0, 0.0])  # COM2 -> joint 2
    g = (np.array([0.0, 0.0, -STANDARD_GRAVITY]) if gravity is None
         else np.asarray(gravity, dtype=float))
    joints = [SphericalJoint(None, np.zeros(3), 0, r0, name="joint1"),
              SphericalJoint(1, r20, 0, r10, name="joint2")]
    model = SphericalJointSystem([link1, link2], joints, formulation, g,
                                 name="double_pendulum")
    q0 = _config(formulation, [np.eye(3)] * 2, [[a / 2, 0, 0], [a + a / 2, 0, 0]])
    seed = np.array([[10.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                     [10 * math.pi, 10 * math.pi, 20 * math.pi, 0.0, 0.0, 0.0]])
    preset = ModelPreset("double_pendulum", [link1, link2], [np.zeros(3)], g, q0, seed,
                         joint_names=["joint1", "joint2"])
    return model, preset


def floating_pair(formulation, gravity=None) -> tuple[SphericalJointSystem, ModelPreset]:
    """The pendulum links joined to each other only, floating without gravity."""
    formulation = Formulation.parse(formulation)
    link1, link2 = _pendulum_links()
    a = _LINK[0]
    r10 = np.array([a / 2, 0.0, 0.0])
    r20 = np.array([-a / 2, 0.0, 0.0])
    g = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
    joints = [SphericalJoint(1, r20, 0, r10, name="joint")]
    model = SphericalJointSystem([link1, link2], joints, formulation, g,
                                 name="floating_pair")
    q0 = _config(formulation, [np.eye(3)] * 2, [[a / 2, 0, 0], [a + a / 2, 0, 0]])
    seed = np.array([[0.0, 0.0, -10.0, 0.0, 0.0, 0.0],
                     [1.0, -1.0, 2 * math.pi, 0.0, 0.0, 0.0]])
    preset = ModelPreset("floating_pair", [link1, link2], [], g, q0, seed,
                         joint_names=["joint"])
    return model, preset


THREE_BAR_ANCHOR_GAP = 0.3


def three_bar(formulation, gravity=None) -> tuple[SphericalJointSystem, ModelPreset]:
    """Closed spherical loop: ground - link 1 - link 2 - ground.

    Anchors sit at the origin and at (0.3, 0, 0); the 0.2 m links meet above
    the anchor line in the x-z plane.  The seed rotates the loop about the
    anchor line and spins each link about its own axis; the consistent
    velocity is its minimum-norm projection over all slots.
    """
    formulation = Formulation.parse(formulation)
    link1, link2 = _pendulum_links()
    a = _LINK[0]
    half = np.array([a / 2, 0.0, 0.0])
    c1 = np.zeros(3)
    c3 = np.array([THREE_BAR_ANCHOR_GAP, 0.0, 0.0])
    x2 = THREE_BAR_ANCHOR_GAP / 2
    z2 = math.sqrt(a * a - x2 * x2)
    p2 = np.array([x2, 0.0, z2])
    beta = math.asin(z2 / a)
    R1 = _rot_y(-beta)  # body x along ground -> joint 2
    R2 = _rot_y(beta)  # body x along joint 2 -> anchor 3
    g = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
    joints = [SphericalJoint(None, c1, 0, -half, name="joint1"),
              SphericalJoint(1, -half, 0, half, name="joint2"),
              SphericalJoint(None, c3, 1, half, name="joint3")]
    model = SphericalJointSystem([link1, link2], joints, formulation, g, name="three_bar")
    q0 = _config(formulation, [R1, R2], [(c1 + p2) / 2, (p2 + c3) / 2])
    loop = np.array([1.0, 0.0, 0.0])  # world anchor axis
    seed = np.zeros((2, 6))
    seed[0, :3] = R1.T @ (10.0 * loop) + np.array([15.0, 0.0, 0.0])
    seed[1, :3] = R2.T @ (10.0 * loop) + np.array([-25.0, 0.0, 0.0])
    preset = ModelPreset("three_bar", [link1, link2], [c1, c3], g, q0, seed,
                         free_slots="all", joint_names=["joint1", "joint2", "joint3"])
    return model, preset


MODELS: dict[str, Callable[..., tuple[SphericalJointSystem, ModelPreset]]] = {
    "heavy_top": heavy_top,
    "double_pendulum": double_pendulum,
    "floating_pair": floating_pair,
    "three_bar": three_bar,
}


def build_model(name: str, formulation, gravity=None) -> tuple[SphericalJointSystem, ModelPreset]:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(formulation, gravity=gravity)


def energies(model: DaeModel, X: MbsState) -> tuple[float, float]:
    """Kinetic and potential energy ``(T, U)`` of a state."""
    return model.energies(X.q, X.V)


def to_hybrid(X: MbsState) -> MbsState:
    """Same physical state expressed with hybrid velocities on SO(3) x R^3."""
    if X.formulation is Formulation.DIRECT_PRODUCT:
        return X
    V = X.V.copy()
    V[:, 3:] = np.einsum("nij,nj->ni", X.q.R, X.V[:, 3:])
    q = MbsConfig(X.q.R.copy(), X.q.r.copy(), Formulation.DIRECT_PRODUCT)
    return MbsState(q, V)


def to_body_fixed(X: MbsState) -> MbsState:
    """Same physical state expressed with body-fixed twists on SE(3)."""
    if X.formulation is Formulation.SE3:
        return X
    V = X.V.copy()
    V[:, 3:] = np.einsum("nji,nj->ni", X.q.R, X.V[:, 3:])
    q = MbsConfig(X.q.R.copy(), X.q.r.copy(), Formulation.SE3)
    return MbsState(q, V)
