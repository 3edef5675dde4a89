"""Rigid-body Lie groups: SO(3), SE(3) and the direct product SO(3) x R^3.

Twists are plain ``(6,)`` arrays ordered ``(omega, v)``.  Whether ``v`` is a
body-fixed linear velocity (SE(3)) or a spatial one (direct product) is fixed
by the :class:`Formulation` of the pose it pairs with.

Closed forms divide by powers of the rotation angle.  Below a small threshold
each map switches to its Taylor expansion; the coefficient helpers expose both
branches so callers can check continuity across the switch.

The per-call work is a handful of flops on 3-vectors, where numpy dispatch
costs more than the arithmetic, so the kernels unpack to Python floats and
only build arrays for their results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# Taylor branch below this rotation angle (rad).
SMALL_ANGLE = 1e-4
# The ad^4 coefficient of the SE(3) inverse differential loses ~1e-16/theta
# absolute accuracy in closed form, so its series branch reaches further out.
SMALL_ANGLE_DEXPINV_SE3 = 5e-2
# dexp^-1 is singular at 2*pi; refuse anything within this margin.
DEXPINV_MARGIN = 1e-6

_TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """A map was evaluated outside the region where it is defined."""


class Formulation(str, enum.Enum):
    SE3 = "se3"
    DIRECT_PRODUCT = "so3xr3"

    @classmethod
    def parse(cls, value: "Formulation | str") -> "Formulation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"se3": cls.SE3, "so3xr3": cls.DIRECT_PRODUCT, "dp": cls.DIRECT_PRODUCT,
                   "direct_product": cls.DIRECT_PRODUCT, "directproduct": cls.DIRECT_PRODUCT}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown formulation {value!r}") from None


@dataclass(frozen=True)
class Pose:
    """Rigid-body configuration ``C = (R, r)`` tagged with its group law."""

    R: np.ndarray
    r: np.ndarray
    formulation: Formulation = Formulation.SE3

    @classmethod
    def identity(cls, formulation: Formulation = Formulation.SE3) -> "Pose":
        return cls(np.eye(3), np.zeros(3), Formulation.parse(formulation))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix ``[[R, r], [0, 1]]``."""
        out = np.eye(4)
        out[:3, :3] = self.R
        out[:3, 3] = self.r
        return out


def _floats(x) -> list:
    return x.tolist() if isinstance(x, np.ndarray) else [float(e) for e in x]


def _cross(a0, a1, a2, b0, b1, b2):
    return a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0


def cross(a, b) -> np.ndarray:
    return np.array(_cross(*_floats(a), *_floats(b)))


def hat3(w) -> np.ndarray:
    """Skew-symmetric matrix with ``hat3(w) @ u == w x u``."""
    x, y, z = _floats(w)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee3(W: np.ndarray) -> np.ndarray:
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def hat_se3(X) -> np.ndarray:
    """4x4 se(3) matrix ``[[hat(omega), v], [0, 0]]``."""
    x, y, z, a, b, c = _floats(X)
    return np.array([[0.0, -z, y, a], [z, 0.0, -x, b], [-y, x, 0.0, c], [0.0, 0.0, 0.0, 0.0]])


# --------------------------------------------------------------------------
# Group laws
# --------------------------------------------------------------------------

def compose(a: Pose, b: Pose) -> Pose:
    """Group product ``a * b`` under the shared formulation."""
    if a.formulation != b.formulation:
        raise ValueError(
            f"cannot compose {a.formulation.value} pose with {b.formulation.value} pose")
    if a.formulation is Formulation.SE3:
        return Pose(a.R @ b.R, a.r + a.R @ b.r, a.formulation)
    return Pose(a.R @ b.R, a.r + b.r, a.formulation)


def inverse(a: Pose) -> Pose:
    Rt = a.R.T
    if a.formulation is Formulation.SE3:
        return Pose(Rt, -(Rt @ a.r), a.formulation)
    return Pose(Rt, -a.r, a.formulation)


# --------------------------------------------------------------------------
# Scalar coefficient functions (closed form and series branches)
# --------------------------------------------------------------------------

def _rodrigues_closed(theta: float) -> tuple[float, float]:
    s = math.sin(0.5 * theta)
    # 2 sin^2(theta/2) == 1 - cos(theta) without the cancellation.
    return math.sin(theta) / theta, 2.0 * s * s / (theta * theta)


def _rodrigues_series(theta: float) -> tuple[float, float]:
    t2 = theta * theta
    return (1.0 - t2 / 6.0 * (1.0 - t2 / 20.0),
            0.5 - t2 / 24.0 * (1.0 - t2 / 30.0))


def rodrigues_coefficients(theta: float) -> tuple[float, float]:
    """``(sin t / t, (1 - cos t) / t^2)`` for the SO(3) exponential."""
    if theta < SMALL_ANGLE:
        return _rodrigues_series(theta)
    return _rodrigues_closed(theta)


def _dexpinv_so3_closed(theta: float) -> float:
    half = 0.5 * theta
    return (1.0 - half * math.cos(half) / math.sin(half)) / (theta * theta)


def _dexpinv_so3_series(theta: float) -> float:
    t2 = theta * theta
    return 1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 / 1209600.0))


def dexpinv_so3_coefficient(theta: float) -> float:
    """Coefficient of ``hat(xi)^2`` in the SO(3) inverse differential."""
    if theta < SMALL_ANGLE:
        return _dexpinv_so3_series(theta)
    return _dexpinv_so3_closed(theta)


def _dexpinv_se3_closed(theta: float) -> tuple[float, float]:
    s = math.sin(0.5 * theta)
    cm1 = -2.0 * s * s  # cos(theta) - 1
    sn = math.sin(theta)
    c2 = 2.0 / theta**2 + (theta + 3.0 * sn) / (4.0 * theta * cm1)
    c4 = 1.0 / theta**4 + (theta + sn) / (4.0 * theta**3 * cm1)
    return c2, c4


def _dexpinv_se3_series(theta: float) -> tuple[float, float]:
    t2 = theta * theta
    c2 = 1.0 / 12.0 - t2 * t2 * (1.0 / 30240.0 + t2 * (1.0 / 604800.0 + t2 / 15966720.0))
    c4 = -(1.0 / 720.0 + t2 * (1.0 / 15120.0 + t2 * (1.0 / 403200.0 + t2 * (
        1.0 / 11975040.0 + t2 * 691.0 / 261534873600.0))))
    return c2, c4


def dexpinv_se3_coefficients(theta: float) -> tuple[float, float]:
    """Coefficients of ``ad^2`` and ``ad^4`` in the SE(3) inverse differential."""
    if theta < SMALL_ANGLE_DEXPINV_SE3:
        return _dexpinv_se3_series(theta)
    return _dexpinv_se3_closed(theta)


# --------------------------------------------------------------------------
# Exponentials and logarithm
# --------------------------------------------------------------------------

def _rodrigues_rows(x: float, y: float, z: float, A: float, B: float) -> list:
    # hat(w)^2 = w w^T - |w|^2 I
    t2 = x * x + y * y + z * z
    d = 1.0 - B * t2
    Bxy, Bxz, Byz = B * x * y, B * x * z, B * y * z
    return [[d + B * x * x, Bxy - A * z, Bxz + A * y],
            [Bxy + A * z, d + B * y * y, Byz - A * x],
            [Bxz - A * y, Byz + A * x, d + B * z * z]]


def exp_so3(w) -> np.ndarray:
    """Rodrigues formula ``I + A hat(w) + B hat(w)^2``."""
    x, y, z = _floats(w)
    A, B = rodrigues_coefficients(math.sqrt(x * x + y * y + z * z))
    return np.array(_rodrigues_rows(x, y, z, A, B))


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation vector of ``R`` with angle in ``[0, pi)``.

    Raises :class:`DomainError` for half turns, where the axis sign is
    ambiguous.
    """
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if not tr > -1.0 + 1e-12:
        raise DomainError("log_so3: rotation angle is pi (trace == -1)")
    skew = vee3(R - R.T)  # 2 sin(theta) * axis
    s = 0.5 * math.sqrt(skew @ skew)
    c = 0.5 * (tr - 1.0)
    theta = math.atan2(s, c)
    if theta < SMALL_ANGLE:
        return (0.5 + theta * theta / 12.0) * skew
    if c > -0.9:
        return (0.5 * theta / s) * skew
    # Near pi the skew part is tiny; take the axis from the symmetric part.
    S = 0.5 * (R + R.T) - c * np.eye(3)  # (1 - c) axis axis^T
    k = int(np.argmax(np.diag(S)))
    axis = S[:, k] / math.sqrt(S[k, k] * (1.0 - c))
    if axis @ skew < 0.0:
        axis = -axis
    return theta * axis


def _exp_se3_parts(X) -> tuple[list, list]:
    x, y, z, a, b, c = _floats(X)
    t2 = x * x + y * y + z * z
    theta = math.sqrt(t2)
    A, B = rodrigues_coefficients(theta)
    R = _rodrigues_rows(x, y, z, A, B)
    wv0, wv1, wv2 = _cross(x, y, z, a, b, c)  # w x v
    if theta < SMALL_ANGLE:
        C = 1.0 / 6.0 - t2 / 120.0 * (1.0 - t2 / 42.0)  # (t - sin t) / t^3
        ww0, ww1, ww2 = _cross(x, y, z, wv0, wv1, wv2)
        r = [a + B * wv0 + C * ww0, b + B * wv1 + C * ww1, c + B * wv2 + C * ww2]
    else:
        # (I - exp(hat w)) u = -(A w x u + B w x (w x u)), u = w x v
        u1 = _cross(x, y, z, wv0, wv1, wv2)
        u2 = _cross(x, y, z, *u1)
        h = (x * a + y * b + z * c) / t2  # pitch
        r = [-(A * u1[0] + B * u2[0]) / t2 + h * x,
             -(A * u1[1] + B * u2[1]) / t2 + h * y,
             -(A * u1[2] + B * u2[2]) / t2 + h * z]
    return R, r


def exp_se3(X) -> Pose:
    """SE(3) exponential of the twist ``X = (omega, v)``.

    Translation is ``(I - exp(hat w))(w x v) / |w|^2 + h w`` with pitch
    ``h = w.v / |w|^2``.
    """
    R, r = _exp_se3_parts(X)
    return Pose(np.array(R), np.array(r), Formulation.SE3)


def _exp_dp_parts(X) -> tuple[list, list]:
    x, y, z, a, b, c = _floats(X)
    A, B = rodrigues_coefficients(math.sqrt(x * x + y * y + z * z))
    return _rodrigues_rows(x, y, z, A, B), [a, b, c]


def exp_dp(X) -> Pose:
    """Direct-product exponential: rotation by Rodrigues, translation passes through."""
    R, r = _exp_dp_parts(X)
    return Pose(np.array(R), np.array(r), Formulation.DIRECT_PRODUCT)


def exp(X, formulation: Formulation) -> Pose:
    if formulation is Formulation.SE3:
        return exp_se3(X)
    return exp_dp(X)


def exp_parts(X, formulation: Formulation) -> tuple[list, list]:
    """``(R, r)`` of the exponential as nested float lists."""
    if formulation is Formulation.SE3:
        return _exp_se3_parts(X)
    return _exp_dp_parts(X)


# --------------------------------------------------------------------------
# Algebra
# --------------------------------------------------------------------------

def ad_se3(X) -> np.ndarray:
    """6x6 matrix ``[[hat(w), 0], [hat(v), hat(w)]]`` of ``Y -> [X, Y]``."""
    x, y, z, a, b, c = _floats(X)
    return np.array([
        [0.0, -z, y, 0.0, 0.0, 0.0],
        [z, 0.0, -x, 0.0, 0.0, 0.0],
        [-y, x, 0.0, 0.0, 0.0, 0.0],
        [0.0, -c, b, 0.0, -z, y],
        [c, 0.0, -a, z, 0.0, -x],
        [-b, a, 0.0, -y, x, 0.0],
    ])


def _bracket(x, y, z, a, b, c, p, q, r, d, e, f):
    w0, w1, w2 = _cross(x, y, z, p, q, r)
    u0, u1, u2 = _cross(x, y, z, d, e, f)
    s0, s1, s2 = _cross(p, q, r, a, b, c)
    return w0, w1, w2, u0 - s0, u1 - s1, u2 - s2


def bracket_se3(X1, X2) -> np.ndarray:
    """Screw product ``(w1 x w2, w1 x v2 - w2 x v1)``."""
    return np.array(_bracket(*_floats(X1), *_floats(X2)))


def bracket_dp(X1, X2) -> np.ndarray:
    """Direct-product bracket; the translational part is abelian."""
    a, b = _floats(X1), _floats(X2)
    return np.array([*_cross(*a[:3], *b[:3]), 0.0, 0.0, 0.0])


def screw_pitch(X) -> float:
    x, y, z, a, b, c = _floats(X)
    ww = x * x + y * y + z * z
    if ww == 0.0:
        raise DomainError("screw_pitch: pure translation has no finite pitch")
    return (x * a + y * b + z * c) / ww


def _check_dexpinv_domain(theta: float) -> None:
    if not theta < _TWO_PI - DEXPINV_MARGIN:
        raise DomainError(
            f"dexp^-1 is singular at rotation angle 2*pi (got |omega| = {theta:.6g})")


def _dexpinv_so3_f(x, y, z, p, q, r):
    theta = math.sqrt(x * x + y * y + z * z)
    _check_dexpinv_domain(theta)
    k = dexpinv_so3_coefficient(theta)
    e0, e1, e2 = _cross(x, y, z, p, q, r)
    f0, f1, f2 = _cross(x, y, z, e0, e1, e2)
    return p - 0.5 * e0 + k * f0, q - 0.5 * e1 + k * f1, r - 0.5 * e2 + k * f2


def dexpinv_so3(xi, eta) -> np.ndarray:
    """Apply ``I - hat(xi)/2 + c(|xi|) hat(xi)^2`` to ``eta``."""
    return np.array(_dexpinv_so3_f(*_floats(xi), *_floats(eta)))


def dexpinv_so3_matrix(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    theta = math.sqrt(xi @ xi)
    _check_dexpinv_domain(theta)
    W = hat3(xi)
    return np.eye(3) - 0.5 * W + dexpinv_so3_coefficient(theta) * (W @ W)


def _dexpinv_se3_f(X: list, Y: list) -> list:
    x, y, z = X[0], X[1], X[2]
    theta = math.sqrt(x * x + y * y + z * z)
    _check_dexpinv_domain(theta)
    c2, c4 = dexpinv_se3_coefficients(theta)
    a1 = _bracket(*X, *Y)
    a2 = _bracket(*X, *a1)
    a3 = _bracket(*X, *a2)
    a4 = _bracket(*X, *a3)
    return [Y[i] - 0.5 * a1[i] + c2 * a2[i] + c4 * a4[i] for i in range(6)]


def dexpinv_se3(X, Y) -> np.ndarray:
    """Apply ``I - ad/2 + c2 ad^2 + c4 ad^4`` (``ad = ad_se3(X)``) to ``Y``."""
    return np.array(_dexpinv_se3_f(_floats(X), _floats(Y)))


def dexpinv_se3_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    theta = math.sqrt(X[:3] @ X[:3])
    _check_dexpinv_domain(theta)
    c2, c4 = dexpinv_se3_coefficients(theta)
    ad = ad_se3(X)
    ad2 = ad @ ad
    return np.eye(6) - 0.5 * ad + c2 * ad2 + c4 * (ad2 @ ad2)


def _dexpinv_dp_f(X: list, Y: list) -> list:
    return [*_dexpinv_so3_f(*X[:3], *Y[:3]), Y[3], Y[4], Y[5]]


def dexpinv_dp(X, Y) -> np.ndarray:
    return np.array(_dexpinv_dp_f(_floats(X), _floats(Y)))


def dexpinv(X, Y, formulation: Formulation) -> np.ndarray:
    if formulation is Formulation.SE3:
        return dexpinv_se3(X, Y)
    return dexpinv_dp(X, Y)


def dexpinv_rows(X: list, Y: list, formulation: Formulation) -> list:
    """Float-list version of :func:`dexpinv` for batched callers."""
    if formulation is Formulation.SE3:
        return _dexpinv_se3_f(X, Y)
    return _dexpinv_dp_f(X, Y)


def orthonormality_error(R: np.ndarray) -> float:
    """``max |R^T R - I|`` over entries (accepts stacked rotations)."""
    R = np.asarray(R, dtype=float)
    G = np.swapaxes(R, -1, -2) @ R
    return float(np.max(np.abs(G - np.eye(3))))
