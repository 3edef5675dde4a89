"""Composite state-space groups for n rigid bodies.

A state is ``X = (C_1..C_n, V_1..V_n)``; poses multiply componentwise under the
body group law and velocities add.  Algebra elements carry a velocity slot
(twists, which go through exp/dexp) and an acceleration slot (raw 6-vectors
on the abelian factor, which pass straight through).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie
from .lie import Formulation, Pose


@dataclass(frozen=True)
class MbsConfig:
    """n poses stored as stacked arrays ``R (n,3,3)`` and ``r (n,3)``."""

    R: np.ndarray
    r: np.ndarray
    formulation: Formulation

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def poses(self) -> list[Pose]:
        return [Pose(self.R[i], self.r[i], self.formulation) for i in range(self.n)]

    @classmethod
    def from_poses(cls, poses: list[Pose]) -> "MbsConfig":
        if not poses:
            raise ValueError("a configuration needs at least one body")
        form = poses[0].formulation
        if any(p.formulation != form for p in poses):
            raise ValueError("mixed formulations in one configuration")
        return cls(np.array([p.R for p in poses], dtype=float),
                   np.array([p.r for p in poses], dtype=float), form)

    @classmethod
    def identity(cls, n: int, formulation: Formulation) -> "MbsConfig":
        return cls(np.tile(np.eye(3), (n, 1, 1)), np.zeros((n, 3)), formulation)


@dataclass(frozen=True)
class MbsState:
    q: MbsConfig
    V: np.ndarray  # (n, 6) twists, (omega, v) per body

    def __post_init__(self):
        if self.V.shape != (self.q.n, 6):
            raise ValueError(f"velocity shape {self.V.shape} does not match {self.q.n} bodies")

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def formulation(self) -> Formulation:
        return self.q.formulation

    @classmethod
    def identity(cls, n: int, formulation: Formulation) -> "MbsState":
        return cls(MbsConfig.identity(n, formulation), np.zeros((n, 6)))


@dataclass(frozen=True)
class AlgebraElement:
    """Element ``(V_1..V_n, A_1..A_n)`` of the state-space algebra."""

    vel: np.ndarray  # (n, 6)
    acc: np.ndarray  # (n, 6)

    @classmethod
    def zeros(cls, n: int) -> "AlgebraElement":
        return cls(np.zeros((n, 6)), np.zeros((n, 6)))

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.vel + other.vel, self.acc + other.acc)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(-self.vel, -self.acc)

    def __mul__(self, k: float) -> "AlgebraElement":
        return AlgebraElement(k * self.vel, k * self.acc)

    __rmul__ = __mul__


def _check_compatible(a: MbsConfig, b: MbsConfig) -> None:
    if a.formulation != b.formulation:
        raise ValueError(
            f"formulation mismatch: {a.formulation.value} vs {b.formulation.value}")
    if a.n != b.n:
        raise ValueError(f"body count mismatch: {a.n} vs {b.n}")


def config_compose(a: MbsConfig, b: MbsConfig) -> MbsConfig:
    _check_compatible(a, b)
    R = a.R @ b.R
    if a.formulation is Formulation.SE3:
        r = a.r + (a.R @ b.r[:, :, None])[:, :, 0]
    else:
        r = a.r + b.r
    return MbsConfig(R, r, a.formulation)


def state_compose(a: MbsState, b: MbsState) -> MbsState:
    return MbsState(config_compose(a.q, b.q), a.V + b.V)


def state_exp(x: AlgebraElement, formulation: Formulation) -> MbsState:
    formulation = Formulation.parse(formulation)
    Rs, rs = [], []
    for row in x.vel.tolist():
        R, r = lie.exp_parts(row, formulation)
        Rs.append(R)
        rs.append(r)
    return MbsState(MbsConfig(np.array(Rs), np.array(rs), formulation), x.acc.copy())


def state_dexpinv(x: AlgebraElement, y: AlgebraElement,
                  formulation: Formulation) -> AlgebraElement:
    """Componentwise dexp^-1 on the velocity slots; acc slots of ``y`` unchanged."""
    formulation = Formulation.parse(formulation)
    if x.vel.shape != y.vel.shape:
        raise ValueError("algebra elements of different size")
    vel = [lie.dexpinv_rows(a, b, formulation) for a, b in zip(x.vel.tolist(), y.vel.tolist())]
    return AlgebraElement(np.array(vel).reshape(y.vel.shape), y.acc)
