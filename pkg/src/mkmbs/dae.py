"""Index-1 constrained dynamics: the saddle-point solve and the state-space vector field."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lie import Formulation
from .state import AlgebraElement, MbsConfig, MbsState

# Saddle matrices with a larger estimated condition number are rejected.
MAX_CONDITION = 1e12

_getrf = scipy.linalg.lapack.dgetrf
_gecon = scipy.linalg.lapack.dgecon
_getrs = scipy.linalg.lapack.dgetrs


class SolverError(RuntimeError):
    """The constrained acceleration problem has no well-defined solution."""


class DaeModel(abc.ABC):
    """One mechanism in one formulation.

    Velocities are the left-trivialized ones of the formulation: body-fixed
    twists for SE(3), hybrid ``(omega, v_spatial)`` for SO(3) x R^3.  The
    Jacobian is the derivative of :meth:`constraint` along ``q * exp(t e_i)``
    and :meth:`acc_rhs` is ``-(dJ/dt) V``, so ``J Vdot = eta`` is the second
    time derivative of the constraint.
    """

    n_bodies: int
    m_constraints: int
    formulation: Formulation

    @abc.abstractmethod
    def mass_matrix(self, q: MbsConfig) -> np.ndarray: ...

    @abc.abstractmethod
    def forces(self, q: MbsConfig, V: np.ndarray, t: float) -> np.ndarray: ...

    @abc.abstractmethod
    def constraint(self, q: MbsConfig) -> np.ndarray: ...

    @abc.abstractmethod
    def jacobian(self, q: MbsConfig) -> np.ndarray: ...

    @abc.abstractmethod
    def acc_rhs(self, q: MbsConfig, V: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def energies(self, q: MbsConfig, V: np.ndarray) -> tuple[float, float]: ...

    @property
    def name(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class SaddleSolution:
    vdot: np.ndarray  # (6n,)
    lam: np.ndarray  # (m,)


def saddle_residuals(model: DaeModel, t: float, X: MbsState,
                     sol: SaddleSolution) -> tuple[float, float, float, float]:
    """``(|J vdot - eta|, |eta|, |M vdot + J^T lam - Q|, |Q|)``."""
    q, V = X.q, X.V
    M = model.mass_matrix(q)
    Q = model.forces(q, V, t)
    res_dyn = M @ sol.vdot - Q
    if model.m_constraints:
        J = model.jacobian(q)
        eta = model.acc_rhs(q, V)
        res_dyn = res_dyn + J.T @ sol.lam
        res_con = float(np.linalg.norm(J @ sol.vdot - eta))
        eta_norm = float(np.linalg.norm(eta))
    else:
        res_con = eta_norm = 0.0
    return res_con, eta_norm, float(np.linalg.norm(res_dyn)), float(np.linalg.norm(Q))


def solve_index1(model: DaeModel, t: float, X: MbsState) -> SaddleSolution:
    """Solve ``[[M, J^T], [J, 0]] [vdot; lam] = [Q; eta]`` by pivoted LU."""
    q, V = X.q, X.V
    M = model.mass_matrix(q)
    Q = model.forces(q, V, t)
    m = model.m_constraints
    if m == 0:
        K, rhs = M, Q
    else:
        J = model.jacobian(q)
        nv = M.shape[0]
        K = np.zeros((nv + m, nv + m))
        K[:nv, :nv] = M
        K[:nv, nv:] = J.T
        K[nv:, :nv] = J
        rhs = np.concatenate([Q, model.acc_rhs(q, V)])
    anorm = float(np.abs(K).sum(axis=0).max())
    lu, piv, info = _getrf(K)
    rcond = 0.0
    if info == 0:
        rcond, _ = _gecon(lu, anorm, norm="1")
    if info != 0 or rcond * MAX_CONDITION < 1.0:
        raise SolverError(
            f"{model.name}: saddle matrix singular or ill-conditioned at t={t:.6g} "
            f"(rcond={rcond:.3g}, |g|={np.linalg.norm(model.constraint(q)):.3g})")
    sol, _ = _getrs(lu, piv, rhs)
    nv = M.shape[0]
    return SaddleSolution(sol[:nv], sol[nv:])


def vector_field(model: DaeModel, t: float, X: MbsState) -> AlgebraElement:
    """``F(t, X) = (V, Vdot)`` so that ``Xdot = X F(t, X)``."""
    sol = solve_index1(model, t, X)
    return AlgebraElement(X.V, sol.vdot.reshape(X.n, 6))


def _free_columns(n: int, free: str) -> np.ndarray:
    if free == "all":
        return np.arange(6 * n)
    if free == "linear":
        return np.array([6 * i + k for i in range(n) for k in (3, 4, 5)])
    if free == "angular":
        return np.array([6 * i + k for i in range(n) for k in (0, 1, 2)])
    raise ValueError(f"unknown velocity slot selection {free!r}")


def consistent_velocity(model: DaeModel, q: MbsConfig, seed: np.ndarray,
                        free: str = "linear") -> np.ndarray:
    """Minimum-norm correction of ``seed`` onto the null space of ``J(q)``.

    Only the slots named by ``free`` (``"linear"``, ``"angular"`` or ``"all"``)
    are corrected; with ``"linear"`` the prescribed angular rates are kept.
    """
    seed = np.asarray(seed, dtype=float)
    n = q.n
    flat = seed.reshape(6 * n).copy()
    if model.m_constraints == 0:
        return flat.reshape(n, 6)
    J = model.jacobian(q)
    cols = _free_columns(n, free)
    Jf = J[:, cols]
    sv = np.linalg.svd(Jf, compute_uv=False)
    if sv.size < J.shape[0] or sv[-1] <= sv[0] * 1e-12:
        raise SolverError(
            f"{model.name}: constraint Jacobian restricted to {free} slots is rank deficient")
    resid = J @ flat
    flat[cols] -= Jf.T @ np.linalg.solve(Jf @ Jf.T, resid)
    return flat.reshape(n, 6)


def constraint_violation(model: DaeModel, q: MbsConfig) -> np.ndarray:
    return model.constraint(q)
