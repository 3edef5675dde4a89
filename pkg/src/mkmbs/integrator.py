"""Explicit Munthe-Kaas Runge-Kutta stepping for left-trivialized systems ``Xdot = X F(t, X)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dae import DaeModel, vector_field
from .lie import DomainError, orthonormality_error
from .state import AlgebraElement, MbsState, state_compose, state_dexpinv, state_exp

MAX_STEPS = 10_000_000


class IntegrationError(RuntimeError):
    """A step failed; the message carries the step index and time."""


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]
    c: tuple[float, ...]
    order: int = 0

    def __post_init__(self):
        s = len(self.b)
        if len(self.c) != s or len(self.a) != s or any(len(row) != s for row in self.a):
            raise ValueError(f"tableau {self.name!r}: inconsistent stage count")
        for j in range(s):
            if any(self.a[j][l] != 0 for l in range(j, s)):
                raise ValueError(f"tableau {self.name!r}: not explicit")
            if abs(sum(self.a[j]) - self.c[j]) > 1e-14:
                raise ValueError(f"tableau {self.name!r}: c[{j}] != sum(a[{j}])")
        if abs(sum(self.b) - 1.0) > 1e-14:
            raise ValueError(f"tableau {self.name!r}: weights do not sum to one")

    @property
    def s(self) -> int:
        return len(self.b)

    @classmethod
    def from_fractions(cls, name, a, b, c, order=0) -> "ButcherTableau":
        to_f = lambda xs: tuple(float(Fraction(x)) for x in xs)  # noqa: E731
        return cls(name, tuple(to_f(row) for row in a), to_f(b), to_f(c), order)


def builtin_tableaus() -> dict[str, ButcherTableau]:
    return {
        "euler": ButcherTableau.from_fractions("euler", [[0]], [1], [0], order=1),
        "heun": ButcherTableau.from_fractions(
            "heun", [[0, 0], [1, 0]], ["1/2", "1/2"], [0, 1], order=2),
        "rk4": ButcherTableau.from_fractions(
            "rk4",
            [[0, 0, 0, 0], ["1/2", 0, 0, 0], [0, "1/2", 0, 0], [0, 0, 1, 0]],
            ["1/6", "1/3", "1/3", "1/6"], [0, "1/2", "1/2", 1], order=4),
    }


def get_tableau(name: str | ButcherTableau) -> ButcherTableau:
    if isinstance(name, ButcherTableau):
        return name
    tableaus = builtin_tableaus()
    try:
        return tableaus[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; choose from {sorted(tableaus)}") from None


def mk_step(model: DaeModel, tableau: ButcherTableau, t: float, X: MbsState,
            h: float) -> MbsState:
    """One Munthe-Kaas step ``X exp(h sum b_j k_j)``.

    Stage derivatives are ``k_j = dexp^-1_{-Psi_j} F(t + c_j h, X exp Psi_j)``;
    the negative argument comes from the left trivialization.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    form = X.formulation
    ks: list[AlgebraElement] = []
    for j in range(tableau.s):
        try:
            psi = None
            for l, a_jl in enumerate(tableau.a[j][:j]):
                if a_jl != 0.0:
                    term = ks[l] * (h * a_jl)
                    psi = term if psi is None else psi + term
            if psi is None:
                k = vector_field(model, t + tableau.c[j] * h, X)
            else:
                Xj = state_compose(X, state_exp(psi, form))
                F = vector_field(model, t + tableau.c[j] * h, Xj)
                k = state_dexpinv(-psi, F, form)
        except DomainError as exc:
            raise DomainError(f"stage {j + 1}: {exc}") from exc
        ks.append(k)
    phi = None
    for b_j, k in zip(tableau.b, ks):
        if b_j != 0.0:
            term = k * (h * b_j)
            phi = term if phi is None else phi + term
    return state_compose(X, state_exp(phi, form))


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[MbsState] = field(default_factory=list)
    violations: list[np.ndarray] = field(default_factory=list)
    kinetic: list[float] = field(default_factory=list)
    potential: list[float] = field(default_factory=list)
    ortho_error: list[float] = field(default_factory=list)

    def record(self, model: DaeModel, t: float, X: MbsState) -> None:
        T, U = model.energies(X.q, X.V)
        self.times.append(t)
        self.states.append(X)
        self.violations.append(model.constraint(X.q))
        self.kinetic.append(T)
        self.potential.append(U)
        self.ortho_error.append(orthonormality_error(X.q.R))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> MbsState:
        return self.states[-1]

    def violation_array(self) -> np.ndarray:
        return np.array(self.violations)

    def max_violation_norm(self, rows: slice | None = None) -> float:
        g = self.violation_array()
        if g.size == 0:
            return 0.0
        if rows is not None:
            g = g[:, rows]
        return float(np.max(np.linalg.norm(g, axis=1)))

    def energy_array(self) -> np.ndarray:
        """Columns ``T, U, E``."""
        T = np.array(self.kinetic)
        U = np.array(self.potential)
        return np.column_stack([T, U, T + U])


def integrate(model: DaeModel, tableau: ButcherTableau | str, X0: MbsState, t0: float,
              t_end: float, h: float, output_stride: int = 1,
              max_steps: int = MAX_STEPS) -> Trajectory:
    """Fixed-step integration with diagnostics every ``output_stride`` steps.

    The final state is always recorded.  The number of steps is
    ``round((t_end - t0) / h)``.
    """
    tableau = get_tableau(tableau)
    if not h > 0:
        raise ValueError("step size must be positive")
    if t_end < t0:
        raise ValueError("t_end must not precede t0")
    if output_stride < 1:
        raise ValueError("output_stride must be at least 1")
    n_steps = int(round((t_end - t0) / h))
    if n_steps > max_steps:
        raise ValueError(f"{n_steps} steps exceed the cap of {max_steps}")
    traj = Trajectory()
    traj.record(model, t0, X0)
    X = X0
    for i in range(1, n_steps + 1):
        t_prev = t0 + (i - 1) * h
        try:
            X = mk_step(model, tableau, t_prev, X, h)
        except Exception as exc:
            raise IntegrationError(f"step {i} at t={t_prev:.6g}: {exc}") from exc
        if i % output_stride == 0 or i == n_steps:
            traj.record(model, t0 + i * h, X)
    return traj
