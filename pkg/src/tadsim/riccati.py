"""Backward integration of the game's Riccati differential equations.

Two closed-loop solvers share the machinery here: the three coupled
equations of the non-zero-sum game (defenders / target / attacker each carry
their own P matrix) and the single equation of the zero-sum team game.  Both
integrate backward from the terminal weight with fixed-step classical RK4 on
the shared simulation grid, symmetrizing every stage so the guaranteed
symmetry of the solutions cannot drift.

A third solver integrates the six scalar equations that the suicidal-attacker
reduction produces; it serves as an independent oracle for the matrix solver
and supplies the attacker/target feedback coefficients k1, k4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameMatrices, ScenarioConfig

__all__ = [
    "FiniteEscape",
    "TimeGrid",
    "RiccatiSolution",
    "SuicidalReducedSolution",
    "solve_nzs",
    "solve_zs",
    "solve_suicidal_reduced",
    "value_at",
]

BLOWUP = 1e12


class FiniteEscape(RuntimeError):
    """Solution left the finite regime before reaching t=0.

    For these games a blow-up of the backward sweep signals that no feedback
    equilibrium exists on the full horizon with the given parameters.
    """

    def __init__(self, t: float) -> None:
        super().__init__(f"Riccati solution escaped to infinity near t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*step covering [0, horizon]."""

    horizon: float
    step: float

    def __post_init__(self) -> None:
        ratio = self.horizon / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError("horizon must be an integer number of steps")
        if round(ratio) < 2:
            raise ValueError("grid needs at least two steps")

    @staticmethod
    def for_config(cfg: ScenarioConfig) -> "TimeGrid":
        return TimeGrid(cfg.horizon, cfg.step)

    @property
    def n_nodes(self) -> int:
        return int(round(self.horizon / self.step)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_nodes)

    def index_of(self, t: float) -> int | None:
        """Grid index when t sits on a node (within step/2 * 1e-6), else None."""
        k = int(round(t / self.step))
        if 0 <= k < self.n_nodes and abs(t - k * self.step) <= 0.5e-6 * self.step:
            return k
        return None


@dataclass(frozen=True)
class RiccatiSolution:
    """Grid-sampled symmetric solution matrices.

    mode "I1" populates P_d/P_tau/P_a, mode "I2" populates P.  Arrays are
    indexed [node, row, col] with node 0 at t=0.
    """

    grid: TimeGrid
    mode: str
    mats: GameMatrices
    P_d: np.ndarray | None = None
    P_tau: np.ndarray | None = None
    P_a: np.ndarray | None = None
    P: np.ndarray | None = None

    def stacked(self) -> np.ndarray:
        """All matrix trajectories as one [node, group, dim, dim] array."""
        if self.mode == "I1":
            return np.stack([self.P_d, self.P_tau, self.P_a], axis=1)
        return self.P[:, None, :, :]


@dataclass(frozen=True)
class SuicidalReducedSolution:
    """Scalars k1..k6 of the suicidal-attacker reduction, per grid node.

    k1 (= k3) scales the target's feedback, k4 (= k6) the attacker's; the
    off-diagonal k2, k5 stay identically zero.
    """

    grid: TimeGrid
    k: np.ndarray  # [node, 6]

    @property
    def k1(self) -> np.ndarray:
        return self.k[:, 0]

    @property
    def k4(self) -> np.ndarray:
        return self.k[:, 3]


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _rk4_backward(terminal: np.ndarray, rhs, grid: TimeGrid) -> np.ndarray:
    """Integrate d(state)/dt = rhs(state) backward from t=horizon.

    state is an array of stacked matrices (or scalars); every stage
    derivative and every accepted step is symmetrized when the state is a
    matrix stack.  Returns [node, ...] with node 0 at t=0.
    """
    matrix_valued = terminal.ndim >= 2
    sym = _sym if matrix_valued else (lambda m: m)
    n_nodes = grid.n_nodes
    h = grid.step  # backward step in s = horizon - t, d(state)/ds = -rhs
    out = np.empty((n_nodes,) + terminal.shape)
    out[n_nodes - 1] = terminal
    y = terminal
    for k in range(n_nodes - 1, 0, -1):
        k1 = sym(-rhs(y))
        k2 = sym(-rhs(sym(y + 0.5 * h * k1)))
        k3 = sym(-rhs(sym(y + 0.5 * h * k2)))
        k4 = sym(-rhs(sym(y + h * k3)))
        y = sym(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
            raise FiniteEscape((k - 1) * h)
        out[k - 1] = y
    return out


def solve_nzs(mats: GameMatrices, grid: TimeGrid) -> RiccatiSolution:
    """Solve the three coupled equations of the non-zero-sum game."""
    S_d, S_tau, S_a = mats.S_d, mats.S_tau, mats.S_a
    Q_d, Q_tau, Q_a = mats.Q_d, mats.Q_tau, mats.Q_a

    def rhs(P: np.ndarray) -> np.ndarray:
        Pd, Pt, Pa = P
        SdPd = S_d @ Pd
        StPt = S_tau @ Pt
        SaPa = S_a @ Pa
        closed = SdPd + StPt + SaPa
        return np.stack(
            [
                Pd @ closed + (Pt @ S_tau + Pa @ S_a) @ Pd - Q_d,
                Pt @ closed + (Pd @ S_d + Pa @ S_a) @ Pt - Q_tau,
                Pa @ closed + (Pd @ S_d + Pt @ S_tau) @ Pa - Q_a,
            ]
        )

    terminal = np.stack([mats.F_d, mats.F_tau, mats.F_a])
    sol = _rk4_backward(terminal, rhs, grid)
    return RiccatiSolution(
        grid=grid,
        mode="I1",
        mats=mats,
        P_d=sol[:, 0],
        P_tau=sol[:, 1],
        P_a=sol[:, 2],
    )


def solve_zs(mats: GameMatrices, grid: TimeGrid) -> RiccatiSolution:
    """Solve the single equation of the zero-sum team game."""
    if mats.interaction != "I2":
        raise ValueError("zero-sum solve needs I2 matrices")
    S_diff = mats.S_a - mats.S_dtau
    Q = mats.Q

    def rhs(P: np.ndarray) -> np.ndarray:
        return P @ S_diff @ P - Q

    sol = _rk4_backward(mats.F.copy(), rhs, grid)
    return RiccatiSolution(grid=grid, mode="I2", mats=mats, P=sol)


def solve_suicidal_reduced(cfg: ScenarioConfig, grid: TimeGrid) -> SuicidalReducedSolution:
    """Integrate the six reduced scalars of the suicidal-attacker game.

    Valid only for lambda=0, where the attacker/target blocks decouple from
    the defenders entirely.
    """
    if cfg.lam != 0:
        raise ValueError("reduced solve is defined for a suicidal attacker only")
    q_ta, q_at = cfg.q_ta, cfg.q_at
    inv_rt, inv_ra = 1.0 / cfg.r_tau, 1.0 / cfg.r_a

    def rhs(k: np.ndarray) -> np.ndarray:
        k1, k2, k3, k4, k5, k6 = k
        return np.array(
            [
                q_ta + inv_rt * (k1 * k1 + k2 * k2) + 2 * inv_ra * (k1 * k4 + k2 * k5),
                inv_rt * k2 * (k1 + k3) + inv_ra * (k2 * (k4 + k6) + k5 * (k1 + k3)),
                q_ta + inv_rt * (k2 * k2 + k3 * k3) + 2 * inv_ra * (k2 * k5 + k3 * k6),
                -q_at + inv_ra * (k4 * k4 + k5 * k5) + 2 * inv_rt * (k1 * k4 + k2 * k5),
                inv_ra * k5 * (k4 + k6) + inv_rt * (k2 * (k4 + k6) + k5 * (k1 + k3)),
                -q_at + inv_ra * (k5 * k5 + k6 * k6) + 2 * inv_rt * (k2 * k5 + k3 * k6),
            ]
        )

    terminal = np.array([-cfg.f_ta, 0.0, -cfg.f_ta, cfg.f_at, 0.0, cfg.f_at])
    k = _rk4_backward(terminal, rhs, grid)
    return SuicidalReducedSolution(grid=grid, k=k)


def value_at(sol: RiccatiSolution, t: float):
    """Solution matrices at time t.

    On-grid times return the stored node values; off-grid times linearly
    interpolate the two neighbors.  Returns (P_d, P_tau, P_a) in mode I1 and
    the single P matrix in mode I2.
    """
    grid = sol.grid
    tol = 0.5e-6 * grid.step
    if t < -tol or t > grid.horizon + tol:
        raise ValueError(f"t={t} outside [0, {grid.horizon}]")

    def pick(arr: np.ndarray) -> np.ndarray:
        k = grid.index_of(t)
        if k is not None:
            return arr[k]
        lo = int(np.floor(t / grid.step))
        lo = min(max(lo, 0), grid.n_nodes - 2)
        w = (t - lo * grid.step) / grid.step
        return (1.0 - w) * arr[lo] + w * arr[lo + 1]

    if sol.mode == "I1":
        return pick(sol.P_d), pick(sol.P_tau), pick(sol.P_a)
    return pick(sol.P)
