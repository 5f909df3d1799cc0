"""Equilibrium controls and the cost structures that support them.

Unconstrained players use the standard feedback law driven by the Riccati
solution.  Constrained players apply per-node gain matrices behind their
information matrices, so their controls only ever read visible state.  The
parametric performance-index matrices computed here (S-couplings and the
Q-shifts) are what make an arbitrary gated gain profile an equilibrium of a
nearby game; the consistency optimizer drives them toward zero.

Objective evaluation integrates the running costs with a trapezoid rule that
respects the zero-order-hold protocol: each interval is closed with its own
held controls and gate matrices, while states and Riccati values take their
endpoint values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameMatrices
from .riccati import RiccatiSolution, TimeGrid, value_at
from .visibility import VisibilitySnapshot

__all__ = [
    "GainSchedule",
    "PerfIndexMatrices",
    "fne_control",
    "adapted_control",
    "perf_index_matrices",
    "objective_eval",
]


@dataclass(frozen=True)
class GainSchedule:
    """Per-node gains for the constrained players.

    K_d is indexed [node, defender, 2, dim]; K_tau (I2 only) [node, 2, dim].
    Arrays may cover a prefix of the grid when produced by a run that
    terminated early.  The diagnostic arrays mirror the node axis.
    """

    grid: TimeGrid
    K_d: np.ndarray
    K_tau: np.ndarray | None = None
    theta: np.ndarray | None = None
    iterations: np.ndarray | None = None
    fast_path: np.ndarray | None = None
    converged: np.ndarray | None = None

    @property
    def n_covered(self) -> int:
        return self.K_d.shape[0]

    def node(self, t: float) -> int:
        k = self.grid.index_of(t)
        if k is None:
            raise ValueError(f"t={t} is not a grid node")
        if k >= self.n_covered:
            raise ValueError(f"no gains stored at node {k} (schedule covers {self.n_covered})")
        return k


@dataclass(frozen=True)
class PerfIndexMatrices:
    """Constraint-induced shifts of the quadratic cost structure.

    mode I1 carries S1 and the three per-player Q-shifts; mode I2 carries
    the team couplings S2/S3 and the single Q-shift.  All shifts vanish when
    the gated gains reproduce the unconstrained feedback exactly.
    """

    mode: str
    S1: np.ndarray | None = None
    dQ_d: np.ndarray | None = None
    dQ_tau: np.ndarray | None = None
    dQ_a: np.ndarray | None = None
    S2: np.ndarray | None = None
    S3: np.ndarray | None = None
    dQ: np.ndarray | None = None


def gated_products(K_d: np.ndarray, snap: VisibilitySnapshot) -> np.ndarray:
    """Stack the per-defender products K_di @ info_di into a (2n, dim) map."""
    prod = np.einsum("nij,njk->nik", K_d, snap.info_d)
    n, _, dim = prod.shape
    return prod.reshape(2 * n, dim)


def fne_control(group: str, sol: RiccatiSolution, t: float, z: np.ndarray) -> np.ndarray:
    """Standard feedback control of a player group at (t, z).

    I1 accepts "d" (stacked defender controls), "tau", "a".  I2 accepts
    "a", "dtau" (stacked team control) and the "d"/"tau" slices of it; note
    the team maximizes, so its feedback carries the opposite sign.
    """
    mats = sol.mats
    z = np.asarray(z, dtype=float)
    if sol.mode == "I1":
        if group == "dtau":
            raise ValueError("no team control in the non-zero-sum mode")
        P_d, P_tau, P_a = value_at(sol, t)
        if group == "d":
            return -(mats.B_d.T @ P_d @ z) / mats.r_d_vec
        if group == "tau":
            return -(mats.B_tau.T @ P_tau @ z) / (mats.R_tau[0, 0])
        if group == "a":
            return -(mats.B_a.T @ P_a @ z) / (mats.R_a[0, 0])
        raise ValueError(f"unknown player group {group!r}")
    P = value_at(sol, t)
    if group == "a":
        return -(mats.B_a.T @ P @ z) / (mats.R_a[0, 0])
    u_d = (mats.B_d.T @ P @ z) / mats.r_d_vec
    u_tau = (mats.B_tau.T @ P @ z) / (mats.R_tau[0, 0])
    if group == "dtau":
        return np.concatenate([u_d, u_tau])
    if group == "d":
        return u_d
    if group == "tau":
        return u_tau
    raise ValueError(f"unknown player group {group!r}")


def adapted_control(
    K: GainSchedule, snap: VisibilitySnapshot, t: float, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    """Gated controls of the constrained players at a grid node.

    Returns (stacked defender controls, target control or None).
    """
    k = K.node(t)
    z = np.asarray(z, dtype=float)
    u_d = gated_products(K.K_d[k], snap) @ z
    u_tau = None
    if K.K_tau is not None:
        if snap.info_tau is None:
            raise ValueError("snapshot has no target gating but the schedule has target gains")
        u_tau = K.K_tau[k] @ snap.info_tau @ z
    return u_d, u_tau


def _i1_perf(
    mats: GameMatrices,
    P_d: np.ndarray,
    P_tau: np.ndarray,
    P_a: np.ndarray,
    KI: np.ndarray,
) -> PerfIndexMatrices:
    r = mats.r_d_vec[:, None]
    A = mats.B_d.T @ P_d
    S1 = A + r * KI
    dQ_d = -A.T @ (A / r) + KI.T @ (r * KI)
    Y = (mats.B_d.T @ P_tau).T @ (S1 / r)
    dQ_tau = -Y - Y.T
    Y = (mats.B_d.T @ P_a).T @ (S1 / r)
    dQ_a = -Y - Y.T
    return PerfIndexMatrices(mode="I1", S1=S1, dQ_d=dQ_d, dQ_tau=dQ_tau, dQ_a=dQ_a)


def _i2_perf(
    mats: GameMatrices, P: np.ndarray, KI_d: np.ndarray, KI_tau: np.ndarray
) -> PerfIndexMatrices:
    r = mats.r_d_vec[:, None]
    r_tau = mats.R_tau[0, 0]
    A = mats.B_d.T @ P
    T = mats.B_tau.T @ P
    S2 = r * KI_d - A
    S3 = r_tau * KI_tau - T
    dQ = A.T @ (A / r) + T.T @ T / r_tau - KI_d.T @ (r * KI_d) - r_tau * (KI_tau.T @ KI_tau)
    return PerfIndexMatrices(mode="I2", S2=S2, S3=S3, dQ=dQ)


def perf_index_matrices(
    sol: RiccatiSolution,
    K_d: np.ndarray,
    snap: VisibilitySnapshot,
    t: float,
    K_tau: np.ndarray | None = None,
) -> PerfIndexMatrices:
    """Evaluate the parametric-index matrices for per-node gains at time t.

    K_d holds the (n, 2, dim) defender blocks; K_tau the (2, dim) target
    gain in I2.
    """
    KI = gated_products(np.asarray(K_d, dtype=float), snap)
    if sol.mode == "I1":
        P_d, P_tau, P_a = value_at(sol, t)
        return _i1_perf(sol.mats, P_d, P_tau, P_a, KI)
    if K_tau is None:
        raise ValueError("I2 needs the target gain")
    P = value_at(sol, t)
    KI_tau = np.asarray(K_tau, dtype=float) @ snap.info_tau
    return _i2_perf(sol.mats, P, KI_d=KI, KI_tau=KI_tau)


def _quad_form(M: np.ndarray, v: np.ndarray) -> float:
    return float(v @ M @ v)


def objective_eval(traj, which: str = "standard", gains: GainSchedule | None = None) -> dict:
    """Accumulated costs of a logged trajectory.

    which="standard" evaluates the original quadratic objectives (per player
    in I1, the single saddle objective in I2).  which="adapted" evaluates
    the parametric indices induced by the gated gains; these need a gain
    schedule, taken from the log unless passed explicitly.

    Running costs use per-interval trapezoid quadrature with zero-order-hold
    controls: interval k is closed with u_k and gate matrices of node k at
    both ends, and states/Riccati values at the respective endpoints.
    """
    cfg = traj.config
    mats = traj.riccati.mats
    sol = traj.riccati
    n = cfg.n
    times = traj.times
    m_nodes = times.size
    delta = cfg.step
    z = traj.z
    u_d = traj.controls[:, :n].reshape(m_nodes, 2 * n)
    u_tau = traj.controls[:, n]
    u_a = traj.controls[:, n + 1]
    z_T = z[-1]
    r = mats.r_d_vec

    if which == "standard":
        if sol.mode == "I1":
            total = {
                "d": 0.5 * _quad_form(mats.F_d, z_T),
                "tau": 0.5 * _quad_form(mats.F_tau, z_T),
                "a": 0.5 * _quad_form(mats.F_a, z_T),
            }
            for k in range(m_nodes - 1):
                zq = 0.5 * (_quad_form(mats.Q_d, z[k]) + _quad_form(mats.Q_d, z[k + 1]))
                total["d"] += 0.5 * delta * (zq + u_d[k] @ (r * u_d[k]))
                zq = 0.5 * (_quad_form(mats.Q_tau, z[k]) + _quad_form(mats.Q_tau, z[k + 1]))
                total["tau"] += 0.5 * delta * (zq + cfg.r_tau * (u_tau[k] @ u_tau[k]))
                zq = 0.5 * (_quad_form(mats.Q_a, z[k]) + _quad_form(mats.Q_a, z[k + 1]))
                total["a"] += 0.5 * delta * (zq + cfg.r_a * (u_a[k] @ u_a[k]))
            return total
        J = 0.5 * _quad_form(mats.F, z_T)
        for k in range(m_nodes - 1):
            zq = 0.5 * (_quad_form(mats.Q, z[k]) + _quad_form(mats.Q, z[k + 1]))
            uq = (
                cfg.r_a * (u_a[k] @ u_a[k])
                - u_d[k] @ (r * u_d[k])
                - cfg.r_tau * (u_tau[k] @ u_tau[k])
            )
            J += 0.5 * delta * (zq + uq)
        return {"J": J}

    if which != "adapted":
        raise ValueError(f"unknown objective family {which!r}")
    gains = gains if gains is not None else traj.gains
    if gains is None:
        raise ValueError("adapted objectives need a gain schedule")
    snaps = traj.snapshots

    if sol.mode == "I1":
        total = {
            "d": 0.5 * _quad_form(mats.F_d, z_T),
            "tau": 0.5 * _quad_form(mats.F_tau, z_T),
            "a": 0.5 * _quad_form(mats.F_a, z_T),
        }
        for k in range(m_nodes - 1):
            KI = gated_products(gains.K_d[k], snaps[k])
            for end, zt in ((k, z[k]), (k + 1, z[k + 1])):
                P_d, P_tau, P_a = value_at(sol, times[end])
                pm = _i1_perf(mats, P_d, P_tau, P_a, KI)
                w = 0.25 * delta  # trapezoid endpoint weight times the 1/2 cost factor
                total["d"] += w * (
                    _quad_form(mats.Q_d + pm.dQ_d, zt)
                    + u_d[k] @ (r * u_d[k])
                    - 2.0 * (u_d[k] @ pm.S1 @ zt)
                )
                total["tau"] += w * (
                    _quad_form(mats.Q_tau + pm.dQ_tau, zt) + cfg.r_tau * (u_tau[k] @ u_tau[k])
                )
                total["a"] += w * (
                    _quad_form(mats.Q_a + pm.dQ_a, zt) + cfg.r_a * (u_a[k] @ u_a[k])
                )
        return total

    J = 0.5 * _quad_form(mats.F, z_T)
    for k in range(m_nodes - 1):
        KI_d = gated_products(gains.K_d[k], snaps[k])
        KI_tau = gains.K_tau[k] @ snaps[k].info_tau
        for end, zt in ((k, z[k]), (k + 1, z[k + 1])):
            P = value_at(sol, times[end])
            pm = _i2_perf(mats, P, KI_d, KI_tau)
            J += 0.25 * delta * (
                _quad_form(mats.Q + pm.dQ, zt)
                + 2.0 * (u_d[k] @ pm.S2 @ zt)
                + 2.0 * (u_tau[k] @ pm.S3 @ zt)
                + cfg.r_a * (u_a[k] @ u_a[k])
                - u_d[k] @ (r * u_d[k])
                - cfg.r_tau * (u_tau[k] @ u_tau[k])
            )
    return {"J": J}
