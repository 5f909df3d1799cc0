"""Per-node synthesis of consistent gated gains.

At every grid node the constrained players' gain matrices are chosen to
minimize a weighted squared-Frobenius error built from the parametric
performance-index matrices.  At nodes where every information matrix is
invertible the minimizer is available in closed form (and achieves error
zero); elsewhere a warm-started gradient descent with Armijo backtracking
finds a local minimizer.  Gains of players with a zero information matrix
are pinned to zero: any value yields the same gated control, and the pin
keeps paired runs bitwise comparable.

The line search evaluates the error only; gradients are computed at accepted
iterates.  Everything here is deterministic: identical inputs replay the
identical iterate sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ScenarioConfig
from .riccati import RiccatiSolution, value_at
from .strategies import GainSchedule, gated_products, perf_index_matrices
from .visibility import VisibilitySnapshot

__all__ = [
    "OptimizerSettings",
    "NodeGains",
    "IterationLimit",
    "theta1",
    "theta2",
    "grad_theta",
    "solve_node_gains",
    "solve_gains",
]


@dataclass(frozen=True)
class OptimizerSettings:
    """Gradient-descent controls.

    The stopping rule is relative: iteration ends once the Frobenius norm of
    the full gradient drops below grad_tol * (1 + theta).
    """

    max_iters: int = 500
    grad_tol: float = 1e-8
    armijo_c: float = 1e-4
    shrink: float = 0.5
    init_step: float = 1.0

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.grad_tol <= 0 or self.armijo_c <= 0:
            raise ValueError("optimizer settings must be positive")
        if not 0 < self.shrink < 1 or self.init_step <= 0:
            raise ValueError("optimizer settings must be positive")


@dataclass(frozen=True)
class NodeGains:
    """Result of one node's synthesis, with convergence diagnostics."""

    K_d: np.ndarray  # (n, 2, dim)
    K_tau: np.ndarray | None
    theta: float
    grad_norm: float
    iterations: int
    fast_path: bool
    converged: bool


class IterationLimit(RuntimeError):
    """Gradient descent hit the iteration cap at some node (strict mode).

    Carries the best gains found at that node and the final error value;
    the landscape is non-convex and slow convergence is not a soundness
    failure, so non-strict callers record this in diagnostics instead.
    """

    def __init__(self, t: float, node_gains: NodeGains) -> None:
        super().__init__(
            f"gain synthesis at t={t:.6g} stopped at the iteration cap "
            f"(theta={node_gains.theta:.3e})"
        )
        self.t = t
        self.node_gains = node_gains


def _frob2(m: np.ndarray) -> float:
    return float(np.sum(m * m))


def theta1(sol: RiccatiSolution, K_d, snap: VisibilitySnapshot, t: float, gammas) -> float:
    """Error of defender gains against the unconstrained feedback structure."""
    pm = perf_index_matrices(sol, K_d, snap, t)
    g1, g2, g3, g4 = gammas
    return (
        g1 * _frob2(pm.dQ_d) + g2 * _frob2(pm.dQ_tau) + g3 * _frob2(pm.dQ_a) + g4 * _frob2(pm.S1)
    )


def theta2(
    sol: RiccatiSolution, K_d, K_tau, snap: VisibilitySnapshot, t: float, gammas
) -> float:
    """Error of team gains against the zero-sum feedback structure."""
    pm = perf_index_matrices(sol, K_d, snap, t, K_tau=K_tau)
    g1, g2, g3 = gammas
    return g1 * _frob2(pm.dQ) + g2 * _frob2(pm.S2) + g3 * _frob2(pm.S3)


def grad_theta(
    sol: RiccatiSolution,
    K_d,
    snap: VisibilitySnapshot,
    t: float,
    gammas,
    K_tau=None,
):
    """Closed-form gradient blocks of the node error.

    Returns the (n, 2, dim) defender stack in mode I1, and the pair
    (defender stack, (2, dim) target block) in mode I2.
    """
    mats = sol.mats
    n = mats.n
    r = mats.r_d_vec[:, None]
    K_d = np.asarray(K_d, dtype=float)
    pm = perf_index_matrices(sol, K_d, snap, t, K_tau=K_tau)
    KI = gated_products(K_d, snap)
    if sol.mode == "I1":
        g1, g2, g3, g4 = gammas
        P_d, P_tau, P_a = value_at(sol, t)
        G = (
            4.0 * g1 * (r * KI) @ pm.dQ_d
            - 4.0 * g2 * (mats.B_d.T @ P_tau) @ pm.dQ_tau
            - 4.0 * g3 * (mats.B_d.T @ P_a) @ pm.dQ_a
            + 2.0 * g4 * (r * pm.S1)
        )
        return np.stack(
            [G[2 * i : 2 * i + 2] @ snap.info_d[i].T for i in range(n)]
        )
    g1, g2, g3 = gammas
    r_tau = mats.R_tau[0, 0]
    G = -4.0 * g1 * (r * KI) @ pm.dQ + 2.0 * g2 * (r * pm.S2)
    grad_d = np.stack([G[2 * i : 2 * i + 2] @ snap.info_d[i].T for i in range(n)])
    KI_tau = np.asarray(K_tau, dtype=float) @ snap.info_tau
    G_tau = -4.0 * g1 * r_tau * KI_tau @ pm.dQ + 2.0 * g3 * r_tau * pm.S3
    return grad_d, G_tau @ snap.info_tau.T


def _closed_form_gains(sol: RiccatiSolution, snap: VisibilitySnapshot, t: float):
    """Exact minimizer at a full-visibility node (error exactly zero)."""
    mats = sol.mats
    n = mats.n
    if sol.mode == "I1":
        P_d, _, _ = value_at(sol, t)
        full = -(mats.B_d.T @ P_d) / mats.r_d_vec[:, None]
        K_tau = None
    else:
        P = value_at(sol, t)
        full = (mats.B_d.T @ P) / mats.r_d_vec[:, None]
        K_tau = (mats.B_tau.T @ P) / mats.R_tau[0, 0] @ np.linalg.inv(snap.info_tau)
    K_d = np.stack(
        [
            full[2 * i : 2 * i + 2] @ np.linalg.inv(snap.info_d[i])
            for i in range(n)
        ]
    )
    return K_d, K_tau


def _node_evaluators(sol: RiccatiSolution, snap: VisibilitySnapshot, t: float, gammas):
    """Build fast theta/gradient closures over gated products.

    Both closures take the stacked defender product KI (2n, dim) and, in
    mode I2, the target product KI_tau (2, dim); every per-node constant is
    hoisted here so line-search trials stay cheap.
    """
    mats = sol.mats
    n = mats.n
    r = mats.r_d_vec[:, None]
    if sol.mode == "I1":
        g1, g2, g3, g4 = gammas
        P_d, P_tau, P_a = value_at(sol, t)
        A_d = mats.B_d.T @ P_d
        A_t = mats.B_d.T @ P_tau
        A_a = mats.B_d.T @ P_a
        base_dQ = -A_d.T @ (A_d / r)

        def pieces(KI, _KI_tau=None):
            S1 = A_d + r * KI
            dQd = base_dQ + KI.T @ (r * KI)
            Y = A_t.T @ (S1 / r)
            dQt = -Y - Y.T
            Y = A_a.T @ (S1 / r)
            dQa = -Y - Y.T
            return S1, dQd, dQt, dQa

        def theta_fn(KI, _KI_tau=None) -> float:
            S1, dQd, dQt, dQa = pieces(KI)
            return g1 * _frob2(dQd) + g2 * _frob2(dQt) + g3 * _frob2(dQa) + g4 * _frob2(S1)

        def grad_fn(KI, _KI_tau=None):
            S1, dQd, dQt, dQa = pieces(KI)
            G = (
                4.0 * g1 * (r * KI) @ dQd
                - 4.0 * g2 * A_t @ dQt
                - 4.0 * g3 * A_a @ dQa
                + 2.0 * g4 * (r * S1)
            )
            return G, None

        return theta_fn, grad_fn

    g1, g2, g3 = gammas
    r_tau = mats.R_tau[0, 0]
    P = value_at(sol, t)
    A = mats.B_d.T @ P
    T = mats.B_tau.T @ P
    C0 = A.T @ (A / r) + T.T @ T / r_tau

    def pieces2(KI_d, KI_tau):
        S2 = r * KI_d - A
        S3 = r_tau * KI_tau - T
        dQ = C0 - KI_d.T @ (r * KI_d) - r_tau * (KI_tau.T @ KI_tau)
        return S2, S3, dQ

    def theta_fn(KI_d, KI_tau) -> float:
        S2, S3, dQ = pieces2(KI_d, KI_tau)
        return g1 * _frob2(dQ) + g2 * _frob2(S2) + g3 * _frob2(S3)

    def grad_fn(KI_d, KI_tau):
        S2, S3, dQ = pieces2(KI_d, KI_tau)
        G = -4.0 * g1 * (r * KI_d) @ dQ + 2.0 * g2 * (r * S2)
        G_tau = -4.0 * g1 * r_tau * KI_tau @ dQ + 2.0 * g3 * r_tau * S3
        return G, G_tau

    return theta_fn, grad_fn


def solve_node_gains(
    sol: RiccatiSolution,
    snap: VisibilitySnapshot,
    t: float,
    gammas,
    settings: OptimizerSettings | None = None,
    warm_K_d: np.ndarray | None = None,
    warm_K_tau: np.ndarray | None = None,
    theta_trace: list | None = None,
) -> NodeGains:
    """Synthesize one node's gains.

    Full-visibility nodes take the closed form; otherwise gradient descent
    starts from the warm start (zeros when none is given), with blocks of
    isolated players pinned to zero throughout.  theta_trace, when given,
    collects the error value at the start and after every accepted step.
    """
    settings = settings or OptimizerSettings()
    mats = sol.mats
    n, dim = mats.n, mats.dim
    zero_sum = sol.mode == "I2"

    rows_full = [bool(snap.aug[i].all()) for i in range(n)]
    tau_full = bool(snap.tau_row.all()) if zero_sum else True
    if all(rows_full) and tau_full:
        K_d, K_tau = _closed_form_gains(sol, snap, t)
        theta_fn, _ = _node_evaluators(sol, snap, t, gammas)
        KI = gated_products(K_d, snap)
        KI_tau = K_tau @ snap.info_tau if zero_sum else None
        return NodeGains(
            K_d=K_d,
            K_tau=K_tau,
            theta=theta_fn(KI, KI_tau),
            grad_norm=0.0,
            iterations=0,
            fast_path=True,
            converged=True,
        )

    active_d = np.array([bool(snap.aug[i].any()) for i in range(n)])
    active_tau = bool(snap.tau_row.any()) if zero_sum else False

    K_d = np.zeros((n, 2, dim)) if warm_K_d is None else np.array(warm_K_d, dtype=float)
    K_d[~active_d] = 0.0
    if zero_sum:
        K_tau = np.zeros((2, dim)) if warm_K_tau is None else np.array(warm_K_tau, dtype=float)
        if not active_tau:
            K_tau[:] = 0.0
    else:
        K_tau = None

    theta_fn, grad_fn = _node_evaluators(sol, snap, t, gammas)

    def products(Kd, Kt):
        KI = gated_products(Kd, snap)
        KIt = Kt @ snap.info_tau if zero_sum else None
        return KI, KIt

    def blocks_from_full(G, G_tau):
        """Scatter the chain-rule gradient back onto the gain blocks."""
        out = np.zeros_like(K_d)
        for i in range(n):
            if active_d[i]:
                out[i] = G[2 * i : 2 * i + 2] @ snap.info_d[i].T
        out_tau = None
        if zero_sum:
            out_tau = G_tau @ snap.info_tau.T if active_tau else np.zeros_like(K_tau)
        return out, out_tau

    KI, KI_tau = products(K_d, K_tau)
    theta = theta_fn(KI, KI_tau)
    if theta_trace is not None:
        theta_trace.append(theta)
    G, G_tau = grad_fn(KI, KI_tau)
    grad_d, grad_tau = blocks_from_full(G, G_tau)
    gnorm2 = _frob2(grad_d) + (_frob2(grad_tau) if grad_tau is not None else 0.0)

    iters = 0
    converged = np.sqrt(gnorm2) <= settings.grad_tol * (1.0 + theta)
    while not converged and iters < settings.max_iters:
        # Gated products are linear in the gains, so trials only need the
        # direction's products once per line search.
        dKI, dKI_tau = products(grad_d, grad_tau)
        step = settings.init_step
        accepted = False
        while step > 1e-18:
            trial = theta_fn(
                KI - step * dKI,
                KI_tau - step * dKI_tau if zero_sum else None,
            )
            if trial <= theta - settings.armijo_c * step * gnorm2:
                accepted = True
                break
            step *= settings.shrink
        if not accepted:
            break  # flat to machine precision along the gradient
        K_d = K_d - step * grad_d
        if zero_sum:
            K_tau = K_tau - step * grad_tau
        KI, KI_tau = products(K_d, K_tau)
        theta = trial  # Armijo-accepted value; non-increasing by construction
        iters += 1
        if theta_trace is not None:
            theta_trace.append(theta)
        G, G_tau = grad_fn(KI, KI_tau)
        grad_d, grad_tau = blocks_from_full(G, G_tau)
        gnorm2 = _frob2(grad_d) + (_frob2(grad_tau) if grad_tau is not None else 0.0)
        converged = np.sqrt(gnorm2) <= settings.grad_tol * (1.0 + theta)

    return NodeGains(
        K_d=K_d,
        K_tau=K_tau,
        theta=float(theta),
        grad_norm=float(np.sqrt(gnorm2)),
        iterations=iters,
        fast_path=False,
        converged=bool(converged),
    )


def solve_gains(
    sol: RiccatiSolution,
    snaps,
    cfg: ScenarioConfig,
    settings: OptimizerSettings | None = None,
    strict: bool = False,
    times: np.ndarray | None = None,
) -> GainSchedule:
    """Synthesize gains over a sequence of per-node snapshots.

    Nodes are processed in time order, each warm-started from the previous
    node's result.  In strict mode the first node that exhausts the
    iteration cap raises IterationLimit; otherwise the cap is recorded in
    the schedule diagnostics and the best gains are kept.
    """
    settings = settings or OptimizerSettings()
    if times is None:
        times = sol.grid.times[: len(snaps)]
    n, dim = cfg.n, cfg.dim
    m_nodes = len(snaps)
    zero_sum = cfg.interaction == "I2"
    K_d = np.zeros((m_nodes, n, 2, dim))
    K_tau = np.zeros((m_nodes, 2, dim)) if zero_sum else None
    theta = np.zeros(m_nodes)
    iterations = np.zeros(m_nodes, dtype=int)
    fast_path = np.zeros(m_nodes, dtype=bool)
    converged = np.zeros(m_nodes, dtype=bool)

    warm_d = warm_tau = None
    for k, (t, snap) in enumerate(zip(times, snaps)):
        node = solve_node_gains(
            sol,
            snap,
            float(t),
            cfg.gamma_weights,
            settings,
            warm_K_d=warm_d,
            warm_K_tau=warm_tau,
        )
        if strict and not node.converged and node.iterations >= settings.max_iters:
            raise IterationLimit(float(t), node)
        K_d[k] = node.K_d
        if zero_sum:
            K_tau[k] = node.K_tau
        theta[k] = node.theta
        iterations[k] = node.iterations
        fast_path[k] = node.fast_path
        converged[k] = node.converged
        warm_d, warm_tau = node.K_d, node.K_tau

    return GainSchedule(
        grid=sol.grid,
        K_d=K_d,
        K_tau=K_tau,
        theta=theta,
        iterations=iterations,
        fast_path=fast_path,
        converged=converged,
    )
