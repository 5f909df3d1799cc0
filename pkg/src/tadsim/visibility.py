"""Time-varying visibility network and per-player information matrices.

A constrained player p sees q exactly when the planar distance is within
p's observation radius (closed ball, so boundary contact counts).  Each
snapshot collects the directed edges into the augmented adjacency rows and
builds, per constrained player, the 0/±1 information matrix that gates the
global reduced state down to what that player can actually measure: its own
displacement passes through when the attacker is visible, and visible peers
enter as differences relative to the player.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigError, PlayerId, ScenarioConfig

__all__ = ["VisibilitySnapshot", "edge_active", "snapshot", "transitions"]


@dataclass(frozen=True)
class VisibilitySnapshot:
    """The directed network at one instant, with derived gating matrices.

    aug stacks per-defender rows [Phi_a + Ad, Phi_tau]; row i lists, in
    stacking order (defenders, target), who defender i sees, with the
    diagonal entry holding the attacker edge.  tau_row lists the target's
    outgoing edges (defenders then attacker); it is None in I1 where the
    target is unconstrained.
    """

    n: int
    phi_a: np.ndarray  # (n,) defender -> attacker indicators
    phi_tau_col: np.ndarray  # (n,) defender -> target indicators
    ad: np.ndarray  # (n, n) defender -> defender, zero diagonal
    aug: np.ndarray  # (n, n+1) augmented adjacency
    info_d: np.ndarray  # (n, dim, dim) information matrices
    tau_row: np.ndarray | None = None  # (n+1,) target's outgoing edges (I2)
    info_tau: np.ndarray | None = None  # (dim, dim) target information matrix

    def edge_set(self) -> frozenset:
        """All active directed edges as (from_label, to_label) pairs."""
        n = self.n
        names = [f"d{i}" for i in range(1, n + 1)] + ["tau", "a"]
        edges = set()
        for i in range(n):
            for j in range(n):
                if i != j and self.ad[i, j]:
                    edges.add((names[i], names[j]))
            if self.phi_a[i]:
                edges.add((names[i], "a"))
            if self.phi_tau_col[i]:
                edges.add((names[i], "tau"))
        if self.tau_row is not None:
            for j in range(n):
                if self.tau_row[j]:
                    edges.add(("tau", names[j]))
            if self.tau_row[n]:
                edges.add(("tau", "a"))
        return frozenset(edges)


def _rel_position(p: PlayerId, z: np.ndarray, n: int) -> np.ndarray:
    """Position of p in attacker-relative coordinates."""
    if p.kind == "a":
        return np.zeros(2)
    j = p.index - 1 if p.kind == "d" else n
    return z[2 * j : 2 * j + 2]


def edge_active(p: PlayerId, q: PlayerId, z: np.ndarray, cfg: ScenarioConfig) -> bool:
    """Whether constrained player p currently sees q (closed-ball test)."""
    if p == q:
        raise ConfigError("self edges are not defined")
    zeta = cfg.zeta(p)  # raises for the attacker
    if zeta is None:
        return True
    z = np.asarray(z, dtype=float)
    d = _rel_position(p, z, cfg.n) - _rel_position(q, z, cfg.n)
    return bool(np.hypot(d[0], d[1]) <= zeta)


def _gate_matrix(row: np.ndarray, i: int) -> np.ndarray:
    """diag(row) * (I - outer(ones - e_i, e_i)), expanded to 2x2 blocks."""
    m = row.size
    e = np.zeros(m)
    e[i] = 1.0
    base = np.eye(m) - np.outer(np.ones(m) - e, e)
    return np.kron(np.diag(row) @ base, np.eye(2))


def snapshot(z: np.ndarray, cfg: ScenarioConfig) -> VisibilitySnapshot:
    """Evaluate every edge indicator and information matrix at state z."""
    n = cfg.n
    z = np.asarray(z, dtype=float)
    order = [PlayerId.defender(i) for i in range(1, n + 1)]
    targets = order + [PlayerId.target(), PlayerId.attacker()]

    phi_a = np.zeros(n)
    phi_tau_col = np.zeros(n)
    ad = np.zeros((n, n))
    for i, p in enumerate(order):
        for j, q in enumerate(targets):
            if q == p:
                continue
            active = edge_active(p, q, z, cfg)
            if q.kind == "a":
                phi_a[i] = float(active)
            elif q.kind == "tau":
                phi_tau_col[i] = float(active)
            else:
                ad[i, j] = float(active)

    aug = np.hstack([np.diag(phi_a) + ad, phi_tau_col[:, None]])
    info_d = np.stack([_gate_matrix(aug[i], i) for i in range(n)])

    tau_row = info_tau = None
    if cfg.interaction == "I2":
        tau = PlayerId.target()
        tau_row = np.array(
            [float(edge_active(tau, q, z, cfg)) for q in order]
            + [float(edge_active(tau, PlayerId.attacker(), z, cfg))]
        )
        info_tau = _gate_matrix(tau_row, n)

    return VisibilitySnapshot(
        n=n,
        phi_a=phi_a,
        phi_tau_col=phi_tau_col,
        ad=ad,
        aug=aug,
        info_d=info_d,
        tau_row=tau_row,
        info_tau=info_tau,
    )


def transitions(snaps, times) -> list[tuple[float, str, str, str]]:
    """Edge-set changes between consecutive snapshots.

    Returns rows (t, from, to, "formed"|"broken"), sorted by time then by
    edge labels; an event at t means the edge set differs from the previous
    node's.
    """
    events = []
    prev = None
    for t, snap in zip(times, snaps):
        cur = snap.edge_set()
        if prev is not None:
            for a, b in sorted(cur - prev):
                events.append((float(t), a, b, "formed"))
            for a, b in sorted(prev - cur):
                events.append((float(t), a, b, "broken"))
        prev = cur
    return events
