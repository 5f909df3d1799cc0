"""Problem description and constant game matrices.

A scenario has n defenders, one target and one attacker moving in the plane
with single-integrator kinematics.  All quantities live in the reduced state

    z = col(z_d1, ..., z_dn, z_tau),    z_p = X_p - X_a,

so the attacker sits at the origin of every relative frame and the state has
dimension 2(n+1).  This module validates scenario parameters and builds every
constant matrix (input maps, terminal/running weights, control penalties) the
solvers need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "PlayerId",
    "ScenarioConfig",
    "GameMatrices",
    "player_order",
    "build_matrices",
    "to_reduced",
    "from_reduced",
]


class ConfigError(ValueError):
    """Raised for scenario parameters that violate the model contract."""


@dataclass(frozen=True, order=True)
class PlayerId:
    """One of: defender i (1-based), the target, or the attacker."""

    kind: str  # "d" | "tau" | "a"
    index: int = 0  # defender index, 0 for target/attacker

    def __post_init__(self) -> None:
        if self.kind not in ("d", "tau", "a"):
            raise ConfigError(f"unknown player kind {self.kind!r}")
        if self.kind == "d" and self.index < 1:
            raise ConfigError("defender index is 1-based")
        if self.kind != "d" and self.index != 0:
            raise ConfigError(f"{self.kind!r} takes no index")

    @staticmethod
    def defender(i: int) -> "PlayerId":
        return PlayerId("d", i)

    @staticmethod
    def target() -> "PlayerId":
        return PlayerId("tau")

    @staticmethod
    def attacker() -> "PlayerId":
        return PlayerId("a")

    @staticmethod
    def parse(label: str) -> "PlayerId":
        """Parse 'd3' / 'tau' / 'a' labels used in configs and CLI flags."""
        if label == "tau":
            return PlayerId.target()
        if label == "a":
            return PlayerId.attacker()
        if label.startswith("d") and label[1:].isdigit():
            return PlayerId.defender(int(label[1:]))
        raise ConfigError(f"unknown player label {label!r}")

    @property
    def label(self) -> str:
        return f"d{self.index}" if self.kind == "d" else self.kind

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.label


def player_order(n: int) -> list[PlayerId]:
    """Canonical stacking order: d1, ..., dn, tau, a (attacker last)."""
    return [PlayerId.defender(i) for i in range(1, n + 1)] + [
        PlayerId.target(),
        PlayerId.attacker(),
    ]


def _as_tuple(values, n: int, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise ConfigError(f"{name} needs {n} entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Full problem instance.

    Distances and radii share the plane units of the initial positions;
    horizon and step are in time units.  zeta_tau=None means the target's
    observation range is unbounded (the only player allowed that).
    """

    n: int
    initial_positions: dict  # PlayerId -> (x, y)
    sigma_d: tuple[float, ...]  # interception radii, one per defender
    sigma_a: float  # capture radius of the attacker
    zeta_d: tuple[float, ...]  # defender observation radii
    zeta_tau: float | None  # target observation radius, None = unbounded
    f_da: tuple[float, ...] = ()  # terminal defender-attacker weights
    q_da: tuple[float, ...] = ()  # running defender-attacker weights
    f_ad: tuple[float, ...] = ()  # terminal attacker-defender weights
    q_ad: tuple[float, ...] = ()  # running attacker-defender weights
    f_ta: float = 1.0  # terminal target-attacker weight
    q_ta: float = 1.0
    f_at: float = 1.0  # terminal attacker-target weight
    q_at: float = 1.0
    r_d: tuple[float, ...] = ()  # control penalties
    r_tau: float = 1.0
    r_a: float = 1.0
    lam: int = 1  # 0 = suicidal attacker, 1 = non-suicidal
    horizon: float = 6.0
    step: float = 0.005
    interaction: str = "I1"  # "I1" defenders constrained, "I2" + target
    gamma_weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        n = self.n
        if n < 1:
            raise ConfigError("need at least one defender")
        # Fill per-defender defaults (unit weights/penalties) before checks.
        for name, default in (
            ("f_da", 1.0),
            ("q_da", 1.0),
            ("f_ad", 1.0),
            ("q_ad", 1.0),
            ("r_d", 1.0),
        ):
            val = getattr(self, name)
            if not val:
                val = (default,) * n
            object.__setattr__(self, name, _as_tuple(val, n, name))
        object.__setattr__(self, "sigma_d", _as_tuple(self.sigma_d, n, "sigma_d"))
        object.__setattr__(self, "zeta_d", _as_tuple(self.zeta_d, n, "zeta_d"))

        if self.interaction not in ("I1", "I2"):
            raise ConfigError(f"unknown interaction {self.interaction!r}")
        if self.lam not in (0, 1):
            raise ConfigError("lambda must be 0 or 1")
        if self.interaction == "I2" and self.lam != 1:
            raise ConfigError("I2 requires a non-suicidal attacker (lambda=1)")

        expect = player_order(n)
        missing = [p.label for p in expect if p not in self.initial_positions]
        if missing:
            raise ConfigError(f"initial_positions missing {missing}")
        positions = {
            p: (float(xy[0]), float(xy[1])) for p, xy in self.initial_positions.items()
        }
        object.__setattr__(self, "initial_positions", positions)

        for name in ("f_da", "q_da", "f_ad", "q_ad", "r_d"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ConfigError(f"{name} entries must be positive")
        for name in ("f_ta", "q_ta", "f_at", "q_at", "r_tau", "r_a", "sigma_a"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if any(s <= 0 for s in self.sigma_d):
            raise ConfigError("sigma_d entries must be positive")
        if any(z <= 0 for z in self.zeta_d):
            raise ConfigError("zeta_d entries must be positive")
        if any(s >= z for s, z in zip(self.sigma_d, self.zeta_d)):
            raise ConfigError("each interception radius must satisfy sigma_d < zeta_d")
        if self.zeta_tau is not None:
            zt = float(self.zeta_tau)
            if not zt > 0 or math.isinf(zt):
                raise ConfigError("zeta_tau must be finite positive, or None for unbounded")
            object.__setattr__(self, "zeta_tau", zt)

        if self.horizon <= 0 or self.step <= 0:
            raise ConfigError("horizon and step must be positive")
        ratio = self.horizon / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("horizon must be an integer number of steps")
        if round(ratio) < 2:
            raise ConfigError("grid needs at least two steps")

        n_gamma = 4 if self.interaction == "I1" else 3
        gammas = self.gamma_weights or (1.0 / n_gamma,) * n_gamma
        gammas = tuple(float(g) for g in gammas)
        if len(gammas) != n_gamma:
            raise ConfigError(f"{self.interaction} takes {n_gamma} gamma weights")
        if any(not 0.0 <= g <= 1.0 for g in gammas):
            raise ConfigError("gamma weights must lie in [0, 1]")
        object.__setattr__(self, "gamma_weights", gammas)

    @property
    def dim(self) -> int:
        """Reduced state dimension 2(n+1)."""
        return 2 * (self.n + 1)

    @property
    def n_nodes(self) -> int:
        return int(round(self.horizon / self.step)) + 1

    def zeta(self, p: PlayerId) -> float | None:
        """Observation radius of a constrained player (None = unbounded)."""
        if p.kind == "d":
            return self.zeta_d[p.index - 1]
        if p.kind == "tau":
            return None if self.interaction == "I1" else self.zeta_tau
        raise ConfigError("the attacker has no observation radius")


@dataclass(frozen=True)
class GameMatrices:
    """Constant matrices of the reduced-state game.

    The zero-sum aggregates (F, Q, R_dtau and S_dtau) are populated only for
    I2 scenarios; they combine the team of defenders and the target against
    the attacker.
    """

    n: int
    interaction: str
    B_d: np.ndarray  # dim x 2n
    B_tau: np.ndarray  # dim x 2
    B_a: np.ndarray  # dim x 2
    B_dtau: np.ndarray  # dim x 2(n+1)
    F_d: np.ndarray
    F_tau: np.ndarray
    F_a: np.ndarray
    Q_d: np.ndarray
    Q_tau: np.ndarray
    Q_a: np.ndarray
    R_d: np.ndarray  # 2n x 2n diagonal
    R_tau: np.ndarray  # 2 x 2
    R_a: np.ndarray  # 2 x 2
    S_d: np.ndarray  # B_d R_d^-1 B_d'
    S_tau: np.ndarray
    S_a: np.ndarray
    F: np.ndarray | None = None
    Q: np.ndarray | None = None
    R_dtau: np.ndarray | None = None
    S_dtau: np.ndarray | None = None
    r_d_vec: np.ndarray = field(default=None, repr=False)  # diag of R_d

    @property
    def dim(self) -> int:
        return 2 * (self.n + 1)


def build_matrices(cfg: ScenarioConfig) -> GameMatrices:
    """Instantiate all constant matrices for a validated scenario."""
    n = cfg.n
    eye2 = np.eye(2)

    sel_d = np.zeros((n + 1, n))
    sel_d[:n, :n] = np.eye(n)
    B_d = np.kron(sel_d, eye2)
    sel_tau = np.zeros((n + 1, 1))
    sel_tau[n, 0] = 1.0
    B_tau = np.kron(sel_tau, eye2)
    B_a = -np.kron(np.ones((n + 1, 1)), eye2)
    B_dtau = np.hstack([B_d, B_tau])

    F_d = np.kron(np.diag(list(cfg.f_da) + [0.0]), eye2)
    Q_d = np.kron(np.diag(list(cfg.q_da) + [0.0]), eye2)
    F_tau = np.kron(np.diag([0.0] * n + [-cfg.f_ta]), eye2)
    Q_tau = np.kron(np.diag([0.0] * n + [-cfg.q_ta]), eye2)
    lam = float(cfg.lam)
    F_a = np.kron(np.diag([-lam * f for f in cfg.f_ad] + [cfg.f_at]), eye2)
    Q_a = np.kron(np.diag([-lam * q for q in cfg.q_ad] + [cfg.q_at]), eye2)

    r_d_vec = np.repeat(np.asarray(cfg.r_d, dtype=float), 2)
    R_d = np.diag(r_d_vec)
    R_tau = cfg.r_tau * eye2
    R_a = cfg.r_a * eye2

    S_d = B_d @ np.diag(1.0 / r_d_vec) @ B_d.T
    S_tau = B_tau @ B_tau.T / cfg.r_tau
    S_a = B_a @ B_a.T / cfg.r_a

    F = Q = R_dtau = S_dtau = None
    if cfg.interaction == "I2":
        # Team-vs-attacker aggregates: with lambda=1 the attacker's own
        # weight matrices already carry the sign pattern of the single
        # zero-sum objective.
        F = F_a.copy()
        Q = Q_a.copy()
        R_dtau = np.diag(np.concatenate([r_d_vec, [cfg.r_tau, cfg.r_tau]]))
        S_dtau = S_d + S_tau

    return GameMatrices(
        n=n,
        interaction=cfg.interaction,
        B_d=B_d,
        B_tau=B_tau,
        B_a=B_a,
        B_dtau=B_dtau,
        F_d=F_d,
        F_tau=F_tau,
        F_a=F_a,
        Q_d=Q_d,
        Q_tau=Q_tau,
        Q_a=Q_a,
        R_d=R_d,
        R_tau=R_tau,
        R_a=R_a,
        S_d=S_d,
        S_tau=S_tau,
        S_a=S_a,
        F=F,
        Q=Q,
        R_dtau=R_dtau,
        S_dtau=S_dtau,
        r_d_vec=r_d_vec,
    )


def to_reduced(positions: dict, n: int | None = None) -> np.ndarray:
    """Stack displacements relative to the attacker: d1..dn then tau."""
    if n is None:
        n = sum(1 for p in positions if p.kind == "d")
    order = player_order(n)
    missing = [p.label for p in order if p not in positions]
    if missing:
        raise ConfigError(f"positions missing {missing}")
    xa = np.asarray(positions[PlayerId.attacker()], dtype=float)
    z = np.empty(2 * (n + 1))
    for j, p in enumerate(order[:-1]):  # defenders then target
        z[2 * j : 2 * j + 2] = np.asarray(positions[p], dtype=float) - xa
    return z


def from_reduced(z: np.ndarray, attacker_pos) -> dict:
    """Invert to_reduced given the attacker anchor position."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 4 or z.size % 2:
        raise ConfigError(f"reduced state must have even length >= 4, got {z.shape}")
    n = z.size // 2 - 1
    xa = np.asarray(attacker_pos, dtype=float)
    out = {PlayerId.attacker(): (float(xa[0]), float(xa[1]))}
    for j, p in enumerate(player_order(n)[:-1]):
        xy = z[2 * j : 2 * j + 2] + xa
        out[p] = (float(xy[0]), float(xy[1]))
    return out
