"""Closed-loop simulation, termination detection and paired comparisons.

The forward pass advances all players on the shared grid with zero-order-hold
controls (exact for single integrators).  Under limited observations the
constrained players' gains are synthesized online: each node's visibility
snapshot is taken from the realized state, the node optimization is
warm-started from the previous node, and the resulting gated controls are
applied over the following interval.  Termination is checked at grid nodes
only, so reported times are grid multiples.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import consistency
from .model import ConfigError, PlayerId, ScenarioConfig, build_matrices, player_order
from .riccati import RiccatiSolution, TimeGrid, solve_nzs, solve_zs
from .strategies import GainSchedule, fne_control, gated_products
from .visibility import VisibilitySnapshot, snapshot, transitions

__all__ = [
    "TerminationRecord",
    "TrajectoryLog",
    "SuicidalReport",
    "DelayReport",
    "run",
    "run_suicidal_check",
    "run_paired_delay",
    "write_csv",
    "sidecar_dict",
    "write_sidecar",
    "config_to_dict",
    "config_from_dict",
]

PROFILES = ("complete_observations", "limited_observations")


def normalize_profile(profile: str) -> str:
    p = profile.strip().lower()
    if p in ("complete", "complete_observations"):
        return "complete_observations"
    if p in ("limited", "limited_observations"):
        return "limited_observations"
    raise ConfigError(f"unknown profile {profile!r}")


@dataclass(frozen=True)
class TerminationRecord:
    """How and when a run ended.

    kind "interception": a defender reached the attacker (defender is its
    1-based index); "capture": the attacker reached the target; "horizon":
    neither happened by the final node.  distance is the triggering pair's
    separation at the recorded node (attacker-target for horizon).
    """

    kind: str
    time: float
    distance: float
    defender: int | None = None


@dataclass
class TrajectoryLog:
    """Everything one run produced, on the visited prefix of the grid.

    positions/controls are indexed [node, player, xy] with players in
    stacking order d1..dn, tau, a.  Controls at node k are the ones held on
    [t_k, t_{k+1}); the final node's controls are the feedback evaluated
    there.
    """

    config: ScenarioConfig
    profile: str
    times: np.ndarray
    positions: np.ndarray
    z: np.ndarray
    controls: np.ndarray
    snapshots: list
    events: list
    termination: TerminationRecord
    strategy_labels: dict
    riccati: RiccatiSolution = field(repr=False)
    gains: GainSchedule | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.times.size


def _check_termination(cfg: ScenarioConfig, pos: np.ndarray, t: float) -> TerminationRecord | None:
    """First-match termination test at one node.

    Interception outranks capture at the same node, and the lowest-index
    defender wins simultaneous interceptions.
    """
    n = cfg.n
    attacker = pos[n + 1]
    for i in range(n):
        dist = float(np.hypot(*(pos[i] - attacker)))
        if dist <= cfg.sigma_d[i]:
            return TerminationRecord("interception", t, dist, defender=i + 1)
    dist = float(np.hypot(*(attacker - pos[n])))
    if dist <= cfg.sigma_a:
        return TerminationRecord("capture", t, dist)
    return None


def run(
    cfg: ScenarioConfig,
    profile: str = "limited_observations",
    settings: consistency.OptimizerSettings | None = None,
    strict: bool = False,
) -> TrajectoryLog:
    """Simulate one scenario under the chosen observation profile.

    Unconstrained players always play the standard feedback of the game with
    unlimited observations; under the limited profile the constrained
    players (defenders, plus the target in the team game) play their gated
    gains, synthesized online from the realized visibility snapshots.
    """
    profile = normalize_profile(profile)
    limited = profile == "limited_observations"
    mats = build_matrices(cfg)
    grid = TimeGrid.for_config(cfg)
    sol = solve_nzs(mats, grid) if cfg.interaction == "I1" else solve_zs(mats, grid)
    settings = settings or consistency.OptimizerSettings()

    n = cfg.n
    order = player_order(n)
    pos = np.array([cfg.initial_positions[p] for p in order], dtype=float)

    times_l, pos_l, z_l, u_l, snaps, node_gains = [], [], [], [], [], []
    termination = None
    warm_d = warm_tau = None
    zero_sum = cfg.interaction == "I2"

    for k in range(grid.n_nodes):
        t = float(grid.times[k])
        z = (pos[: n + 1] - pos[n + 1]).reshape(-1)
        snap = snapshot(z, cfg)

        u = np.empty((n + 2, 2))
        if not limited:
            if zero_sum:
                u_team = fne_control("dtau", sol, t, z)
                u[:n] = u_team[: 2 * n].reshape(n, 2)
                u[n] = u_team[2 * n :]
            else:
                u[:n] = fne_control("d", sol, t, z).reshape(n, 2)
                u[n] = fne_control("tau", sol, t, z)
            u[n + 1] = fne_control("a", sol, t, z)
        else:
            node = consistency.solve_node_gains(
                sol,
                snap,
                t,
                cfg.gamma_weights,
                settings,
                warm_K_d=warm_d,
                warm_K_tau=warm_tau,
            )
            if strict and not node.converged and node.iterations >= settings.max_iters:
                raise consistency.IterationLimit(t, node)
            node_gains.append(node)
            warm_d, warm_tau = node.K_d, node.K_tau
            u[:n] = (gated_products(node.K_d, snap) @ z).reshape(n, 2)
            if zero_sum:
                u[n] = node.K_tau @ snap.info_tau @ z
            else:
                u[n] = fne_control("tau", sol, t, z)
            u[n + 1] = fne_control("a", sol, t, z)

        times_l.append(t)
        pos_l.append(pos.copy())
        z_l.append(z)
        u_l.append(u)
        snaps.append(snap)

        termination = _check_termination(cfg, pos, t)
        if termination is not None:
            break
        # RK4 with held controls collapses to one Euler step for integrators.
        pos = pos + cfg.step * u

    if termination is None:
        attacker, target = pos_l[-1][n + 1], pos_l[-1][n]
        termination = TerminationRecord(
            "horizon", times_l[-1], float(np.hypot(*(attacker - target)))
        )

    times = np.array(times_l)
    gains = None
    if limited:
        gains = GainSchedule(
            grid=grid,
            K_d=np.stack([g.K_d for g in node_gains]),
            K_tau=np.stack([g.K_tau for g in node_gains]) if zero_sum else None,
            theta=np.array([g.theta for g in node_gains]),
            iterations=np.array([g.iterations for g in node_gains], dtype=int),
            fast_path=np.array([g.fast_path for g in node_gains], dtype=bool),
            converged=np.array([g.converged for g in node_gains], dtype=bool),
        )

    constrained = "adapted" if limited else "fne"
    labels = {
        "d": constrained,
        "tau": constrained if zero_sum else "fne",
        "a": "fne",
    }
    return TrajectoryLog(
        config=cfg,
        profile=profile,
        times=times,
        positions=np.stack(pos_l),
        z=np.stack(z_l),
        controls=np.stack(u_l),
        snapshots=snaps,
        events=transitions(snaps, times),
        termination=termination,
        strategy_labels=labels,
        riccati=sol,
        gains=gains,
    )


@dataclass(frozen=True)
class SuicidalReport:
    """Straight-line and mode-independence diagnostics for lambda=0 runs.

    max_cross is the largest attacker-target cross product between the
    initial and current displacement (zero on an exact straight line);
    max_mode_deviation bounds the attacker/target position and control
    differences between the two observation profiles over their common
    prefix.
    """

    complete: TrajectoryLog
    limited: TrajectoryLog
    max_cross: float
    cross_bound: float
    max_mode_deviation: float

    @property
    def straight_line_ok(self) -> bool:
        return self.max_cross <= self.cross_bound

    @property
    def modes_agree(self) -> bool:
        return self.max_mode_deviation <= 1e-8


def _max_cross(log: TrajectoryLog) -> float:
    z_tau = log.z[:, -2:]
    x0, y0 = z_tau[0]
    return float(np.max(np.abs(x0 * z_tau[:, 1] - y0 * z_tau[:, 0])))


def run_suicidal_check(cfg: ScenarioConfig, settings=None) -> SuicidalReport:
    """Run both observation profiles of a suicidal-attacker scenario.

    Verifies the geometry the reduction predicts: the attacker and target
    trade along the line joining their initial positions, unaffected by the
    defenders' observation radii.
    """
    if cfg.lam != 0:
        raise ConfigError("suicidal check needs lambda=0")
    complete = run(cfg, "complete_observations", settings=settings)
    limited = run(cfg, "limited_observations", settings=settings)

    m = min(complete.n_nodes, limited.n_nodes)
    n = cfg.n
    players = [n, n + 1]  # target, attacker rows
    dev = max(
        float(np.max(np.abs(complete.positions[:m, players] - limited.positions[:m, players]))),
        float(np.max(np.abs(complete.controls[:m, players] - limited.controls[:m, players]))),
    )
    z_tau0 = complete.z[0, -2:]
    return SuicidalReport(
        complete=complete,
        limited=limited,
        max_cross=max(_max_cross(complete), _max_cross(limited)),
        cross_bound=1e-6 * (1.0 + float(z_tau0 @ z_tau0)),
        max_mode_deviation=dev,
    )


@dataclass(frozen=True)
class DelayReport:
    """Outcome of a paired run differing in one player's observation radius.

    t_first_edge holds, per run, the first node time at which the varied
    player has any outgoing edge (inf when it never does).  Team controls
    must match bitwise strictly before min(t_first_edge).
    """

    player: PlayerId
    zeta_base: float | None
    zeta_alt: float | None
    base: TrajectoryLog
    alt: TrajectoryLog
    t_first_edge: tuple[float, float]
    first_divergence: float | None

    @property
    def identical_before_min(self) -> bool:
        bound = min(self.t_first_edge)
        return self.first_divergence is None or self.first_divergence >= bound


def _first_outgoing(log: TrajectoryLog, player: PlayerId) -> float:
    for t, snap in zip(log.times, log.snapshots):
        if player.kind == "d":
            if snap.aug[player.index - 1].any():
                return float(t)
        elif snap.tau_row is not None and snap.tau_row.any():
            return float(t)
    return math.inf


def run_paired_delay(
    cfg: ScenarioConfig, player: PlayerId, zeta_alt: float | None, settings=None
) -> DelayReport:
    """Compare two otherwise identical games across one observation radius."""
    if player.kind == "a":
        raise ConfigError("the attacker has no observation radius")
    if player.kind == "tau" and cfg.interaction != "I2":
        raise ConfigError("the target is only constrained in the team game")
    if player.kind == "d":
        zeta_base = cfg.zeta_d[player.index - 1]
        zd = list(cfg.zeta_d)
        zd[player.index - 1] = zeta_alt
        cfg_alt = replace(cfg, zeta_d=tuple(zd))
    else:
        zeta_base = cfg.zeta_tau
        cfg_alt = replace(cfg, zeta_tau=zeta_alt)

    base = run(cfg, "limited_observations", settings=settings)
    alt = run(cfg_alt, "limited_observations", settings=settings)

    first_divergence = None
    m = min(base.n_nodes, alt.n_nodes)
    for k in range(m):
        if not (
            np.array_equal(base.controls[k], alt.controls[k])
            and np.array_equal(base.positions[k], alt.positions[k])
        ):
            first_divergence = float(base.times[k])
            break

    return DelayReport(
        player=player,
        zeta_base=zeta_base,
        zeta_alt=zeta_alt,
        base=base,
        alt=alt,
        t_first_edge=(_first_outgoing(base, player), _first_outgoing(alt, player)),
        first_divergence=first_divergence,
    )


# --- serialization ---------------------------------------------------------


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """JSON-ready scenario document; inverse of config_from_dict."""
    return {
        "n": cfg.n,
        "initial_positions": {
            p.label: list(cfg.initial_positions[p]) for p in player_order(cfg.n)
        },
        "capture_radii": {"d": list(cfg.sigma_d), "a": cfg.sigma_a},
        "visibility_radii": {"d": list(cfg.zeta_d), "tau": cfg.zeta_tau},
        "weights": {
            "f_da": list(cfg.f_da),
            "q_da": list(cfg.q_da),
            "f_ad": list(cfg.f_ad),
            "q_ad": list(cfg.q_ad),
            "f_ta": cfg.f_ta,
            "q_ta": cfg.q_ta,
            "f_at": cfg.f_at,
            "q_at": cfg.q_at,
        },
        "control_penalties": {"d": list(cfg.r_d), "tau": cfg.r_tau, "a": cfg.r_a},
        "lambda": cfg.lam,
        "horizon": cfg.horizon,
        "step": cfg.step,
        "interaction": cfg.interaction,
        "gamma_weights": list(cfg.gamma_weights),
    }


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Parse a scenario document, applying schema defaults.

    Minimal documents need initial_positions and the two radii groups;
    weights and penalties default to 1, lambda to 1, horizon to 6.0, step
    to 0.005, interaction to I1 and gamma weights to equal.
    """
    if "initial_positions" not in doc:
        raise ConfigError("config needs initial_positions")
    positions = {
        PlayerId.parse(label): tuple(xy) for label, xy in doc["initial_positions"].items()
    }
    n = doc.get("n") or sum(1 for p in positions if p.kind == "d")
    cap = doc.get("capture_radii")
    vis = doc.get("visibility_radii")
    if not cap or not vis:
        raise ConfigError("config needs capture_radii and visibility_radii")
    weights = doc.get("weights", {})
    pen = doc.get("control_penalties", {})
    try:
        return ScenarioConfig(
            n=n,
            initial_positions=positions,
            sigma_d=tuple(cap["d"]),
            sigma_a=float(cap["a"]),
            zeta_d=tuple(vis["d"]),
            zeta_tau=None if vis.get("tau") is None else float(vis["tau"]),
            f_da=tuple(weights.get("f_da", ())),
            q_da=tuple(weights.get("q_da", ())),
            f_ad=tuple(weights.get("f_ad", ())),
            q_ad=tuple(weights.get("q_ad", ())),
            f_ta=float(weights.get("f_ta", 1.0)),
            q_ta=float(weights.get("q_ta", 1.0)),
            f_at=float(weights.get("f_at", 1.0)),
            q_at=float(weights.get("q_at", 1.0)),
            r_d=tuple(pen.get("d", ())),
            r_tau=float(pen.get("tau", 1.0)),
            r_a=float(pen.get("a", 1.0)),
            lam=int(doc.get("lambda", 1)),
            horizon=float(doc.get("horizon", 6.0)),
            step=float(doc.get("step", 0.005)),
            interaction=str(doc.get("interaction", "I1")),
            gamma_weights=tuple(doc.get("gamma_weights", ())),
        )
    except KeyError as exc:
        raise ConfigError(f"config missing key {exc}") from exc


def _player_labels(n: int) -> list[str]:
    return [p.label for p in player_order(n)]


def write_csv(log: TrajectoryLog, path) -> None:
    """One row per node: t, positions, held controls, termination flag."""
    labels = _player_labels(log.config.n)
    header = (
        ["t"]
        + [f"{axis}_{p}" for p in labels for axis in ("x", "y")]
        + [f"u{axis}_{p}" for p in labels for axis in ("x", "y")]
        + ["terminated"]
    )
    last = log.n_nodes - 1
    terminated = log.termination.kind != "horizon"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(log.n_nodes):
            row = [repr(float(log.times[k]))]
            row += [repr(float(v)) for v in log.positions[k].reshape(-1)]
            row += [repr(float(v)) for v in log.controls[k].reshape(-1)]
            row.append(str(int(terminated and k == last)))
            writer.writerow(row)


def sidecar_dict(log: TrajectoryLog) -> dict:
    """JSON sidecar: config echo, events, termination, node diagnostics."""
    term = log.termination
    doc = {
        "config": config_to_dict(log.config),
        "profile": log.profile,
        "strategy_labels": log.strategy_labels,
        "initial_edges": sorted(log.snapshots[0].edge_set()),
        "events": [
            {"t": t, "from": a, "to": b, "kind": kind} for t, a, b, kind in log.events
        ],
        "termination": {
            "kind": term.kind,
            "time": term.time,
            "distance": term.distance,
            "defender": f"d{term.defender}" if term.defender else None,
        },
    }
    if log.gains is not None and log.gains.theta is not None:
        doc["theta"] = [float(v) for v in log.gains.theta]
        doc["iterations"] = [int(v) for v in log.gains.iterations]
        doc["fast_path"] = [bool(v) for v in log.gains.fast_path]
    return doc


def write_sidecar(log: TrajectoryLog, path) -> None:
    with open(path, "w") as fh:
        json.dump(sidecar_dict(log), fh, indent=2)
        fh.write("\n")
