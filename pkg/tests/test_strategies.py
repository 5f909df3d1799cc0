"""Oracles for the control laws and the parametric cost structure.

The pointwise tests exercise the completed-square algebra directly: the
parametric running cost plus the time derivative of the quadratic value
function must equal the completed-square integrand for arbitrary states,
controls, gains and gating patterns.  The cancellation only uses the Riccati
right-hand side, so the check is exact up to rounding and independent of
integration accuracy.

The trajectory tests integrate the held-control system (exact for single
integrators), evaluate the accumulated objectives, and compare against the
value at time zero plus quadrature of the completed squares.  Deviation
rollouts confirm the equilibrium inequalities, with the opposite sign for
the maximizing team of the zero-sum interaction.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from conftest import make_config

from tadsim import (
    GainSchedule,
    TerminationRecord,
    TrajectoryLog,
    build_matrices,
    run,
    solve_nzs,
    solve_suicidal_reduced,
    solve_zs,
    to_reduced,
    value_at,
)
from tadsim.riccati import TimeGrid
from tadsim.strategies import (
    adapted_control,
    fne_control,
    gated_products,
    objective_eval,
    perf_index_matrices,
)
from tadsim.visibility import snapshot


def rde_rhs(mats, P_d, P_tau, P_a):
    """Coupled Riccati right-hand sides, written term by term."""
    S_d, S_tau, S_a = mats.S_d, mats.S_tau, mats.S_a
    dP_d = (
        P_d @ S_d @ P_d
        + P_d @ S_tau @ P_tau
        + P_d @ S_a @ P_a
        + P_tau @ S_tau @ P_d
        + P_a @ S_a @ P_d
        - mats.Q_d
    )
    dP_tau = (
        P_tau @ S_tau @ P_tau
        + P_tau @ S_d @ P_d
        + P_tau @ S_a @ P_a
        + P_d @ S_d @ P_tau
        + P_a @ S_a @ P_tau
        - mats.Q_tau
    )
    dP_a = (
        P_a @ S_a @ P_a
        + P_a @ S_d @ P_d
        + P_a @ S_tau @ P_tau
        + P_d @ S_d @ P_a
        + P_tau @ S_tau @ P_a
        - mats.Q_a
    )
    return dP_d, dP_tau, dP_a


def rde_rhs_zs(mats, P):
    return -mats.Q + P @ (mats.S_a - mats.S_dtau) @ P


def random_gating_states(cfg, rng, count):
    """Reduced states whose induced networks show mixed gating patterns."""
    dim = 2 * (cfg.n + 1)
    return [rng.uniform(-3.0, 3.0, size=dim) for _ in range(count)]


def quad(M, v):
    return float(v @ M @ v)


# --- pointwise completed-square identities -------------------------------


def test_pointwise_identity_nonzero_sum():
    cfg = make_config(
        n=2,
        zeta_d=(2.0, 1.0),
        r_d=(1.0, 1.5),
        r_tau=1.2,
        r_a=0.8,
        f_da=(1.5, 0.75),
        q_da=(0.5, 2.0),
        f_ta=0.9,
        q_at=0.6,
        horizon=0.6,
    )
    mats = build_matrices(cfg)
    sol = solve_nzs(mats, TimeGrid.for_config(cfg))
    rng = np.random.default_rng(7)
    r = mats.r_d_vec
    for _ in range(40):
        t = float(rng.choice(sol.grid.times))
        z = rng.uniform(-3.0, 3.0, size=6)
        snap = snapshot(rng.uniform(-3.0, 3.0, size=6), cfg)
        K_d = rng.normal(size=(2, 2, 6))
        u_d = rng.normal(size=4)
        u_tau = rng.normal(size=2)
        u_a = rng.normal(size=2)

        P_d, P_tau, P_a = value_at(sol, t)
        dP_d, dP_tau, dP_a = rde_rhs(mats, P_d, P_tau, P_a)
        pm = perf_index_matrices(sol, K_d, snap, t)
        KI = gated_products(K_d, snap)
        zdot = mats.B_d @ u_d + mats.B_tau @ u_tau + mats.B_a @ u_a
        res_d = u_d - KI @ z
        res_tau = u_tau + (mats.B_tau.T @ P_tau @ z) / cfg.r_tau
        res_a = u_a + (mats.B_a.T @ P_a @ z) / cfg.r_a

        checks = (
            (
                P_d,
                dP_d,
                0.5 * (quad(mats.Q_d + pm.dQ_d, z) + u_d @ (r * u_d)) - u_d @ pm.S1 @ z,
                0.5 * res_d @ (r * res_d)
                + z @ P_d @ mats.B_tau @ res_tau
                + z @ P_d @ mats.B_a @ res_a,
            ),
            (
                P_tau,
                dP_tau,
                0.5 * (quad(mats.Q_tau + pm.dQ_tau, z) + cfg.r_tau * (u_tau @ u_tau)),
                0.5 * cfg.r_tau * (res_tau @ res_tau)
                + z @ P_tau @ mats.B_d @ res_d
                + z @ P_tau @ mats.B_a @ res_a,
            ),
            (
                P_a,
                dP_a,
                0.5 * (quad(mats.Q_a + pm.dQ_a, z) + cfg.r_a * (u_a @ u_a)),
                0.5 * cfg.r_a * (res_a @ res_a)
                + z @ P_a @ mats.B_tau @ res_tau
                + z @ P_a @ mats.B_d @ res_d,
            ),
        )
        for P, dP, running, square in checks:
            value_rate = 0.5 * quad(dP, z) + z @ P @ zdot
            scale = 1.0 + abs(running) + abs(value_rate) + abs(square)
            assert abs(running + value_rate - square) <= 1e-9 * scale


def test_pointwise_identity_zero_sum():
    cfg = make_config(
        n=2,
        interaction="I2",
        zeta_d=(2.0, 1.0),
        zeta_tau=2.5,
        r_d=(1.0, 1.5),
        r_tau=1.2,
        r_a=0.8,
        q_da=(0.5, 2.0),
        f_at=1.4,
        horizon=0.6,
    )
    mats = build_matrices(cfg)
    sol = solve_zs(mats, TimeGrid.for_config(cfg))
    rng = np.random.default_rng(11)
    r = mats.r_d_vec
    for _ in range(40):
        t = float(rng.choice(sol.grid.times))
        z = rng.uniform(-3.0, 3.0, size=6)
        snap = snapshot(rng.uniform(-3.0, 3.0, size=6), cfg)
        K_d = rng.normal(size=(2, 2, 6))
        K_tau = rng.normal(size=(2, 6))
        u_d = rng.normal(size=4)
        u_tau = rng.normal(size=2)
        u_a = rng.normal(size=2)

        P = value_at(sol, t)
        pm = perf_index_matrices(sol, K_d, snap, t, K_tau=K_tau)
        res_d = u_d - gated_products(K_d, snap) @ z
        res_tau = u_tau - K_tau @ snap.info_tau @ z
        res_a = u_a + (mats.B_a.T @ P @ z) / cfg.r_a

        running = 0.5 * (
            quad(mats.Q + pm.dQ, z)
            + cfg.r_a * (u_a @ u_a)
            - u_d @ (r * u_d)
            - cfg.r_tau * (u_tau @ u_tau)
        ) + u_d @ pm.S2 @ z + u_tau @ pm.S3 @ z
        zdot = mats.B_d @ u_d + mats.B_tau @ u_tau + mats.B_a @ u_a
        value_rate = 0.5 * quad(rde_rhs_zs(mats, P), z) + z @ P @ zdot
        square = 0.5 * cfg.r_a * (res_a @ res_a) - 0.5 * (
            res_d @ (r * res_d) + cfg.r_tau * (res_tau @ res_tau)
        )
        scale = 1.0 + abs(running) + abs(value_rate) + abs(square)
        assert abs(running + value_rate - square) <= 1e-9 * scale


# --- trajectory-level identities and deviations --------------------------


def i1_setup():
    cfg = make_config(
        n=2,
        zeta_d=(2.0, 1.2),
        r_d=(1.0, 1.5),
        r_tau=1.2,
        r_a=0.8,
        q_da=(0.5, 2.0),
        horizon=0.6,
        step=0.005,
    )
    mats = build_matrices(cfg)
    sol = solve_nzs(mats, TimeGrid.for_config(cfg))
    return cfg, mats, sol


def i2_setup():
    cfg = make_config(
        n=2,
        interaction="I2",
        zeta_d=(2.0, 1.2),
        zeta_tau=2.5,
        r_d=(1.0, 1.5),
        r_tau=1.2,
        r_a=0.8,
        horizon=0.6,
        step=0.005,
    )
    mats = build_matrices(cfg)
    sol = solve_zs(mats, TimeGrid.for_config(cfg))
    return cfg, mats, sol


def prescribed_snapshots(cfg, rng, m):
    """A fixed gating sequence cycling through a few network patterns.

    Freezing the sequence turns the parametric objectives into ordinary
    time-varying quadratic functionals, so the identities must hold for any
    admissible controls on the same sequence.
    """
    states = random_gating_states(cfg, rng, 3)
    return [snapshot(states[k % len(states)], cfg) for k in range(m)]


def rollout(cfg, sol, snaps, schedule, u_d_seq=None, u_tau_seq=None, u_a_seq=None):
    """Integrate the held-control system under the prescribed gating.

    Override sequences replace a group's equilibrium rule with per-node
    open-loop values; everyone else keeps playing feedback on the realized
    state.  Positions pin the attacker at the origin so the reduced state
    and positions stay consistent.
    """
    mats = sol.mats
    grid = sol.grid
    m = grid.n_nodes
    n = cfg.n
    dim = 2 * (n + 1)
    z = np.empty((m, dim))
    z[0] = to_reduced(cfg.initial_positions, n)
    controls = np.empty((m, n + 2, 2))
    for k in range(m):
        t = float(grid.times[k])
        snap = snaps[k]
        if u_d_seq is not None:
            u_d = u_d_seq[k]
        else:
            u_d = gated_products(schedule.K_d[k], snap) @ z[k]
        if u_tau_seq is not None:
            u_tau = u_tau_seq[k]
        elif schedule.K_tau is not None:
            u_tau = schedule.K_tau[k] @ snap.info_tau @ z[k]
        else:
            u_tau = fne_control("tau", sol, t, z[k])
        u_a = u_a_seq[k] if u_a_seq is not None else fne_control("a", sol, t, z[k])
        controls[k, :n] = u_d.reshape(n, 2)
        controls[k, n] = u_tau
        controls[k, n + 1] = u_a
        if k + 1 < m:
            z[k + 1] = z[k] + grid.step * (
                mats.B_d @ u_d + mats.B_tau @ u_tau + mats.B_a @ u_a
            )
    positions = np.zeros((m, n + 2, 2))
    positions[:, : n + 1] = z.reshape(m, n + 1, 2)
    return TrajectoryLog(
        config=cfg,
        profile="limited_observations",
        times=grid.times.copy(),
        positions=positions,
        z=z,
        controls=controls,
        snapshots=snaps,
        events=[],
        termination=TerminationRecord("horizon", float(grid.times[-1]), 0.0),
        strategy_labels={},
        riccati=sol,
        gains=schedule,
    )


def completed_square_quadrature(traj, schedule):
    """Test-side evaluation of value-plus-squares, per player group.

    Mirrors the zero-order-hold protocol: controls and gate matrices held
    per interval, states and Riccati values at the interval endpoints.
    """
    cfg = traj.config
    sol = traj.riccati
    mats = sol.mats
    n = cfg.n
    m = traj.times.size
    z = traj.z
    u_d = traj.controls[:, :n].reshape(m, 2 * n)
    u_tau = traj.controls[:, n]
    u_a = traj.controls[:, n + 1]
    r = mats.r_d_vec
    delta = cfg.step

    if sol.mode == "I1":
        P0 = value_at(sol, 0.0)
        out = {
            "d": 0.5 * quad(P0[0], z[0]),
            "tau": 0.5 * quad(P0[1], z[0]),
            "a": 0.5 * quad(P0[2], z[0]),
        }
        for k in range(m - 1):
            KI = gated_products(schedule.K_d[k], traj.snapshots[k])
            for end in (k, k + 1):
                P_d, P_tau, P_a = value_at(sol, traj.times[end])
                zt = z[end]
                res_d = u_d[k] - KI @ zt
                res_tau = u_tau[k] + (mats.B_tau.T @ P_tau @ zt) / cfg.r_tau
                res_a = u_a[k] + (mats.B_a.T @ P_a @ zt) / cfg.r_a
                w = 0.25 * delta
                out["d"] += w * (
                    res_d @ (r * res_d)
                    + 2.0 * (zt @ P_d @ mats.B_tau @ res_tau)
                    + 2.0 * (zt @ P_d @ mats.B_a @ res_a)
                )
                out["tau"] += w * (
                    cfg.r_tau * (res_tau @ res_tau)
                    + 2.0 * (zt @ P_tau @ mats.B_d @ res_d)
                    + 2.0 * (zt @ P_tau @ mats.B_a @ res_a)
                )
                out["a"] += w * (
                    cfg.r_a * (res_a @ res_a)
                    + 2.0 * (zt @ P_a @ mats.B_tau @ res_tau)
                    + 2.0 * (zt @ P_a @ mats.B_d @ res_d)
                )
        return out

    J = 0.5 * quad(value_at(sol, 0.0), z[0])
    for k in range(m - 1):
        KI_d = gated_products(schedule.K_d[k], traj.snapshots[k])
        KI_tau = schedule.K_tau[k] @ traj.snapshots[k].info_tau
        for end in (k, k + 1):
            P = value_at(sol, traj.times[end])
            zt = z[end]
            res_d = u_d[k] - KI_d @ zt
            res_tau = u_tau[k] - KI_tau @ zt
            res_a = u_a[k] + (mats.B_a.T @ P @ zt) / cfg.r_a
            J += 0.25 * delta * (
                cfg.r_a * (res_a @ res_a)
                - res_d @ (r * res_d)
                - cfg.r_tau * (res_tau @ res_tau)
            )
    return {"J": J}


def random_schedule(cfg, sol, rng, with_tau=False):
    m = sol.grid.n_nodes
    dim = 2 * (cfg.n + 1)
    K_d = 0.5 * rng.normal(size=(m, cfg.n, 2, dim))
    K_tau = 0.5 * rng.normal(size=(m, 2, dim)) if with_tau else None
    return GainSchedule(grid=sol.grid, K_d=K_d, K_tau=K_tau)


def test_adapted_costs_match_value_plus_squares():
    cfg, mats, sol = i1_setup()
    rng = np.random.default_rng(23)
    m = sol.grid.n_nodes
    snaps = prescribed_snapshots(cfg, rng, m)
    schedule = random_schedule(cfg, sol, rng)
    # Everyone plays open loop: the identity has to absorb all three
    # deviations at once.
    traj = rollout(
        cfg,
        sol,
        snaps,
        schedule,
        u_d_seq=0.4 * rng.normal(size=(m, 4)),
        u_tau_seq=0.4 * rng.normal(size=(m, 2)),
        u_a_seq=0.4 * rng.normal(size=(m, 2)),
    )
    lhs = objective_eval(traj, which="adapted")
    rhs = completed_square_quadrature(traj, schedule)
    for p in ("d", "tau", "a"):
        assert lhs[p] == pytest.approx(rhs[p], abs=1e-3 * (1.0 + abs(rhs[p])))


def test_adapted_cost_matches_value_plus_squares_zero_sum():
    cfg, mats, sol = i2_setup()
    rng = np.random.default_rng(29)
    m = sol.grid.n_nodes
    snaps = prescribed_snapshots(cfg, rng, m)
    schedule = random_schedule(cfg, sol, rng, with_tau=True)
    traj = rollout(
        cfg,
        sol,
        snaps,
        schedule,
        u_d_seq=0.4 * rng.normal(size=(m, 4)),
        u_tau_seq=0.4 * rng.normal(size=(m, 2)),
        u_a_seq=0.4 * rng.normal(size=(m, 2)),
    )
    lhs = objective_eval(traj, which="adapted")
    rhs = completed_square_quadrature(traj, schedule)
    assert lhs["J"] == pytest.approx(rhs["J"], abs=1e-3 * (1.0 + abs(rhs["J"])))


def test_unilateral_deviations_cost_more():
    cfg, mats, sol = i1_setup()
    rng = np.random.default_rng(31)
    m = sol.grid.n_nodes
    snaps = prescribed_snapshots(cfg, rng, m)
    schedule = random_schedule(cfg, sol, rng)
    base = objective_eval(rollout(cfg, sol, snaps, schedule), which="adapted")
    deviated = {
        "d": rollout(cfg, sol, snaps, schedule, u_d_seq=0.5 * rng.normal(size=(m, 4))),
        "tau": rollout(cfg, sol, snaps, schedule, u_tau_seq=0.5 * rng.normal(size=(m, 2))),
        "a": rollout(cfg, sol, snaps, schedule, u_a_seq=0.5 * rng.normal(size=(m, 2))),
    }
    for p, traj in deviated.items():
        cost = objective_eval(traj, which="adapted")[p]
        assert cost > base[p]


def test_zero_sum_deviations_respect_saddle():
    cfg, mats, sol = i2_setup()
    rng = np.random.default_rng(37)
    m = sol.grid.n_nodes
    snaps = prescribed_snapshots(cfg, rng, m)
    schedule = random_schedule(cfg, sol, rng, with_tau=True)
    base = objective_eval(rollout(cfg, sol, snaps, schedule), which="adapted")["J"]
    attacker_dev = objective_eval(
        rollout(cfg, sol, snaps, schedule, u_a_seq=0.5 * rng.normal(size=(m, 2))),
        which="adapted",
    )["J"]
    team_dev = objective_eval(
        rollout(
            cfg,
            sol,
            snaps,
            schedule,
            u_d_seq=0.5 * rng.normal(size=(m, 4)),
            u_tau_seq=0.5 * rng.normal(size=(m, 2)),
        ),
        which="adapted",
    )["J"]
    # The attacker minimizes the adapted index, the team maximizes it.
    assert attacker_dev > base
    assert team_dev < base


def test_standard_costs_recover_values_under_complete_information():
    cfg = make_config(n=2, sigma_d=(1e-6, 1e-6), sigma_a=1e-6, horizon=0.5, step=0.004)
    traj = run(cfg, profile="complete")
    assert traj.termination.kind == "horizon"
    sol = traj.riccati
    z0 = traj.z[0]
    values = {
        "d": 0.5 * quad(value_at(sol, 0.0)[0], z0),
        "tau": 0.5 * quad(value_at(sol, 0.0)[1], z0),
        "a": 0.5 * quad(value_at(sol, 0.0)[2], z0),
    }
    costs = objective_eval(traj, which="standard")
    err = {p: abs(costs[p] - values[p]) for p in values}
    for p, e in err.items():
        assert e <= 0.05 * (1.0 + abs(values[p]))

    # Zero-order-hold feedback converges to the continuous equilibrium cost
    # at first order; halving the step has to shrink the defect.
    fine = run(
        make_config(n=2, sigma_d=(1e-6, 1e-6), sigma_a=1e-6, horizon=0.5, step=0.002),
        profile="complete",
    )
    fine_costs = objective_eval(fine, which="standard")
    fine_values = {
        "d": 0.5 * quad(value_at(fine.riccati, 0.0)[0], fine.z[0]),
        "tau": 0.5 * quad(value_at(fine.riccati, 0.0)[1], fine.z[0]),
        "a": 0.5 * quad(value_at(fine.riccati, 0.0)[2], fine.z[0]),
    }
    for p in values:
        assert abs(fine_costs[p] - fine_values[p]) <= 0.8 * err[p] + 1e-9


def test_standard_cost_recovers_value_zero_sum():
    cfg = make_config(
        n=2, interaction="I2", sigma_d=(1e-6, 1e-6), sigma_a=1e-6, horizon=0.5, step=0.004
    )
    traj = run(cfg, profile="complete")
    assert traj.termination.kind == "horizon"
    value = 0.5 * quad(value_at(traj.riccati, 0.0), traj.z[0])
    cost = objective_eval(traj, which="standard")["J"]
    assert cost == pytest.approx(value, abs=0.05 * (1.0 + abs(value)))


# --- feedback laws --------------------------------------------------------


def test_suicidal_feedback_matches_reduced_coefficients(i1_suicidal_config):
    cfg = i1_suicidal_config
    mats = build_matrices(cfg)
    grid = TimeGrid.for_config(cfg)
    sol = solve_nzs(mats, grid)
    red = solve_suicidal_reduced(cfg, grid)
    rng = np.random.default_rng(41)
    dim = 2 * (cfg.n + 1)
    for k in (0, grid.n_nodes // 3, grid.n_nodes - 1):
        t = float(grid.times[k])
        z = rng.uniform(-2.0, 2.0, size=dim)
        z_tau = z[-2:]
        u_tau = fne_control("tau", sol, t, z)
        u_a = fne_control("a", sol, t, z)
        assert u_tau == pytest.approx(-(red.k1[k] / cfg.r_tau) * z_tau, abs=1e-6)
        assert u_a == pytest.approx((red.k4[k] / cfg.r_a) * z_tau, abs=1e-6)


def test_fne_team_control_stacks_and_signs():
    cfg, mats, sol = i2_setup()
    rng = np.random.default_rng(43)
    z = rng.uniform(-2.0, 2.0, size=6)
    t = 0.25
    P = value_at(sol, t)
    u_team = fne_control("dtau", sol, t, z)
    np.testing.assert_allclose(u_team[:4], fne_control("d", sol, t, z), rtol=0, atol=0)
    np.testing.assert_allclose(u_team[4:], fne_control("tau", sol, t, z), rtol=0, atol=0)
    # Team maximizes: positive feedback sign.  Attacker minimizes: negative.
    expected_team = np.linalg.solve(mats.R_dtau, mats.B_dtau.T @ P @ z)
    np.testing.assert_allclose(u_team, expected_team, atol=1e-12)
    np.testing.assert_allclose(
        fne_control("a", sol, t, z), -(mats.B_a.T @ P @ z) / cfg.r_a, atol=1e-12
    )

    cfg1, _, sol1 = i1_setup()
    with pytest.raises(ValueError, match="team"):
        fne_control("dtau", sol1, t, np.zeros(6))
    with pytest.raises(ValueError, match="group"):
        fne_control("x", sol, t, z)


def test_perf_index_shifts_vanish_at_closed_form_gains():
    # Full visibility admits gains that reproduce the unconstrained feedback
    # exactly, collapsing every shift matrix.
    for mode in ("I1", "I2"):
        cfg = make_config(
            n=2,
            interaction=mode,
            zeta_d=(50.0, 50.0),
            zeta_tau=50.0 if mode == "I2" else None,
            r_d=(1.0, 1.5),
            horizon=0.5,
        )
        mats = build_matrices(cfg)
        grid = TimeGrid.for_config(cfg)
        z_ref = np.array([0.3, -0.8, 1.1, 0.4, -0.6, 0.9])
        snap = snapshot(z_ref, cfg)
        t = 0.2
        if mode == "I1":
            sol = solve_nzs(mats, grid)
            P_d = value_at(sol, t)[0]
            target = -(mats.B_d.T @ P_d) / mats.r_d_vec[:, None]
        else:
            sol = solve_zs(mats, grid)
            P = value_at(sol, t)
            target = (mats.B_d.T @ P) / mats.r_d_vec[:, None]
        K_d = np.stack(
            [
                target[2 * i : 2 * i + 2] @ np.linalg.inv(snap.info_d[i])
                for i in range(cfg.n)
            ]
        )
        if mode == "I1":
            pm = perf_index_matrices(sol, K_d, snap, t)
            for M in (pm.S1, pm.dQ_d, pm.dQ_tau, pm.dQ_a):
                assert np.max(np.abs(M)) <= 1e-10
        else:
            K_tau = (mats.B_tau.T @ P / cfg.r_tau) @ np.linalg.inv(snap.info_tau)
            pm = perf_index_matrices(sol, K_d, snap, t, K_tau=K_tau)
            for M in (pm.S2, pm.S3, pm.dQ):
                assert np.max(np.abs(M)) <= 1e-10


def test_adapted_control_expands_gated_products():
    cfg, mats, sol = i1_setup()
    rng = np.random.default_rng(47)
    m = sol.grid.n_nodes
    schedule = random_schedule(cfg, sol, rng)
    z = rng.uniform(-2.0, 2.0, size=6)
    snap = snapshot(z, cfg)
    k = 10
    t = float(sol.grid.times[k])
    u_d, u_tau = adapted_control(schedule, snap, t, z)
    np.testing.assert_array_equal(u_d, gated_products(schedule.K_d[k], snap) @ z)
    assert u_tau is None
    # Gated products are linear in the gains.
    K1 = rng.normal(size=(cfg.n, 2, 6))
    K2 = rng.normal(size=(cfg.n, 2, 6))
    np.testing.assert_allclose(
        gated_products(K1 + 2.0 * K2, snap),
        gated_products(K1, snap) + 2.0 * gated_products(K2, snap),
        atol=1e-12,
    )


def test_adapted_control_argument_checks():
    cfg, mats, sol = i1_setup()
    rng = np.random.default_rng(53)
    schedule = random_schedule(cfg, sol, rng)
    z = np.zeros(6)
    snap = snapshot(np.ones(6), cfg)
    with pytest.raises(ValueError, match="grid"):
        adapted_control(schedule, snap, 0.0033, z)
    cfg2, _, sol2 = i2_setup()
    schedule2 = random_schedule(cfg2, sol2, rng, with_tau=True)
    with pytest.raises(ValueError, match="gating"):
        adapted_control(schedule2, snap, 0.0, z)


def test_objective_eval_rejects_unknown_family():
    cfg, mats, sol = i1_setup()
    rng = np.random.default_rng(59)
    snaps = prescribed_snapshots(cfg, rng, sol.grid.n_nodes)
    schedule = random_schedule(cfg, sol, rng)
    traj = rollout(cfg, sol, snaps, schedule)
    with pytest.raises(ValueError, match="family"):
        objective_eval(traj, which="total")
    with pytest.raises(ValueError, match="schedule"):
        objective_eval(dataclasses.replace(traj, gains=None), which="adapted")
