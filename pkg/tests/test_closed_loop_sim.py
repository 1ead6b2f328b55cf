import numpy as np
import pytest

from resadp.closed_loop_sim import (SinusoidExploration, simulate_learning, simulate_regulation,
                                    tracking_metrics)
from resadp.dos import DoSParams, DoSSchedule, generate_schedule
from resadp.errors import DimensionError, DivergenceError
from resadp.plant import solve_regulator_equations

X0, Z0, W0 = [0.5, 0.0, 0.0, 0.0], [0.0], [1.0]


def test_zero_equilibrium(pendulum):
    p = pendulum
    tr = simulate_regulation(p["plant"], p["im"], DoSSchedule(((3, 5),)), p["sol"].K_star, None,
                             np.zeros(4), [0.0], [0.0], 50)
    assert not tr.x.any() and not tr.z.any() and not tr.u.any() and not tr.e.any()


def test_no_attack_matches_nominal_loop(pendulum):
    p = pendulum
    K = p["sol"].K_star
    Ac = p["aug"].Abar - p["aug"].Bbar @ K
    tr = simulate_regulation(p["plant"], p["im"], DoSSchedule(), K, None, X0, Z0, W0, 300)
    zt = tr.zeta_tilde
    err = np.abs(zt[1:] - zt[:-1] @ Ac.T).max(axis=1)
    scale = 1 + np.abs(zt[:-1]).max(axis=1) * np.abs(Ac).max()
    assert np.all(err <= 1e-12 * scale)


def test_exosystem_and_error_identity(pendulum):
    p = pendulum
    sched = generate_schedule(DoSParams(1, 15, 40, 10), 200, 3)
    tr = simulate_regulation(p["plant"], p["im"], sched, p["sol"].K_star, None, X0, Z0, W0, 200)
    assert np.allclose(tr.w, 1.0)
    Cbar = p["aug"].Cbar
    assert np.allclose(tr.e, tr.zeta_tilde @ Cbar[0], atol=1e-10)
    assert np.allclose(tr.y_d, 1.0)


def test_rotating_exosystem_states():
    from resadp.plant import InternalModel, LinearPlant
    th = 0.3
    E = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    plant = LinearPlant([[0.5]], [[1.0]], [[1.0]], [[0.0, 0.0]], E, [[-1.0, 0.0]])
    im = InternalModel.for_plant(plant, [[1.0], [0.0]])
    from resadp.optimal_control import CostWeights, solve_oracle
    from resadp.plant import build_augmented
    K = solve_oracle(build_augmented(plant, im), CostWeights(np.eye(3))).K_star
    tr = simulate_regulation(plant, im, DoSSchedule(), K, None, [0.0], [0, 0], [1.0, 0.0], 20)
    for k in (0, 5, 20):
        assert np.allclose(tr.w[k], np.linalg.matrix_power(E, k) @ [1.0, 0.0])


def test_held_values(pendulum):
    p = pendulum
    sched = DoSSchedule(((0, 3), (10, 4)))
    K = p["sol"].K_star
    tr = simulate_regulation(p["plant"], p["im"], sched, K, None, X0, Z0, W0, 30)
    for k in range(31):
        if tr.attacked[k] and k > 0:
            assert tr.last_update[k] == tr.last_update[k - 1]
        elif not tr.attacked[k]:
            assert tr.last_update[k] == k
        held = tr.zeta[tr.last_update[k]]
        assert tr.u[k] == pytest.approx(-(K @ held).item(), rel=1e-12, abs=1e-12)
    # attacked at k = 0: the held values start from the initial state
    assert tr.last_update[:3].tolist() == [0, 0, 0]
    # the internal model integrates the held error
    G2 = p["im"].G2[0, 0]
    for k in range(30):
        assert tr.z[k + 1, 0] == pytest.approx(tr.z[k, 0] + G2 * tr.e[tr.last_update[k]])


def test_learning_run_and_log(pendulum):
    p = pendulum
    sched = DoSSchedule(((20, 5),))
    K0 = np.array([[-160.0, -91.0, -320.0, -75.0, -2.6]])
    tr, log = simulate_learning(p["plant"], p["im"], sched, K0, SinusoidExploration(seed=2),
                                X0, Z0, W0, 100)
    assert len(tr) == 101 and np.isnan(tr.V).all()
    assert not set(log.instants) & set(range(19, 25))
    assert len(log) == 100 - 6
    # off-attack inputs carry the exploration signal
    assert not np.allclose(tr.u[5], -(K0 @ tr.zeta[5]).item())


def test_exploration_signal():
    ex = SinusoidExploration(amplitude=2.0, n_waves=10, seed=0)
    assert ex.amps.sum() == pytest.approx(2.0)
    assert np.all((ex.freqs > 0) & (ex.freqs < np.pi))
    assert all(abs(ex(k)) <= 2.0 for k in range(200))
    assert SinusoidExploration(seed=0)(7) == SinusoidExploration(seed=0)(7)


def test_divergence_reported(pendulum):
    p = pendulum
    with pytest.raises(DivergenceError) as info:
        simulate_learning(p["plant"], p["im"], DoSSchedule(), -1e6 * np.ones(5),
                          SinusoidExploration(seed=0), X0, Z0, W0, 2000)
    assert info.value.instant is not None


def test_dimension_checks(pendulum):
    p = pendulum
    with pytest.raises(DimensionError):
        simulate_regulation(p["plant"], p["im"], DoSSchedule(), np.ones(4), None, X0, Z0, W0, 5)
    with pytest.raises(DimensionError):
        simulate_regulation(p["plant"], p["im"], DoSSchedule(), p["sol"].K_star, None, [0.0],
                            Z0, W0, 5)


def test_metrics_and_envelope(pendulum):
    p = pendulum
    b = p["bound"]
    T = 2 * b.T_star
    sched = DoSSchedule(((100, 20),))
    tr = simulate_regulation(p["plant"], p["im"], sched, p["sol"].K_star, None, X0, Z0, W0, 1000,
                             P_star=p["sol"].P_star, bound=b, T=T)
    m = tracking_metrics(tr)
    assert m.final_quarter_max_abs_e < 1e-3
    assert m.first_below_tol is not None and m.first_below_tol < 1000
    assert m.envelope_dominated()
    assert np.all(tr.log_env_relaxed >= tr.log_env_exact - 1e-9)


def test_csv_layout(pendulum, tmp_path):
    p = pendulum
    tr = simulate_regulation(p["plant"], p["im"], DoSSchedule(), p["sol"].K_star, None,
                             X0, Z0, W0, 5, P_star=p["sol"].P_star, bound=p["bound"], T=10.0)
    tr.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ("k,x1,x2,x3,x4,z1,w1,u,e,y_d,attacked,V,env_exact,env_relaxed")
    assert len(lines) == 7
