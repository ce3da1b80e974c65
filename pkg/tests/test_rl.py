import math

import numpy as np
import pytest

from igmn.errors import ConfigError
from igmn.rl import (
    CART_POLE,
    MOUNTAIN_CAR,
    AgentConfig,
    TASK_DEFAULTS,
    EnvSpec,
    QAgent,
    Transition,
    cart_pole_reset,
    cart_pole_step,
    default_agent_config,
    env_by_name,
    mountain_car_reset,
    mountain_car_step,
    run_task,
    write_records,
)

from oracles import cart_pole_euler, value_iteration


@pytest.mark.parametrize("seed", range(5))
def test_cart_pole_matches_equations_of_motion(seed):
    rng = np.random.default_rng(seed)
    s = tuple(rng.uniform(-0.1, 0.1, 4))
    for a in (0, 1, 1, 0, 1):
        tr = cart_pole_step(s, a)
        np.testing.assert_allclose(tr.next_state, cart_pole_euler(s, a), rtol=1e-14, atol=1e-15)
        assert tr.reward == 1.0
        s = tr.next_state


def test_cart_pole_termination():
    assert cart_pole_step((0.0, 0.0, 0.22, 0.0), 0).terminal  # beyond 12 degrees
    assert cart_pole_step((2.39, 1.0, 0.0, 0.0), 1).terminal
    assert not cart_pole_step((0.0, 0.0, 0.0, 0.0), 1).terminal
    with pytest.raises(ValueError):
        cart_pole_step((0.0,) * 4, 2)


def test_mountain_car_rest_in_valley():
    # cos(3 pos) = 0 at the valley floor, so coasting leaves the car at rest
    pos = -math.pi / 6
    tr = mountain_car_step((pos, 0.0), 1)
    assert abs(tr.next_state[1]) < 1e-15
    assert tr.next_state[0] == pytest.approx(pos, abs=1e-15)
    assert tr.reward == -1.0 and not tr.terminal


def test_mountain_car_bounds_and_goal():
    pos, vel = mountain_car_step((-1.2, -0.05), 0).next_state
    assert pos == -1.2 and vel == 0.0
    assert mountain_car_step((0.49, 0.05), 2).terminal
    pos, vel = mountain_car_step((0.0, 0.5), 2).next_state
    assert vel == 0.07
    with pytest.raises(ValueError):
        mountain_car_step((0.0, 0.0), 3)


def test_resets_are_seeded():
    a = cart_pole_reset(np.random.default_rng(1))
    assert a == cart_pole_reset(np.random.default_rng(1))
    assert all(abs(v) <= 0.05 for v in a)
    p, v = mountain_car_reset(np.random.default_rng(2))
    assert -0.6 <= p <= -0.4 and v == 0.0


def test_env_lookup():
    assert env_by_name("mountain-car") is MOUNTAIN_CAR
    with pytest.raises(ConfigError):
        env_by_name("acrobot")


def test_agent_config_validation():
    for kw in ({"gamma": 0.0}, {"epsilon_decay": 0.0}, {"epsilon_min": 2.0},
               {"novelty_p": 0.0}, {"max_episodes": 0}, {"sp_cap": 0.5},
               {"max_components": 0}):
        with pytest.raises(ConfigError):
            AgentConfig(**kw)
    cfg = AgentConfig(epsilon_start=1.0, epsilon_decay=0.5, epsilon_min=0.1)
    assert [cfg.epsilon(e) for e in range(5)] == [1.0, 0.5, 0.25, 0.125, 0.1]


# -- targets ---------------------------------------------------------------------


def test_unlearned_agent_is_optimistic():
    agent = QAgent(CART_POLE, AgentConfig(q_init=7.0))
    np.testing.assert_array_equal(agent.q_values((0.0,) * 4), [7.0, 7.0])


def test_terminal_target_is_reward_only():
    agent = QAgent(CART_POLE, AgentConfig(q_init=5.0))
    tr = Transition((0.0,) * 4, 1, 1.0, (0.1,) * 4, True)
    x = agent.target(tr, q_state=[5.0, 5.0])
    np.testing.assert_array_equal(x, [0.0, 0.0, 0.0, 0.0, 5.0, 1.0])


def test_bootstrap_target():
    agent = QAgent(CART_POLE, AgentConfig(q_init=5.0, gamma=0.9))
    tr = Transition((0.0,) * 4, 0, 1.0, (0.1,) * 4, False)
    x = agent.target(tr, q_state=[2.0, 3.0])
    np.testing.assert_allclose(x[4:], [1.0 + 0.9 * 5.0, 3.0])


def test_gamma_limit_recovers_immediate_reward():
    agent = QAgent(CART_POLE, AgentConfig(q_init=5.0, gamma=1e-12))
    tr = Transition((0.0,) * 4, 0, 1.0, (0.1,) * 4, False)
    assert agent.target(tr, q_state=[0.0, 0.0])[4] == pytest.approx(1.0)


def _one_state_env(rewards, threshold=math.inf):
    rewards = tuple(rewards)

    def step(state, action):
        return Transition(tuple(state), action, rewards[action], (0.0,), False)

    return EnvSpec("toy", 1, len(rewards), step, lambda rng: (0.0,), 50, 10, threshold, (1.0,), 1.0)


def test_toy_mdp_converges_to_value_iteration():
    rewards = [0.0, 1.0, 0.3]
    gamma = 0.5
    P = np.ones((1, 3, 1))
    Q_star = value_iteration(P, np.array([rewards]), gamma)[0]
    np.testing.assert_allclose(Q_star, [1.0, 2.0, 1.3])

    spec = _one_state_env(rewards)
    cfg = AgentConfig(gamma=gamma, q_init=0.0, delta=0.5, novelty_p=1.0, sp_cap=50.0)
    agent = QAgent(spec, cfg)
    rng = np.random.default_rng(0)
    for _ in range(4000):
        q = agent.q_values((0.0,))
        a = int(rng.integers(3))
        agent.observe(spec.step((0.0,), a), q)
    np.testing.assert_allclose(agent.q_values((0.0,)), Q_star, atol=0.05)
    assert agent.greedy((0.0,)) == 1


# -- episodes --------------------------------------------------------------------


def test_run_task_is_deterministic():
    cfg = AgentConfig(max_episodes=8)
    a = run_task(CART_POLE, cfg, seed=5)
    b = run_task(CART_POLE, cfg, seed=5)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    assert [r.components for r in a.records] == [r.components for r in b.records]


def test_episode_reward_counts_steps():
    res = run_task(MOUNTAIN_CAR, AgentConfig(max_episodes=3), seed=0, policy="random")
    np.testing.assert_array_equal(res.rewards, [-200.0] * 3)
    res = run_task(CART_POLE, AgentConfig(max_episodes=20), seed=0, policy="random")
    assert np.all(res.rewards >= 1) and np.all(res.rewards < 200)
    assert res.max_components == 0 and not res.solved


def test_solve_rule_and_records():
    cfg = AgentConfig(max_episodes=30)
    spec = _one_state_env([1.0, 1.0], threshold=50.0)
    res = run_task(spec, cfg, seed=0)
    # every episode runs to the 50-step cap, so the 10-episode window first holds at 10
    assert res.episodes_to_solve == 10
    assert len(res.records) == 10
    text = write_records(res.records)
    lines = text.splitlines()
    assert lines[0] == "episode,reward,epsilon,components"
    assert lines[1].startswith("1,50.0,1.0,")
    with pytest.raises(ConfigError):
        run_task(spec, cfg, policy="greedy")


def test_task_defaults_accept_overrides():
    cfg = default_agent_config(MOUNTAIN_CAR, max_episodes=7)
    assert cfg.max_episodes == 7
    assert cfg.sp_cap == TASK_DEFAULTS["mountain_car"]["sp_cap"]
    assert default_agent_config(CART_POLE, q_init=1.0).q_init == 1.0
    with pytest.raises(ConfigError):
        default_agent_config(CART_POLE, no_such_knob=1)


def test_component_cap_evicts_weakest():
    spec = _one_state_env([0.0, 1.0])
    agent = QAgent(spec, AgentConfig(max_components=3, pruning_enabled=False, novelty_p=1.0 - 1e-9))
    rng = np.random.default_rng(0)
    for _ in range(40):
        # far-apart states force a new component nearly every step
        s = (float(rng.uniform(-1e3, 1e3)),)
        agent.observe(Transition(s, 1, 1.0, s, True), [0.0, 0.0])
        assert agent.mixture.n_components <= 3
    assert agent.max_components == 3
    np.testing.assert_allclose(agent.mixture.priors.sum(), 1.0)


def test_sp_cap_bounds_accumulators():
    spec = _one_state_env([0.0, 1.0])
    agent = QAgent(spec, AgentConfig(sp_cap=4.0, novelty_p=1.0))
    for _ in range(20):
        agent.observe(spec.step((0.0,), 1))
    assert agent.mixture.n_components == 1
    assert agent.mixture.sps[0] == 4.0
