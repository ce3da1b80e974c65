"""Q-learning with a mixture as the action-value approximator.

The mixture models the joint vector ``[state ; q_0 .. q_{A-1}]``.  Action
values for a state come from predicting the ``q`` block given the state.
Each transition trains one joint vector whose taken-action slot holds the
TD target and whose other slots repeat the current predictions.

Two classic control tasks are provided as pure transition functions:
cart-pole (balance for 200 steps) and mountain car (drive an underpowered
car up a hill).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import ConfigError
from .inference import Partition, predict_many_with_distance
from .model import LearnerConfig, Mixture, Representation, evict_weakest, renormalize_priors
from .numerics import chi2_quantile
from .train import learn


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: int
    reward: float
    next_state: tuple
    terminal: bool


# -- environments --------------------------------------------------------------

# cart-pole constants (Euler integration, 50 Hz)
CP_GRAVITY = 9.8
CP_MASS_CART = 1.0
CP_MASS_POLE = 0.1
CP_TOTAL_MASS = CP_MASS_CART + CP_MASS_POLE
CP_HALF_LENGTH = 0.5
CP_POLE_MOMENT = CP_MASS_POLE * CP_HALF_LENGTH
CP_FORCE = 10.0
CP_TAU = 0.02
CP_THETA_LIMIT = 12 * 2 * math.pi / 360
CP_X_LIMIT = 2.4

# mountain car constants
MC_MIN_POS, MC_MAX_POS = -1.2, 0.6
MC_MAX_SPEED = 0.07
MC_GOAL = 0.5
MC_FORCE = 0.001
MC_GRAVITY = 0.0025


def cart_pole_step(state, action: int) -> Transition:
    if action not in (0, 1):
        raise ValueError(f"cart-pole action must be 0 or 1, got {action!r}")
    x, x_dot, theta, theta_dot = state
    force = CP_FORCE if action == 1 else -CP_FORCE
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    temp = (force + CP_POLE_MOMENT * theta_dot * theta_dot * sin_t) / CP_TOTAL_MASS
    theta_acc = (CP_GRAVITY * sin_t - cos_t * temp) / (
        CP_HALF_LENGTH * (4.0 / 3.0 - CP_MASS_POLE * cos_t * cos_t / CP_TOTAL_MASS)
    )
    x_acc = temp - CP_POLE_MOMENT * theta_acc * cos_t / CP_TOTAL_MASS
    nxt = (
        x + CP_TAU * x_dot,
        x_dot + CP_TAU * x_acc,
        theta + CP_TAU * theta_dot,
        theta_dot + CP_TAU * theta_acc,
    )
    done = abs(nxt[0]) > CP_X_LIMIT or abs(nxt[2]) > CP_THETA_LIMIT
    return Transition(tuple(state), action, 1.0, nxt, done)


def cart_pole_reset(rng: np.random.Generator) -> tuple:
    return tuple(float(v) for v in rng.uniform(-0.05, 0.05, 4))


def mountain_car_step(state, action: int) -> Transition:
    if action not in (0, 1, 2):
        raise ValueError(f"mountain-car action must be 0, 1 or 2, got {action!r}")
    pos, vel = state
    vel += (action - 1) * MC_FORCE - MC_GRAVITY * math.cos(3.0 * pos)
    vel = min(max(vel, -MC_MAX_SPEED), MC_MAX_SPEED)
    pos += vel
    pos = min(max(pos, MC_MIN_POS), MC_MAX_POS)
    if pos == MC_MIN_POS and vel < 0.0:
        vel = 0.0
    return Transition(tuple(state), action, -1.0, (pos, vel), pos >= MC_GOAL)


def mountain_car_reset(rng: np.random.Generator) -> tuple:
    return (float(rng.uniform(-0.6, -0.4)), 0.0)


@dataclass(frozen=True)
class EnvSpec:
    """A task: dynamics, reset distribution and solve rule.

    ``state_scale`` is a nominal per-coordinate spread used to size new
    mixture components; ``q_scale`` plays the same role for action values.
    """

    name: str
    state_dim: int
    action_count: int
    step: Callable
    reset: Callable
    max_steps: int
    solve_window: int
    solve_threshold: float
    state_scale: tuple
    q_scale: float


CART_POLE = EnvSpec(
    name="cart_pole", state_dim=4, action_count=2,
    step=cart_pole_step, reset=cart_pole_reset,
    max_steps=200, solve_window=100, solve_threshold=195.0,
    state_scale=(1.0, 1.0, 0.1, 1.0), q_scale=10.0,
)

MOUNTAIN_CAR = EnvSpec(
    name="mountain_car", state_dim=2, action_count=3,
    step=mountain_car_step, reset=mountain_car_reset,
    max_steps=200, solve_window=100, solve_threshold=-110.0,
    state_scale=(0.5, 0.04), q_scale=10.0,
)

ENVIRONMENTS = {"cart_pole": CART_POLE, "mountain_car": MOUNTAIN_CAR}


def env_by_name(name: str) -> EnvSpec:
    try:
        return ENVIRONMENTS[name.replace("-", "_")]
    except KeyError:
        raise ConfigError(f"unknown task {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


def env_step(spec: EnvSpec, state, action: int) -> Transition:
    return spec.step(state, action)


# -- agent -----------------------------------------------------------------------


@dataclass
class AgentConfig:
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.05
    q_init: float = 0.0
    delta: float = 0.1
    novelty_p: float = 0.999
    v_min: int = 5
    sp_min: float = 3.0
    pruning_enabled: bool = True
    max_episodes: int = 1000
    state_scale: tuple | None = None
    q_scale: float | None = None
    novelty_gate: bool = True
    sp_cap: float | None = None
    max_components: int = 499

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        for name in ("epsilon_start", "epsilon_min"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if not 0.0 < self.novelty_p <= 1.0:
            raise ConfigError("novelty_p must lie in (0, 1]")
        if self.sp_cap is not None and not self.sp_cap >= 1.0:
            raise ConfigError("sp_cap must be at least 1")
        if self.max_components < 1:
            raise ConfigError("max_components must be positive")
        if self.max_episodes < 1:
            raise ConfigError("max_episodes must be positive")

    def epsilon(self, episode: int) -> float:
        """Exploration rate used during ``episode`` (0-based)."""
        return max(self.epsilon_min, self.epsilon_start * self.epsilon_decay**episode)


#: Per-task overrides of the generic :class:`AgentConfig` defaults.
TASK_DEFAULTS: dict[str, dict] = {
    # optimistic start with wide state scales; pruning would discard the
    # rarely visited but informative failure states
    "cart_pole": {
        "q_init": 100.0,
        "state_scale": (2.4, 3.0, 0.21, 3.0),
        "q_scale": 30.0,
        "pruning_enabled": False,
    },
    # coarse components, a tight novelty gate and a short memory make the
    # greedy policy seek unvisited states, which builds momentum
    "mountain_car": {
        "delta": 0.4,
        "novelty_p": 0.9,
        "sp_cap": 20.0,
        "epsilon_start": 0.0,
        "epsilon_min": 0.0,
    },
}


def default_agent_config(spec: EnvSpec, **overrides) -> AgentConfig:
    """The shipped configuration for ``spec``, with keyword overrides."""
    unknown = set(overrides) - {f.name for f in fields(AgentConfig)}
    if unknown:
        raise ConfigError(f"unknown agent settings: {sorted(unknown)}")
    kw = dict(TASK_DEFAULTS.get(spec.name, {}))
    kw.update(overrides)
    return AgentConfig(**kw)


class QAgent:
    """epsilon-greedy Q-learner over a precision-form mixture."""

    def __init__(self, spec: EnvSpec, config: AgentConfig | None = None):
        self.spec = spec
        self.config = config or AgentConfig()
        S, A = spec.state_dim, spec.action_count
        scale = np.concatenate([
            np.asarray(self.config.state_scale or spec.state_scale, dtype=np.float64),
            np.full(A, self.config.q_scale or spec.q_scale),
        ])
        if scale.size != S + A:
            raise ConfigError(f"state_scale needs {S} entries")
        self.mixture = Mixture(LearnerConfig(
            dataset_std=scale,
            delta=self.config.delta,
            beta=1.0 - self.config.novelty_p,
            v_min=self.config.v_min,
            sp_min=self.config.sp_min,
            pruning_enabled=self.config.pruning_enabled,
            representation=Representation.PRECISION,
        ))
        self.partition = Partition(tuple(range(S)), tuple(range(S, S + A)))
        self.max_components = 0
        # states this far from every component count as unvisited
        gated = self.config.novelty_gate and self.config.novelty_p < 1.0
        self.gate = chi2_quantile(S, self.config.novelty_p) if gated else math.inf

    def q_values(self, state) -> np.ndarray:
        """Predicted action values; ``q_init`` for unvisited states."""
        if self.mixture.n_components == 0:
            return np.full(self.spec.action_count, float(self.config.q_init))
        x = np.asarray(state, dtype=np.float64).reshape(1, -1)
        means, _, _, d2 = predict_many_with_distance(self.mixture, self.partition, x)
        if d2[0] > self.gate:
            return np.full(self.spec.action_count, float(self.config.q_init))
        return means[0]

    def greedy(self, state) -> int:
        return int(np.argmax(self.q_values(state)))

    def target(self, tr: Transition, q_state=None) -> np.ndarray:
        """Joint training vector for ``tr``: current predictions with the
        taken action's slot replaced by the TD target."""
        q = self.q_values(tr.state) if q_state is None else np.array(q_state, dtype=np.float64)
        y = tr.reward
        if not tr.terminal and self.config.gamma > 0.0:
            y += self.config.gamma * float(np.max(self.q_values(tr.next_state)))
        q[tr.action] = y
        return np.concatenate([np.asarray(tr.state, dtype=np.float64), q])

    def observe(self, tr: Transition, q_state=None) -> None:
        """One Q-learning update from transition ``tr``."""
        if not 0 <= tr.action < self.spec.action_count:
            raise ValueError(f"action {tr.action} out of range")
        x = self.target(tr, q_state)
        learn(self.mixture, x.reshape(1, -1))
        if self.config.sp_cap is not None:
            # a capped accumulator keeps the learning rate above 1/sp_cap, so
            # old bootstrapped targets are forgotten
            np.minimum(self.mixture.sps, self.config.sp_cap, out=self.mixture.sps)
            renormalize_priors(self.mixture)
        if self.mixture.n_components > self.config.max_components:
            evict_weakest(self.mixture)
        self.max_components = max(self.max_components, self.mixture.n_components)


# -- episodes --------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    reward: float
    epsilon: float
    components: int


@dataclass
class TaskResult:
    """Outcome of :func:`run_task`.

    ``episodes_to_solve`` counts the episodes run when the rolling-window
    criterion first held (None when the cap was hit first).
    ``goal_episode`` is the first episode that ended in a terminal success
    state (mountain car only; None otherwise).
    """

    task: str
    seed: int
    episodes_to_solve: int | None
    goal_episode: int | None
    records: list[EpisodeRecord] = field(default_factory=list)
    max_components: int = 0

    @property
    def solved(self) -> bool:
        return self.episodes_to_solve is not None

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])


def _argmax_random_tie(q: np.ndarray, rng: np.random.Generator) -> int:
    best = np.flatnonzero(q == q.max())
    return int(best[0]) if best.size == 1 else int(rng.choice(best))


def _reached_goal(spec: EnvSpec, tr: Transition) -> bool:
    return spec.name == "mountain_car" and tr.terminal


def run_task(spec: EnvSpec, agent_config: AgentConfig | None = None, seed: int = 0,
             *, policy: str = "agent", stop_when_solved: bool = True,
             stop_at_goal: bool = False) -> TaskResult:
    """Run episodes until the solve criterion holds or the cap is reached.

    ``policy="random"`` runs the uniform random-action baseline instead of
    the agent (no learning).  ``stop_at_goal`` also ends the run after the
    first episode that reaches the goal.
    """
    cfg = agent_config or AgentConfig()
    if policy not in ("agent", "random"):
        raise ConfigError(f"policy must be 'agent' or 'random', got {policy!r}")
    rng = np.random.default_rng(seed)
    agent = QAgent(spec, cfg) if policy == "agent" else None
    A = spec.action_count
    window = []
    window_sum = 0.0
    result = TaskResult(spec.name, int(seed), None, None)
    for ep in range(cfg.max_episodes):
        eps = cfg.epsilon(ep) if agent is not None else 1.0
        state = spec.reset(rng)
        total = 0.0
        for _ in range(spec.max_steps):
            if agent is None:
                action = int(rng.integers(A))
                q_state = None
            else:
                q_state = agent.q_values(state)
                explore = rng.random() < eps
                action = int(rng.integers(A)) if explore else _argmax_random_tie(q_state, rng)
            tr = spec.step(state, action)
            total += tr.reward
            if agent is not None:
                agent.observe(tr, q_state)
            if result.goal_episode is None and _reached_goal(spec, tr):
                result.goal_episode = ep + 1
            state = tr.next_state
            if tr.terminal:
                break
        K = agent.mixture.n_components if agent is not None else 0
        result.records.append(EpisodeRecord(ep + 1, total, eps, K))
        window.append(total)
        window_sum += total
        if len(window) > spec.solve_window:
            window_sum -= window.pop(0)
        if (
            result.episodes_to_solve is None
            and len(window) == spec.solve_window
            and window_sum / spec.solve_window >= spec.solve_threshold
        ):
            result.episodes_to_solve = ep + 1
            if stop_when_solved:
                break
        if stop_at_goal and result.goal_episode is not None:
            break
    if agent is not None:
        result.max_components = agent.max_components
    return result


def write_records(records, fh=None) -> str | None:
    """Per-episode CSV: ``episode,reward,epsilon,components``."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("episode", "reward", "epsilon", "components"))
    for r in records:
        w.writerow((r.episode, repr(float(r.reward)), repr(float(r.epsilon)), r.components))
    return buf.getvalue() if fh is None else None
