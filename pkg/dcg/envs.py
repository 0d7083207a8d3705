"""Deterministic fixed-horizon environments and episode rollouts.

States are batched: every array carries a leading batch axis so a whole
population steps in lockstep. Rewards are ``1 + c_e * (1 - energy)`` with
energy the squared action norm normalised to ``[0, 1]``, so every reward
lies in ``[1, 1 + c_e]``.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, EpisodeFinishedError, IncompleteEpisodeError
from .rl import Transitions

POINT_OMNI = 'point_omni'
POINT_TRAP_OMNI = 'point_trap_omni'
DUTY_CYCLE_UNI = 'duty_cycle_uni'
ENV_NAMES = (POINT_OMNI, POINT_TRAP_OMNI, DUTY_CYCLE_UNI)

DEFAULT_EPISODE_LENGTH = {POINT_OMNI: 100, POINT_TRAP_OMNI: 100, DUTY_CYCLE_UNI: 200}

# U-shaped trap around the start position, open towards -x.
TRAP_WALLS = (
    (0.62, 0.35, 0.62, 0.65),
    (0.45, 0.35, 0.62, 0.35),
    (0.45, 0.65, 0.62, 0.65),
)

# Fraction of the motion kept short of the first wall hit.
WALL_MARGIN = 1e-3

START_POSITION = (0.5, 0.5)


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    episode_length: int
    action_bound: float = 1.0
    descriptor_dim: int = 2
    walls: tuple = ()
    dt: float = 0.01
    energy_coef: float = 0.5
    forward_reward_weight: float = 0.0

    def __post_init__(self):
        if self.name not in ENV_NAMES:
            raise ValueError(f'unknown environment {self.name!r}')
        if self.episode_length < 1:
            raise ValueError('episode_length must be at least 1')
        if not self.action_bound > 0:
            raise ValueError('action_bound must be positive')
        if self.energy_coef < 0 or self.forward_reward_weight < 0:
            raise ValueError('reward coefficients must be non-negative')

    @property
    def omnidirectional(self):
        return self.name in (POINT_OMNI, POINT_TRAP_OMNI)

    @property
    def max_reward(self):
        return 1.0 + self.energy_coef + self.forward_reward_weight * self.action_bound


def make_env_spec(name, episode_length=None, action_bound=1.0, dt=0.01,
                  energy_coef=0.5, forward_reward_weight=0.0):
    if name not in ENV_NAMES:
        raise ValueError(f'unknown environment {name!r}')
    return EnvSpec(
        name=name,
        state_dim=3 if name != DUTY_CYCLE_UNI else 4,
        action_dim=2,
        episode_length=episode_length or DEFAULT_EPISODE_LENGTH[name],
        action_bound=action_bound,
        descriptor_dim=2,
        walls=TRAP_WALLS if name == POINT_TRAP_OMNI else (),
        dt=dt,
        energy_coef=energy_coef,
        forward_reward_weight=forward_reward_weight if name == DUTY_CYCLE_UNI else 0.0,
    )


@dataclass
class EnvState:
    observation: np.ndarray
    position: np.ndarray
    duty: np.ndarray
    step_index: int = 0

    @property
    def batch_size(self):
        return self.observation.shape[0]


def _observe(spec, position, duty, step_index):
    horizon = spec.episode_length
    time = np.full((position.shape[0], 1), step_index / horizon)
    if spec.omnidirectional:
        return np.concatenate([position, time], axis=1)
    progress = position / (horizon * spec.action_bound)
    return np.concatenate([progress, duty / horizon, time], axis=1)


def env_reset(spec, batch_size=1):
    if spec.omnidirectional:
        position = np.tile(np.asarray(START_POSITION, dtype=np.float64), (batch_size, 1))
    else:
        position = np.zeros((batch_size, 1))
    duty = np.zeros((batch_size, 2))
    return EnvState(_observe(spec, position, duty, 0), position, duty, 0)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def resolve_walls(start, end, walls):
    """Stop each motion ``start -> end`` just short of the first wall it crosses."""
    motion = end - start
    t_hit = np.full(start.shape[0], np.inf)
    for x1, y1, x2, y2 in walls:
        origin = np.array([x1, y1])
        segment = np.array([x2 - x1, y2 - y1])
        denom = _cross(motion, segment)
        offset = origin - start
        with np.errstate(divide='ignore', invalid='ignore'):
            t = _cross(offset, segment) / denom
            u = _cross(offset, motion) / denom
        hit = (denom != 0.0) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
        t_hit = np.where(hit, np.minimum(t_hit, t), t_hit)
    blocked = np.isfinite(t_hit)
    t_stop = np.clip(np.where(blocked, t_hit - WALL_MARGIN, 1.0), 0.0, 1.0)
    return np.where(blocked[:, None], start + t_stop[:, None] * motion, end)


def env_step(spec, state, action):
    """Advance every episode in the batch by one step.

    Returns ``(state, reward)``; ``reward`` is a float for a single 1-D
    action and an array of shape ``(batch,)`` otherwise.
    """
    if state.step_index >= spec.episode_length:
        raise EpisodeFinishedError(
            f'episode already ran its {spec.episode_length} steps'
        )
    a = np.asarray(action, dtype=np.float64)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape != (state.batch_size, spec.action_dim):
        raise DimensionMismatchError(
            f'expected actions of shape {(state.batch_size, spec.action_dim)}, got {a.shape}'
        )
    bound = spec.action_bound
    a = np.clip(a, -bound, bound)
    energy = (a ** 2).sum(axis=1) / (bound ** 2 * spec.action_dim)
    reward = 1.0 + spec.energy_coef * (1.0 - energy)

    duty = state.duty
    if spec.omnidirectional:
        target = np.clip(state.position + spec.dt * a, 0.0, 1.0)
        position = resolve_walls(state.position, target, spec.walls) if spec.walls else target
    else:
        progress = np.maximum(0.0, a[:, 0] + a[:, 1]) / 2.0
        position = state.position + progress[:, None]
        duty = duty + (a > 0.0)
        reward = reward + spec.forward_reward_weight * progress

    step_index = state.step_index + 1
    next_state = EnvState(_observe(spec, position, duty, step_index), position, duty, step_index)
    return next_state, (float(reward[0]) if single else reward)


def extract_descriptor(spec, final_state):
    """Final descriptors, shape ``(batch, descriptor_dim)``."""
    if final_state.step_index < spec.episode_length:
        raise IncompleteEpisodeError(
            f'descriptor requested after {final_state.step_index} of {spec.episode_length} steps'
        )
    if spec.omnidirectional:
        return np.clip(final_state.position, 0.0, 1.0)
    return final_state.duty / spec.episode_length


@dataclass
class EvalResult:
    fitness: float
    descriptor: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray

    def transitions(self, target_descriptor=None):
        """Transitions tagged with the observed descriptor and ``target_descriptor`` (default: observed)."""
        target = self.descriptor if target_descriptor is None else np.asarray(target_descriptor)
        steps = len(self.rewards)
        return Transitions(
            states=self.observations,
            actions=self.actions,
            rewards=self.rewards,
            next_states=self.next_observations,
            dones=np.zeros(steps, dtype=bool),
            descriptors=np.tile(self.descriptor, (steps, 1)),
            target_descriptors=np.tile(target, (steps, 1)),
        )


@dataclass
class BatchEvalResult:
    fitness: np.ndarray
    descriptors: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray

    def __len__(self):
        return len(self.fitness)

    def episode(self, i):
        return EvalResult(
            fitness=float(self.fitness[i]),
            descriptor=self.descriptors[i],
            observations=self.observations[i],
            actions=self.actions[i],
            rewards=self.rewards[i],
            next_observations=self.next_observations[i],
        )

    def transitions(self, target_descriptors=None):
        """Flattened transitions of every episode, in episode order."""
        targets = self.descriptors if target_descriptors is None else np.asarray(target_descriptors)
        if len(self) == 0:
            return Transitions.empty(
                self.observations.shape[-1], self.actions.shape[-1], self.descriptors.shape[-1]
            )
        steps = self.rewards.shape[1]
        n = len(self) * steps

        def flat(array):
            return array.reshape(n, *array.shape[2:])

        return Transitions(
            states=flat(self.observations),
            actions=flat(self.actions),
            rewards=flat(self.rewards),
            next_states=flat(self.next_observations),
            dones=np.zeros(n, dtype=bool),
            descriptors=np.repeat(self.descriptors, steps, axis=0),
            target_descriptors=np.repeat(targets, steps, axis=0),
        )


def rollout_batch(spec, policy, batch_size):
    """Run ``batch_size`` episodes in lockstep.

    ``policy`` maps observations ``(batch, state_dim)`` to actions
    ``(batch, action_dim)``; stored actions are the clipped ones applied.
    """
    horizon = spec.episode_length
    state = env_reset(spec, batch_size)
    observations = np.empty((batch_size, horizon, spec.state_dim))
    actions = np.empty((batch_size, horizon, spec.action_dim))
    rewards = np.empty((batch_size, horizon))
    next_observations = np.empty((batch_size, horizon, spec.state_dim))
    for t in range(horizon):
        observations[:, t] = state.observation
        a = np.asarray(policy(state.observation), dtype=np.float64)
        if a.shape != (batch_size, spec.action_dim):
            raise DimensionMismatchError(
                f'policy returned shape {a.shape}, expected {(batch_size, spec.action_dim)}'
            )
        actions[:, t] = np.clip(a, -spec.action_bound, spec.action_bound)
        state, rewards[:, t] = env_step(spec, state, actions[:, t])
        next_observations[:, t] = state.observation
    return BatchEvalResult(
        fitness=rewards.sum(axis=1),
        descriptors=extract_descriptor(spec, state),
        observations=observations,
        actions=actions,
        rewards=rewards,
        next_observations=next_observations,
    )


def rollout(spec, policy):
    """Single episode for ``policy``: a callable mapping one state to one action."""

    def batched(observations):
        return np.asarray(policy(observations[0]), dtype=np.float64)[None, :]

    return rollout_batch(spec, batched, 1).episode(0)
