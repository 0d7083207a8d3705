"""Replay buffer, similarity kernel and the TD3 actor-critic trainer.

The trainer runs in two modes. Standard mode is plain TD3 over
``Q(s, a)`` and ``pi(s)``. Conditioned mode feeds the target descriptor
``d'`` of every transition to the actor and both critics (appended to
their inputs) and scales rewards by ``S(d, d')`` inside the critic target.
"""
import logging
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import EmptyBufferError
from .nn import (
    IDENTITY, TANH_SCALED, AdamState, MlpArch, adam_step, input_gradient,
    input_weight_mask, mlp_backward, mlp_forward, mlp_init,
)

logger = logging.getLogger(__name__)


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    descriptor: np.ndarray
    target_descriptor: np.ndarray


@dataclass
class Transitions:
    """Column-wise batch of transitions ``(s, a, r, s', done, d, d')``."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    descriptors: np.ndarray
    target_descriptors: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return Transition(
                state=self.states[key],
                action=self.actions[key],
                reward=float(self.rewards[key]),
                next_state=self.next_states[key],
                done=bool(self.dones[key]),
                descriptor=self.descriptors[key],
                target_descriptor=self.target_descriptors[key],
            )
        return Transitions(**{f.name: getattr(self, f.name)[key] for f in fields(self)})

    @classmethod
    def empty(cls, state_dim, action_dim, descriptor_dim):
        return cls(
            states=np.empty((0, state_dim)),
            actions=np.empty((0, action_dim)),
            rewards=np.empty(0),
            next_states=np.empty((0, state_dim)),
            dones=np.empty(0, dtype=bool),
            descriptors=np.empty((0, descriptor_dim)),
            target_descriptors=np.empty((0, descriptor_dim)),
        )

    def with_targets(self, target_descriptors):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values['target_descriptors'] = np.broadcast_to(
            np.asarray(target_descriptors, dtype=np.float64), self.descriptors.shape
        ).copy()
        return Transitions(**values)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError('replay buffer capacity must be positive')
        self.capacity = int(capacity)
        self.size = 0
        self._next = 0
        self._storage = None

    def __len__(self):
        return self.size

    def _allocate(self, transitions):
        self._storage = {
            f.name: np.empty((self.capacity,) + getattr(transitions, f.name).shape[1:],
                             dtype=getattr(transitions, f.name).dtype)
            for f in fields(Transitions)
        }

    def insert(self, transitions):
        n = len(transitions)
        if n == 0:
            return
        if self._storage is None:
            self._allocate(transitions)
        if n > self.capacity:
            transitions = transitions[n - self.capacity:]
            n = self.capacity
        slots = (self._next + np.arange(n)) % self.capacity
        for name, column in self._storage.items():
            column[slots] = getattr(transitions, name)
        self._next = (self._next + n) % self.capacity
        self.size = min(self.size + n, self.capacity)

    def sample(self, n, rng):
        if self.size == 0:
            raise EmptyBufferError('cannot sample from an empty replay buffer')
        picks = rng.integers(self.size, size=n)
        return Transitions(**{name: column[picks] for name, column in self._storage.items()})

    def contents(self):
        """Stored transitions, oldest first."""
        if self._storage is None:
            raise EmptyBufferError('replay buffer holds no transitions')
        if self.size < self.capacity:
            order = np.arange(self.size)
        else:
            order = (self._next + np.arange(self.capacity)) % self.capacity
        return Transitions(**{name: column[order] for name, column in self._storage.items()})


def buffer_insert(buffer, transitions):
    buffer.insert(transitions)


def buffer_sample(buffer, n, rng):
    return buffer.sample(n, rng)


def similarity(d, d_prime, lengthscale):
    """``exp(-||d - d'|| / l)`` over the last axis."""
    if not lengthscale > 0:
        raise ValueError('lengthscale must be positive')
    diff = np.asarray(d, dtype=np.float64) - np.asarray(d_prime, dtype=np.float64)
    value = np.exp(-np.linalg.norm(diff, axis=-1) / lengthscale)
    return float(value) if np.ndim(value) == 0 else value


@dataclass
class Td3Config:
    gamma: float = 0.99
    actor_delay: int = 2
    tau: float = 0.005
    smoothing_noise_sigma: float = 0.2
    smoothing_noise_clip: float = 0.5
    batch_size: int = 100
    training_steps: int = 300
    lengthscale: float = 0.008
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    buffer_capacity: int = 1_000_000

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError('gamma must lie in [0, 1]')
        if not 0 < self.tau <= 1:
            raise ValueError('tau must lie in (0, 1]')
        if not self.lengthscale > 0:
            raise ValueError('lengthscale must be positive')
        if self.smoothing_noise_clip < 0:
            raise ValueError('smoothing_noise_clip must be non-negative')
        if self.actor_delay < 1:
            raise ValueError('actor_delay must be at least 1')


@dataclass
class Network:
    arch: MlpArch
    params: np.ndarray
    target: np.ndarray
    optimizer: AdamState
    frozen: np.ndarray | None = None

    @classmethod
    def create(cls, arch, seed, learning_rate, frozen=None):
        params = mlp_init(arch, seed)
        if frozen is not None:
            params[frozen] = 0.0
        return cls(arch, params, params.copy(), AdamState.zeros_like(params, learning_rate), frozen)

    def descend(self, grad):
        if self.frozen is not None:
            grad = np.where(self.frozen, 0.0, grad)
        self.params, self.optimizer = adam_step(self.optimizer, self.params, grad)


@dataclass
class ActorCritic:
    actor: Network
    critic1: Network
    critic2: Network
    state_dim: int
    action_dim: int
    descriptor_dim: int
    action_bound: float
    conditioned: bool

    @classmethod
    def create(cls, state_dim, action_dim, descriptor_dim, cfg, actor_hidden=(256, 256),
               critic_hidden=(256, 256), action_bound=1.0, conditioned=True,
               unconditioned_actor=False, seed=0):
        """Build actor, twin critics and their targets.

        Conditioned networks take the descriptor as extra trailing inputs.
        ``unconditioned_actor`` keeps the actor's descriptor input weights
        frozen at zero so the actor ignores the descriptor.
        """
        extra = descriptor_dim if conditioned else 0
        actor_arch = MlpArch((state_dim + extra, *actor_hidden, action_dim), TANH_SCALED, action_bound)
        critic_arch = MlpArch((state_dim + action_dim + extra, *critic_hidden, 1), IDENTITY)
        frozen = None
        if conditioned and unconditioned_actor:
            frozen = input_weight_mask(actor_arch, range(state_dim, state_dim + extra))
        actor_seed, critic1_seed, critic2_seed = np.random.SeedSequence(seed).generate_state(3)
        return cls(
            actor=Network.create(actor_arch, actor_seed, cfg.actor_lr, frozen),
            critic1=Network.create(critic_arch, critic1_seed, cfg.critic_lr),
            critic2=Network.create(critic_arch, critic2_seed, cfg.critic_lr),
            state_dim=state_dim,
            action_dim=action_dim,
            descriptor_dim=descriptor_dim,
            action_bound=float(action_bound),
            conditioned=conditioned,
        )

    @property
    def networks(self):
        return (self.actor, self.critic1, self.critic2)

    def actor_inputs(self, states, descriptors=None):
        if not self.conditioned:
            return states
        descriptors = np.broadcast_to(descriptors, states.shape[:-1] + (self.descriptor_dim,))
        return np.concatenate([states, descriptors], axis=-1)

    def critic_inputs(self, states, actions, descriptors=None):
        parts = [states, actions]
        if self.conditioned:
            parts.append(np.broadcast_to(descriptors, states.shape[:-1] + (self.descriptor_dim,)))
        return np.concatenate(parts, axis=-1)

    def act(self, states, descriptors=None, target=False):
        actor = self.actor
        return mlp_forward(actor.arch, actor.target if target else actor.params,
                           self.actor_inputs(states, descriptors))

    def q_value(self, critic, states, actions, descriptors=None, target=False):
        inputs = self.critic_inputs(states, actions, descriptors)
        return mlp_forward(critic.arch, critic.target if target else critic.params, inputs)[..., 0]

    def policy(self, descriptors=None):
        """Batched policy callable, conditioned row-wise on ``descriptors``."""

        def act(observations):
            return self.act(observations, descriptors)

        return act


def check_mode(ac, conditioned):
    if conditioned and not ac.conditioned:
        raise ValueError('conditioned update requested for an unconditioned actor-critic')
    if not conditioned and ac.conditioned:
        raise ValueError('standard update requested for a conditioned actor-critic')


def critic_target(batch, ac, cfg, conditioned, rng):
    """TD3 regression targets; conditioned mode scales rewards by ``S(d, d')``."""
    check_mode(ac, conditioned)
    bound = ac.action_bound
    noise = rng.normal(0.0, cfg.smoothing_noise_sigma, size=batch.actions.shape)
    noise = np.clip(noise, -cfg.smoothing_noise_clip, cfg.smoothing_noise_clip)
    d_prime = batch.target_descriptors if conditioned else None
    next_actions = np.clip(ac.act(batch.next_states, d_prime, target=True) + noise, -bound, bound)
    bootstrap = np.minimum(
        ac.q_value(ac.critic1, batch.next_states, next_actions, d_prime, target=True),
        ac.q_value(ac.critic2, batch.next_states, next_actions, d_prime, target=True),
    )
    rewards = batch.rewards
    if conditioned:
        rewards = similarity(batch.descriptors, batch.target_descriptors, cfg.lengthscale) * rewards
    return rewards + cfg.gamma * np.where(batch.dones, 0.0, bootstrap)


def critic_update(ac, batch, targets):
    """One Adam step on the mean squared error of each critic."""
    d_prime = batch.target_descriptors if ac.conditioned else None
    inputs = ac.critic_inputs(batch.states, batch.actions, d_prime)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(targets)
    for critic in (ac.critic1, ac.critic2):
        predictions = mlp_forward(critic.arch, critic.params, inputs)[:, 0]
        output_grad = (2.0 / n) * (predictions - targets)
        grad, _ = mlp_backward(critic.arch, critic.params, inputs, output_grad[:, None])
        critic.descend(grad)


def deterministic_policy_gradient(actor_arch, actor_params, actor_inputs,
                                  critic_arch, critic_params, states, descriptors=None):
    """``(1/N) sum grad_a Q(s, a | d) grad_params pi(x)`` at ``a = pi(x)``.

    ``actor_inputs`` and ``states`` share their leading shape; for a stack of
    actors the gradient has one row per actor. ``descriptors`` conditions
    the critic when given.
    """
    actions = mlp_forward(actor_arch, actor_params, actor_inputs)
    parts = [np.broadcast_to(states, actions.shape[:-1] + states.shape[-1:]), actions]
    if descriptors is not None:
        parts.append(np.broadcast_to(descriptors, actions.shape[:-1] + descriptors.shape[-1:]))
    critic_inputs = np.concatenate(parts, axis=-1)
    n = actions.shape[-2]
    dq = input_gradient(critic_arch, critic_params, critic_inputs,
                        np.full(actions.shape[:-1] + (1,), 1.0 / n))
    state_dim = states.shape[-1]
    dq_da = dq[..., state_dim:state_dim + actions.shape[-1]]
    grad, _ = mlp_backward(actor_arch, actor_params, actor_inputs, dq_da)
    return grad


def actor_dpg_update(ac, batch, conditioned):
    """One Adam ascent step of the actor on ``Q1(s, pi(s | d') | d')``."""
    check_mode(ac, conditioned)
    d_prime = batch.target_descriptors if conditioned else None
    grad = deterministic_policy_gradient(
        ac.actor.arch, ac.actor.params, ac.actor_inputs(batch.states, d_prime),
        ac.critic1.arch, ac.critic1.params, batch.states, d_prime,
    )
    ac.actor.descend(-grad)
    return grad


def soft_update(ac, tau):
    if not 0 < tau <= 1:
        raise ValueError('tau must lie in (0, 1]')
    for network in ac.networks:
        network.target = tau * network.params + (1.0 - tau) * network.target


def train_actor_critic(ac, buffer, cfg, conditioned, rng):
    """``n`` TD3 iterations; actor and targets move every ``actor_delay`` steps."""
    if len(buffer) == 0:
        raise EmptyBufferError('actor-critic training needs a non-empty replay buffer')
    actor_updates = 0
    for step in range(1, cfg.training_steps + 1):
        batch = buffer.sample(cfg.batch_size, rng)
        targets = critic_target(batch, ac, cfg, conditioned, rng)
        critic_update(ac, batch, targets)
        if step % cfg.actor_delay == 0:
            actor_dpg_update(ac, batch, conditioned)
            soft_update(ac, cfg.tau)
            actor_updates += 1
    logger.debug('trained actor-critic for %d steps (%d actor updates)',
                 cfg.training_steps, actor_updates)
    return actor_updates
