"""Offspring generators: iso+line genetic variation and policy-gradient variation."""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, EmptyBufferError
from .nn import AdamState, adam_step
from .rl import check_mode, deterministic_policy_gradient

logger = logging.getLogger(__name__)


@dataclass
class GaParams:
    sigma1: float = 0.005
    sigma2: float = 0.05

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError('GA sigmas must be non-negative')


@dataclass
class PgParams:
    gradient_steps: int = 30
    batch_size: int = 100
    policy_lr: float = 5e-3

    def __post_init__(self):
        if self.gradient_steps < 0:
            raise ValueError('gradient_steps must be non-negative')
        if self.batch_size < 1:
            raise ValueError('batch_size must be positive')


def variation_ga(parents, mates, params, rng):
    """Iso+line offspring ``x1 + s1 * N(0, I) + s2 * N(0, 1) * (x2 - x1)``, one row per pair."""
    x1 = np.atleast_2d(np.asarray(parents, dtype=np.float64))
    x2 = np.atleast_2d(np.asarray(mates, dtype=np.float64))
    if x1.shape != x2.shape:
        raise DimensionMismatchError(f'parent shapes differ: {x1.shape} vs {x2.shape}')
    iso = rng.normal(size=x1.shape)
    line = rng.normal(size=(x1.shape[0], 1))
    return x1 + params.sigma1 * iso + params.sigma2 * line * (x2 - x1)


def variation_pg(parents, arch, ac, buffer, params, conditioned, rng, parent_descriptors=None):
    """``m`` Adam ascent steps per parent on the first critic.

    All parents move in lockstep; each draws its own batch of ``N`` states
    and keeps its own Adam moments. Conditioned mode fixes the critic's
    descriptor input to the parent's own descriptor. Parents are not
    modified.
    """
    check_mode(ac, conditioned)
    parents = np.atleast_2d(np.asarray(parents, dtype=np.float64))
    offspring = parents.copy()
    count = offspring.shape[0]
    if count == 0 or params.gradient_steps == 0:
        return offspring
    if len(buffer) == 0:
        raise EmptyBufferError('policy-gradient variation needs a non-empty replay buffer')

    descriptors = None
    if conditioned:
        if parent_descriptors is None or len(parent_descriptors) != count:
            raise DimensionMismatchError('conditioned variation needs one descriptor per parent')
        descriptors = np.asarray(parent_descriptors, dtype=np.float64)[:, None, :]

    critic = ac.critic1
    optimizer = AdamState.zeros_like(offspring, params.policy_lr)
    for _ in range(params.gradient_steps):
        batch = buffer.sample(count * params.batch_size, rng)
        states = batch.states.reshape(count, params.batch_size, -1)
        grad = deterministic_policy_gradient(
            arch, offspring, states, critic.arch, critic.params, states, descriptors
        )
        offspring, optimizer = adam_step(optimizer, offspring, -grad)
    return offspring


def discard_non_finite(offspring):
    """Drop offspring rows holding NaN or inf; returns ``(kept, mask)``."""
    offspring = np.atleast_2d(offspring)
    mask = np.isfinite(offspring).all(axis=1)
    dropped = int((~mask).sum())
    if dropped:
        logger.warning('discarded %d offspring with non-finite parameters', dropped)
    return offspring[mask], mask
