"""Main loops of MAP-Elites, PGA-MAP-Elites and DCG-MAP-Elites.

Every iteration runs train -> select -> vary -> evaluate -> add in that
order. The initial ``b`` random solutions are not charged to the
evaluation budget.
"""
import collections
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .archive import AddOutcome, Archive
from .envs import POINT_OMNI, EnvSpec, make_env_spec, rollout_batch
from .exceptions import ConfigError
from .nn import TANH_SCALED, MlpArch, mlp_init, population_policy
from .rl import ActorCritic, ReplayBuffer, Td3Config, train_actor_critic
from .variation import GaParams, PgParams, discard_non_finite, variation_ga, variation_pg

logger = logging.getLogger(__name__)

MAP_ELITES = 'map_elites'
PGA_ME = 'pga_me'
DCG_ME = 'dcg_me'
ALGORITHMS = (MAP_ELITES, PGA_ME, DCG_ME)

NO_ABLATION = 'none'
NO_ACTOR_EVAL = 'no_actor_eval'
SYNTHETIC_NEGATIVES = 'synthetic_negatives'
UNCONDITIONED_ACTOR = 'unconditioned_actor'
ABLATIONS = (NO_ABLATION, NO_ACTOR_EVAL, SYNTHETIC_NEGATIVES, UNCONDITIONED_ACTOR)


@dataclass
class RunConfig:
    algorithm: str = DCG_ME
    env: EnvSpec = field(default_factory=lambda: make_env_spec(POINT_OMNI))
    eval_budget: int = 51_200
    batch_size: int = 256
    ga_count: int = 128
    descriptor_noise_sigma: float = 0.0004
    td3: Td3Config = field(default_factory=Td3Config)
    ga: GaParams = field(default_factory=GaParams)
    pg: PgParams = field(default_factory=PgParams)
    seed: int = 0
    ablation: str = NO_ABLATION
    num_centroids: int = 1024
    policy_hidden: tuple = (128, 128)
    actor_hidden: tuple = (256, 256)
    critic_hidden: tuple = (256, 256)
    count_actor_evaluations: bool = False

    def __post_init__(self):
        errors = {}
        if self.algorithm not in ALGORITHMS:
            errors['algorithm'] = [f'unknown algorithm {self.algorithm!r}']
        if self.ablation not in ABLATIONS:
            errors['ablation'] = [f'unknown ablation {self.ablation!r}']
        elif self.ablation != NO_ABLATION and self.algorithm != DCG_ME:
            errors['ablation'] = [f'ablation {self.ablation!r} requires algorithm dcg_me']
        if self.batch_size < 1:
            errors['batch_size'] = ['b must be at least 1']
        if self.ga_count < 0 or self.ga_count > self.batch_size:
            errors['ga_count'] = [
                f'constraint g ≤ b violated: g={self.ga_count}, b={self.batch_size}'
            ]
        if self.eval_budget < self.batch_size:
            errors['eval_budget'] = [
                f'constraint I ≥ b violated: I={self.eval_budget}, b={self.batch_size}'
            ]
        if self.descriptor_noise_sigma < 0:
            errors['descriptor_noise_sigma'] = ['σ_d must be non-negative']
        if self.num_centroids < 1:
            errors['num_centroids'] = ['at least one centroid is required']
        if errors:
            raise ConfigError(errors)

    @property
    def policy_arch(self):
        env = self.env
        return MlpArch((env.state_dim, *self.policy_hidden, env.action_dim),
                       TANH_SCALED, env.action_bound)


@dataclass
class ExperimentConfig(RunConfig):
    """A RunConfig plus the replication and output settings of a batch experiment."""
    replications: int = 1
    output_dir: str = 'runs'
    log_every: int = 1
    checkpoint_every: int = 0
    reevaluations: int = 1

    def __post_init__(self):
        super().__post_init__()
        errors = {}
        if self.replications < 1:
            errors['replications'] = ['replications must be at least 1']
        if self.log_every < 1:
            errors['log_every'] = ['log_every must be at least 1']
        if self.checkpoint_every < 0:
            errors['checkpoint_every'] = ['checkpoint_every must be non-negative']
        if self.reevaluations < 1:
            errors['reevaluations'] = ['reevaluations must be at least 1']
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class AblationSwitches:
    actor_evaluation: bool = False
    synthetic_negatives: bool = False
    unconditioned_actor: bool = False


def apply_ablation(config):
    if config.ablation != NO_ABLATION and config.algorithm != DCG_ME:
        raise ConfigError({'ablation': [f'ablation {config.ablation!r} requires algorithm dcg_me']})
    if config.algorithm != DCG_ME:
        return AblationSwitches()
    return AblationSwitches(
        actor_evaluation=config.ablation in (NO_ABLATION, UNCONDITIONED_ACTOR),
        synthetic_negatives=config.ablation == SYNTHETIC_NEGATIVES,
        unconditioned_actor=config.ablation == UNCONDITIONED_ACTOR,
    )


@dataclass
class IterationLog:
    iteration: int
    evaluations_so_far: int
    qd_score: float
    coverage: float
    max_fitness: float | None
    wall_time: float
    inserted_new: int = 0
    replaced: int = 0
    discarded: int = 0


class RunResult(NamedTuple):
    archive: Archive
    actor_critic: ActorCritic | None
    logs: list


def sample_target_descriptors(archive, b, sigma_d, rng):
    """Descriptors of ``b`` uniformly drawn elites plus ``N(0, sigma_d)`` noise, clamped to [0, 1]."""
    elites = archive.select_uniform(b, rng)
    descriptors = np.stack([elite.descriptor for elite in elites])
    noise = rng.normal(0.0, sigma_d, size=descriptors.shape)
    return np.clip(descriptors + noise, 0.0, 1.0)


def evaluate_actor_batch(ac, env, targets, buffer):
    """Roll out the actor conditioned on each target and store ``(d, d')``-tagged transitions.

    Actor rollouts never enter the archive.
    """
    if not ac.conditioned:
        raise ValueError('actor evaluation needs a descriptor-conditioned actor')
    targets = np.asarray(targets, dtype=np.float64)
    result = rollout_batch(env, ac.policy(targets), len(targets))
    buffer.insert(result.transitions(target_descriptors=targets))
    return result


def _add_to_archive(archive, genotypes, result):
    outcomes = collections.Counter()
    for genotype, fitness, descriptor in zip(genotypes, result.fitness, result.descriptors):
        outcomes[archive.try_insert(genotype, fitness, descriptor)] += 1
    return outcomes


def run(config, sinks=(), checkpoint_every=0, on_checkpoint=None, buffer=None):
    """Run one seeded experiment; returns ``(archive, actor_critic, logs)``.

    ``sinks`` receive every IterationLog as it is produced;
    ``on_checkpoint(iteration, archive, actor_critic)`` is called every
    ``checkpoint_every`` iterations. ``buffer`` replaces the replay buffer
    the run would otherwise create (ignored by map_elites).
    """
    switches = apply_ablation(config)
    env = config.env
    rng = np.random.default_rng(config.seed)
    policy_arch = config.policy_arch
    algorithm = config.algorithm
    conditioned = algorithm == DCG_ME
    b = config.batch_size

    archive = Archive.create(config.num_centroids, env.descriptor_dim, config.seed)
    ac = None
    if algorithm == MAP_ELITES:
        buffer = None
    else:
        # The PGA actor is injected into the archive, so it shares the policy shape.
        actor_hidden = config.actor_hidden if conditioned else config.policy_hidden
        ac = ActorCritic.create(
            env.state_dim, env.action_dim, env.descriptor_dim, config.td3,
            actor_hidden=actor_hidden,
            critic_hidden=config.critic_hidden,
            action_bound=env.action_bound,
            conditioned=conditioned,
            unconditioned_actor=switches.unconditioned_actor,
            seed=int(rng.integers(2 ** 32)),
        )
        if buffer is None:
            buffer = ReplayBuffer(config.td3.buffer_capacity)

    initial = np.stack([mlp_init(policy_arch, int(s)) for s in rng.integers(2 ** 32, size=b)])
    result = rollout_batch(env, population_policy(policy_arch, initial), b)
    if buffer is not None:
        buffer.insert(result.transitions())
    _add_to_archive(archive, initial, result)
    logger.info('%s: archive seeded with %d random solutions (%d cells)',
                algorithm, b, len(archive))

    logs = []
    evaluations = 0
    iteration = 0
    start = time.perf_counter()
    while evaluations < config.eval_budget:
        iteration += 1
        if ac is not None and len(buffer) > 0:
            train_actor_critic(ac, buffer, config.td3, conditioned, rng)

        n_parents = b - 1 if algorithm == PGA_ME else b
        n_ga = n_parents if algorithm == MAP_ELITES else min(config.ga_count, n_parents)
        parents = archive.select_uniform(n_parents, rng)
        genotypes = np.stack([elite.genotype for elite in parents])
        batches = []
        if n_ga:
            mates = np.stack([elite.genotype for elite in archive.select_uniform(n_ga, rng)])
            batches.append(variation_ga(genotypes[:n_ga], mates, config.ga, rng))
        if n_parents > n_ga:
            descriptors = np.stack([elite.descriptor for elite in parents[n_ga:]])
            batches.append(variation_pg(
                genotypes[n_ga:], policy_arch, ac, buffer, config.pg, conditioned, rng,
                parent_descriptors=descriptors,
            ))
        if algorithm == PGA_ME:
            batches.append(ac.actor.params[None, :])
        offspring, kept = discard_non_finite(np.concatenate(batches))
        discarded = int((~kept).sum())

        actor_evaluations = 0
        if switches.actor_evaluation:
            targets = sample_target_descriptors(archive, b, config.descriptor_noise_sigma, rng)
            evaluate_actor_batch(ac, env, targets, buffer)
            actor_evaluations = b

        outcomes = collections.Counter()
        if len(offspring):
            result = rollout_batch(env, population_policy(policy_arch, offspring), len(offspring))
            if buffer is not None:
                buffer.insert(result.transitions())
                if switches.synthetic_negatives:
                    uniform = rng.random((len(offspring), env.descriptor_dim))
                    buffer.insert(result.transitions(target_descriptors=uniform))
            outcomes = _add_to_archive(archive, offspring, result)

        # Discarded slots are charged to the budget like evaluated ones.
        evaluations += len(offspring) + discarded
        if config.count_actor_evaluations:
            evaluations += actor_evaluations
        metrics = archive.metrics()
        log = IterationLog(
            iteration=iteration,
            evaluations_so_far=evaluations,
            qd_score=metrics.qd_score,
            coverage=metrics.coverage,
            max_fitness=metrics.max_fitness,
            wall_time=time.perf_counter() - start,
            inserted_new=outcomes[AddOutcome.INSERTED_NEW],
            replaced=outcomes[AddOutcome.REPLACED],
            discarded=discarded,
        )
        logs.append(log)
        for sink in sinks:
            sink(log)
        logger.info(
            '%s iter %d: evals=%d qd_score=%.3f coverage=%.4f max_fitness=%s new=%d replaced=%d (%.1fs)',
            algorithm, iteration, evaluations, metrics.qd_score, metrics.coverage,
            metrics.max_fitness, log.inserted_new, log.replaced, log.wall_time,
        )
        if checkpoint_every and on_checkpoint is not None and iteration % checkpoint_every == 0:
            on_checkpoint(iteration, archive, ac)

    return RunResult(archive, ac, logs)
