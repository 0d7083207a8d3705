"""Archive and distilled-policy evaluation.

Every occupied cell is re-rolled ``repetitions`` times; with deterministic
environments one repetition reproduces the stored values exactly.
Distances are Euclidean in the normalised descriptor space.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyArchiveError
from .envs import rollout_batch
from .nn import population_policy

ARCHIVE_MODE = 'archive'
POLICY_MODE = 'policy'


@dataclass
class CellReport:
    cell: int
    stored_descriptor: np.ndarray
    reeval_descriptor_archive: np.ndarray
    reeval_descriptor_policy: np.ndarray
    policy_fitness: float


@dataclass
class DistillationReport:
    archive_qd_score: float
    dc_qd_score: float
    archive_dem: float
    policy_dem: float
    per_cell: list


@dataclass
class _Reevaluation:
    cells: list
    stored: np.ndarray
    fitness: np.ndarray
    descriptors: np.ndarray
    errors: np.ndarray


def _occupied(archive):
    occupied = archive.occupied()
    if not occupied:
        raise EmptyArchiveError('cannot evaluate an empty archive')
    cells = [index for index, _ in occupied]
    return cells, [elite for _, elite in occupied]


def _reevaluate(env, policy, stored, repetitions):
    fitness = np.zeros(len(stored))
    errors = np.zeros(len(stored))
    descriptors = None
    for _ in range(repetitions):
        result = rollout_batch(env, policy, len(stored))
        fitness += result.fitness
        errors += np.linalg.norm(result.descriptors - stored, axis=1)
        if descriptors is None:
            descriptors = result.descriptors
    return fitness / repetitions, descriptors, errors / repetitions


def _reevaluate_policy(archive, ac, env, repetitions):
    if ac is None or not ac.conditioned:
        raise ValueError('policy evaluation needs a descriptor-conditioned actor')
    cells, elites = _occupied(archive)
    stored = np.stack([elite.descriptor for elite in elites])
    fitness, descriptors, errors = _reevaluate(env, ac.policy(stored), stored, repetitions)
    return _Reevaluation(cells, stored, fitness, descriptors, errors)


def _reevaluate_archive(archive, env, policy_arch, repetitions):
    cells, elites = _occupied(archive)
    stored = np.stack([elite.descriptor for elite in elites])
    genotypes = np.stack([elite.genotype for elite in elites])
    policy = population_policy(policy_arch, genotypes)
    fitness, descriptors, errors = _reevaluate(env, policy, stored, repetitions)
    return _Reevaluation(cells, stored, fitness, descriptors, errors)


def dc_qd_score(archive, ac, env, repetitions=1):
    """Sum of the fitness the actor reaches when conditioned on each stored descriptor."""
    return float(_reevaluate_policy(archive, ac, env, repetitions).fitness.sum())


def descriptor_error_mean(archive, env, mode, ac=None, policy_arch=None, repetitions=1):
    """Mean distance between stored and re-evaluated descriptors.

    ``archive`` mode re-rolls every elite (needs ``policy_arch``);
    ``policy`` mode rolls the actor conditioned on each stored descriptor.
    """
    if mode == ARCHIVE_MODE:
        if policy_arch is None:
            raise ValueError('archive mode needs the policy architecture')
        return float(_reevaluate_archive(archive, env, policy_arch, repetitions).errors.mean())
    if mode == POLICY_MODE:
        return float(_reevaluate_policy(archive, ac, env, repetitions).errors.mean())
    raise ValueError(f'unknown mode {mode!r}')


def distillation_report(archive, ac, env, policy_arch, repetitions=1):
    from_archive = _reevaluate_archive(archive, env, policy_arch, repetitions)
    from_policy = _reevaluate_policy(archive, ac, env, repetitions)
    per_cell = [
        CellReport(
            cell=cell,
            stored_descriptor=from_policy.stored[i],
            reeval_descriptor_archive=from_archive.descriptors[i],
            reeval_descriptor_policy=from_policy.descriptors[i],
            policy_fitness=float(from_policy.fitness[i]),
        )
        for i, cell in enumerate(from_policy.cells)
    ]
    return DistillationReport(
        archive_qd_score=archive.metrics().qd_score,
        dc_qd_score=float(from_policy.fitness.sum()),
        archive_dem=float(from_archive.errors.mean()),
        policy_dem=float(from_policy.errors.mean()),
        per_cell=per_cell,
    )
