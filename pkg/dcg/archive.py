"""CVT MAP-Elites archive."""
import enum
import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from sklearn.cluster import KMeans

from .exceptions import DimensionMismatchError, EmptyArchiveError

logger = logging.getLogger(__name__)

CVT_ITERATIONS = 50
CVT_SAMPLES_PER_CENTROID = 100


def cvt_centroids(count, dim, seed):
    """k-means centroids of ``100 * count`` uniform samples in ``[0, 1]^dim``.

    The returned array is read-only; it may be shared through the cache.
    """
    if count < 1 or dim < 1:
        raise ValueError(f'count and dim must be positive, got {count}, {dim}')
    if getattr(settings, 'QD_CVT_CACHE', False):
        return _cached_centroids(count, dim, seed)
    return _compute_centroids(count, dim, seed)


@functools.lru_cache(maxsize=16)
def _cached_centroids(count, dim, seed):
    return _compute_centroids(count, dim, seed)


def _compute_centroids(count, dim, seed):
    rng = np.random.default_rng(seed)
    samples = rng.random((CVT_SAMPLES_PER_CENTROID * count, dim))
    kmeans = KMeans(
        n_clusters=count,
        init='k-means++',
        n_init=1,
        max_iter=CVT_ITERATIONS,
        tol=0.0,
        algorithm='lloyd',
        random_state=seed,
    )
    kmeans.fit(samples)
    points = np.clip(kmeans.cluster_centers_.astype(np.float64), 0.0, 1.0)
    points.setflags(write=False)
    logger.debug('built %d CVT centroids in %d dimensions', count, dim)
    return points


def cell_index(centroids, descriptor):
    """Index of the Euclidean-nearest centroid; ties go to the lowest index."""
    centroids = np.asarray(centroids)
    d = np.asarray(descriptor, dtype=np.float64)
    if d.shape[-1] != centroids.shape[1]:
        raise DimensionMismatchError(
            f'descriptor has {d.shape[-1]} dimensions, archive has {centroids.shape[1]}'
        )
    sq_dist = ((centroids - d[..., None, :]) ** 2).sum(axis=-1)
    index = np.argmin(sq_dist, axis=-1)
    return int(index) if index.ndim == 0 else index


class AddOutcome(enum.Enum):
    INSERTED_NEW = 'inserted_new'
    REPLACED = 'replaced'
    REJECTED = 'rejected'
    REJECTED_INVALID = 'rejected_invalid'

    @property
    def added(self):
        return self in (AddOutcome.INSERTED_NEW, AddOutcome.REPLACED)


@dataclass
class Elite:
    genotype: np.ndarray
    fitness: float
    descriptor: np.ndarray


@dataclass
class ArchiveMetrics:
    qd_score: float
    coverage: float
    max_fitness: float | None


@dataclass
class Archive:
    centroids: np.ndarray
    cells: dict = field(default_factory=dict)

    @classmethod
    def create(cls, count, dim, seed):
        return cls(cvt_centroids(count, dim, seed))

    @property
    def size(self):
        return len(self.centroids)

    @property
    def descriptor_dim(self):
        return self.centroids.shape[1]

    def __len__(self):
        return len(self.cells)

    def occupied(self):
        """Occupied ``(index, elite)`` pairs in ascending cell order."""
        return sorted(self.cells.items())

    def try_insert(self, genotype, fitness, descriptor):
        fitness = float(fitness)
        descriptor = np.asarray(descriptor, dtype=np.float64)
        if not math.isfinite(fitness):
            logger.warning('rejected candidate with non-finite fitness %r', fitness)
            return AddOutcome.REJECTED_INVALID
        index = cell_index(self.centroids, descriptor)
        incumbent = self.cells.get(index)
        if incumbent is not None and not incumbent.fitness < fitness:
            return AddOutcome.REJECTED
        self.cells[index] = Elite(
            genotype=np.array(genotype, dtype=np.float64),
            fitness=fitness,
            descriptor=np.clip(descriptor, 0.0, 1.0),
        )
        return AddOutcome.INSERTED_NEW if incumbent is None else AddOutcome.REPLACED

    def select_uniform(self, k, rng):
        """``k`` elites drawn uniformly with replacement from occupied cells."""
        if not self.cells:
            raise EmptyArchiveError('cannot select from an empty archive')
        occupied = self.occupied()
        picks = rng.integers(len(occupied), size=k)
        return [occupied[i][1] for i in picks]

    def metrics(self):
        if not self.cells:
            return ArchiveMetrics(qd_score=0.0, coverage=0.0, max_fitness=None)
        fitnesses = [elite.fitness for _, elite in self.occupied()]
        return ArchiveMetrics(
            qd_score=float(sum(fitnesses)),
            coverage=len(self.cells) / self.size,
            max_fitness=float(max(fitnesses)),
        )


def select_uniform(archive, k, rng):
    return archive.select_uniform(k, rng)


def try_insert(archive, genotype, fitness, descriptor):
    return archive.try_insert(genotype, fitness, descriptor)


def archive_metrics(archive):
    return archive.metrics()
