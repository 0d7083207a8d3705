"""Replicated experiments and their output directories.

Layout of ``<output_dir>``::

    aggregate.json
    run_<r>/config.json
    run_<r>/metrics.csv
    run_<r>/archive/
    run_<r>/actor_critic/              pga_me and dcg_me
    run_<r>/distillation.json          dcg_me
    run_<r>/per_cell.csv               dcg_me
    run_<r>/checkpoints/iter_<k>/      when checkpoint_every > 0
"""
import dataclasses
import json
import logging
from pathlib import Path

import numpy as np
from django.conf import settings

from .exceptions import ConfigError, QDError, RunFailedError
from .loop import DCG_ME, run
from .metrics import distillation_report
from .serializers import emit_config, parse_config
from .storage import (
    load_actor_critic,
    load_archive,
    read_metrics_csv,
    save_actor_critic,
    save_archive,
    write_metrics_csv,
    write_report,
)

logger = logging.getLogger(__name__)

AGGREGATED_METRICS = ('qd_score', 'coverage', 'max_fitness')


def resolve_output_dir(output_dir):
    path = Path(output_dir)
    if path.is_absolute():
        return path
    return Path(settings.QD_OUTPUT_ROOT) / path


def _checkpoint_writer(run_dir, policy_arch):
    def write(iteration, archive, ac):
        directory = run_dir / 'checkpoints' / f'iter_{iteration}'
        save_archive(archive, policy_arch, directory / 'archive')
        if ac is not None:
            save_actor_critic(ac, directory / 'actor_critic')
        logger.info('checkpoint written to %s', directory)

    return write


def run_replication(config, run_index, run_dir):
    """Execute one seeded run and write its files into ``run_dir``."""
    policy_arch = config.policy_arch
    logger.info('replication %d: %s seed=%d -> %s', run_index, config.algorithm, config.seed, run_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / 'config.json').write_text(emit_config(config))
        result = run(
            config,
            checkpoint_every=config.checkpoint_every,
            on_checkpoint=_checkpoint_writer(run_dir, policy_arch),
        )
        write_metrics_csv(run_dir / 'metrics.csv', result.logs, config.log_every)
        save_archive(result.archive, policy_arch, run_dir / 'archive')
        if result.actor_critic is not None:
            save_actor_critic(result.actor_critic, run_dir / 'actor_critic')
        if config.algorithm == DCG_ME:
            report = distillation_report(
                result.archive, result.actor_critic, config.env, policy_arch, config.reevaluations
            )
            write_report(report, run_dir)
    except ConfigError:
        raise
    except (QDError, OSError, ValueError, FloatingPointError) as exc:
        raise RunFailedError(run_index, exc) from exc
    return result


def _quartiles(values):
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return {'median': float(median), 'q1': float(q1), 'q3': float(q3)}


def aggregate_metrics(metrics_files):
    """Median and quartiles of every metric at each logged evaluation count."""
    by_budget = {}
    for path in metrics_files:
        for row in read_metrics_csv(path):
            by_budget.setdefault(row['evaluations'], []).append(row)
    points = []
    for evaluations in sorted(by_budget):
        rows = by_budget[evaluations]
        point = {'evaluations': evaluations, 'runs': len(rows)}
        for name in AGGREGATED_METRICS:
            values = [row[name] for row in rows if row[name] is not None]
            point[name] = _quartiles(values) if values else None
        points.append(point)
    return points


def run_experiment(config):
    """Run ``config.replications`` seeded runs and aggregate their metrics.

    Run ``r`` uses seed ``config.seed + r``. Returns the output directory.
    """
    output_dir = resolve_output_dir(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    metrics_files = []
    for run_index in range(config.replications):
        run_config = dataclasses.replace(config, seed=config.seed + run_index)
        run_dir = output_dir / f'run_{run_index}'
        run_replication(run_config, run_index, run_dir)
        metrics_files.append(run_dir / 'metrics.csv')

    aggregate = {
        'algorithm': config.algorithm,
        'ablation': config.ablation,
        'replications': config.replications,
        'points': aggregate_metrics(metrics_files),
    }
    (output_dir / 'aggregate.json').write_text(json.dumps(aggregate, indent=2) + '\n')
    logger.info('experiment finished: %d replications in %s', config.replications, output_dir)
    return output_dir


def report_run(run_dir):
    """Recompute the distillation report of a finished dcg_me run directory."""
    run_dir = Path(run_dir)
    config = parse_config((run_dir / 'config.json').read_text())
    if config.algorithm != DCG_ME:
        raise ConfigError({'algorithm': ['distillation reports need a dcg_me run']})
    archive, policy_arch = load_archive(run_dir / 'archive')
    ac = load_actor_critic(run_dir / 'actor_critic')
    report = distillation_report(archive, ac, config.env, policy_arch, config.reevaluations)
    write_report(report, run_dir)
    return report
