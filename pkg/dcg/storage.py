"""On-disk formats for ParamVectors, archives, actor-critics, metrics and reports.

A ParamVector file is a little-endian uint64 value count followed by the
little-endian float64 values; ``<file>.arch`` holds the MlpArch
description. An archive directory holds ``index.json``, ``archive.csv``
and one ParamVector file per elite under ``elites/``.
"""
import csv
import json
import logging
from pathlib import Path

import numpy as np

from .archive import Archive, Elite
from .exceptions import ArchiveFormatError
from .nn import AdamState, MlpArch
from .rl import ActorCritic, Network

logger = logging.getLogger(__name__)

HEADER_DTYPE = np.dtype('<u8')
VALUE_DTYPE = np.dtype('<f8')

METRICS_COLUMNS = ('evaluations', 'qd_score', 'coverage', 'max_fitness')


def write_param_vector(path, params, arch=None):
    path = Path(path)
    values = np.ascontiguousarray(params, dtype=VALUE_DTYPE)
    with path.open('wb') as handle:
        handle.write(np.array([values.size], dtype=HEADER_DTYPE).tobytes())
        handle.write(values.tobytes())
    if arch is not None:
        path.with_name(path.name + '.arch').write_text(arch.describe() + '\n')


def read_param_vector(path, arch=None):
    """Return ``(params, arch)``; ``arch`` comes from the sidecar unless given."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise ArchiveFormatError(f'{path}: truncated header')
    count = int(np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0])
    body = raw[HEADER_DTYPE.itemsize:]
    if len(body) != count * VALUE_DTYPE.itemsize:
        raise ArchiveFormatError(
            f'{path}: header announces {count} values, file holds {len(body) // VALUE_DTYPE.itemsize}'
        )
    params = np.frombuffer(body, dtype=VALUE_DTYPE).astype(np.float64)
    if arch is None:
        sidecar = path.with_name(path.name + '.arch')
        if sidecar.exists():
            try:
                arch = MlpArch.from_description(sidecar.read_text())
            except (KeyError, ValueError) as exc:
                raise ArchiveFormatError(f'{sidecar}: {exc}') from exc
    if arch is not None and arch.param_count != count:
        raise ArchiveFormatError(f'{path}: {count} values do not fit {arch.describe()}')
    return params, arch


def save_archive(archive, arch, directory):
    directory = Path(directory)
    elites_dir = directory / 'elites'
    elites_dir.mkdir(parents=True, exist_ok=True)
    (elites_dir / 'policy.arch').write_text(arch.describe() + '\n')
    cells = []
    for index, elite in archive.occupied():
        name = f'elites/cell_{index:05d}.bin'
        write_param_vector(directory / name, elite.genotype)
        cells.append({
            'cell': index,
            'fitness': elite.fitness,
            'descriptor': elite.descriptor.tolist(),
            'genotype': name,
        })
    index_doc = {
        'centroids': np.asarray(archive.centroids).tolist(),
        'policy_arch': arch.describe(),
        'cells': cells,
    }
    (directory / 'index.json').write_text(json.dumps(index_doc, indent=2))
    export_archive_csv(archive, directory / 'archive.csv')
    logger.info('saved archive with %d elites to %s', len(archive), directory)


def load_archive(directory):
    """Return ``(archive, policy_arch)`` from a directory written by :func:`save_archive`."""
    directory = Path(directory)
    try:
        index_doc = json.loads((directory / 'index.json').read_text())
        arch = MlpArch.from_description(index_doc['policy_arch'])
        centroids = np.asarray(index_doc['centroids'], dtype=np.float64)
        archive = Archive(centroids)
        for cell in index_doc['cells']:
            genotype, _ = read_param_vector(directory / cell['genotype'], arch)
            archive.cells[int(cell['cell'])] = Elite(
                genotype=genotype,
                fitness=float(cell['fitness']),
                descriptor=np.asarray(cell['descriptor'], dtype=np.float64),
            )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ArchiveFormatError(f'{directory}: malformed archive index ({exc})') from exc
    return archive, arch


def export_archive_csv(archive, path):
    with Path(path).open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['cell', 'fitness'] + [f'd{i}' for i in range(archive.descriptor_dim)])
        for index, elite in archive.occupied():
            writer.writerow([index, repr(elite.fitness)] + [repr(float(v)) for v in elite.descriptor])


_NETWORKS = ('actor', 'critic1', 'critic2')


def save_actor_critic(ac, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in _NETWORKS:
        network = getattr(ac, name)
        write_param_vector(directory / f'{name}.bin', network.params, network.arch)
        write_param_vector(directory / f'{name}_target.bin', network.target, network.arch)
    meta = {
        'state_dim': ac.state_dim,
        'action_dim': ac.action_dim,
        'descriptor_dim': ac.descriptor_dim,
        'action_bound': ac.action_bound,
        'conditioned': ac.conditioned,
        'actor_frozen': None if ac.actor.frozen is None else np.flatnonzero(ac.actor.frozen).tolist(),
        'learning_rates': {name: getattr(ac, name).optimizer.learning_rate for name in _NETWORKS},
    }
    (directory / 'meta.json').write_text(json.dumps(meta, indent=2))


def load_actor_critic(directory):
    """Reload an ActorCritic; optimizers restart from zero moments."""
    directory = Path(directory)
    try:
        meta = json.loads((directory / 'meta.json').read_text())
        networks = {}
        for name in _NETWORKS:
            params, arch = read_param_vector(directory / f'{name}.bin')
            target, _ = read_param_vector(directory / f'{name}_target.bin', arch)
            if arch is None:
                raise ArchiveFormatError(f'{directory}: missing architecture for {name}')
            frozen = None
            if name == 'actor' and meta.get('actor_frozen') is not None:
                frozen = np.zeros(arch.param_count, dtype=bool)
                frozen[meta['actor_frozen']] = True
            networks[name] = Network(
                arch, params, target,
                AdamState.zeros_like(params, meta['learning_rates'][name]), frozen,
            )
        return ActorCritic(
            **networks,
            state_dim=meta['state_dim'],
            action_dim=meta['action_dim'],
            descriptor_dim=meta['descriptor_dim'],
            action_bound=meta['action_bound'],
            conditioned=meta['conditioned'],
        )
    except (KeyError, json.JSONDecodeError) as exc:
        raise ArchiveFormatError(f'{directory}: malformed actor-critic checkpoint ({exc})') from exc


def _format_float(value):
    return '' if value is None else repr(float(value))


def write_metrics_csv(path, logs, log_every=1):
    """Rows for every ``log_every``-th iteration plus the final one."""
    with Path(path).open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(METRICS_COLUMNS)
        for position, log in enumerate(logs, start=1):
            if position % log_every and position != len(logs):
                continue
            writer.writerow([
                log.evaluations_so_far,
                _format_float(log.qd_score),
                _format_float(log.coverage),
                _format_float(log.max_fitness),
            ])


def read_metrics_csv(path):
    rows = []
    with Path(path).open(newline='') as handle:
        for row in csv.DictReader(handle):
            rows.append({
                'evaluations': int(row['evaluations']),
                'qd_score': float(row['qd_score']),
                'coverage': float(row['coverage']),
                'max_fitness': float(row['max_fitness']) if row['max_fitness'] else None,
            })
    return rows


def write_report(report, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    summary = {
        'archive_qd_score': report.archive_qd_score,
        'dc_qd_score': report.dc_qd_score,
        'archive_dem': report.archive_dem,
        'policy_dem': report.policy_dem,
        'cells': len(report.per_cell),
    }
    (directory / 'distillation.json').write_text(json.dumps(summary, indent=2))
    with (directory / 'per_cell.csv').open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        dim = len(report.per_cell[0].stored_descriptor) if report.per_cell else 0
        header = ['cell']
        for prefix in ('stored', 'archive', 'policy'):
            header += [f'{prefix}_d{i}' for i in range(dim)]
        writer.writerow(header + ['policy_fitness'])
        for cell in report.per_cell:
            values = [cell.cell]
            for descriptor in (cell.stored_descriptor, cell.reeval_descriptor_archive,
                               cell.reeval_descriptor_policy):
                values += [repr(float(v)) for v in descriptor]
            writer.writerow(values + [repr(cell.policy_fitness)])
    logger.info('wrote distillation report to %s', directory)
