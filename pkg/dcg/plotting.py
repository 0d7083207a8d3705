"""SVG heatmaps of 2-D archives.

Each centroid's Voronoi region is filled with the colour of its elite's
fitness; empty regions are drawn as outlines only. Regions are bounded to
the unit square by mirroring the centroids across its four sides.
"""
import logging
from pathlib import Path

import numpy as np
import svgwrite
from scipy.spatial import QhullError, Voronoi

from .exceptions import DimensionMismatchError
from .storage import load_archive

logger = logging.getLogger(__name__)

HEATMAP_COLORS = [
    '#ddffff',  # lowest tenth of the fitness range
    '#afffff',
    '#aaf191',
    '#80d385',
    '#ffff8c',
    '#f9d057',
    '#f29e2e',
    '#e76818',
    '#ff6161',
    '#ff0000',  # highest tenth
]

PLOT_SIZE = 480
MARGIN = 60
LEGEND_WIDTH = 140
TICKS = (0.0, 0.5, 1.0)


def color_index(fitness, lowest, highest):
    sentinel = len(HEATMAP_COLORS)
    if highest <= lowest:
        return sentinel - 1
    index = int((fitness - lowest) / (highest - lowest) * sentinel)
    return min(max(index, 0), sentinel - 1)


def _to_canvas(points):
    points = np.atleast_2d(points)
    x = MARGIN + points[:, 0] * PLOT_SIZE
    y = MARGIN + (1.0 - points[:, 1]) * PLOT_SIZE
    return list(zip(x.tolist(), y.tolist()))


def voronoi_regions(centroids):
    """Polygon vertices of every centroid's region inside the unit square."""
    centroids = np.asarray(centroids, dtype=np.float64)
    mirrored = [
        centroids,
        centroids * [-1, 1],
        centroids * [-1, 1] + [2, 0],
        centroids * [1, -1],
        centroids * [1, -1] + [0, 2],
    ]
    vor = Voronoi(np.concatenate(mirrored))
    regions = []
    for point in range(len(centroids)):
        region = vor.regions[vor.point_region[point]]
        vertices = np.clip(vor.vertices[region], 0.0, 1.0)
        centre = vertices.mean(axis=0)
        order = np.argsort(np.arctan2(vertices[:, 1] - centre[1], vertices[:, 0] - centre[0]))
        regions.append(vertices[order])
    return regions


def _add_axes(drawing):
    axes = drawing.g(id='axes', stroke='black', fill='none')
    x0, y0 = MARGIN, MARGIN + PLOT_SIZE
    axes.add(drawing.line((x0, y0), (x0 + PLOT_SIZE, y0)))
    axes.add(drawing.line((x0, y0), (x0, MARGIN)))
    labels = drawing.g(id='axis-labels', font_size=12, font_family='sans-serif')
    for tick in TICKS:
        (tx, _), = _to_canvas([tick, 0.0])
        (_, ty), = _to_canvas([0.0, tick])
        axes.add(drawing.line((tx, y0), (tx, y0 + 5)))
        axes.add(drawing.line((x0 - 5, ty), (x0, ty)))
        labels.add(drawing.text(f'{tick:g}', insert=(tx - 6, y0 + 20)))
        labels.add(drawing.text(f'{tick:g}', insert=(x0 - 30, ty + 4)))
    labels.add(drawing.text('descriptor 0', insert=(x0 + PLOT_SIZE / 2 - 35, y0 + 40)))
    labels.add(drawing.text('descriptor 1', insert=(15, MARGIN - 15)))
    drawing.add(axes)
    drawing.add(labels)


def _add_legend(drawing, lowest, highest):
    legend = drawing.g(id='legend', font_size=11, font_family='sans-serif')
    left = MARGIN + PLOT_SIZE + 30
    step = PLOT_SIZE / (2 * len(HEATMAP_COLORS))
    legend.add(drawing.text('fitness', insert=(left, MARGIN - 10)))
    for index, color in enumerate(HEATMAP_COLORS):
        top = MARGIN + (len(HEATMAP_COLORS) - 1 - index) * step
        swatch = drawing.rect(insert=(left, top), size=(20, step), fill=color, stroke='white')
        swatch['class'] = 'legend-swatch'
        swatch['data-color-index'] = index
        legend.add(swatch)
        if lowest is not None:
            bound = lowest + (highest - lowest) * index / len(HEATMAP_COLORS)
            legend.add(drawing.text(f'{bound:.3g}', insert=(left + 26, top + step - 3)))
    drawing.add(legend)


def render_archive(archive):
    """Build the SVG drawing of a 2-D archive."""
    if archive.descriptor_dim != 2:
        raise DimensionMismatchError(
            f'archive plots need 2-D descriptors, got {archive.descriptor_dim}'
        )
    width = 2 * MARGIN + PLOT_SIZE + LEGEND_WIDTH
    height = 2 * MARGIN + PLOT_SIZE
    drawing = svgwrite.Drawing(size=(width, height), profile='full', debug=False)
    drawing.add(drawing.rect(insert=(0, 0), size=(width, height), fill='white'))

    occupied = dict(archive.occupied())
    fitnesses = [elite.fitness for elite in occupied.values()]
    lowest = min(fitnesses) if fitnesses else None
    highest = max(fitnesses) if fitnesses else None

    cells = drawing.g(id='cells')
    try:
        regions = voronoi_regions(archive.centroids)
    except (QhullError, ValueError) as exc:
        logger.warning('voronoi tessellation failed (%s); falling back to a scatter plot', exc)
        regions = None

    for index in range(archive.size):
        elite = occupied.get(index)
        if regions is not None:
            shape = drawing.polygon(_to_canvas(regions[index]), stroke='#999999')
        else:
            (cx, cy), = _to_canvas(archive.centroids[index])
            shape = drawing.circle(center=(cx, cy), r=3, stroke='#999999')
        if elite is None:
            shape['fill'] = 'none'
            shape['class'] = 'cell empty'
        else:
            color = color_index(elite.fitness, lowest, highest)
            shape['fill'] = HEATMAP_COLORS[color]
            shape['class'] = 'cell elite'
            shape['data-fitness'] = repr(elite.fitness)
            shape['data-color-index'] = color
            shape.set_desc(title=f'cell {index}: fitness {elite.fitness:.6g}')
        cells.add(shape)
    drawing.add(cells)
    _add_axes(drawing)
    _add_legend(drawing, lowest, highest)
    return drawing


def plot_archive(archive_dir, output):
    """Render the archive saved in ``archive_dir`` to the SVG file ``output``."""
    archive, _ = load_archive(archive_dir)
    drawing = render_archive(archive)
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    drawing.saveas(str(output), pretty=True)
    logger.info('wrote archive plot with %d elites to %s', len(archive), output)
    return output
