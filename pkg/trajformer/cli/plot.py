#
# trajformer - uncertainty aware trajectory prediction for Python
#
# Copyright (C) 2019  SILVAIR sp. z o.o.
#
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin St, Fifth Floor, Boston, MA  02110-1301  USA
#
#
"""
SVG renderings: one scene with its predicted hypotheses, and retention curves.

Scene plots are drawn in ego-frame meters with forward pointing up and left
pointing left. Only the ground truth and the K hypotheses are polylines;
everything else is a path, circle or text.
"""
import xml.etree.ElementTree as ET

import numpy as np

from trajformer.metrics import ade
from trajformer.scenegen import MapElementKind


SVG_NAMESPACE = 'http://www.w3.org/2000/svg'
PALETTE = ('#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2',
           '#7f7f7f', '#bcbd22', '#17becf')
MAP_STYLES = {
    MapElementKind.LANE: dict(stroke='#bbbbbb', width=0.15, dash='1,1'),
    MapElementKind.ROAD_BOUNDARY: dict(stroke='#555555', width=0.25, dash=None),
    MapElementKind.CROSSWALK: dict(stroke='#e0c000', width=0.4, dash=None),
}
MARGIN = 8.0


def _screen(points):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.stack([-points[:, 1], -points[:, 0]], axis=-1)


def _format(points):
    return ' '.join('%.2f,%.2f' % (x, y) for x, y in _screen(points))


def _path(points):
    screen = _screen(points)
    return 'M ' + ' L '.join('%.2f %.2f' % (x, y) for x, y in screen)


def _svg(view_box, width, height):
    return ET.Element('svg', {
        'xmlns': SVG_NAMESPACE,
        'viewBox': ' '.join('%.2f' % i for i in view_box),
        'width': str(width),
        'height': str(height),
    })


def legend_labels(bundle, ground_truth):
    errors = ade(bundle.trajectories, ground_truth)
    return ['p=%.2f, ADE=%.2f' % (c, e) for c, e in zip(bundle.confidences, errors)]


def scene_svg(scene, bundle, size=480):
    ground_truth = scene.future.points
    history = scene.history[0] if len(scene.agents) else np.zeros((0, 3))

    extent = np.concatenate([_screen(ground_truth),
                             _screen(np.asarray(bundle.trajectories).reshape(-1, 2)),
                             _screen(history[:, :2]),
                             np.zeros((1, 2))])
    low = extent.min(axis=0) - MARGIN
    high = extent.max(axis=0) + MARGIN
    span = float(max(high - low))
    font = span / 40

    svg = _svg((low[0], low[1], span, span + 6 * font), size, size)
    ET.SubElement(svg, 'title').text = 'scene %d' % scene.seed

    for element in scene.map:
        style = MAP_STYLES[element.kind]
        attributes = {'d': _path(element.polyline), 'fill': 'none',
                      'stroke': style['stroke'], 'stroke-width': str(style['width'])}
        if style['dash']:
            attributes['stroke-dasharray'] = style['dash']
        ET.SubElement(svg, 'path', attributes)

    if len(history):
        ET.SubElement(svg, 'path', {'d': _path(history[:, :2]), 'fill': 'none',
                                    'stroke': '#999999', 'stroke-width': '0.3'})

    for index, agent in enumerate(scene.agents):
        (x, y), = _screen(agent.position)
        ET.SubElement(svg, 'circle', {'cx': '%.2f' % x, 'cy': '%.2f' % y, 'r': '1.0',
                                      'fill': '#000000' if index == 0 else '#aaaaaa'})

    ET.SubElement(svg, 'polyline', {'points': _format(ground_truth), 'fill': 'none',
                                    'stroke': '#000000', 'stroke-width': '0.8',
                                    'class': 'ground-truth'})

    labels = legend_labels(bundle, ground_truth)

    for k, (trajectory, label) in enumerate(zip(bundle.trajectories, labels)):
        color = PALETTE[k % len(PALETTE)]
        ET.SubElement(svg, 'polyline', {'points': _format(trajectory), 'fill': 'none',
                                        'stroke': color, 'stroke-width': '0.35',
                                        'class': 'hypothesis'})

    top = low[1] + span
    entries = [('ground truth', '#000000')] + [
        (label, PALETTE[k % len(PALETTE)]) for k, label in enumerate(labels)]

    for row, (text, color) in enumerate(entries):
        column, line = divmod(row, 3)
        node = ET.SubElement(svg, 'text', {
            'x': '%.2f' % (low[0] + font + column * span / 2),
            'y': '%.2f' % (top + (line + 1.5) * font * 1.5),
            'font-size': '%.2f' % font,
            'fill': color,
        })
        node.text = text

    ET.SubElement(svg, 'text', {'x': '%.2f' % (low[0] + font), 'y': '%.2f' % (low[1] + 1.5 * font),
                                'font-size': '%.2f' % font,
                                'fill': '#000000'}).text = 'U=%.2f' % float(bundle.uncertainty)
    return ET.ElementTree(svg)


def retention_svg(curves, size=480):
    """
    Retention curves normalised to their own maximum, one polyline each.
    """
    width, height = 100.0, 70.0
    svg = _svg((-10.0, -5.0, width + 20.0, height + 20.0), size, int(size * 0.75))
    ET.SubElement(svg, 'path', {'d': 'M 0 0 L 0 %.1f L %.1f %.1f' % (height, width, height),
                                'fill': 'none', 'stroke': '#000000', 'stroke-width': '0.4'})

    for index, (name, curve) in enumerate(curves.items()):
        color = PALETTE[index % len(PALETTE)]
        scale = float(np.max(np.abs(curve.values))) or 1.0
        points = ' '.join('%.2f,%.2f' % (f * width, height - v / scale * height)
                          for f, v in zip(curve.fractions, curve.values))

        ET.SubElement(svg, 'polyline', {'points': points, 'fill': 'none', 'stroke': color,
                                        'stroke-width': '0.6'})
        ET.SubElement(svg, 'text', {'x': '2', 'y': '%.1f' % (4 + 4 * index), 'font-size': '3',
                                    'fill': color}).text = '%s R-AUC=%.3f' % (name, curve.area)

    ET.SubElement(svg, 'text', {'x': '%.1f' % (width / 2 - 8), 'y': '%.1f' % (height + 8),
                                'font-size': '3'}).text = 'retention fraction'
    return ET.ElementTree(svg)


def write_svg(tree, path):
    tree.write(path, encoding='utf-8', xml_declaration=True)
