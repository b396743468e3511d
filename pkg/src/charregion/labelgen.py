"""Ground-truth heatmaps: region and affinity scores, and link-score lines.

Each character box receives a copy of one isotropic Gaussian template,
warped onto the box by a perspective map. Affinity boxes are built between
neighbouring characters of a word and rendered the same way.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQuad, InvalidParameter, OddVertexCount
from .geometry import (
    as_points,
    invert_perspective,
    polygon_area,
    solve_perspective,
)

DEFAULT_TEMPLATE_SIDE = 512
DEFAULT_SIGMA_RATIO = 0.25
DEFAULT_LINK_WIDTH_RATIO = 0.5
CLAMP_BELOW = 1e-4


@dataclass(frozen=True)
class GaussianTemplate:
    side: int
    sigma: float
    values: np.ndarray

    @property
    def corners(self):
        s = self.side - 1
        return np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]])

    def sample(self, x, y):
        """Bilinear lookup at template coordinates; zero outside the square."""
        return bilinear(self.values, x, y)


def make_gaussian_template(side=DEFAULT_TEMPLATE_SIDE, sigma_ratio=DEFAULT_SIGMA_RATIO):
    """Square isotropic Gaussian, peak 1 at the geometric centre ``(side - 1) / 2``.

    sigma = sigma_ratio * side. Odd sides put the peak on a pixel; even sides
    keep the map exactly symmetric with the peak between four pixels.
    """
    if int(side) != side or side < 1:
        raise InvalidParameter(f"template side must be a positive integer, got {side}")
    if not 0 < sigma_ratio <= 1:
        raise InvalidParameter(f"sigma_ratio must be in (0, 1], got {sigma_ratio}")
    side = int(side)
    sigma = sigma_ratio * side
    c = (side - 1) / 2.0
    r = np.arange(side, dtype=np.float64) - c
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return GaussianTemplate(side=side, sigma=sigma, values=np.outer(g, g))


def bilinear(img, x, y):
    """Sample ``img`` at float coordinates; points outside ``[0, w-1] x [0, h-1]`` give 0."""
    h, w = img.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    eps = 1e-9
    inside = (x >= -eps) & (x <= w - 1 + eps) & (y >= -eps) & (y <= h - 1 + eps)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.where(inside, out, 0.0)


def _diagonal_intersection(q):
    # TL-BR against TR-BL
    p, r = q[0], q[2] - q[0]
    s0, s = q[1], q[3] - q[1]
    den = r[0] * s[1] - r[1] * s[0]
    if abs(den) < 1e-12:
        raise DegenerateQuad(f"diagonals are parallel in {q.tolist()}")
    t = ((s0[0] - p[0]) * s[1] - (s0[1] - p[1]) * s[0]) / den
    return p + t * r


def _triangle_centroids(box):
    q = as_points(box)
    if q.shape != (4, 2) or polygon_area(q) < 1e-9:
        raise DegenerateQuad(f"character box has near-zero area: {q.tolist()}")
    c = _diagonal_intersection(q)
    upper = (q[0] + q[1] + c) / 3.0
    lower = (q[3] + q[2] + c) / 3.0
    return upper, lower


def affinity_box(a, b):
    """Affinity quad between two adjacent character boxes of one word.

    Corners are [upper(a), upper(b), lower(b), lower(a)], where upper/lower are
    the centroids of the top and bottom triangles cut by each box's diagonals.
    """
    ua, la = _triangle_centroids(a)
    ub, lb = _triangle_centroids(b)
    return np.array([ua, ub, lb, la])


def word_affinity_boxes(char_boxes):
    """Affinity boxes for consecutive characters of a single word."""
    return [affinity_box(char_boxes[i], char_boxes[i + 1]) for i in range(len(char_boxes) - 1)]


def _warp_into(canvas, box, template):
    h, w = canvas.shape
    q = as_points(box)
    to_template = invert_perspective(solve_perspective(template.corners, q))

    x0 = max(int(np.floor(q[:, 0].min())), 0)
    x1 = min(int(np.ceil(q[:, 0].max())), w - 1)
    y0 = max(int(np.floor(q[:, 1].min())), 0)
    y1 = min(int(np.ceil(q[:, 1].max())), h - 1)
    if x1 < x0 or y1 < y0:
        return

    xs, ys = np.meshgrid(np.arange(x0, x1 + 1, dtype=np.float64),
                         np.arange(y0, y1 + 1, dtype=np.float64))
    m = to_template
    cx, cy = q.mean(axis=0)
    ref = np.sign(m[2, 0] * cx + m[2, 1] * cy + m[2, 2])
    den = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    # pixels on the far side of the horizon line are never inside the box
    ok = den * ref > 1e-12
    den = np.where(ok, den, 1.0)
    tx = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / den
    ty = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / den
    vals = np.where(ok, template.sample(tx, ty), 0.0)
    region = canvas[y0:y1 + 1, x0:x1 + 1]
    np.maximum(region, vals, out=region)


def render_score_map(boxes, template, width, height):
    """Max-combine one warped template per box onto a ``height x width`` canvas.

    Returns ``(score_map, skipped)`` where ``skipped`` counts degenerate boxes.
    """
    if width < 1 or height < 1:
        raise InvalidParameter(f"canvas must be at least 1x1, got {width}x{height}")
    canvas = np.zeros((int(height), int(width)), dtype=np.float64)
    skipped = 0
    for box in boxes:
        q = as_points(box)
        if q.shape != (4, 2) or polygon_area(q) < 1e-9:
            skipped += 1
            continue
        try:
            _warp_into(canvas, q, template)
        except DegenerateQuad:
            skipped += 1
    canvas[canvas < CLAMP_BELOW] = 0.0
    np.clip(canvas, 0.0, 1.0, out=canvas)
    return canvas, skipped


def render_word_maps(words_chars, template, width, height):
    """Region and affinity maps for a list of words, each a list of character boxes.

    Affinity never links characters across word boundaries.
    """
    chars = [box for word in words_chars for box in word]
    affinities = []
    skipped = 0
    for word in words_chars:
        for i in range(len(word) - 1):
            try:
                affinities.append(affinity_box(word[i], word[i + 1]))
            except DegenerateQuad:
                skipped += 1
    region, s1 = render_score_map(chars, template, width, height)
    affinity, s2 = render_score_map(affinities, template, width, height)
    return region, affinity, skipped + s1 + s2


def _polygon_pairs(points):
    p = as_points(points)
    n = len(p)
    if n % 2 or n < 4:
        raise OddVertexCount(f"text polygons need an even vertex count >= 4, got {n}")
    k = n // 2
    top = p[:k]
    bottom = p[k:][::-1]
    return top, bottom


def render_link_gt(polygons, width, height, link_width_ratio=DEFAULT_LINK_WIDTH_RATIO):
    """Binary link-score map: a stroke through the centres of paired control points.

    Control point ``i`` on the first long edge pairs with point ``2k - 1 - i``.
    Stroke thickness is ``link_width_ratio`` times the pair distance, linearly
    interpolated along each segment; segment ends are flat, interior joints round.
    """
    out = np.zeros((int(height), int(width)), dtype=np.float64)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    for poly in polygons:
        top, bottom = _polygon_pairs(poly)
        centers = 0.5 * (top + bottom)
        widths = link_width_ratio * np.linalg.norm(top - bottom, axis=1)
        for i in range(len(centers) - 1):
            a, b = centers[i], centers[i + 1]
            d = b - a
            L2 = float(d @ d)
            if L2 <= 1e-12:
                continue
            t = ((xs - a[0]) * d[0] + (ys - a[1]) * d[1]) / L2
            px = xs - (a[0] + t * d[0])
            py = ys - (a[1] + t * d[1])
            half = 0.5 * (widths[i] + t * (widths[i + 1] - widths[i]))
            on = (t >= 0) & (t <= 1) & (px * px + py * py <= half * half + 1e-9)
            out[on] = 1.0
        for i in range(1, len(centers) - 1):
            c = centers[i]
            r = 0.5 * widths[i]
            out[(xs - c[0]) ** 2 + (ys - c[1]) ** 2 <= r * r + 1e-9] = 1.0
    return out
