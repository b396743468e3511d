"""Projective and polygonal primitives.

Coordinates are ``(x, y)`` in pixels with y pointing down. Quads are
``(4, 2)`` float arrays ordered clockwise (as seen on screen) starting at
the top-left corner, which makes their shoelace area positive. A pixel at
row ``i`` and column ``j`` sits at the point ``(j, i)``.
"""

import numpy as np
import shapely.geometry

from .errors import (
    DegenerateInput,
    DegeneratePolygon,
    DegenerateQuad,
    ProjectiveDivideByZero,
)

_EPS = 1e-12


def as_points(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    return pts


def signed_area(poly):
    p = as_points(poly)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly):
    return abs(signed_area(poly))


def order_quad(quad):
    """Canonical corner order: clockwise on screen, top-left first.

    Top-left is the corner with minimal ``x + y``; ties go to minimal ``y``.
    """
    q = as_points(quad)
    if q.shape != (4, 2):
        raise ValueError(f"a quad needs 4 corners, got {len(q)}")
    if signed_area(q) < 0:
        q = q[::-1]
    keys = [(round(x + y, 9), round(y, 9), i) for i, (x, y) in enumerate(q)]
    start = min(keys)[2]
    return np.roll(q, -start, axis=0).copy()


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _has_collinear_triple(q, scale):
    tol = 1e-9 * max(1.0, scale * scale)
    for i in range(4):
        a, b, c = q[i], q[(i + 1) % 4], q[(i + 2) % 4]
        if abs(_cross(a, b, c)) <= tol:
            return True
    return False


def solve_perspective(src, dst):
    """3x3 projective map taking the 4 ``src`` corners onto the 4 ``dst`` corners.

    Solves the usual 8-unknown linear system with the bottom-right coefficient
    fixed to 1.
    """
    s = as_points(src)
    d = as_points(dst)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise DegenerateQuad("perspective maps need exactly 4 source and 4 target points")
    for q in (s, d):
        scale = float(np.ptp(q, axis=0).max())
        if scale <= _EPS or _has_collinear_triple(q, scale):
            raise DegenerateQuad(f"three collinear corners in {q.tolist()}")

    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for k, ((x, y), (u, v)) in enumerate(zip(s, d)):
        a[2 * k] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * k + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * k] = u
        rhs[2 * k + 1] = v
    try:
        coef = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuad("singular homography system") from exc
    m = np.append(coef, 1.0).reshape(3, 3)
    if abs(np.linalg.det(m)) <= _EPS:
        raise DegenerateQuad("perspective map is not invertible")
    return m


def invert_perspective(m):
    m = np.asarray(m, dtype=np.float64)
    if abs(np.linalg.det(m)) <= _EPS:
        raise DegenerateQuad("perspective map is not invertible")
    inv = np.linalg.inv(m)
    if abs(inv[2, 2]) > _EPS:
        inv = inv / inv[2, 2]
    return inv


def apply_perspective(m, points):
    """Map a point ``(x, y)`` or an ``(n, 2)`` array through ``m``."""
    m = np.asarray(m, dtype=np.float64)
    arr = np.asarray(points, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr.reshape(-1, 2)
    den = m[2, 0] * pts[:, 0] + m[2, 1] * pts[:, 1] + m[2, 2]
    if np.any(np.abs(den) <= _EPS):
        raise ProjectiveDivideByZero("point maps to infinity under this perspective map")
    x = (m[0, 0] * pts[:, 0] + m[0, 1] * pts[:, 1] + m[0, 2]) / den
    y = (m[1, 0] * pts[:, 0] + m[1, 1] * pts[:, 1] + m[1, 2]) / den
    out = np.stack([x, y], axis=1)
    return out[0] if single else out


def convex_hull(points):
    """Andrew's monotone chain. Returns hull vertices with positive orientation."""
    pts = as_points(points)
    if len(pts) > 64:
        # only the leftmost and rightmost point of each row can be a hull vertex
        order = np.lexsort((pts[:, 0], pts[:, 1]))
        pts = pts[order]
        first = np.r_[True, pts[1:, 1] != pts[:-1, 1]]
        last = np.r_[pts[1:, 1] != pts[:-1, 1], True]
        pts = pts[first | last]
    pts = np.unique(pts, axis=0)
    if len(pts) <= 2:
        return pts
    pts = [tuple(p) for p in pts]

    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(points):
    """Minimum-area enclosing rectangle, found over the convex-hull edge directions.

    Collinear input (including a single point) yields a zero-height rectangle
    along the segment rather than an error.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise DegenerateInput("min_area_rect needs at least one point")
    hull = convex_hull(pts)
    if len(hull) < 3:
        a, b = hull[0], hull[-1]
        return order_quad(np.array([a, b, b, a]))

    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > _EPS
    dirs = edges[keep] / lengths[keep, None]
    normals = np.stack([-dirs[:, 1], dirs[:, 0]], axis=1)

    u = hull @ dirs.T
    v = hull @ normals.T
    areas = (u.max(0) - u.min(0)) * (v.max(0) - v.min(0))
    k = int(np.argmin(areas))
    e, n = dirs[k], normals[k]
    u0, u1 = u[:, k].min(), u[:, k].max()
    v0, v1 = v[:, k].min(), v[:, k].max()
    rect = np.array([
        u0 * e + v0 * n,
        u1 * e + v0 * n,
        u1 * e + v1 * n,
        u0 * e + v1 * n,
    ])
    return order_quad(rect)


def rect_size(quad):
    """(width, height) of a canonical quad: mean top/bottom and left/right edge lengths."""
    q = as_points(quad)
    top = np.linalg.norm(q[1] - q[0])
    bottom = np.linalg.norm(q[2] - q[3])
    left = np.linalg.norm(q[3] - q[0])
    right = np.linalg.norm(q[2] - q[1])
    return 0.5 * (top + bottom), 0.5 * (left + right)


def expand_rect(quad, margin):
    """Push every side of a rectangle outward by ``margin`` pixels."""
    q = as_points(quad)
    ex = q[1] - q[0]
    if np.linalg.norm(ex) <= _EPS:
        ex = q[2] - q[3]
    if np.linalg.norm(ex) <= _EPS:
        ex = np.array([1.0, 0.0])
    ex = ex / np.linalg.norm(ex)
    # y-down screen coordinates: rotating ex clockwise by 90 degrees points "down"
    ey = np.array([-ex[1], ex[0]])
    signs = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=np.float64)
    return q + margin * (signs[:, :1] * ex + signs[:, 1:] * ey)


def is_convex(poly):
    p = as_points(poly)
    n = len(p)
    if n < 3:
        return False
    signs = set()
    for i in range(n):
        c = _cross(p[i], p[(i + 1) % n], p[(i + 2) % n])
        if abs(c) > _EPS:
            signs.add(c > 0)
    return len(signs) <= 1


def clip_convex(subject, clip):
    """Sutherland-Hodgman: clip ``subject`` by the convex window ``clip``."""
    window = as_points(clip)
    if signed_area(window) < 0:
        window = window[::-1]
    output = [tuple(p) for p in as_points(subject)]
    for i in range(len(window)):
        a = window[i]
        b = window[(i + 1) % len(window)]
        if not output:
            break
        inputs, output = output, []
        prev = inputs[-1]
        prev_in = _cross(a, b, prev) >= 0
        for cur in inputs:
            cur_in = _cross(a, b, cur) >= 0
            if cur_in != prev_in:
                output.append(_segment_line_intersection(prev, cur, a, b))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output).reshape(-1, 2)


def _segment_line_intersection(p, q, a, b):
    dp = (q[0] - p[0], q[1] - p[1])
    da = (b[0] - a[0], b[1] - a[1])
    den = dp[0] * da[1] - dp[1] * da[0]
    if den == 0:
        # parallel and flipping sides only through rounding: q already lies on the line
        return q
    t = ((a[0] - p[0]) * da[1] - (a[1] - p[1]) * da[0]) / den
    return (p[0] + t * dp[0], p[1] + t * dp[1])


def polygon_iou(a, b):
    """Intersection over union of two simple polygons."""
    pa, pb = as_points(a), as_points(b)
    area_a, area_b = polygon_area(pa), polygon_area(pb)
    if area_a <= _EPS or area_b <= _EPS:
        raise DegeneratePolygon("IoU is undefined for zero-area polygons")

    if is_convex(pb):
        inter = clip_convex(pa, pb)
    elif is_convex(pa):
        inter = clip_convex(pb, pa)
    else:
        inter = None
    if inter is None:
        sa, sb = shapely.geometry.Polygon(pa), shapely.geometry.Polygon(pb)
        if not sa.is_valid:
            sa = sa.buffer(0)
        if not sb.is_valid:
            sb = sb.buffer(0)
        inter_area = sa.intersection(sb).area
    else:
        inter_area = polygon_area(inter) if len(inter) >= 3 else 0.0

    union = area_a + area_b - inter_area
    return float(min(1.0, max(0.0, inter_area / union)))


def points_in_polygon(points, poly, eps=1e-9):
    """Even-odd point-in-polygon test; points on the boundary count as inside."""
    pts = as_points(points)
    p = as_points(poly)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = p[:, 0][None, :], p[:, 1][None, :]
    x1, y1 = np.roll(p[:, 0], -1)[None, :], np.roll(p[:, 1], -1)[None, :]

    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = np.sum(straddle & (x < x_at), axis=1)
    inside = (crossings % 2) == 1

    ex, ey = x1 - x0, y1 - y0
    seg_len2 = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(((x - x0) * ex + (y - y0) * ey) / seg_len2, 0.0, 1.0)
    t = np.where(seg_len2 > 0, t, 0.0)
    dx = x - (x0 + t * ex)
    dy = y - (y0 + t * ey)
    on_edge = np.any(dx * dx + dy * dy <= eps * eps, axis=1)
    return inside | on_edge
