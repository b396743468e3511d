"""Score maps to detections: binarization, CCL, QuadBoxes and text polygons."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateQuad, DegenerateStrip, DimensionMismatch, InvalidParameter, TooFewMaxima
from .geometry import (
    apply_perspective,
    as_points,
    expand_rect,
    min_area_rect,
    polygon_area,
    rect_size,
    solve_perspective,
)
from .labelgen import bilinear

DEFAULT_MIN_COMPONENT_PX = 10
# Binarizing a warped Gaussian at 0.4 keeps roughly the inner 68% of each
# character box; pushing the rectangle sides out by this fraction of its
# short side restores the annotated extent.
DEFAULT_BOX_EXPAND_RATIO = 0.25
DEFAULT_OUTER_EXTEND_RATIO = 0.5
DEFAULT_GAP_RATIO = 1.0

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Thresholds:
    tau_r: float = 0.4
    tau_a: float = 0.4

    def __post_init__(self):
        for name in ("tau_r", "tau_a"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidParameter(f"{name} must lie in (0, 1), got {v}")


@dataclass
class LabeledComponents:
    labels: np.ndarray
    count: int
    pixels: list  # per component, (n, 2) int arrays of (x, y) in raster order

    def sizes(self):
        return [len(p) for p in self.pixels]


def _check_same_shape(*maps):
    shapes = {np.shape(m) for m in maps}
    if len(shapes) != 1:
        raise DimensionMismatch(f"score maps differ in shape: {sorted(shapes)}")


def binarize(S_r, S_a, t=Thresholds()):
    S_r = np.asarray(S_r)
    S_a = np.asarray(S_a)
    _check_same_shape(S_r, S_a)
    return (S_r > t.tau_r) | (S_a > t.tau_a)


def connected_components(m):
    """8-connected labeling; labels follow first-encounter raster order."""
    m = np.asarray(m, dtype=bool)
    labels, count = ndimage.label(m, structure=_EIGHT)
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=count + 1)
    bounds = np.cumsum(counts)
    w = m.shape[1] if m.ndim == 2 else 1
    pixels = []
    for k in range(1, count + 1):
        idx = order[bounds[k - 1]:bounds[k]]
        pixels.append(np.stack([idx % w, idx // w], axis=1))
    return LabeledComponents(labels=labels, count=int(count), pixels=pixels)


def text_components(S_r, S_a, t=Thresholds(), min_component_px=DEFAULT_MIN_COMPONENT_PX):
    """Components of the binarized maps that are large enough to keep."""
    comps = connected_components(binarize(S_r, S_a, t))
    return [p for p in comps.pixels if len(p) >= min_component_px]


def quad_box(pixels, expand_ratio=DEFAULT_BOX_EXPAND_RATIO):
    rect = min_area_rect(pixels)
    if expand_ratio:
        short = min(rect_size(rect))
        rect = expand_rect(rect, expand_ratio * short)
    return rect


def quad_boxes(S_r, S_a, t=Thresholds(), min_component_px=DEFAULT_MIN_COMPONENT_PX,
               expand_ratio=DEFAULT_BOX_EXPAND_RATIO):
    """One minimum-area rectangle per retained component. No suppression step."""
    return [quad_box(p, expand_ratio) for p in text_components(S_r, S_a, t, min_component_px)]


def _box_frame(q):
    """Left x, right x, centre y and height of a canonical quad."""
    left = 0.5 * (q[0, 0] + q[3, 0])
    right = 0.5 * (q[1, 0] + q[2, 0])
    cy = q[:, 1].mean()
    return left, right, cy, rect_size(q)[1]


def merge_line_boxes(boxes, gap_ratio=DEFAULT_GAP_RATIO):
    """Join horizontally adjacent boxes into line boxes until nothing changes.

    Boxes ``a`` (left) and ``b`` merge when the gap between a's right side and
    b's left side is below ``gap_ratio * min(heights)`` and their centres differ
    vertically by less than half the smaller height.
    """
    if gap_ratio <= 0:
        raise InvalidParameter(f"gap_ratio must be positive, got {gap_ratio}")
    boxes = [as_points(b) for b in boxes]
    changed = True
    while changed:
        changed = False
        boxes.sort(key=lambda q: (q[:, 0].mean(), q[:, 1].mean()))
        for i in range(len(boxes)):
            li, ri, cyi, hi = _box_frame(boxes[i])
            for j in range(i + 1, len(boxes)):
                lj, rj, cyj, hj = _box_frame(boxes[j])
                h = min(hi, hj)
                if lj - ri < gap_ratio * h and abs(cyi - cyj) < 0.5 * h and rj > ri:
                    merged = min_area_rect(np.vstack([boxes[i], boxes[j]]))
                    boxes = [b for k, b in enumerate(boxes) if k not in (i, j)] + [merged]
                    changed = True
                    break
            if changed:
                break
    return boxes


def _scan_axes(rect):
    w_vec = rect[1] - rect[0]
    h_vec = rect[3] - rect[0]
    major = w_vec if np.linalg.norm(w_vec) >= np.linalg.norm(h_vec) else h_vec
    u = major / np.linalg.norm(major)
    if u[0] < -1e-9 or (abs(u[0]) <= 1e-9 and u[1] < 0):
        u = -u
    v = np.array([-u[1], u[0]])
    return u, v


def _local_maxima(profile, radius):
    peaks = []
    n = len(profile)
    k = 0
    while k < n:
        lo, hi = max(0, k - radius), min(n, k + radius + 1)
        if np.isfinite(profile[k]) and profile[k] >= profile[lo:hi].max():
            # a peak must rise above something on each side (no shoulders at the ends)
            left = profile[lo:k]
            right = profile[k + 1:hi]
            if (len(left) == 0 or left.min() < profile[k]) and (len(right) == 0 or right.min() < profile[k]) \
                    and 0 < k < n - 1:
                peaks.append(k)
                k += radius + 1
                continue
        k += 1
    return peaks


def _parabolic_offset(y0, y1, y2):
    den = y0 - 2 * y1 + y2
    if not np.isfinite(den) or abs(den) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (y0 - y2) / den, -0.5, 0.5))


def polygon_from_region(S_r, component, t=Thresholds(), outer_extend_ratio=DEFAULT_OUTER_EXTEND_RATIO,
                        cross_step=0.25):
    """Text polygon for one component, built from its local maxima lines.

    Scans the component along the major axis of its minimum-area rectangle at
    1 px steps. Each local maximum of the region score profile yields a line
    across the text, centred on the cross-direction score maximum. Lines get a
    common length, are turned perpendicular to the centre line, and the two
    outermost are pushed outward by ``outer_extend_ratio`` times the median
    line spacing. Returns ``(2k, 2)`` control points: the top edge left to
    right, then the bottom edge right to left.
    """
    S_r = np.asarray(S_r, dtype=np.float64)
    pix = np.asarray(component)
    if len(pix) == 0:
        raise TooFewMaxima("empty component")
    h, w = S_r.shape
    mask = np.zeros((h, w), dtype=bool)
    mask[pix[:, 1], pix[:, 0]] = True

    rect = min_area_rect(pix)
    u, v = _scan_axes(rect)
    origin = rect.mean(axis=0)
    rel = pix - origin
    tp, sp = rel @ u, rel @ v
    ts = np.arange(np.floor(tp.min()), np.ceil(tp.max()) + 1.0)
    ss = np.arange(np.floor(sp.min()) - 1.0, np.ceil(sp.max()) + 1.0 + 1e-9, cross_step)
    if len(ts) < 3:
        raise TooFewMaxima("component is too short to scan")

    px = origin[0] + ts[:, None] * u[0] + ss[None, :] * v[0]
    py = origin[1] + ts[:, None] * u[1] + ss[None, :] * v[1]
    xi = np.clip(np.rint(px).astype(np.intp), 0, w - 1)
    yi = np.clip(np.rint(py).astype(np.intp), 0, h - 1)
    member = mask[yi, xi] & (px > -0.5) & (px < w - 0.5) & (py > -0.5) & (py < h - 0.5)
    vals = np.where(member, bilinear(S_r, px, py), -np.inf)

    profile = vals.max(axis=1)
    cross_extent = (sp.max() - sp.min()) + 1.0
    radius = max(1, int(round(0.3 * cross_extent)))
    peaks = [k for k in _local_maxima(profile, radius) if profile[k] > t.tau_r]
    if len(peaks) < 2:
        raise TooFewMaxima(f"found {len(peaks)} local maxima lines, need 2")

    centers, lengths = [], []
    for k in peaks:
        j = int(np.argmax(vals[k]))
        row = member[k]
        lo = j
        while lo > 0 and row[lo - 1]:
            lo -= 1
        hi = j
        while hi < len(row) - 1 and row[hi + 1]:
            hi += 1
        dt = _parabolic_offset(profile[k - 1], profile[k], profile[k + 1])
        dj = 0.0
        if 0 < j < len(row) - 1:
            dj = _parabolic_offset(vals[k, j - 1], vals[k, j], vals[k, j + 1])
        s_c = ss[j] + dj * cross_step
        centers.append(origin + (ts[k] + dt) * u + s_c * v)
        lengths.append(2.0 * max(s_c - ss[lo], ss[hi] - s_c))

    centers = np.array(centers)
    half = 0.5 * max(lengths)
    n = len(centers)
    tangents = np.empty_like(centers)
    for i in range(n):
        a = centers[max(i - 1, 0)]
        b = centers[min(i + 1, n - 1)]
        d = b - a
        tangents[i] = d / np.linalg.norm(d)
    spacing = float(np.median(np.linalg.norm(np.diff(centers, axis=0), axis=1)))
    centers[0] -= outer_extend_ratio * spacing * tangents[0]
    centers[-1] += outer_extend_ratio * spacing * tangents[-1]

    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    top = centers - half * normals
    bottom = centers + half * normals
    return np.vstack([top, bottom[::-1]])


def _polygon_strips(poly):
    p = as_points(poly)
    if len(p) % 2 or len(p) < 4:
        raise DegenerateStrip(f"text polygons need an even vertex count >= 4, got {len(p)}")
    k = len(p) // 2
    return p[:k], p[k:][::-1]


def rectify_polygon(image, poly, out_height):
    """Unroll a text polygon into a straight horizontal strip.

    Each quad between consecutive control-point pairs is perspective-warped
    onto its own slice of the output; slice widths follow the centre-line
    length of each quad, scaled so the mean pair distance becomes
    ``out_height - 1``.
    """
    img = np.asarray(image, dtype=np.float64)
    top, bottom = _polygon_strips(poly)
    if out_height < 2:
        raise InvalidParameter("out_height must be at least 2")
    pair_len = np.linalg.norm(top - bottom, axis=1)
    if pair_len.mean() <= 1e-9:
        raise DegenerateStrip("polygon has zero height")
    scale = (out_height - 1) / pair_len.mean()
    mids = 0.5 * (top + bottom)
    seg = np.linalg.norm(np.diff(mids, axis=0), axis=1) * scale
    edges = np.concatenate([[0.0], np.cumsum(seg)])
    out_w = int(round(edges[-1])) + 1

    planes = img[..., None] if img.ndim == 2 else img
    out = np.zeros((out_height, out_w, planes.shape[2]))
    ys, xs = np.mgrid[0:out_height, 0:out_w].astype(np.float64)
    for i in range(len(seg)):
        quad = np.array([top[i], top[i + 1], bottom[i + 1], bottom[i]])
        if polygon_area(quad) <= 1e-9 or seg[i] <= 1e-9:
            raise DegenerateStrip(f"strip {i} has zero area")
        x0, x1 = edges[i], edges[i + 1]
        dst = np.array([[x0, 0.0], [x1, 0.0], [x1, out_height - 1.0], [x0, out_height - 1.0]])
        try:
            m = solve_perspective(dst, quad)
        except DegenerateQuad as exc:
            raise DegenerateStrip(f"strip {i} is degenerate: {exc}") from exc
        cols = (xs >= x0 - 1e-9) & (xs <= x1 + 1e-9) if i == len(seg) - 1 else (xs >= x0 - 1e-9) & (xs < x1)
        pts = np.stack([xs[cols], ys[cols]], axis=1)
        src = apply_perspective(m, pts)
        for c in range(planes.shape[2]):
            out[cols, c] = bilinear(planes[..., c], src[:, 0], src[:, 1])
    return out[..., 0] if img.ndim == 2 else out


def detect(S_r, S_a, t=Thresholds(), mode="quad", merge_lines=False,
           min_component_px=DEFAULT_MIN_COMPONENT_PX, expand_ratio=DEFAULT_BOX_EXPAND_RATIO,
           outer_extend_ratio=DEFAULT_OUTER_EXTEND_RATIO, gap_ratio=DEFAULT_GAP_RATIO):
    """Full post-processing for one image. Returns a list of point arrays.

    In ``poly`` mode, components whose polygon cannot be built fall back to
    their QuadBox. Line merging applies to quad output only.
    """
    if mode not in ("quad", "poly"):
        raise InvalidParameter(f"mode must be 'quad' or 'poly', got {mode!r}")
    comps = text_components(S_r, S_a, t, min_component_px)
    if mode == "quad":
        boxes = [quad_box(p, expand_ratio) for p in comps]
        return merge_line_boxes(boxes, gap_ratio) if merge_lines else boxes
    out = []
    for p in comps:
        try:
            out.append(polygon_from_region(S_r, p, t, outer_extend_ratio))
        except TooFewMaxima:
            out.append(quad_box(p, expand_ratio))
    return out
