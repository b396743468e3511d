"""Pseudo ground truth from word-level annotations.

A word is rectified out of the predicted region score, split into
characters by marker-based watershed, and the character boxes are mapped
back to image coordinates. Agreement between the number of characters found
and the transcription length gives the word's confidence, which weights the
training loss.
"""

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidLength, InvalidParameter, MissingTranscription
from .geometry import (
    apply_perspective,
    as_points,
    min_area_rect,
    order_quad,
    points_in_polygon,
    rect_size,
    solve_perspective,
)
from .labelgen import bilinear, make_gaussian_template, render_word_maps
from .postproc import connected_components

DEFAULT_MARKER_THRESHOLD = 0.6
DEFAULT_REGION_FLOOR = 0.2
DEFAULT_CROP_HEIGHT = 64
FALLBACK_CONFIDENCE = 0.5


@dataclass
class WordAnnotation:
    quad: np.ndarray
    transcription: Optional[str] = None
    dont_care: bool = False
    chars: Optional[list] = None  # character boxes, when annotated

    def __post_init__(self):
        self.quad = order_quad(self.quad)

    @property
    def length(self):
        """Character count of the transcription, whitespace excluded."""
        if self.transcription is None:
            return 0
        return sum(1 for ch in self.transcription if not ch.isspace())


@dataclass
class CharSplitResult:
    char_boxes: list = field(default_factory=list)
    detected_count: int = 0
    confidence: float = 0.0
    fallback: bool = False
    # watershed count and its confidence, kept when the fallback replaced them
    split_count: int = 0
    raw_confidence: float = 0.0


class LossValue(NamedTuple):
    total: float
    mean: float


def confidence_score(l, l_c):
    """Word confidence from transcription length ``l`` and detected count ``l_c``."""
    if l < 1:
        raise InvalidLength(f"word length must be >= 1, got {l}")
    if l_c < 0:
        raise InvalidLength(f"detected character count must be >= 0, got {l_c}")
    return (l - min(l, abs(l - l_c))) / l


def _crop_size(quad, crop_height):
    width, height = rect_size(quad)
    crop_w = max(1, int(round(crop_height * width / max(height, 1e-9))))
    return crop_w, crop_height


def _crop_frame(crop_w, crop_h):
    return np.array([[0.0, 0.0], [crop_w - 1.0, 0.0], [crop_w - 1.0, crop_h - 1.0], [0.0, crop_h - 1.0]])


def crop_word(score_map, quad, crop_height=DEFAULT_CROP_HEIGHT):
    """Perspective-rectify a word quad out of a score map.

    The crop is ``crop_height`` rows tall and keeps the quad's aspect ratio.
    """
    q = order_quad(quad)
    crop_w, crop_h = _crop_size(q, crop_height)
    m = solve_perspective(_crop_frame(max(crop_w, 2), crop_h), q)
    ys, xs = np.mgrid[0:crop_h, 0:max(crop_w, 2)].astype(np.float64)
    src = apply_perspective(m, np.stack([xs.ravel(), ys.ravel()], axis=1))
    vals = bilinear(np.asarray(score_map, dtype=np.float64), src[:, 0], src[:, 1])
    return vals.reshape(crop_h, max(crop_w, 2))


def watershed(surface, markers, mask=None):
    """Meyer flooding from labelled markers over ``surface`` (low floods first).

    4-connected; ties are resolved by insertion order, so the result is
    deterministic. Pixels outside ``mask`` stay 0.
    """
    surface = np.asarray(surface, dtype=np.float64)
    labels = np.array(markers, dtype=np.int64, copy=True)
    h, w = surface.shape
    allowed = np.ones((h, w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    labels[~allowed] = 0

    # seed only marker pixels that touch floodable ground; interior ones never spread
    open_ = allowed & (labels == 0)
    touches = np.zeros((h, w), dtype=bool)
    touches[1:, :] |= open_[:-1, :]
    touches[:-1, :] |= open_[1:, :]
    touches[:, 1:] |= open_[:, :-1]
    touches[:, :-1] |= open_[:, 1:]
    seeds = np.flatnonzero((labels > 0) & touches)

    flat_s = surface.ravel().tolist()
    flat_l = labels.ravel()
    ok = allowed.ravel().tolist()
    heap = []
    counter = 0
    for idx in seeds:
        heap.append((flat_s[idx], counter, int(idx)))
        counter += 1
    heapq.heapify(heap)
    lab = flat_l.tolist()
    while heap:
        _, _, idx = heapq.heappop(heap)
        y, x = divmod(idx, w)
        cur = lab[idx]
        for nb, valid in ((idx - w, y > 0), (idx + w, y < h - 1), (idx - 1, x > 0), (idx + 1, x < w - 1)):
            if valid and ok[nb] and lab[nb] == 0:
                lab[nb] = cur
                heapq.heappush(heap, (flat_s[nb], counter, nb))
                counter += 1
    return np.array(lab, dtype=np.int64).reshape(h, w)


def split_characters(word_crop, word, marker_threshold=DEFAULT_MARKER_THRESHOLD,
                     region_floor=DEFAULT_REGION_FLOOR):
    """Split a rectified word crop of region scores into character boxes.

    Boxes come back in image coordinates, unordered with respect to the
    transcription. The crop's corner pixels are taken to map onto the word
    quad's corners.
    """
    if not 0 < region_floor <= marker_threshold < 1:
        raise InvalidParameter("need 0 < region_floor <= marker_threshold < 1")
    crop = np.asarray(word_crop, dtype=np.float64)
    l = word.length
    if l < 1:
        raise MissingTranscription("character splitting needs a transcription")

    support = crop >= region_floor
    if not support.any():
        return CharSplitResult([], 0, 0.0, raw_confidence=0.0)
    markers = connected_components(crop >= marker_threshold).labels
    basins = watershed(1.0 - crop, markers, mask=support)

    h, w = crop.shape
    to_image = solve_perspective(_crop_frame(max(w, 2), h), word.quad)
    boxes = []
    count = int(basins.max())
    for k in range(1, count + 1):
        ys, xs = np.nonzero(basins == k)
        if len(xs) == 0:
            continue
        rect = min_area_rect(np.stack([xs, ys], axis=1))
        boxes.append(order_quad(apply_perspective(to_image, rect)))
    conf = confidence_score(l, len(boxes))
    return CharSplitResult(boxes, len(boxes), conf, split_count=len(boxes), raw_confidence=conf)


def fallback_split(word):
    """Divide the word quad into ``l(w)`` equal-width pieces; confidence 0.5."""
    l = word.length
    if word.transcription is None or l < 1:
        raise MissingTranscription("equal-width splitting needs a transcription")
    tl, tr, br, bl = word.quad
    boxes = []
    for i in range(l):
        a, b = i / l, (i + 1) / l
        boxes.append(np.array([
            tl + a * (tr - tl),
            tl + b * (tr - tl),
            bl + b * (br - bl),
            bl + a * (br - bl),
        ]))
    return CharSplitResult(boxes, l, FALLBACK_CONFIDENCE, fallback=True)


def pseudo_gt_for_word(word_crop, word, marker_threshold=DEFAULT_MARKER_THRESHOLD,
                       region_floor=DEFAULT_REGION_FLOOR):
    """Watershed split, replaced by the equal-width split when confidence < 0.5.

    Do-not-care words yield no boxes and confidence 0.
    """
    if word.dont_care:
        return CharSplitResult([], 0, 0.0)
    result = split_characters(word_crop, word, marker_threshold, region_floor)
    if result.confidence < FALLBACK_CONFIDENCE:
        fb = fallback_split(word)
        fb.raw_confidence = result.confidence
        fb.split_count = result.detected_count
        return fb
    return result


def build_confidence_map(words, width, height):
    """Per-pixel confidence: the word's confidence inside its quad, 1 elsewhere.

    ``words`` holds ``(WordAnnotation or quad, confidence)`` pairs; where
    quads overlap the smallest confidence wins.
    """
    out = np.ones((int(height), int(width)), dtype=np.float64)
    for word, conf in words:
        quad = word.quad if isinstance(word, WordAnnotation) else as_points(word)
        x0 = max(int(np.floor(quad[:, 0].min())), 0)
        x1 = min(int(np.ceil(quad[:, 0].max())), width - 1)
        y0 = max(int(np.floor(quad[:, 1].min())), 0)
        y1 = min(int(np.ceil(quad[:, 1].max())), height - 1)
        if x1 < x0 or y1 < y0:
            continue
        ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        inside = points_in_polygon(np.stack([xs.ravel(), ys.ravel()], axis=1), quad)
        inside = inside.reshape(xs.shape)
        region = out[y0:y1 + 1, x0:x1 + 1]
        region[inside] = np.minimum(region[inside], conf)
    return out


def weighted_loss(S_r, S_a, S_r_star, S_a_star, S_c):
    """Confidence-weighted squared error summed over pixels, plus its mean."""
    maps = [np.asarray(m, dtype=np.float64) for m in (S_r, S_a, S_r_star, S_a_star, S_c)]
    shapes = {m.shape for m in maps}
    if len(shapes) != 1:
        raise DimensionMismatch(f"loss inputs differ in shape: {sorted(shapes)}")
    r, a, rs, as_, c = maps
    per_pixel = c * ((r - rs) ** 2 + (a - as_) ** 2)
    total = float(per_pixel.sum())
    return LossValue(total, total / per_pixel.size)


@dataclass
class PseudoGT:
    region: np.ndarray
    affinity: np.ndarray
    confidence: np.ndarray
    results: list  # CharSplitResult per word, in annotation order


def build_pseudo_gt(words, width, height, region_pred=None, crops=None,
                    template=None, crop_height=DEFAULT_CROP_HEIGHT,
                    marker_threshold=DEFAULT_MARKER_THRESHOLD, region_floor=DEFAULT_REGION_FLOOR):
    """Pseudo-GT region/affinity maps and the confidence map for one image.

    Word crops come from ``crops`` (one per word, ``None`` to crop from
    ``region_pred``) or are rectified out of the full-image ``region_pred``.
    """
    template = template or make_gaussian_template()
    results = []
    for i, word in enumerate(words):
        if word.dont_care:
            results.append(CharSplitResult([], 0, 0.0))
            continue
        crop = crops[i] if crops is not None and crops[i] is not None else None
        if crop is None:
            if region_pred is None:
                raise InvalidParameter("need either per-word crops or a full-image region prediction")
            crop = crop_word(region_pred, word.quad, crop_height)
        results.append(pseudo_gt_for_word(crop, word, marker_threshold, region_floor))
    region, affinity, _ = render_word_maps([r.char_boxes for r in results], template, width, height)
    conf = build_confidence_map([(w, r.confidence) for w, r in zip(words, results)], width, height)
    return PseudoGT(region, affinity, conf, results)
