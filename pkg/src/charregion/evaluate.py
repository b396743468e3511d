"""Word-level IoU matching with recall, precision and h-mean."""

from dataclasses import dataclass, field

from .errors import DegeneratePolygon, InvalidParameter
from .geometry import polygon_iou


def hmean(recall, precision):
    return 2 * recall * precision / (recall + precision) if recall + precision > 0 else 0.0


@dataclass
class MatchResult:
    pairs: list = field(default_factory=list)  # (gt index, det index, iou)
    unmatched_gts: list = field(default_factory=list)
    unmatched_dets: list = field(default_factory=list)
    ignored_dets: list = field(default_factory=list)
    num_care_gts: int = 0
    num_counted_dets: int = 0

    @property
    def matched(self):
        return len(self.pairs)

    @property
    def recall(self):
        # no countable gts: nothing was missed
        return self.matched / self.num_care_gts if self.num_care_gts else 1.0

    @property
    def precision(self):
        # no countable detections: nothing was wrong
        return self.matched / self.num_counted_dets if self.num_counted_dets else 1.0

    @property
    def hmean(self):
        return hmean(self.recall, self.precision)

    def to_dict(self):
        return {
            "recall": self.recall,
            "precision": self.precision,
            "hmean": self.hmean,
            "matched": self.matched,
            "gt_care": self.num_care_gts,
            "det_counted": self.num_counted_dets,
            "pairs": [[g, d, iou] for g, d, iou in self.pairs],
            "unmatched_gts": list(self.unmatched_gts),
            "unmatched_dets": list(self.unmatched_dets),
            "ignored_dets": list(self.ignored_dets),
        }


def _iou(a, b):
    try:
        return polygon_iou(a, b)
    except DegeneratePolygon:
        return 0.0


def match_detections(gts, dets, iou_threshold=0.5):
    """Greedy one-to-one matching in descending IoU order.

    ``gts`` is a list of ``(polygon, dont_care)`` pairs. A detection whose best
    overlap is a do-not-care gt with IoU above the threshold is dropped from
    the precision denominator. Ties are broken by (gt index, det index).
    """
    if not 0 < iou_threshold < 1:
        raise InvalidParameter(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    ious = [[_iou(g, d) for d in dets] for g, _ in gts]
    care = [not dc for _, dc in gts]

    ignored = []
    for j in range(len(dets)):
        if not gts:
            break
        best = max(range(len(gts)), key=lambda i: (ious[i][j], -i))
        if not care[best] and ious[best][j] > iou_threshold:
            ignored.append(j)
    ignored_set = set(ignored)

    candidates = [
        (-ious[i][j], i, j)
        for i in range(len(gts)) if care[i]
        for j in range(len(dets)) if j not in ignored_set and ious[i][j] >= iou_threshold
    ]
    candidates.sort()
    used_g, used_d, pairs = set(), set(), []
    for neg_iou, i, j in candidates:
        if i in used_g or j in used_d:
            continue
        used_g.add(i)
        used_d.add(j)
        pairs.append((i, j, -neg_iou))

    return MatchResult(
        pairs=pairs,
        unmatched_gts=[i for i in range(len(gts)) if care[i] and i not in used_g],
        unmatched_dets=[j for j in range(len(dets)) if j not in used_d and j not in ignored_set],
        ignored_dets=ignored,
        num_care_gts=sum(care),
        num_counted_dets=len(dets) - len(ignored),
    )


def evaluate_dataset(per_image, iou_threshold=0.5):
    """Aggregate matching over images given as ``{name: (gts, dets)}``.

    Counts are pooled across images before computing R, P and H.
    """
    images = {}
    matched = care = counted = 0
    for name in sorted(per_image):
        gts, dets = per_image[name]
        res = match_detections(gts, dets, iou_threshold)
        images[name] = res.to_dict()
        matched += res.matched
        care += res.num_care_gts
        counted += res.num_counted_dets
    recall = matched / care if care else 1.0
    precision = matched / counted if counted else 1.0
    return {
        "protocol": f"iou@{iou_threshold}",
        "recall": recall,
        "precision": precision,
        "hmean": hmean(recall, precision),
        "matched": matched,
        "gt_care": care,
        "det_counted": counted,
        "images": images,
    }
