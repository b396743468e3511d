"""Character-region heatmaps for scene text: ground-truth generation,
weakly-supervised pseudo labels, and score-map post-processing."""

from .errors import CharRegionError
from .evaluate import MatchResult, match_detections
from .geometry import (
    apply_perspective,
    min_area_rect,
    order_quad,
    polygon_iou,
    solve_perspective,
)
from .labelgen import affinity_box, make_gaussian_template, render_link_gt, render_score_map
from .postproc import (
    Thresholds,
    binarize,
    connected_components,
    detect,
    merge_line_boxes,
    polygon_from_region,
    quad_boxes,
    rectify_polygon,
)
from .weaksup import (
    WordAnnotation,
    build_confidence_map,
    confidence_score,
    fallback_split,
    pseudo_gt_for_word,
    split_characters,
    weighted_loss,
)

__version__ = "0.1.0"
