"""Static PNG overlays of score maps and detections for inspection."""

import numpy as np
from PIL import Image, ImageDraw


def render_overlay(region, affinity=None, detections=(), base=None, alpha=0.6):
    """Blend the region score (red) and affinity score (blue) over ``base``
    (grey by default) and outline each detection in green."""
    region = np.clip(np.asarray(region, dtype=np.float64), 0, 1)
    h, w = region.shape
    if base is None:
        canvas = np.full((h, w, 3), 40.0)
    else:
        canvas = np.asarray(Image.fromarray(np.asarray(base)).convert("RGB"), dtype=np.float64)
    heat = np.zeros((h, w, 3))
    heat[..., 0] = 255 * region
    if affinity is not None:
        heat[..., 2] = 255 * np.clip(np.asarray(affinity, dtype=np.float64), 0, 1)
    weight = alpha * np.maximum(region, 0 if affinity is None else np.clip(affinity, 0, 1))[..., None]
    blended = (1 - weight) * canvas + weight * heat
    img = Image.fromarray(np.clip(np.rint(blended), 0, 255).astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(img)
    for det in detections:
        pts = [tuple(map(float, p)) for p in np.asarray(det)]
        draw.polygon(pts, outline=(0, 255, 0))
    return img


def save_overlay(path, *args, **kwargs):
    # fixed PNG options so repeated runs produce the same bytes
    render_overlay(*args, **kwargs).save(path, format="PNG", optimize=False, compress_level=6)
