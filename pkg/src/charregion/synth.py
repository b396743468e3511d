"""Synthetic text scenes with exact character boxes, for round-trip checks and demos."""

import string
from dataclasses import dataclass

import numpy as np
import shapely.geometry

from .geometry import expand_rect, order_quad
from .labelgen import make_gaussian_template, render_word_maps
from .weaksup import WordAnnotation


@dataclass
class SynthWord:
    chars: list  # (4, 2) character boxes in reading order
    quad: np.ndarray
    transcription: str
    polygon: np.ndarray = None  # control points, for curved words

    def annotation(self, dont_care=False):
        return WordAnnotation(self.quad, self.transcription, dont_care, chars=self.chars)


@dataclass
class SynthScene:
    width: int
    height: int
    words: list

    def render(self, template=None):
        template = template or make_gaussian_template()
        region, affinity, _ = render_word_maps([w.chars for w in self.words], template,
                                               self.width, self.height)
        return region, affinity


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _straight_word(rng, n_chars, char_h):
    widths = char_h * rng.uniform(0.75, 1.1, size=n_chars)
    gaps = char_h * rng.uniform(0.0, 0.08, size=max(n_chars - 1, 0))
    x = 0.0
    chars = []
    for i, cw in enumerate(widths):
        chars.append(np.array([[x, 0], [x + cw, 0], [x + cw, char_h], [x, char_h]], dtype=np.float64))
        x += cw + (gaps[i] if i < n_chars - 1 else 0.0)
    quad = np.array([[0, 0], [x, 0], [x, char_h], [0, char_h]], dtype=np.float64)
    return chars, quad


def random_scene(rng, width=640, height=640, max_words=8, max_chars=10,
                 char_height=(14, 24), max_rotation_deg=45.0, attempts=200):
    """Words of 1..max_chars characters placed without touching, each rotated
    by up to ``max_rotation_deg``. Words that cannot be placed are dropped, so
    the scene always holds at least one word."""
    n_words = int(rng.integers(1, max_words + 1))
    placed, footprints = [], []
    for _ in range(n_words):
        n_chars = int(rng.integers(1, max_chars + 1))
        h = float(rng.uniform(*char_height))
        chars, quad = _straight_word(rng, n_chars, h)
        theta = np.deg2rad(rng.uniform(-max_rotation_deg, max_rotation_deg))
        rot = _rotation(theta)
        center = quad.mean(axis=0)
        for _ in range(attempts):
            pos = rng.uniform([0, 0], [width, height])

            def place(q):
                return (q - center) @ rot.T + pos

            wq = place(quad)
            if wq[:, 0].min() < 2 or wq[:, 1].min() < 2 or wq[:, 0].max() > width - 3 \
                    or wq[:, 1].max() > height - 3:
                continue
            fp = shapely.geometry.Polygon(expand_rect(order_quad(wq), 0.35 * h))
            if any(fp.intersects(other) for other in footprints):
                continue
            footprints.append(fp)
            text = "".join(rng.choice(list(string.ascii_letters), size=n_chars))
            placed.append(SynthWord([place(c) for c in chars], order_quad(wq), text))
            break
    if not placed:
        return random_scene(rng, width, height, max_words, max_chars, char_height,
                            max_rotation_deg, attempts)
    return SynthScene(width, height, placed)


def arc_word(center, radius, start_deg, n_chars, char_h, char_w=None, text=None):
    """Characters standing on a circular arc, reading clockwise on screen.

    ``start_deg`` is the angular position of the first character's left edge,
    measured on screen from the +x axis towards +y. Characters sit outside
    the circle of radius ``radius`` with their bottoms on it.
    """
    char_w = char_w or char_h
    cx, cy = center
    step = char_w / radius
    a0 = np.deg2rad(start_deg)
    chars, tops, bottoms = [], [], []

    def at(angle, r):
        return np.array([cx + r * np.cos(angle), cy + r * np.sin(angle)])

    r_in, r_out = radius, radius + char_h
    for i in range(n_chars + 1):
        a = a0 + i * step
        tops.append(at(a, r_out))
        bottoms.append(at(a, r_in))
    for i in range(n_chars):
        chars.append(np.array([tops[i], tops[i + 1], bottoms[i + 1], bottoms[i]]))
    polygon = np.vstack([np.array(tops), np.array(bottoms)[::-1]])
    quad = np.array([tops[0], tops[-1], bottoms[-1], bottoms[0]])
    text = text or "x" * n_chars
    return SynthWord(chars, quad, text, polygon=polygon)


def arc_scene(width=400, height=300, n_chars=9, char_h=20, radius=150, start_deg=-125.0):
    word = arc_word((width / 2, height * 0.75 + radius * 0.35), radius, start_deg, n_chars, char_h)
    return SynthScene(width, height, [word])


def rotate_scene(scene, degrees, center=None):
    """The same scene rotated about ``center`` (canvas centre by default)."""
    c = np.array(center if center is not None else ((scene.width - 1) / 2, (scene.height - 1) / 2))
    rot = _rotation(np.deg2rad(degrees))

    def tf(q):
        return (np.asarray(q) - c) @ rot.T + c

    words = []
    for w in scene.words:
        words.append(SynthWord([tf(ch) for ch in w.chars], tf(w.quad), w.transcription,
                               None if w.polygon is None else tf(w.polygon)))
    return SynthScene(scene.width, scene.height, words), rot, c
