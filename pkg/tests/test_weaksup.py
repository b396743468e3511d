import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charregion.errors import DimensionMismatch, InvalidLength, MissingTranscription
from charregion.geometry import clip_convex, polygon_area
from charregion.labelgen import make_gaussian_template, render_score_map
from charregion.synth import SynthScene, SynthWord, _straight_word
from charregion.weaksup import (
    WordAnnotation,
    build_confidence_map,
    build_pseudo_gt,
    confidence_score,
    crop_word,
    fallback_split,
    pseudo_gt_for_word,
    split_characters,
    watershed,
    weighted_loss,
)
from charregion.postproc import connected_components

TEMPLATE = make_gaussian_template()


def rect(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def planted_crop(n, size=26, pitch=30, height=34):
    """Crop with n separated Gaussian characters; the word quad is the crop frame."""
    width = pitch * n + 4
    boxes = [rect(2 + pitch * i, 4, 2 + pitch * i + size, 4 + size) for i in range(n)]
    crop, _ = render_score_map(boxes, TEMPLATE, width, height)
    word_quad = rect(0, 0, width - 1, height - 1)
    centers = [b.mean(axis=0) for b in boxes]
    return crop, word_quad, centers


# --- confidence score ------------------------------------------------------------------

@pytest.mark.parametrize("l,l_c,expected", [
    (5, 5, 1.0),
    (6, 4, 2 / 3),
    (5, 0, 0.0),
    (3, 9, 0.0),
])
def test_confidence_examples(l, l_c, expected):
    assert confidence_score(l, l_c) == pytest.approx(expected, abs=1e-15)


def test_confidence_invalid():
    with pytest.raises(InvalidLength):
        confidence_score(0, 3)
    with pytest.raises(InvalidLength):
        confidence_score(3, -1)


def test_confidence_exhaustive_small():
    for l in range(1, 101):
        for l_c in range(0, 101):
            s = confidence_score(l, l_c)
            assert 0 <= s <= 1
            assert (s == 1) == (l == l_c)
            assert (s == 0) == (abs(l - l_c) >= l)


# --- watershed -------------------------------------------------------------------------

def test_watershed_matches_skimage():
    from skimage.segmentation import watershed as sk_watershed

    rng = np.random.default_rng(11)
    for n in (2, 4, 7):
        crop, _, _ = planted_crop(n)
        crop = np.clip(crop + rng.normal(0, 0.01, crop.shape), 0, 1)
        markers = connected_components(crop >= 0.6).labels
        ours = watershed(1 - crop, markers, mask=crop >= 0.2)
        theirs = sk_watershed(1 - crop, markers, mask=crop >= 0.2)
        assert ours.max() == theirs.max() == n
        assert (ours == theirs).mean() > 0.999


def test_watershed_respects_mask():
    surf = np.zeros((5, 5))
    markers = np.zeros((5, 5), dtype=int)
    markers[0, 0] = 1
    mask = np.ones((5, 5), dtype=bool)
    mask[:, 2] = False
    out = watershed(surf, markers, mask)
    assert out[:, :2].min() == 1 and out[:, 2:].max() == 0


# --- split_characters -----------------------------------------------------------------

def test_split_three_planted_characters():
    crop, quad, centers = planted_crop(3)
    word = WordAnnotation(quad, "abc")
    res = split_characters(crop, word)
    assert res.detected_count == 3 == len(res.char_boxes)
    assert res.confidence == 1.0
    found = sorted(b.mean(axis=0).tolist() for b in res.char_boxes)
    for got, want in zip(found, sorted(c.tolist() for c in centers)):
        assert np.hypot(got[0] - want[0], got[1] - want[1]) < 2.0


def test_split_all_zero():
    res = split_characters(np.zeros((64, 200)), WordAnnotation(rect(0, 0, 50, 12), "abcd"))
    assert res.detected_count == 0 and res.confidence == 0 and res.char_boxes == []


def test_split_two_blobs_six_letters():
    crop, quad, _ = planted_crop(2)
    res = split_characters(crop, WordAnnotation(quad, "abcdef"))
    assert res.detected_count == 2
    assert res.confidence == pytest.approx(1 / 3)


def test_split_requires_transcription():
    crop, quad, _ = planted_crop(2)
    with pytest.raises(MissingTranscription):
        split_characters(crop, WordAnnotation(quad, None))


def test_split_unwarps_into_image_coordinates():
    chars, quad = _straight_word(np.random.default_rng(2), 5, 20.0)
    theta = np.deg2rad(25)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    chars = [c @ rot.T + [80, 40] for c in chars]
    quad = quad @ rot.T + [80, 40]
    region, _ = render_score_map(chars, TEMPLATE, 220, 160)
    word = WordAnnotation(quad, "hello")
    res = split_characters(crop_word(region, word.quad), word)
    assert res.detected_count == 5
    got = sorted(b.mean(axis=0).tolist() for b in res.char_boxes)
    want = sorted(c.mean(axis=0).tolist() for c in chars)
    assert np.max(np.abs(np.array(got) - np.array(want))) < 2.0


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 10_000))
def test_split_round_trip_random_words(n, seed):
    rng = np.random.default_rng(seed)
    h = rng.uniform(14, 24)
    chars, quad = _straight_word(rng, n, h)
    theta = rng.uniform(-np.pi / 4, np.pi / 4)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = np.array([160.0, 160.0]) - quad.mean(axis=0) @ rot.T
    chars = [c @ rot.T + shift for c in chars]
    region, _ = render_score_map(chars, TEMPLATE, 320, 320)
    word = WordAnnotation(quad @ rot.T + shift, "x" * n)
    res = split_characters(crop_word(region, word.quad), word)
    assert res.detected_count == n and res.confidence == 1.0


# --- fallback -----------------------------------------------------------------------------

def test_fallback_equal_width():
    res = fallback_split(WordAnnotation(rect(0, 0, 10, 2), "abcde"))
    assert res.confidence == 0.5 and res.fallback and res.detected_count == 5
    for i, box in enumerate(res.char_boxes):
        np.testing.assert_allclose(box, rect(2 * i, 0, 2 * i + 2, 2), atol=1e-12)


def test_fallback_single_char_keeps_quad():
    q = np.array([[1, 1], [9, 2], [8, 7], [0, 6]], dtype=float)
    word = WordAnnotation(q, "a")
    res = fallback_split(word)
    np.testing.assert_allclose(res.char_boxes[0], word.quad, atol=1e-12)
    assert res.confidence == 0.5


def test_fallback_trapezoid_midpoints():
    q = np.array([[2, 0], [8, 0], [10, 4], [0, 4]], dtype=float)
    a, b = fallback_split(WordAnnotation(q, "ab")).char_boxes
    np.testing.assert_allclose(a[1], [5, 0])
    np.testing.assert_allclose(a[2], [5, 4])
    np.testing.assert_allclose(b[0], a[1])
    np.testing.assert_allclose(b[3], a[2])


def test_fallback_whitespace_not_counted():
    assert fallback_split(WordAnnotation(rect(0, 0, 9, 3), "a b c")).detected_count == 3


def test_fallback_missing_transcription():
    with pytest.raises(MissingTranscription):
        fallback_split(WordAnnotation(rect(0, 0, 9, 3), None, dont_care=True))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_fallback_partitions_word(l, jitter):
    q = rect(0, 0, 40, 10) + np.array(jitter).reshape(4, 2)
    word = WordAnnotation(q, "x" * l)
    boxes = fallback_split(word).char_boxes
    total = sum(polygon_area(b) for b in boxes)
    assert total == pytest.approx(polygon_area(word.quad), abs=1e-6)
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            inter = clip_convex(boxes[i], boxes[j])
            if len(inter) >= 3:
                assert polygon_area(inter) < 1e-6


# --- pseudo_gt_for_word --------------------------------------------------------------------

def test_pseudo_gt_keeps_good_split():
    crop, quad, _ = planted_crop(4)
    res = pseudo_gt_for_word(crop, WordAnnotation(quad, "abcd"))
    assert not res.fallback and res.confidence == 1.0 and res.detected_count == 4


def test_pseudo_gt_falls_back_below_half():
    crop, quad, _ = planted_crop(2)
    res = pseudo_gt_for_word(crop, WordAnnotation(quad, "abcdef"))
    assert res.fallback and res.confidence == 0.5
    assert res.detected_count == 6 and res.split_count == 2
    assert res.raw_confidence == pytest.approx(1 / 3)


def test_pseudo_gt_dont_care():
    crop, quad, _ = planted_crop(2)
    res = pseudo_gt_for_word(crop, WordAnnotation(quad, None, dont_care=True))
    assert res.char_boxes == [] and res.confidence == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.booleans())
def test_pseudo_gt_confidence_never_between_zero_and_half(n, l, dont_care):
    crop, quad, _ = planted_crop(n)
    res = pseudo_gt_for_word(crop, WordAnnotation(quad, "y" * l, dont_care))
    assert res.confidence == 0 or res.confidence >= 0.5
    assert res.detected_count == len(res.char_boxes)


# --- confidence map ----------------------------------------------------------------------

def test_confidence_map_empty():
    np.testing.assert_array_equal(build_confidence_map([], 7, 5), np.ones((5, 7)))


def test_confidence_map_single_word():
    m = build_confidence_map([(WordAnnotation(rect(2, 1, 5, 3), "ab"), 0.5)], 8, 6)
    expected = np.ones((6, 8))
    expected[1:4, 2:6] = 0.5
    np.testing.assert_array_equal(m, expected)


def test_confidence_map_overlap_takes_min():
    a = WordAnnotation(rect(0, 0, 5, 5), "ab")
    b = WordAnnotation(rect(3, 3, 8, 8), "cd")
    m = build_confidence_map([(a, 0.4), (b, 0.9)], 10, 10)
    assert m[4, 4] == 0.4
    assert m[7, 7] == 0.9
    assert m[1, 1] == 0.4
    assert m[9, 0] == 1.0
    m2 = build_confidence_map([(b, 0.9), (a, 0.4)], 10, 10)
    np.testing.assert_array_equal(m, m2)


def test_confidence_map_rotated_quad_boundary_inclusive():
    diamond = np.array([[5, 1], [9, 5], [5, 9], [1, 5]], dtype=float)
    m = build_confidence_map([(diamond, 0.25)], 11, 11)
    assert m[5, 5] == 0.25 and m[1, 5] == 0.25 and m[3, 3] == 0.25
    assert m[2, 2] == 1.0


# --- loss ----------------------------------------------------------------------------------

def test_loss_zero_at_gt():
    rng = np.random.default_rng(0)
    r, a, c = rng.random((3, 6, 9))
    assert weighted_loss(r, a, r, a, c) == (0.0, 0.0)


def test_loss_single_pixel():
    one = np.ones((1, 1))
    loss = weighted_loss(0.5 * one, 0 * one, 0 * one, 0 * one, one)
    assert loss.total == pytest.approx(0.25) and loss.mean == pytest.approx(0.25)


def test_loss_linear_in_confidence():
    rng = np.random.default_rng(1)
    r, a, rs, as_, c = rng.random((5, 4, 4))
    l1 = weighted_loss(r, a, rs, as_, c)
    l2 = weighted_loss(r, a, rs, as_, 2 * c)
    assert l2.total == pytest.approx(2 * l1.total)


def test_loss_ignores_zero_confidence_pixels():
    rng = np.random.default_rng(2)
    r, a = rng.random((2, 5, 5))
    c = np.ones((5, 5))
    c[2, :] = 0
    r2 = r.copy()
    r2[2, :] += 0.3
    assert weighted_loss(r2, a, r, a, c).total == 0.0
    r2[1, 1] += 0.1
    assert weighted_loss(r2, a, r, a, c).total > 0


def test_loss_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        weighted_loss(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


# --- whole image ---------------------------------------------------------------------------

def test_build_pseudo_gt_image():
    rng = np.random.default_rng(4)
    c1, q1 = _straight_word(rng, 4, 20.0)
    c2, q2 = _straight_word(rng, 3, 18.0)
    c2 = [c + [10, 60] for c in c2]
    q2 = q2 + [10, 60]
    c1 = [c + [10, 10] for c in c1]
    q1 = q1 + [10, 10]
    scene = SynthScene(160, 100, [SynthWord(c1, q1, "abcd"), SynthWord(c2, q2, "xyz")])
    region, affinity = scene.render(TEMPLATE)
    words = [WordAnnotation(q1, "abcd"), WordAnnotation(q2, "wxyz1234"), WordAnnotation(q2 + [90, 0], None, True)]
    gt = build_pseudo_gt(words, 160, 100, region_pred=region, template=TEMPLATE)
    assert [r.confidence for r in gt.results] == [1.0, 0.5, 0.0]
    assert gt.results[1].fallback and gt.results[1].split_count == 3
    assert gt.confidence[20, 30] == 1.0 and gt.confidence[70, 30] == 0.5 and gt.confidence[70, 120] == 0.0
    assert gt.region.max() <= 1 and gt.affinity.max() > 0.5
