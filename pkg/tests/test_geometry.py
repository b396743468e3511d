import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charregion.errors import DegenerateInput, DegeneratePolygon, DegenerateQuad, ProjectiveDivideByZero
from charregion.geometry import (
    apply_perspective,
    convex_hull,
    invert_perspective,
    min_area_rect,
    order_quad,
    points_in_polygon,
    polygon_area,
    polygon_iou,
    signed_area,
    solve_perspective,
)

UNIT = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
CONVEX = np.array([[0, 0], [2, 0.2], [2.1, 1.5], [-0.1, 1.2]])


def dlt_svd(src, dst):
    """Independent homography: null space of the 8x9 DLT matrix."""
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    h = np.linalg.svd(np.array(rows))[2][-1]
    return (h / h[-1]).reshape(3, 3)


def brute_force_rect_area(points):
    """Smallest bounding rectangle over every point-pair direction."""
    pts = np.asarray(points, dtype=float)
    best = math.inf
    for p, q in itertools.combinations(pts, 2):
        d = q - p
        n = np.hypot(*d)
        if n == 0:
            continue
        e = d / n
        f = np.array([-e[1], e[0]])
        u, v = pts @ e, pts @ f
        best = min(best, (u.max() - u.min()) * (v.max() - v.min()))
    return best


def random_convex_quad(rng, scale=100.0):
    while True:
        angles = np.sort(rng.uniform(0, 2 * np.pi, 4))
        radii = rng.uniform(0.5, 1.0, 4) * scale
        q = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1) + rng.uniform(-50, 50, 2)
        gaps = np.diff(np.r_[angles, angles[0] + 2 * np.pi])
        if gaps.min() > 0.3 and gaps.max() < np.pi - 0.3:
            return q


# --- solve_perspective / apply_perspective ---------------------------------

def test_identity_map():
    m = solve_perspective(UNIT, UNIT)
    np.testing.assert_allclose(m, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(apply_perspective(m, (3, 4)), (3, 4))


def test_translation_map():
    m = solve_perspective(UNIT, UNIT + [5, 3])
    np.testing.assert_allclose(m, [[1, 0, 5], [0, 1, 3], [0, 0, 1]], atol=1e-12)
    np.testing.assert_allclose(apply_perspective(m, (0, 0)), (5, 3))


def test_general_convex_quad_matches_svd_oracle():
    m = solve_perspective(UNIT, CONVEX)
    # frozen from the SVD oracle
    expected = np.array([
        [1.8869257950530035, -0.0911660777385159, 0.0],
        [0.18869257950530036, 1.0939929328621907, 0.0],
        [-0.05653710247349829, -0.08833922261484102, 1.0],
    ])
    np.testing.assert_allclose(m, expected, atol=1e-12)
    np.testing.assert_allclose(m, dlt_svd(UNIT, CONVEX), atol=1e-10)
    np.testing.assert_allclose(apply_perspective(m, UNIT), CONVEX, atol=1e-9)


def test_centroid_maps_inside_target():
    m = solve_perspective(UNIT, CONVEX)
    p = apply_perspective(m, UNIT.mean(axis=0))
    assert points_in_polygon([p], CONVEX)[0]


@pytest.mark.parametrize("bad", [
    [[0, 0], [1, 0], [2, 0], [0, 1]],
    [[0, 0], [0, 0], [1, 1], [0, 1]],
    [[1, 1], [1, 1], [1, 1], [1, 1]],
])
def test_degenerate_quads_rejected(bad):
    with pytest.raises(DegenerateQuad):
        solve_perspective(UNIT, bad)
    with pytest.raises(DegenerateQuad):
        solve_perspective(bad, UNIT)


def test_divide_by_zero():
    m = np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, 0]])
    with pytest.raises(ProjectiveDivideByZero):
        apply_perspective(m, (0, 5))


def test_round_trip_random_quads():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = random_convex_quad(rng), random_convex_quad(rng)
        m = solve_perspective(a, b)
        assert np.abs(apply_perspective(m, a) - b).max() < 1e-6
        inner = a.mean(axis=0)
        back = apply_perspective(invert_perspective(m), apply_perspective(m, inner))
        assert np.abs(back - inner).max() < 1e-6


# --- ordering ------------------------------------------------------------------

def test_order_quad_canonical():
    q = order_quad([[0, 1], [1, 1], [1, 0], [0, 0]])  # counter-clockwise on screen
    np.testing.assert_array_equal(q, UNIT)
    assert signed_area(q) > 0


def test_order_quad_diamond_tie_breaks_on_y():
    q = order_quad([[0, 1], [1, 2], [2, 1], [1, 0]])
    np.testing.assert_array_equal(q[0], [1, 0])


# --- min_area_rect ---------------------------------------------------------------

def _is_rectangle(q):
    sides = [q[(i + 1) % 4] - q[i] for i in range(4)]
    lengths = [np.hypot(*s) for s in sides]
    assert abs(lengths[0] - lengths[2]) < 1e-6
    assert abs(lengths[1] - lengths[3]) < 1e-6
    for i in range(4):
        a, b = sides[i], sides[(i + 1) % 4]
        if lengths[i] > 1e-9 and lengths[(i + 1) % 4] > 1e-9:
            cos = a @ b / (np.hypot(*a) * np.hypot(*b))
            assert abs(math.acos(np.clip(cos, -1, 1)) - math.pi / 2) < 1e-6


def test_min_area_rect_axis_aligned():
    r = min_area_rect([[0, 0], [4, 0], [4, 2], [0, 2]])
    np.testing.assert_allclose(r, [[0, 0], [4, 0], [4, 2], [0, 2]], atol=1e-12)
    assert polygon_area(r) == pytest.approx(8)


def test_min_area_rect_rotated_square():
    pts = [[1, 0], [2, 1], [1, 2], [0, 1]]
    r = min_area_rect(pts)
    _is_rectangle(r)
    assert polygon_area(r) == pytest.approx(brute_force_rect_area(pts)) == pytest.approx(2)


def test_min_area_rect_l_shape():
    pts = [[0, 0], [3, 0], [3, 1], [1, 1], [1, 2], [0, 2]]
    r = min_area_rect(pts)
    assert polygon_area(r) == pytest.approx(brute_force_rect_area(pts)) == pytest.approx(6)
    np.testing.assert_allclose(r, [[0, 0], [3, 0], [3, 2], [0, 2]], atol=1e-12)


def test_min_area_rect_collinear_gives_flat_rect():
    r = min_area_rect([[0, 0], [1, 1], [3, 3]])
    assert polygon_area(r) == pytest.approx(0)
    assert {tuple(p) for p in r} == {(0.0, 0.0), (3.0, 3.0)}
    r = min_area_rect([[2, 5]])
    np.testing.assert_array_equal(r, [[2, 5]] * 4)
    with pytest.raises(DegenerateInput):
        min_area_rect(np.zeros((0, 2)))


def test_hull_row_reduction_matches_qhull():
    from scipy.spatial import ConvexHull

    rng = np.random.default_rng(3)
    pts = rng.integers(0, 30, size=(400, 2)).astype(float)
    hull = convex_hull(pts)
    assert polygon_area(hull) == pytest.approx(ConvexHull(pts).volume)
    assert points_in_polygon(pts, hull).all()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=3, max_size=30))
def test_min_area_rect_properties(points):
    pts = np.array(points, dtype=float)
    r = min_area_rect(pts)
    _is_rectangle(r)
    area = polygon_area(r)
    bbox = np.ptp(pts[:, 0]) * np.ptp(pts[:, 1])
    assert area <= bbox + 1e-9
    # containment, expressed in the rectangle's own frame
    e = r[1] - r[0]
    f = r[3] - r[0]
    for v in (e, f):
        L2 = v @ v
        if L2 > 1e-18:
            t = (pts - r[0]) @ v / L2
            assert t.min() >= -1e-9 and t.max() <= 1 + 1e-9
    if area > 1e-9:
        assert area == pytest.approx(brute_force_rect_area(pts), rel=1e-9, abs=1e-9)


# --- polygon_iou -------------------------------------------------------------------

def test_iou_identical_and_disjoint():
    assert polygon_iou(UNIT, UNIT) == pytest.approx(1.0)
    assert polygon_iou(UNIT, UNIT + [5, 5]) == 0.0


def test_iou_half_shift_matches_monte_carlo():
    shifted = UNIT + [0.5, 0]
    iou = polygon_iou(UNIT, shifted)
    assert iou == pytest.approx(1 / 3, abs=1e-12)
    rng = np.random.default_rng(0)
    pts = rng.uniform([0, 0], [1.5, 1], size=(1_000_000, 2))
    in_a = pts[:, 0] <= 1
    in_b = pts[:, 0] >= 0.5
    mc = (in_a & in_b).sum() / (in_a | in_b).sum()
    assert abs(mc - iou) < 1e-2


def test_iou_nonconvex_uses_general_path():
    l_shape = np.array([[0, 0], [3, 0], [3, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    other = l_shape + [0.5, 0]
    iou = polygon_iou(l_shape, other)
    # intersection: [0.5,3]x[0,1] plus [0.5,1]x[1,2] = 2.5 + 0.5; union 4 + 4 - 3
    assert iou == pytest.approx(3 / 5)


def test_iou_degenerate():
    with pytest.raises(DegeneratePolygon):
        polygon_iou(UNIT, [[0, 0], [1, 0], [2, 0], [3, 0]])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_iou_symmetric_and_bounded(seed_a, seed_b):
    a = random_convex_quad(np.random.default_rng(seed_a), 10)
    b = random_convex_quad(np.random.default_rng(seed_b), 10)
    ab, ba = polygon_iou(a, b), polygon_iou(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert 0 <= ab <= 1
    assert polygon_iou(a, a) == pytest.approx(1)


def test_points_in_polygon_boundary_inclusive():
    pts = [[0, 0], [0.5, 0], [0.5, 0.5], [1.5, 0.5], [1, 1.0000001]]
    np.testing.assert_array_equal(points_in_polygon(pts, UNIT), [True, True, True, False, False])
