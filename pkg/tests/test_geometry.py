import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comptrack.geometry import (BBox, area_ratio, clip_box, containment, iou, iou_matrix,
                                tlwh_to_xyah, xyah_to_tlwh)


def raster(box: BBox, n: int, extent: float) -> np.ndarray:
    """Occupancy of cell centers on an n x n grid covering [0, extent)^2."""
    c = (np.arange(n) + 0.5) * extent / n
    xs = (c >= box.x) & (c < box.x2)
    ys = (c >= box.y) & (c < box.y2)
    return ys[:, None] & xs[None, :]


def raster_iou(a, b, n, extent):
    ra, rb = raster(a, n, extent), raster(b, n, extent)
    return (ra & rb).sum() / (ra | rb).sum()


def raster_containment(a, b, n, extent):
    ra, rb = raster(a, n, extent), raster(b, n, extent)
    return (ra & rb).sum() / min(ra.sum(), rb.sum())


def test_iou_examples():
    b = BBox(3, 4, 10, 20)
    assert iou(b, b) == 1.0
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0
    a, c = BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)
    assert raster_iou(a, c, 20, 20) == pytest.approx(1 / 3)
    assert iou(a, c) == pytest.approx(1 / 3, abs=1e-12)


def test_containment_examples():
    assert containment(BBox(2, 2, 3, 3), BBox(0, 0, 10, 10)) == 1.0
    assert containment(BBox(0, 0, 10, 10), BBox(2, 2, 3, 3)) == 1.0
    assert containment(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0
    # 50 overlapping cells over the smaller area of 100
    assert containment(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(0.5)


def test_area_ratio_examples():
    assert area_ratio(BBox(0, 0, 10, 10), BBox(5, 5, 10, 10)) == 1.0
    assert area_ratio(BBox(0, 0, 15, 10), BBox(0, 0, 10, 10)) == pytest.approx(1.5)
    assert area_ratio(BBox(0, 0, 10, 10), BBox(0, 0, 15, 10)) == pytest.approx(1.5)


def test_convert_examples():
    np.testing.assert_allclose(BBox(0, 0, 10, 20).to_xyah(), [5, 10, 0.5, 20])
    np.testing.assert_allclose(BBox(0, 0, 10, 10).to_xyah(), [5, 5, 1, 10])
    assert BBox.from_xyah([5, 10, 0.5, 20]) == BBox(0, 0, 10, 20)


@pytest.mark.parametrize("bad", [[0, 0, 0, 10], [0, 0, 1, 0], [0, 0, -1, 5]])
def test_inverse_conversion_rejects_degenerate(bad):
    with pytest.raises(ValueError):
        xyah_to_tlwh(bad)


@pytest.mark.parametrize("w,h", [(0, 1), (1, 0), (-2, 3)])
def test_bbox_rejects_nonpositive_size(w, h):
    with pytest.raises(ValueError):
        BBox(0, 0, w, h)


def test_bbox_rejects_nan():
    with pytest.raises(ValueError):
        BBox(float("nan"), 0, 1, 1)


coords = st.floats(-500, 500, allow_nan=False)
sizes = st.floats(0.5, 300, allow_nan=False)
boxes = st.builds(BBox, coords, coords, sizes, sizes)


@given(boxes)
def test_xyah_round_trip(b):
    np.testing.assert_allclose(xyah_to_tlwh(tlwh_to_xyah(b.tlwh())), b.tlwh(), rtol=1e-9, atol=1e-9)


@given(boxes, boxes)
def test_overlap_properties(a, b):
    assert iou(a, b) == pytest.approx(iou(b, a))
    assert 0.0 <= iou(a, b) <= containment(a, b) + 1e-12 <= 1.0 + 1e-12
    assert area_ratio(a, b) == area_ratio(b, a) >= 1.0


@settings(max_examples=60)
@given(st.lists(boxes, min_size=1, max_size=4), st.lists(boxes, min_size=1, max_size=4))
def test_iou_matrix_matches_scalar(la, lb):
    m = iou_matrix(la, lb)
    for i, a in enumerate(la):
        for j, b in enumerate(lb):
            assert m[i, j] == pytest.approx(iou(a, b), abs=1e-12)


def test_integer_boxes_equal_raster_exactly(rng):
    n = extent = 40
    for _ in range(200):
        x, y = rng.integers(0, 30, 2)
        w, h = rng.integers(1, extent - max(x, y) + 1, 2)
        x2, y2 = rng.integers(0, 30, 2)
        w2, h2 = rng.integers(1, extent - max(x2, y2) + 1, 2)
        a, b = BBox(x, y, w, h), BBox(x2, y2, w2, h2)
        if iou(a, b) == 0:
            assert raster_iou(a, b, n, extent) == 0
            continue
        assert iou(a, b) == pytest.approx(raster_iou(a, b, n, extent), abs=1e-12)
        assert containment(a, b) == pytest.approx(raster_containment(a, b, n, extent), abs=1e-12)


def test_continuous_boxes_within_raster_tolerance(rng):
    n, extent = 1000, 1.0
    # each box edge can land up to one cell off
    tol = 4.0 / n
    for _ in range(100):
        x, y, x2, y2 = rng.uniform(0, 0.3, 4)
        w, h, w2, h2 = rng.uniform(0.3, 0.7, 4)
        a, b = BBox(x, y, w, h), BBox(x2, y2, w2, h2)
        assert abs(iou(a, b) - raster_iou(a, b, n, extent)) < tol
        assert abs(containment(a, b) - raster_containment(a, b, n, extent)) < tol


def test_clip_box():
    assert clip_box(BBox(-5, -5, 10, 10), 100, 100) == BBox(0, 0, 5, 5)
    assert clip_box(BBox(200, 0, 10, 10), 100, 100) is None
