import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from igdts.evaluation import center_location_error, overlap_rate, summarize

coord = st.floats(-100, 100)
size = st.floats(0.5, 100)
boxes = st.tuples(coord, coord, size, size)


def test_identical_boxes():
    b = (3, 4, 10, 20)
    assert center_location_error(b, b) == 0
    assert overlap_rate(b, b) == 1


def test_disjoint_boxes():
    assert overlap_rate((0, 0, 10, 10), (20, 20, 5, 5)) == 0
    assert overlap_rate((0, 0, 10, 10), (10, 0, 10, 10)) == 0  # touching edges


def test_half_shift_overlap_is_one_third():
    assert overlap_rate((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)


def test_center_error_three_four_five():
    assert center_location_error((0, 0, 10, 10), (3, 4, 10, 10)) == 5


@given(boxes, boxes)
def test_metrics_symmetric_and_bounded(a, b):
    assert center_location_error(a, b) == center_location_error(b, a)
    o = overlap_rate(a, b)
    assert o == pytest.approx(overlap_rate(b, a), rel=1e-12, abs=1e-15)
    assert 0 <= o <= 1 + 1e-12


def test_contained_box_overlap():
    assert overlap_rate((0, 0, 10, 10), (2, 2, 5, 5)) == pytest.approx(0.25)


def test_summarize_three_frames():
    gt = [(0, 0, 10, 10)] * 3
    tracked = [(0, 0, 10, 10), (5, 0, 10, 10), (3, 4, 10, 10)]
    rep = summarize(tracked, gt)
    np.testing.assert_allclose(rep.cle, [0, 5, 5])
    assert rep.mean_cle == pytest.approx(10 / 3)
    assert rep.overlap[1] == pytest.approx(1 / 3)
    assert rep.mean_overlap == pytest.approx(np.mean(rep.overlap))
    assert rep.n_frames == 3


def test_summarize_length_checks():
    with pytest.raises(ValueError):
        summarize([], [(0, 0, 1, 1)])
    with pytest.raises(ValueError):
        summarize([(0, 0, 1, 1)] * 3, [(0, 0, 1, 1)] * 2)
    assert summarize([(0, 0, 1, 1)], [(0, 0, 1, 1)] * 4).n_frames == 1


def test_report_csv():
    rep = summarize([(0, 0, 10, 10), (5, 0, 10, 10)], [(0, 0, 10, 10)] * 2)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "frame,cle,overlap"
    assert lines[1] == "1,0.0,1.0"
    frame, cle, ov = lines[2].split(",")
    assert frame == "2" and float(cle) == 5.0 and float(ov) == pytest.approx(1 / 3, abs=1e-16)
    assert rep.summary_lines().startswith("mean_cle,2.5\n")
    assert math.isfinite(float(rep.summary_lines().splitlines()[1].split(",")[1]))
