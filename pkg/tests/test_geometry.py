import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibcd.errors import InvalidConfig, InvalidGeometry
from ibcd.geometry import (Rect, generate_mask_set, grid_anchors, initial_mask_side,
                           mask_side_for_patch, mask_tensor, max_coverable_patch,
                           rect_covers, rect_intersection, rect_intersects)
from ibcd.oracles import coverage_oracle


def test_rect_closed_interval_sizes():
    r = Rect(2, 3, 5, 3)
    assert (r.width, r.height, r.area) == (4, 1, 4)
    assert Rect.square(1, 1, 3) == Rect(1, 1, 3, 3)


def test_rect_predicates():
    a, b = Rect(0, 0, 4, 4), Rect(4, 4, 6, 6)
    assert rect_intersects(a, b)
    assert rect_intersection(a, b) == Rect(4, 4, 4, 4)
    assert not rect_intersects(a, Rect(5, 0, 6, 4))
    assert rect_intersection(a, Rect(5, 0, 6, 4)) is None
    assert rect_covers(a, Rect(1, 1, 4, 4)) and not rect_covers(a, b)


def test_mask_tensor_zeroes_region():
    m = mask_tensor(Rect(1, 0, 2, 1), 4, 3)
    assert m.shape == (3, 4)
    assert m.sum() == 12 - 4
    assert (m[0:2, 1:3] == 0).all()


@pytest.mark.parametrize("length,eta,stride,expected", [
    (32, 16, 5, [0, 5, 10, 15, 16]),
    (10, 4, 3, [0, 3, 6]),
    (7, 7, 2, [0]),
    (8, 3, 1, [0, 1, 2, 3, 4, 5]),
])
def test_grid_anchors_clamp_last(length, eta, stride, expected):
    assert grid_anchors(length, eta, stride) == expected


def test_mask_set_counts_and_order():
    ms = generate_mask_set(32, 32, 16, 5)
    assert len(ms) == 25
    assert ms[0] == Rect(0, 0, 15, 15)
    assert ms[1] == Rect(5, 0, 20, 15)
    assert ms[-1] == Rect(16, 16, 31, 31)
    assert ms.array.shape == (25, 4)
    assert not ms.array.flags.writeable
    assert len(generate_mask_set(32, 32, 20, 5)) == 16


def test_mask_set_rejects_bad_geometry():
    with pytest.raises(InvalidGeometry):
        generate_mask_set(8, 8, 9, 1)
    with pytest.raises(InvalidGeometry):
        generate_mask_set(8, 8, 0, 1)
    with pytest.raises(InvalidGeometry):
        generate_mask_set(8, 8, 4, 0)


def test_subset_keeps_metadata():
    ms = generate_mask_set(12, 12, 4, 4)
    sub = ms.subset(ms.masks[:3])
    assert len(sub) == 3 and sub.eta == 4 and sub.array.shape == (3, 4)
    assert len(ms.subset([])) == 0


def test_coverage_bound_helpers():
    assert max_coverable_patch(16, 5) == 12
    assert max_coverable_patch(3, 5) == 0
    assert mask_side_for_patch(12, 5) == 16
    assert initial_mask_side(32, 32, 5) == 20
    assert initial_mask_side(32, 20, 1) == 10
    with pytest.raises(InvalidConfig):
        initial_mask_side(8, 8, 6)


def test_coverage_frozen_cases():
    ok = coverage_oracle(generate_mask_set(12, 12, 5, 3), 3, 12, 12)
    assert ok.covered and ok.witness == Rect(0, 0, 4, 4)
    bad = coverage_oracle(generate_mask_set(12, 12, 5, 3), 4, 12, 12)
    assert not bad.covered and bad.counterexample == Rect(2, 0, 5, 3)


@given(W=st.integers(4, 20), H=st.integers(4, 20), stride=st.integers(1, 6), data=st.data())
def test_grid_covers_every_patch_up_to_bound(W, H, stride, data):
    eta = data.draw(st.integers(1, min(W, H)))
    v = max_coverable_patch(eta, stride)
    ms = generate_mask_set(W, H, eta, stride)
    assert all(m.inside(W, H) and m.width == eta for m in ms)
    if v >= 1:
        assert coverage_oracle(ms, v, W, H).covered


@given(W=st.integers(6, 20), stride=st.integers(2, 5), data=st.data())
def test_bound_is_tight_when_grid_is_regular(W, stride, data):
    # without the clamped final anchor the bound is attained exactly
    eta = data.draw(st.integers(stride, W))
    if (W - eta) % stride or W - eta < stride:
        return
    v = max_coverable_patch(eta, stride) + 1
    assert not coverage_oracle(generate_mask_set(W, W, eta, stride), v, W, W).covered
