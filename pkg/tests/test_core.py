import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catchcomp.core import (
    LEAVES,
    BBox,
    BitMask,
    ClassScores,
    ContractError,
    Detection,
    GroundTruthOperation,
    Label,
    intersection_area,
    iou_box,
    iou_mask,
    taxonomy_leaves,
    taxonomy_parent,
)

coord = st.floats(-500, 500, allow_nan=False)
size = st.floats(0.5, 300, allow_nan=False)
boxes = st.builds(BBox, coord, coord, size, size)


def test_iou_box_examples():
    a = BBox(0, 0, 10, 10)
    assert iou_box(a, a) == 1.0
    assert iou_box(a, BBox(20, 20, 5, 5)) == 0.0
    assert iou_box(a, BBox(5, 0, 10, 10)) == pytest.approx(1 / 3, abs=1e-5)


def test_bbox_rejects_degenerate():
    with pytest.raises(ContractError):
        BBox(0, 0, 0, 5)
    with pytest.raises(ContractError):
        BBox(0, 0, 5, float("nan"))


def test_xyah_round_trip():
    b = BBox(3, 4, 20, 10)
    assert list(b.to_xyah()) == [13.0, 9.0, 2.0, 10.0]
    back = BBox.from_xyah(b.to_xyah())
    assert back.as_list() == pytest.approx(b.as_list())


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou_box(a, b)
    assert v == iou_box(b, a)
    assert 0.0 <= v <= 1.0
    assert (v == 0.0) == (intersection_area(a, b) == 0.0)


@given(boxes)
def test_iou_self_is_one(a):
    assert iou_box(a, a) == pytest.approx(1.0, abs=1e-12)


def test_iou_mask_examples():
    bits = np.zeros((4, 6), dtype=bool)
    bits[1, 1:5] = True
    a = BitMask(6, 4, bits)
    assert iou_mask(a, a) == 1.0
    other = np.zeros((4, 6), dtype=bool)
    other[3, :] = True
    assert iou_mask(a, BitMask(6, 4, other)) == 0.0
    # 4-pixel run shifted right by two: overlap 2, union 6
    shifted = np.zeros((4, 6), dtype=bool)
    shifted[1, 3:6] = True
    shifted[2, 0] = True
    assert iou_mask(a, BitMask(6, 4, np.roll(bits, 2, axis=1))) == pytest.approx(2 / 6)


def test_iou_mask_contract():
    a = BitMask(2, 2, np.zeros((2, 2)))
    with pytest.raises(ContractError):
        iou_mask(a, a)
    with pytest.raises(ContractError):
        iou_mask(a, BitMask(3, 2, np.ones((2, 3))))


def test_rle_documented_example():
    m = BitMask(4, 2, np.array([[0, 1, 1, 0], [0, 0, 1, 1]]))
    assert m.to_rle() == [1, 2, 3, 2]
    assert BitMask(2, 1, np.array([[1, 1]])).to_rle() == [0, 2]


@given(st.integers(1, 9), st.integers(1, 9), st.data())
def test_rle_round_trip(w, h, data):
    flat = data.draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    m = BitMask(w, h, np.array(flat).reshape(h, w))
    assert BitMask.from_rle(w, h, m.to_rle()) == m
    assert sum(m.to_rle()) == w * h


def test_mask_extent():
    bits = np.zeros((5, 5), dtype=bool)
    bits[1:3, 2:5] = True
    assert BitMask(5, 5, bits).extent() == BBox(2, 1, 3, 2)
    assert BitMask(5, 5, np.zeros((5, 5))).extent() is None


def test_taxonomy():
    assert taxonomy_parent(Label.BET) is Label.BET_OR_YFT
    assert taxonomy_parent(Label.SKJ) is Label.TARGET
    assert taxonomy_parent(Label.TARGET) is None
    for leaf in LEAVES:
        steps, node = 0, leaf
        while taxonomy_parent(node) is not None:
            node, steps = taxonomy_parent(node), steps + 1
        assert steps <= 2
    target = taxonomy_leaves(Label.TARGET)
    nt = taxonomy_leaves(Label.NO_TARGET)
    assert target | nt == set(LEAVES)
    assert not target & nt


def test_class_scores_normalization():
    cs = ClassScores.from_mapping({"BET": 0.2, "SKJ": 0.2, "YFT": 0.4, "NO_TARGET": 0.0})
    assert cs.as_dict() == {"BET": 0.25, "SKJ": 0.25, "YFT": 0.5, "NO_TARGET": 0.0}
    with pytest.raises(ContractError):
        ClassScores.from_mapping({"BET": 0, "SKJ": 0, "YFT": 0, "NO_TARGET": 0})
    with pytest.raises(ContractError):
        ClassScores.from_mapping({"BET": 1.0, "SKJ": 0.0, "YFT": 0.0})


@given(st.lists(st.floats(0.001, 1.0), min_size=4, max_size=4))
def test_normalization_is_idempotent(raw):
    once = ClassScores.from_array(raw)
    assert ClassScores.from_mapping(once.as_dict()) == once


def test_induced_stage_scores():
    s = ClassScores(0.1, 0.6, 0.1, 0.2).to_stage_scores()
    assert s.s1_target == pytest.approx(0.8)
    assert s.s2_skj == pytest.approx(0.75)
    assert s.s3_bet == pytest.approx(0.5)
    assert ClassScores(0, 0, 0, 1).to_stage_scores().s3_bet == 0.5


def test_detection_contracts():
    with pytest.raises(ContractError):
        Detection(0, BBox(0, 0, 5, 5), 1.2)
    bits = np.zeros((10, 10), dtype=bool)
    bits[8:, 8:] = True
    with pytest.raises(ContractError):
        Detection(0, BBox(0, 0, 3, 3), 0.9, mask=BitMask(10, 10, bits))


def test_ground_truth_composition():
    gt = GroundTruthOperation("x", {Label.SKJ: 3, Label.BET: 1})
    assert gt.total == 4
    assert gt.composition()[Label.SKJ] == 75.0
    assert gt.composition()[Label.YFT] == 0.0
    with pytest.raises(ContractError):
        GroundTruthOperation("y", {Label.SKJ: 0})
