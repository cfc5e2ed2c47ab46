import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from catchcomp.compose import (
    CompositionEstimate,
    estimate_composition,
    segmented_fraction,
    significance_marker,
    species_mae,
    trip_of,
)
from catchcomp.core import LEAVES, ContractError, GroundTruthOperation, Label
from catchcomp.io import fixture_path, load_composition_table

B, S, Y, N = LEAVES


def test_counting_example():
    est = estimate_composition([S, S, Y, B], "a")
    assert est.percentages == {B: 25.0, S: 50.0, Y: 25.0, N: 0.0}
    assert estimate_composition([N, N], "b").percentages[N] == 100.0
    with pytest.raises(ContractError):
        estimate_composition([], "c")


def test_segmented_fraction_examples():
    assert segmented_fraction(232, 232) == 100.0
    assert round(segmented_fraction(244, 232), 1) == 105.2
    assert segmented_fraction(0, 232) == 0.0
    assert round(segmented_fraction(219, 327), 1) == 67.0
    est = estimate_composition([S] * 244, "2_06", gt_total=232)
    assert est.over_segmented


@given(st.lists(st.sampled_from(LEAVES), min_size=1, max_size=60))
def test_percentages_sum_to_100(labels):
    est = estimate_composition(labels, "x")
    assert sum(est.percentages.values()) == pytest.approx(100.0, abs=1e-9)


def _random_ops(rnd, n):
    truths, ests = [], []
    for i in range(n):
        afo = f"{1 + i % 2}_{i:02d}"
        counts = {leaf: rnd.randint(1, 20) for leaf in LEAVES}
        truths.append(GroundTruthOperation(afo, counts))
        ests.append(estimate_composition(
            [leaf for leaf in LEAVES for _ in range(rnd.randint(0, 20))] or [S], afo))
    return truths, ests


def test_self_mae_is_zero():
    truths, _ = _random_ops(random.Random(1), 6)
    ests = [CompositionEstimate(t.afo_id, t.counts, t.composition()) for t in truths]
    table = species_mae(ests, truths, trip_of)
    for grp in table.groups():
        for cell in table.cells[grp].values():
            assert cell.mae == 0.0 and cell.sd == 0.0


def test_mae_invariant_to_order():
    rnd = random.Random(2)
    truths, ests = _random_ops(rnd, 9)
    a = species_mae(ests, truths, trip_of)
    shuffled = ests[:]
    rnd.shuffle(shuffled)
    b = species_mae(shuffled, truths[::-1], trip_of)
    for grp in a.groups():
        for leaf in LEAVES:
            assert a.cells[grp][leaf].mae == b.cells[grp][leaf].mae
            assert a.cells[grp][leaf].sd == b.cells[grp][leaf].sd


def test_mae_requires_matching_ids():
    truths, ests = _random_ops(random.Random(3), 3)
    with pytest.raises(ContractError):
        species_mae(ests[:2], truths)


def test_fixture_mae_second_trip_bet():
    table = load_composition_table(fixture_path("supp_table_c_yolov9_sam2.csv"))
    res = species_mae(table.estimates["hierarchical"], table.truths, trip_of)
    cell = res.cells["2"][Label.BET]
    assert cell.n == 7
    assert cell.mae == pytest.approx(2.1, abs=0.1)
    assert cell.sd == pytest.approx(2.1, abs=0.1)
    flat = species_mae(table.estimates["flat"], table.truths, trip_of)
    assert flat.cells["all"][Label.BET].mae == pytest.approx(2.3, abs=0.1)
    assert flat.cells["all"][Label.BET].sd == pytest.approx(2.3, abs=0.1)


def test_significance_marker_bands():
    assert significance_marker(0.2) == ""
    assert significance_marker(0.07) == "*"
    assert significance_marker(0.03) == "†"
    assert significance_marker(0.001) == "‡"
    assert significance_marker(0.05) == "*"
