import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from catchcomp.aggregate import (
    MissingScoresError,
    aggregate_flat,
    aggregate_hierarchical,
    label_all,
)
from catchcomp.core import LEAVES, ClassScores, ContractError, Label, StageScores
from catchcomp.io import TrackRecord
from catchcomp.tracker import Observation


def cs(*v):
    return ClassScores(*v)


def test_flat_examples():
    assert aggregate_flat([cs(.1, .7, .15, .05)]).label is Label.SKJ
    two = aggregate_flat([cs(.6, .1, .25, .05), cs(.2, .1, .65, .05)])
    assert two.label is Label.YFT
    assert two.aggregated_scores.YFT == pytest.approx(.45)
    assert aggregate_flat([cs(.25, .25, .25, .25)]).label is Label.BET


def test_hierarchical_examples():
    assert aggregate_hierarchical([StageScores(.9, .8, .1)]).label is Label.SKJ
    assert aggregate_hierarchical([StageScores(.3, .9, .9)]).label is Label.NO_TARGET
    assert aggregate_hierarchical([StageScores(.9, .2, .3)]).label is Label.YFT
    assert aggregate_hierarchical([StageScores(.5, .5, .5)]).label is Label.SKJ


def test_empty_history_rejected():
    with pytest.raises(ContractError):
        aggregate_flat([])


def _record(tid, scores, stage=True):
    obs = tuple(
        Observation(i, 0.9, cs(*s), cs(*s).to_stage_scores() if stage else None)
        for i, s in enumerate(scores)
    )
    return TrackRecord(tid, obs)


def test_label_all_examples():
    assert label_all([], "flat") == []
    tracks = [
        _record(1, [(.7, .1, .1, .1)] * 3),
        _record(2, [(.1, .7, .1, .1)] * 3),
        _record(3, [(.1, .1, .7, .1)] * 3),
        _record(4, [(.1, .1, .1, .7)] * 3),
    ]
    got = [l.label for l in label_all(tracks, "flat")]
    assert got == list(LEAVES)
    assert [l.label for l in label_all(tracks, "hierarchical")] == list(LEAVES)


def test_missing_stage_scores_names_track():
    tracks = [_record(1, [(.7, .1, .1, .1)] * 2), _record(9, [(.7, .1, .1, .1)] * 2, stage=False)]
    with pytest.raises(MissingScoresError) as err:
        label_all(tracks, "hierarchical")
    assert err.value.track_id == 9
    assert "9" in str(err.value)


def test_short_tracks_skipped():
    tracks = [_record(1, [(.7, .1, .1, .1)])]
    assert label_all(tracks, "flat", min_hits=2) == []


score = st.floats(0.01, 1.0)
history = st.lists(st.tuples(score, score, score, score), min_size=1, max_size=12)


@given(history, st.randoms(use_true_random=False))
def test_permutation_invariance(rows, rnd):
    scores = [ClassScores.from_array(r) for r in rows]
    stages = [s.to_stage_scores() for s in scores]
    shuffled = list(range(len(rows)))
    rnd.shuffle(shuffled)
    assert aggregate_flat(scores).label is aggregate_flat([scores[i] for i in shuffled]).label
    assert (aggregate_hierarchical(stages).label
            is aggregate_hierarchical([stages[i] for i in shuffled]).label)


@given(history, st.floats(0.1, 10))
def test_argmax_invariant_to_rescaling(rows, c):
    plain = aggregate_flat([ClassScores.from_array(r) for r in rows]).label
    scaled = [[v * c for v in r] if c <= 1 else [v / c for v in r] for r in rows]
    assert aggregate_flat([ClassScores.from_array(r) for r in scaled]).label is plain


@given(st.sampled_from(range(4)), st.lists(st.tuples(score, score, score, score), min_size=1,
                                            max_size=8))
def test_consistent_frames_give_that_label(k, rows):
    fixed = []
    for r in rows:
        r = [0.9 * v for v in r]
        r[k] = 1.0
        fixed.append(ClassScores.from_array(r))
    assert aggregate_flat(fixed).label is LEAVES[k]


@given(history)
def test_flat_and_hierarchical_agree_on_separable_input(rows):
    scores = [ClassScores.from_array(r) for r in rows]
    flat = aggregate_flat(scores)
    winner = getattr(flat.aggregated_scores, flat.label.value)
    if winner > 0.5:
        hier = aggregate_hierarchical([s.to_stage_scores() for s in scores])
        assert hier.label is flat.label


def test_single_frame_separable_agreement_exhaustive():
    rnd = random.Random(0)
    for _ in range(2000):
        s = ClassScores.from_array([rnd.random() for _ in range(4)])
        flat = aggregate_flat([s])
        if getattr(s, flat.label.value) > 0.5:
            assert aggregate_hierarchical([s.to_stage_scores()]).label is flat.label
