import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catchcomp.motion import (
    BeltState,
    FlowVector,
    MotionConfig,
    belt_state_sequence,
    classify_belt_state,
    estimate_flow,
    majority_filter,
    read_pgm,
    write_pgm,
)
from catchcomp.sim import belt_texture

F, S, R = BeltState.FORWARD, BeltState.STOPPED, BeltState.REVERSED


@pytest.fixture(scope="module")
def texture():
    return belt_texture(3, period=160, height=120)


def test_flow_of_shifted_texture(texture):
    fwd = estimate_flow(texture, np.roll(texture, 6, axis=1))
    assert fwd.dx == pytest.approx(6, abs=0.5)
    assert fwd.dy == pytest.approx(0, abs=0.5)
    back = estimate_flow(texture, np.roll(texture, -4, axis=1))
    assert back.dx == pytest.approx(-4, abs=0.5)
    assert back.dy == pytest.approx(0, abs=0.5)


def test_flow_of_identical_frames_is_exactly_zero(texture):
    assert estimate_flow(texture, texture) == FlowVector(0.0, 0.0)


def test_classify_examples():
    assert classify_belt_state(FlowVector(5, 0)) is F
    assert classify_belt_state(FlowVector(0.2, 0.4)) is S
    assert classify_belt_state(FlowVector(-4, 0)) is R


finite = st.floats(-50, 50, allow_nan=False)


@given(finite, finite, st.floats(0, 2 * np.pi))
def test_negated_axis_swaps_forward_and_reversed(dx, dy, angle):
    axis = (float(np.cos(angle)), float(np.sin(angle)))
    cfg = MotionConfig(forward_axis=axis)
    neg = MotionConfig(forward_axis=(-axis[0], -axis[1]))
    a = classify_belt_state(FlowVector(dx, dy), cfg)
    b = classify_belt_state(FlowVector(dx, dy), neg)
    swap = {F: R, R: F, S: S}
    # exactly-at-threshold projections may round differently under negation
    along = dx * axis[0] + dy * axis[1]
    if abs(abs(along) - cfg.stop_threshold) > 1e-9:
        assert b is swap[a]


def test_identical_frames_are_stopped(texture):
    assert belt_state_sequence([texture] * 5) == [S] * 4


def test_forward_then_static(texture):
    frames = [np.roll(texture, 6 * i, axis=1) for i in range(4)]
    frames += [frames[-1]] * 3
    assert belt_state_sequence(frames) == [F, F, F, S, S, S]


def test_majority_filter_hand_trace():
    assert majority_filter([F, F, S, F, F, S, F, R, F], 3) == [F] * 9
    # three-way tie keeps the center
    assert majority_filter([F, S, R], 3) == [F, S, R]
    with pytest.raises(Exception):
        majority_filter([F], 2)


def test_pgm_round_trip(tmp_path, texture):
    p = tmp_path / "f.pgm"
    write_pgm(p, texture)
    np.testing.assert_array_equal(read_pgm(p), texture)
