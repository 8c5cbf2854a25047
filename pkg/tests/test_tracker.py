import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflexnet.tracker import Direction, TrackerState, apply_feedback, at_limit, make_tracker, stalled

directions = st.sampled_from([Direction.UP, Direction.DOWN, Direction.GOOD])


def truthful(value, target):
    return Direction.UP if value < target else Direction.DOWN


def test_good_leaves_value():
    t = make_tracker(0.3, 0.0, 1.0)
    g = apply_feedback(t, Direction.GOOD)
    assert g.value == t.value
    assert g.delta == pytest.approx(t.delta / 2)
    assert g.last_direction is None


def test_up_clamps_at_hi():
    t = TrackerState(0.9, 0.0, 1.0, 0.3, 1e-4, 0.5)
    assert apply_feedback(t, Direction.UP).value == 1.0


def test_hidden_target_example():
    t = TrackerState(0.5, 0.0, 1.0, 0.125, 1e-4, 0.5)
    for n in range(40):
        if abs(t.value - 0.42) <= 1e-3:
            break
        t = apply_feedback(t, truthful(t.value, 0.42))
    assert abs(t.value - 0.42) <= 1e-3


def test_step_rules():
    t = TrackerState(0.5, 0.0, 1.0, 0.1, 1e-4, 0.5)
    up = apply_feedback(t, Direction.UP)
    assert (up.value, up.delta) == pytest.approx((0.6, 0.1))
    again = apply_feedback(up, Direction.UP)
    assert again.delta == pytest.approx(0.2)
    back = apply_feedback(again, Direction.DOWN)
    assert back.delta == pytest.approx(0.2 / 3)


def test_at_limit_examples():
    t = make_tracker(1.0, 0.0, 1.0)
    assert at_limit(t, Direction.UP)
    assert not at_limit(t, Direction.DOWN)
    mid = make_tracker(0.5, 0.0, 1.0)
    assert not at_limit(mid, Direction.UP) and not at_limit(mid, Direction.DOWN)


@settings(max_examples=200, deadline=None)
@given(start=st.floats(0.0, 1.0), seq=st.lists(directions, max_size=60))
def test_clamping(start, seq):
    t = make_tracker(start, 0.0, 1.0)
    for d in seq:
        t = apply_feedback(t, d)
        assert t.lo <= t.value <= t.hi
        assert t.delta_min <= t.delta <= t.delta_max


@settings(max_examples=200, deadline=None)
@given(start=st.floats(0.0, 1.0), seq=st.lists(directions, max_size=40), probe=directions)
def test_at_limit_matches_lookahead(start, seq, probe):
    t = make_tracker(start, 0.0, 1.0)
    for d in seq:
        t = apply_feedback(t, d)
    if probe is Direction.GOOD:
        return
    assert at_limit(t, probe) == (apply_feedback(t, probe).value == t.value)


@settings(max_examples=200, deadline=None)
@given(start=st.floats(0.0, 1.0), first_up=st.booleans(), warmup=st.lists(directions, max_size=10))
def test_alternating_contraction(start, first_up, warmup):
    t = make_tracker(start, 0.0, 1.0)
    for d in warmup:
        t = apply_feedback(t, d)
    if t.last_direction is None:
        t = apply_feedback(t, Direction.UP if first_up else Direction.DOWN)
    bound = math.ceil(math.log(t.delta_max / t.delta_min, 3))
    steps = 0
    while t.delta > t.delta_min:
        reverse = Direction.DOWN if t.last_direction is Direction.UP else Direction.UP
        t = apply_feedback(t, reverse)
        steps += 1
    assert steps <= bound


def test_convergence_band_over_random_targets():
    rng = np.random.default_rng(11)
    for target in rng.uniform(0, 1, size=500):
        t = make_tracker(rng.uniform(0, 1), 0.0, 1.0)
        entered = None
        for n in range(400):
            t = apply_feedback(t, truthful(t.value, target))
            # entering means settling: inside the band with the step near its floor,
            # not a large step that happens to pass through the band
            settled = abs(t.value - target) <= 2 * t.delta_min and t.delta <= 2 * t.delta_min
            if entered is None and settled:
                entered = n
            elif entered is not None:
                assert abs(t.value - target) <= 4 * t.delta_min
        assert entered is not None


def test_stalled_requires_floor_and_reversal():
    t = TrackerState(0.5, 0.0, 1.0, 1e-4, 1e-4, 0.5, Direction.UP)
    assert stalled(t, Direction.DOWN)
    assert not stalled(t, Direction.UP)
    assert not stalled(TrackerState(0.5, 0.0, 1.0, 1e-3, 1e-4, 0.5, Direction.UP), Direction.DOWN)


def test_invalid_state_rejected():
    with pytest.raises(ValueError):
        TrackerState(2.0, 0.0, 1.0, 0.1, 1e-4, 0.5)
    with pytest.raises(ValueError):
        TrackerState(0.5, 1.0, 1.0, 0.1, 1e-4, 0.5)
