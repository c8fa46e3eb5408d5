import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tetra_aoi.core import (Discipline, ModelParams, ParameterError, RngStream, SlotClock, Update,
                            exp_sample, is_control_frame, seconds_to_next_slot, slot_to_seconds)


def test_slot_to_seconds_values():
    clk = SlotClock()
    assert slot_to_seconds(clk, 4) == pytest.approx(0.05767, abs=1e-12)
    assert slot_to_seconds(clk, 0) == 0.0
    assert slot_to_seconds(clk, 72) == pytest.approx(1.03806, abs=1e-12)


def test_frame_duration_is_configurable():
    assert slot_to_seconds(SlotClock(frame_dur_ms=56.67), 4) == pytest.approx(0.05667)


@given(st.integers(0, 10**9))
def test_clock_decomposition_round_trips(n):
    c = SlotClock(n)
    assert 0 <= c.slot_in_frame < 4 and 0 <= c.frame_in_multiframe < 18
    assert SlotClock.compose(c.multiframe, c.frame_in_multiframe, c.slot_in_frame) == n
    assert c.is_control_frame == (c.frame_in_multiframe == 17)


@given(st.integers(0, 10**7))
def test_wall_clock_strictly_increasing(n):
    clk = SlotClock()
    assert slot_to_seconds(clk, n + 1) > slot_to_seconds(clk, n)


def test_next_slot_after_time():
    clk = SlotClock()
    assert seconds_to_next_slot(clk, 0.0) == 1
    assert seconds_to_next_slot(clk, clk.slot_dur * 3.5) == 4


def test_control_frame():
    assert is_control_frame(17) and is_control_frame(35)
    assert not is_control_frame(0) and not is_control_frame(18)


def test_negative_slot_rejected():
    with pytest.raises(ParameterError):
        SlotClock(-1)


def test_exp_sample_mean_and_support():
    rng = RngStream(1, 0)
    x = rng.gen.standard_exponential(10**6)
    assert 0.997 <= x.mean() <= 1.003
    r = RngStream(3, 0)
    assert all(exp_sample(r, 0.5) >= 0 for _ in range(1000))


def test_exp_sample_is_reproducible():
    a = [exp_sample(RngStream(42, 0), 2.0) for _ in range(1)]
    r1, r2 = RngStream(42, 0), RngStream(42, 0)
    assert [exp_sample(r1, 2.0) for _ in range(50)] == [exp_sample(r2, 2.0) for _ in range(50)]
    assert a[0] == exp_sample(RngStream(42, 0), 2.0)


@pytest.mark.parametrize("rate", [0.0, -1.0, math.nan])
def test_exp_sample_rejects_bad_rate(rate):
    with pytest.raises(ParameterError):
        exp_sample(RngStream(0), rate)


def test_streams_do_not_perturb_each_other():
    a = RngStream(7, (0, 3, 1)).gen.random(5)
    # drawing from many other streams first changes nothing for this one
    for k in range(20):
        RngStream(7, (0, k, 0)).gen.random(100)
    assert np.array_equal(a, RngStream(7, (0, 3, 1)).gen.random(5))
    assert not np.array_equal(a, RngStream(7, (0, 3, 2)).gen.random(5))


def test_distinct_streams_uncorrelated():
    a = RngStream(5, 1).gen.random(200_000)
    b = RngStream(5, 2).gen.random(200_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_update_gen_time_immutable():
    u = Update(1, 2.5)
    with pytest.raises(AttributeError):
        u.gen_time = 3.0
    u.kind = "downlink-feedback"
    assert u.gen_time == 2.5


def test_update_ids_unique_and_validation():
    assert Update(0, 0).uid != Update(0, 0).uid
    with pytest.raises(ParameterError):
        Update(0, 0.0, n_fragments=0)


def test_discipline_parse_and_capacity():
    assert Discipline.parse("pr-rt") is Discipline.PRRT
    assert Discipline.parse("replace2") is Discipline.REPLACE2
    assert Discipline.FCFS.capacity == math.inf and Discipline.REPLACE2.capacity == 2
    assert Discipline.PR.preemptive and not Discipline.NPR.preemptive
    with pytest.raises(ParameterError):
        Discipline.parse("LIFO")


@pytest.mark.parametrize("kw", [dict(lambda_F=0, mu=1, alpha=0), dict(lambda_F=1, mu=0, alpha=0),
                                dict(lambda_F=1, mu=1, alpha=1.0), dict(lambda_F=1, mu=1, alpha=-0.1)])
def test_model_params_validation(kw):
    with pytest.raises(ParameterError):
        ModelParams(**kw)
