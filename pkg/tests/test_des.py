import io

import pytest
from hypothesis import given, strategies as st

from tetra_aoi.des import Engine, EventBudgetExceeded, SchedulingError, StarvationError


def test_time_then_fifo_order():
    eng, seen = Engine(), []
    for t, tag in [(5, "a"), (2, "b"), (5, "c"), (2, "d")]:
        eng.schedule(t, lambda ev: seen.append(ev.data), data=tag)
    eng.run_until(until=10)
    assert seen == ["b", "d", "a", "c"]


def test_priority_breaks_ties_before_seq():
    eng, seen = Engine(), []
    eng.schedule(3, lambda ev: seen.append("late"))
    eng.schedule(3, lambda ev: seen.append("early"), priority=-1)
    eng.run_until(until=4)
    assert seen == ["early", "late"]


@given(st.lists(st.integers(0, 50), min_size=1, max_size=60))
def test_clock_monotone(times):
    eng, seen = Engine(), []
    for t in times:
        eng.schedule(t, lambda ev: seen.append(eng.now))
    eng.run_until(until=100)
    assert seen == sorted(times)


def test_cancel_is_idempotent_and_skips():
    eng, seen = Engine(), []
    h = eng.schedule(1, lambda ev: seen.append(1))
    eng.schedule(2, lambda ev: seen.append(2))
    h.cancel()
    h.cancel()
    assert not h.active and eng.pending() == 1
    eng.run_until(until=5)
    assert seen == [2] and eng.stats.cancelled_skipped == 1


def test_fired_handle_is_inert():
    eng = Engine()
    h = eng.schedule(1, lambda ev: None)
    eng.step()
    assert not h.active
    h.cancel()


def test_schedule_in_past_rejected():
    eng = Engine(start=10)
    with pytest.raises(SchedulingError):
        eng.schedule(9, lambda ev: None)


def test_starvation_and_budget():
    eng = Engine()
    eng.schedule(1, lambda ev: None)
    with pytest.raises(StarvationError):
        eng.run_until(lambda: False)

    eng = Engine()

    def again(ev):
        eng.after(1, again)
    eng.schedule(0, again)
    with pytest.raises(EventBudgetExceeded):
        eng.run_until(lambda: False, max_events=50)


def test_until_leaves_clock_at_horizon():
    eng, seen = Engine(), []
    eng.schedule(3, lambda ev: seen.append(3))
    eng.schedule(7, lambda ev: seen.append(7))
    eng.run_until(until=7)
    assert seen == [3] and eng.now == 7
    eng.run_until(until=8)
    assert seen == [3, 7]


def test_condition_stop():
    eng, seen = Engine(), []
    for t in range(10):
        eng.schedule(t, lambda ev: seen.append(ev.time))
    eng.run_until(lambda: len(seen) == 4)
    assert seen == [0, 1, 2, 3]


def test_trace_lines():
    buf = io.StringIO()
    eng = Engine(trace=buf)
    eng.schedule(4, lambda ev: None, target="MS1", kind="ACCESS")
    eng.run_until(until=5)
    assert buf.getvalue() == "4 MS1 ACCESS\n"
