import pytest

from civsim.engine import ClockError, Simulator, ms_to_us, trace_lines


def test_ties_run_in_insertion_order():
    sim = Simulator(0)
    seen = []
    for tag in "abc":
        sim.schedule(5.0, seen.append, tag)
    sim.schedule(1.0, seen.append, "first")
    sim.run()
    assert seen == ["first", "a", "b", "c"]
    assert sim.now == ms_to_us(5.0) and sim.events_run == 4


def test_clock_never_runs_backwards():
    sim = Simulator(0)
    with pytest.raises(ClockError):
        sim.schedule(-1.0, print)
    sim.schedule(10.0, lambda: None)
    sim.run()
    with pytest.raises(ClockError):
        sim.queue.push(5, print)


def test_run_until_leaves_later_events():
    sim = Simulator(0)
    seen = []
    sim.schedule(1.0, seen.append, 1)
    sim.schedule(3.0, seen.append, 3)
    sim.run(until_us=2000)
    assert seen == [1] and len(sim.queue) == 1


def test_trace_lines_are_json():
    sim = Simulator(0)
    sim.schedule(1.5, sim.log, "a", "ring", "c1")
    sim.run()
    assert trace_lines(sim.trace) == ['{"endpoint": "a", "event": "ring", "payload": "c1", "t_ms": 1.5}']


def test_trace_off_records_nothing():
    sim = Simulator(0, trace=False)
    sim.log("a", "ring")
    assert sim.trace is None
