import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bev_enumerate
from stackdr import bev
from stackdr.errors import DistanceExceedsRange, InfeasibleWindow
from stackdr.scenario import BevSpec

I3 = BevSpec("i3", 0.5148, 33.0, 7.0, 114.0)
MODEL_S = BevSpec("S", 0.1035, 75.0, 11.5, 259.0)


def problem(price, t_req, t_max, soc=None, spec=I3, omega=5.0, theta=0.1, slots=None):
    price = np.asarray(price, float)
    n = price.size
    if soc is None:
        soc = spec.battery_kwh - t_req * spec.rated_kw
    return bev.BevProblem(spec=spec, home_slots=tuple(range(n)) if slots is None else tuple(slots),
                          soc_arrival=soc, t_req=t_req, t_max=t_max,
                          omega=np.full(n, omega), theta=theta, price=price)


@pytest.mark.parametrize("spec,distance,hours", [(I3, 0, 0), (I3, 114, 5), (MODEL_S, 259, 7), (I3, 30, 2)])
def test_required_hours(spec, distance, hours):
    assert bev.required_hours(spec, distance) == hours


def test_arrival_soc_after_30_miles():
    assert bev.arrival_soc(I3, 30) == pytest.approx(33 - 30 * 33 / 114)


def test_distance_beyond_range():
    with pytest.raises(DistanceExceedsRange):
        bev.required_hours(I3, 120)


def test_objective_terms():
    p = problem(np.zeros(2), t_req=0, t_max=2)
    assert bev.bev_objective(p, [1, 0]) == pytest.approx(32.55)
    assert bev.bev_objective(p, [-1, 0]) == pytest.approx(-37.45)
    assert bev.bev_objective(p, [0, 0]) == 0


def test_forced_schedule():
    sch = bev.optimize_schedule(problem(np.arange(5.0), t_req=5, t_max=5, soc=0.0, spec=BevSpec("x", 1, 35, 7, 100)))
    np.testing.assert_array_equal(sch.s, [1, 1, 1, 1, 1])


def test_cheapest_slots():
    p = problem([3, 1, 2, 5, 4], t_req=2, t_max=2)
    sch = bev.optimize_schedule(p)
    np.testing.assert_array_equal(sch.s, [0, 1, 1, 0, 0])
    value, _ = bev_enumerate(p.price, p.omega, p.theta, 7, 33, p.soc_arrival, p.home_slots, 2, 2, 5)
    assert sch.objective == pytest.approx(value, abs=1e-9)


def test_arbitrage_cycle():
    p = problem([0.5, 12, 0.6, 0.7], t_req=1, t_max=3)
    sch = bev.optimize_schedule(p)
    np.testing.assert_array_equal(sch.s, [1, -1, 1, 0])
    assert sch.objective == pytest.approx(103.95, abs=1e-9)
    assert bev.bev_objective(p, [1, 0, 0, 0]) == pytest.approx(29.05)


def test_wrapped_window():
    price = np.full(24, 10.0)
    price[2] = 1.0
    p = problem(price, t_req=1, t_max=1, slots=list(range(20, 24)) + list(range(0, 5)))
    sch = bev.optimize_schedule(p)
    assert sch.s[2] == 1 and sch.s.sum() == 1


def test_window_too_short():
    with pytest.raises(InfeasibleWindow):
        bev.optimize_schedule(problem(np.zeros(2), t_req=3, t_max=3, soc=5.0))


def test_uncontrolled():
    price = np.zeros(24)
    p = problem(price, t_req=3, t_max=3, slots=list(range(18, 24)) + list(range(0, 7)))
    s = bev.uncontrolled_schedule(p).s
    assert set(np.flatnonzero(s)) == {18, 19, 20}
    assert not bev.uncontrolled_schedule(problem(price, 0, 0, slots=[18, 19])).s.any()


@st.composite
def instances(draw, max_window=8):
    battery = draw(st.floats(10, 100))
    rated = draw(st.floats(2, 20))
    # deficit capped so the refill fits inside the longest window
    soc = battery - draw(st.floats(0, 1)) * min(battery, 0.999 * max_window * rated)
    t_req = int(np.ceil((battery - soc) / rated - 1e-9))
    w = draw(st.integers(max(1, t_req), max_window))
    t_max = draw(st.integers(t_req, w))
    start = draw(st.integers(0, 23))
    slots = tuple((start + i) % 24 for i in range(w))
    price = np.array(draw(st.lists(st.floats(0, 30), min_size=24, max_size=24)))
    omega = np.array(draw(st.lists(st.floats(1, 10), min_size=24, max_size=24)))
    spec = BevSpec("v", 1.0, battery, rated, 200.0)
    return bev.BevProblem(spec, slots, soc, t_req, t_max, omega, draw(st.floats(0.01, 0.5)), price)


def check_schedule(p, sch):
    s = sch.s
    outside = np.ones(24, bool)
    outside[list(p.home_slots)] = False
    assert not s[outside].any()
    assert s.sum() == p.t_req and np.abs(s).sum() <= p.t_max
    assert sch.soc_path.min() >= -1e-9 and sch.soc_path.max() <= p.spec.battery_kwh + 1e-9
    if sch.soc_path.size:
        assert sch.soc_path[-1] == pytest.approx(p.spec.battery_kwh, abs=1e-9)
    assert bev.is_feasible(p, s)


@settings(max_examples=150, deadline=None)
@given(instances())
def test_matches_enumeration(p):
    value, s = bev_enumerate(p.price, p.omega, p.theta, p.spec.rated_kw, p.spec.battery_kwh,
                             p.soc_arrival, p.home_slots, p.t_req, p.t_max, 24)
    if value is None:
        with pytest.raises(InfeasibleWindow):
            bev.optimize_schedule(p)
        return
    sch = bev.optimize_schedule(p)
    check_schedule(p, sch)
    assert abs(sch.objective - value) <= 1e-9 * max(1.0, abs(value))
    np.testing.assert_array_equal(sch.s, s)


@settings(max_examples=100, deadline=None)
@given(instances(max_window=16))
def test_no_discharge_without_headroom(p):
    tight = bev.BevProblem(p.spec, p.home_slots, p.soc_arrival, p.t_req, p.t_req, p.omega, p.theta, p.price)
    sch = bev.optimize_schedule(tight)
    assert sch.s.min() >= 0
    check_schedule(tight, sch)
