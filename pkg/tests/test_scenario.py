import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackdr.errors import ConfigError
from stackdr.scenario import (
    default_scenario, from_dict, load_profiles, load_scenario, nominal_aggregate, save_scenario, to_dict,
)


def test_default_grid_and_markup():
    s = default_scenario()
    assert s.grid.slot_count == 24
    assert np.all(s.gen.lam == 1.2)


def test_default_table_values():
    s = default_scenario()
    g1 = s.groups[0]
    assert (g1.min_frac, g1.max_frac) == (0.70, 1.50)
    i3 = s.fleet[0]
    assert (i3.battery_kwh, i3.rated_kw, i3.range_miles) == (33, 7, 114)
    assert s.bev_count == 50


def test_table_shares_accepted():
    s = default_scenario()
    shares = [f.market_share for f in s.fleet]
    assert shares == [0.5148, 0.1035, 0.3817]
    assert sum(shares) == pytest.approx(1.0, abs=1e-9)


def test_zero_theta_rejected():
    cfg = to_dict(default_scenario())
    cfg["groups"][1]["theta"] = 0
    with pytest.raises(ConfigError, match="theta"):
        from_dict(cfg)


@pytest.mark.parametrize("path,value,needle", [
    (("generation", "a"), 0.0, "a"),
    (("generation", "lambda"), 0.9, "lambda"),
    (("grid", "slot_count"), 1, "slot_count"),
    (("epsilon",), 0.0, "epsilon"),
    (("trials",), 0, "trials"),
])
def test_invariant_violations_are_named(path, value, needle):
    cfg = to_dict(default_scenario())
    target = cfg
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(ConfigError, match=needle):
        from_dict(cfg)


def test_shares_must_sum_to_one():
    cfg = to_dict(default_scenario())
    cfg["fleet"][0]["market_share"] = 0.6
    with pytest.raises(ConfigError, match="sum to 1"):
        from_dict(cfg)


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_scenario(bad)


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        from_dict({"trails": 3})


def _one_group(count, nominal):
    cfg = to_dict(default_scenario())
    cfg["groups"] = [{"name": "g", "count": count, "omega": 5.0, "theta": 0.1,
                      "min_frac": 1.0, "max_frac": 1.0, "nominal": nominal, "has_bev": False}]
    cfg["bev_count"] = 0
    return from_dict(cfg)


def test_nominal_aggregate_linear():
    s = _one_group(2, [1.0] * 24)
    np.testing.assert_array_equal(nominal_aggregate(s), np.full(24, 2.0))


def test_nominal_aggregate_empty():
    cfg = to_dict(default_scenario())
    cfg["groups"], cfg["bev_count"] = [], 0
    np.testing.assert_array_equal(nominal_aggregate(from_dict(cfg)), np.zeros(24))


def test_nominal_aggregate_matches_group_totals():
    s = default_scenario()
    total = sum(g.count * g.daily_total for g in s.groups)
    assert nominal_aggregate(s).sum() == pytest.approx(total, rel=1e-12)


def test_profile_shipped():
    prof = load_profiles()["residential-v1"]
    assert len(prof) == 24 and min(prof) > 0


def test_arrays_read_only():
    s = default_scenario()
    with pytest.raises(ValueError):
        s.gen.a[0] = 1.0


def test_histogram_file_inlined(tmp_path):
    (tmp_path / "arr.csv").write_text("# hour,weight\n16,1\n18,3\n")
    cfg = {"behavior": {"arrival": {"family": "histogram", "file": "arr.csv", "low": 16, "high": 20}}}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    s = load_scenario(tmp_path / "s.json")
    assert s.behavior.arrival.params == {"edges": [16, 18, 20], "weights": [1, 3]}


positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(a=positive, b=st.floats(0, 10), lam=st.floats(1, 3), theta=positive,
       lo=st.floats(0, 1), hi=st.floats(1, 3), seed=st.integers(0, 2**64 - 1),
       eps=st.floats(1e-9, 1.0), rounds=st.integers(1, 500))
def test_round_trip(tmp_path_factory, a, b, lam, theta, lo, hi, seed, eps, rounds):
    cfg = to_dict(default_scenario())
    cfg["generation"].update(a=a, b=b, **{"lambda": lam})
    cfg["groups"][0].update(theta=theta, min_frac=lo, max_frac=hi)
    cfg.update(seed=seed, epsilon=eps, max_rounds=rounds)
    s = from_dict(cfg)
    path = tmp_path_factory.mktemp("rt") / "s.json"
    save_scenario(s, path)
    again = load_scenario(path)
    assert json.dumps(to_dict(again), sort_keys=True) == json.dumps(to_dict(s), sort_keys=True)
    save_scenario(again, path.with_name("t.json"))
    assert path.read_bytes() == path.with_name("t.json").read_bytes()
