import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logs import LIMITS, random_log
from oracles import polyline_distance_sampled
from greenbench.errors import InvariantError
from greenbench.metrics import (
    TrialLog,
    category1_signals,
    category2_signals,
    category3_error,
    closest_point_on_polyline,
    columns_for,
    composite,
    evaluate,
    sae,
    sci,
)

floats = st.floats(-1e3, 1e3)


def test_sae_examples():
    assert sae([0, 0, 0]) == 0.0
    assert sae([1, -2, 3]) == 6.0
    with pytest.raises(InvariantError):
        sae([])


def test_sci_examples():
    assert sci([2, 2, 2]) == 0.0
    assert sci([0, 1, 3]) == 5.0
    with pytest.raises(InvariantError):
        sci([1.0])


@given(st.lists(floats, min_size=1, max_size=50))
def test_sae_sign_invariant(e):
    assert sae(e) == sae([-x for x in e])
    assert sae(e) >= 0


@given(st.lists(st.integers(-10**6, 10**6), min_size=2, max_size=50), st.integers(-10**6, 10**6))
def test_sci_translation_invariant(u, c):
    # integer data keeps the shifted differences exact
    assert sci(u) == sci([x + c for x in u])


def _log(category, **cols):
    n = len(next(iter(cols.values())))
    base = {name: np.zeros(n) for name in columns_for(category)}
    base["t"] = np.arange(n) * 0.01
    base.update({k: np.asarray(v, float) for k, v in cols.items()})
    return TrialLog(category, 0.01, base, dict(LIMITS))


def test_category1_normalisation():
    log = _log(1, omega_ref_r=[0.2], omega_ref_l=[0.4], tau_r=[400.0], tau_l=[-400.0])
    e, u = category1_signals(log)
    assert e[0] == pytest.approx(0.09375)
    assert u[0] == 1.0


def test_perfect_tracking_has_zero_sae():
    log = _log(1, omega_ref_r=[1, 2, 3], omega_meas_r=[1, 2, 3])
    assert sae(category1_signals(log)[0]) == 0.0


def test_category2_examples():
    log = _log(2, x=[0.3, 1.0], y=[0.4, 0.0], x_teb=[0.0, 1.0], v_cmd=[1.0, 0.0])
    e, u = category2_signals(log, dt=0.1)
    assert e.tolist() == pytest.approx([5.0, 0.0])
    assert u[0] == 1.0


def test_category2_needs_prediction():
    log = TrialLog(2, 0.01, {"t": [0.0], "x": [0.0], "y": [0.0]}, dict(LIMITS))
    with pytest.raises(InvariantError, match="x_teb"):
        category2_signals(log)


def test_category3_examples():
    plan = np.array([[0.0, 0.0], [5.0, 0.0]])
    log = TrialLog(3, 0.01, {"t": [0.0, 0.01], "x": [1.0, 2.0], "y": [0.0, 0.2]}, dict(LIMITS), plan)
    assert category3_error(log).tolist() == pytest.approx([0.0, 0.2])


def test_category3_empty_plan():
    log = TrialLog(3, 0.01, {"t": [0.0], "x": [1.0], "y": [0.0]}, dict(LIMITS), np.zeros((0, 2)))
    with pytest.raises(InvariantError):
        category3_error(log)


@given(st.integers(0, 2**31))
def test_closest_point_matches_sampling_oracle(seed):
    rng = np.random.default_rng(seed)
    poly = rng.uniform(-3, 3, (int(rng.integers(1, 5)), 2))
    pts = rng.uniform(-4, 4, (3, 2))
    nearest, dist = closest_point_on_polyline(poly, pts)
    for p, q, d in zip(pts, nearest, dist):
        assert d == pytest.approx(polyline_distance_sampled(poly, p), abs=1e-6)
        assert math.hypot(*(p - q)) == pytest.approx(d, abs=1e-12)


def test_composite_examples():
    r = composite({1: 0.1}, {1: 7.9}, 1, 10)
    assert r.j1 == pytest.approx(8.0) and r.jt == r.j1
    r = composite({1: 1.0, 2: 3.0}, {1: 1.0, 2: 1.0}, 2, 10)
    assert r.jt == 3.0
    r = composite({1: 1.0, 2: 1.0, 3: 3.0}, {1: 2.0, 2: 2.0}, 3, 10)
    assert r.jt == 3.0


def test_composite_missing_part():
    with pytest.raises(InvariantError, match="SCI_2"):
        composite({1: 1.0, 2: 1.0}, {1: 1.0}, 2, 5)


@pytest.mark.parametrize("category", [1, 2, 3])
def test_identities_on_random_logs(category):
    rng = np.random.default_rng(category)
    for _ in range(100):
        log = random_log(rng, category)
        r = evaluate(log)
        assert r.j1 == r.sae[1] + r.sci[1]
        if category == 2:
            assert r.jt == (r.j1 + r.j2) / 2
        if category == 3:
            assert r.jt == (r.j1 + r.j2 + r.j3) / 3
        assert r.n_samples == len(log)
        assert all(v >= 0 for v in (*r.sae.values(), *r.sci.values(), r.jt))
        _, u1 = category1_signals(log)
        assert np.all((u1 >= 0) & (u1 <= 1))


def test_report_rows_order():
    rng = np.random.default_rng(0)
    names = [k for k, _ in evaluate(random_log(rng, 3, 10)).as_rows()]
    assert names == ["SAE_1", "SAE_2", "SAE_3", "SCI_1", "SCI_2", "J1", "J2", "J3", "JT3", "N"]
    names = [k for k, _ in evaluate(random_log(rng, 2, 10)).as_rows()]
    assert names[-2:] == ["JT2", "N"]


def test_log_validation():
    with pytest.raises(InvariantError):
        TrialLog(4, 0.01, {})
    with pytest.raises(InvariantError):
        TrialLog(1, 0.01, {"t": [0.0, 0.0]})
    with pytest.raises(InvariantError):
        TrialLog(1, 0.01, {"t": [0.0, 1.0], "x": [0.0]})
    log = _log(1, omega_ref_r=[1.0])
    log.limits = {}
    with pytest.raises(InvariantError, match="omega_max"):
        category1_signals(log)
