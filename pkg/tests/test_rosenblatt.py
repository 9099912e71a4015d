import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from umival.models import MarkovKernel, random_kernel, sample_datapoint
from umival.oracle import exact_z_cdf_iid
from umival.rosenblatt import (
    ZSequence,
    continuize,
    interpolated_cdf_eval,
    open_uniforms,
    rosenblatt_transform,
    trace_digest,
)
from umival.stattests import ks_test
from umival.types import TraceStep

from conftest import make_trace

open_unit = st.floats(0.0, 1.0, exclude_min=True, exclude_max=True)


def test_continuize_values():
    assert continuize(1, 0.5) == 0.5
    assert continuize(3, 0.25) == 2.25
    for v in (0.0, 1.0):
        with pytest.raises(ValueError):
            continuize(2, v)


@given(st.integers(1, 10_000), st.floats(2.0**-30, 1.0, exclude_max=True))
def test_continuize_ceiling(token, v):
    assert math.ceil(continuize(token, v)) == token


def test_cdf_eval_hand_value():
    step = TraceStep(2, 0.2, 0.3, (0.2, 0.3, 0.5))
    assert interpolated_cdf_eval(step, 0.5) == pytest.approx(0.35)
    assert interpolated_cdf_eval(TraceStep(1, 0.0, 1.0), 0.5) == 0.5


def test_cdf_eval_endpoints():
    step = TraceStep(2, 0.2, 0.3)
    assert interpolated_cdf_eval(step, 1e-12) == pytest.approx(0.2)
    assert interpolated_cdf_eval(step, 1 - 1e-12) == pytest.approx(0.5)


def test_cdf_eval_degenerate():
    with pytest.raises(ValueError):
        interpolated_cdf_eval(TraceStep(2, 0.5, 0.0), 0.5)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), open_unit, open_unit)
def test_z_monotone_in_v_and_token(xs, v1, v2):
    p = np.array(xs) / np.sum(xs)
    cum = np.concatenate([[0.0], np.cumsum(p)[:-1]])
    lo, hi = sorted((v1, v2))
    for k in range(p.size):
        step = TraceStep(k + 1, cum[k], p[k])
        if hi - lo > 1e-9:
            assert interpolated_cdf_eval(step, lo) < interpolated_cdf_eval(step, hi)
        if k + 1 < p.size:
            nxt = TraceStep(k + 2, cum[k + 1], p[k + 1])
            assert interpolated_cdf_eval(step, hi) <= interpolated_cdf_eval(nxt, lo) + 1e-15


def test_open_uniforms_range_and_prefix():
    u = open_uniforms([1, 2], 10_000)
    assert u.min() > 0.0 and u.max() < 1.0
    np.testing.assert_array_equal(open_uniforms([1, 2], 10), u[:10])


def test_one_hot_trace_gives_raw_uniforms():
    tr = make_trace([1] * 20, [0.0] * 20, [1.0] * 20)
    z = rosenblatt_transform(tr, seed=5, point_key=9)
    np.testing.assert_array_equal(z.values, open_uniforms([5, 9], 20))


def test_transform_deterministic(two_state):
    _, tr = sample_datapoint(two_state, 100, seed=1)
    a = rosenblatt_transform(tr, seed=7)
    b = rosenblatt_transform(tr, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, rosenblatt_transform(tr, seed=8).values)


def test_z_depends_only_on_cum_and_p():
    a = make_trace([2, 1], [0.2, 0.0], [0.3, 0.2], pmfs=np.array([[0.2, 0.3, 0.5], [0.2, 0.3, 0.5]]))
    b = make_trace([2, 1], [0.2, 0.0], [0.3, 0.2])
    np.testing.assert_array_equal(rosenblatt_transform(a, 3).values, rosenblatt_transform(b, 3).values)
    assert trace_digest(a) == trace_digest(b)


def test_degenerate_steps_excluded():
    tr = make_trace([1, 3, 2], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5])
    z = rosenblatt_transform(tr, 0)
    assert len(z) == 2 and z.source_len == 3
    assert z.degenerate_steps.tolist() == [1]


@given(st.integers(0, 2**32 - 1))
def test_values_strictly_inside_unit_interval(seed):
    k = random_kernel(np.random.default_rng(seed), 5, 1, 0.3)
    _, tr = sample_datapoint(k, 300, seed)
    z = rosenblatt_transform(tr, seed)
    assert np.all((z.values > 0) & (z.values < 1))


def test_zsequence_of():
    z = ZSequence.of([0.1, 0.2])
    assert len(z) == 2 and z.degenerate_steps.size == 0


def test_same_model_ks_calibration():
    # order-0 source traced under itself: z is exactly uniform
    passes = 0
    for trial in range(200):
        rng = np.random.default_rng(trial)
        k = MarkovKernel.from_rows(0, 6, rng.dirichlet(np.ones(6)))
        _, tr = sample_datapoint(k, 5000, seed=trial)
        passes += ks_test(rosenblatt_transform(tr, trial), p_min=0.05).passed
    assert passes >= 0.93 * 200


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
def test_exact_cdf_identity_for_matching_model(xs):
    p = np.array(xs) / np.sum(xs)
    g = exact_z_cdf_iid(p, p)
    np.testing.assert_allclose(g.values, g.positions, atol=1e-12)
