import numpy as np
import pytest
from hypothesis import given, strategies as st

from umival.types import (
    BatteryConfig,
    Dataset,
    TokenSequence,
    TraceError,
    TraceStep,
    TraceMeta,
    DataPointTrace,
    UmiConfig,
    Vocabulary,
    as_prob_vector,
    validate_trace,
)

from conftest import make_trace


def test_vocabulary_needs_two_tokens():
    with pytest.raises(ValueError):
        Vocabulary(1)
    assert Vocabulary(2).contains(2)
    assert not Vocabulary(2).contains(0)


def test_token_sequence_range_and_nonempty():
    assert len(TokenSequence.of([1, 2, 3], 3)) == 3
    with pytest.raises(ValueError):
        TokenSequence.of([], 3)
    with pytest.raises(ValueError):
        TokenSequence.of([1, 4], 3)


def test_validate_consistent_step():
    assert validate_trace(make_trace([2], [0.2], [0.3])) == []


def test_validate_overshoot():
    out = validate_trace(make_trace([1], [0.9], [0.3]))
    assert len(out) == 1 and out[0].step == 0
    assert "> 1" in out[0].message


def test_validate_token_range():
    out = validate_trace(make_trace([5], [0.0], [0.5]))
    assert any("out of range" in v.message for v in out)


def test_validate_reports_every_step():
    out = validate_trace(make_trace([1, 5, 1], [0.9, 0.0, 0.95], [0.3, 0.5, 0.3]))
    assert sorted({v.step for v in out}) == [0, 1, 2]


def test_validate_within_tolerance():
    assert validate_trace(make_trace([3], [0.5], [0.5 + 5e-7])) == []


def test_validate_pmf_consistency():
    pmfs = np.array([[0.2, 0.3, 0.5]])
    assert validate_trace(make_trace([2], [0.2], [0.3], pmfs=pmfs)) == []
    bad = validate_trace(make_trace([2], [0.25], [0.3], pmfs=pmfs))
    assert any("partial sum" in v.message for v in bad)
    bad = validate_trace(make_trace([2], [0.2], [0.35], pmfs=pmfs))
    assert any("pmf entry" in v.message for v in bad)


def test_trace_from_steps_round_trip():
    steps = [TraceStep(1, 0.0, 0.5, (0.5, 0.5)), TraceStep(2, 0.5, 0.5, (0.5, 0.5))]
    tr = DataPointTrace.from_steps(steps, TraceMeta(2))
    assert tr.steps == steps
    assert tr.tokens.flags.writeable is False


def test_degenerate_steps():
    tr = make_trace([1, 2], [0.0, 0.5], [0.5, 0.0])
    assert tr.degenerate_steps.tolist() == [1]
    assert tr.step(1).degenerate


def test_dataset_nonempty():
    with pytest.raises(ValueError):
        Dataset(())


def test_prob_vector_renormalizes():
    p = as_prob_vector([0.2, 0.3, 0.5000004])
    assert abs(p.sum() - 1.0) < 1e-15
    with pytest.raises(TraceError):
        as_prob_vector([0.2, 0.3, 0.6])
    with pytest.raises(TraceError):
        as_prob_vector([1.2, -0.2])


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20).filter(lambda xs: sum(xs) > 0))
def test_renormalization_idempotent(xs):
    p = np.array(xs) / np.sum(xs)
    once = as_prob_vector(p)
    twice = as_prob_vector(once)
    np.testing.assert_allclose(once, twice, rtol=0, atol=1e-15)


def test_config_validation():
    UmiConfig()
    for bad in (dict(epsilon=0), dict(alpha=-1), dict(p_min=1.0), dict(p_min=0.0), dict(seed=-1),
                dict(branch_rule="x"), dict(battery=BatteryConfig(aggregation="max"))):
        with pytest.raises(ValueError):
            UmiConfig(**bad)


def test_config_defaults():
    cfg = UmiConfig()
    assert (cfg.epsilon, cfg.alpha, cfg.p_min, cfg.divergence.value) == (0.05, 0.1, 0.01, "kl")
    b = cfg.battery
    assert (b.serial_d, b.permutation_t, b.max_t, b.gap_a, b.gap_b, b.gap_t, b.runs_lump) == (8, 3, 3, 0.0, 0.5, 5, 6)
