import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from umival.models import (
    ChainConvergenceError,
    MarkovKernel,
    Transform,
    UnknownContextError,
    context_transition_matrix,
    decode_context,
    encode_context,
    next_token_pmf,
    random_kernel,
    ranked_kernel,
    reversed_kernel,
    sample_datapoint,
    sample_tokens,
    stationary_distribution,
    trace_under_model,
    train_markov,
    transform_kernel,
    transform_pmf,
)
from umival.types import validate_trace


def test_order0_ignores_context(unigram):
    np.testing.assert_array_equal(next_token_pmf(unigram, [3, 1, 2]), [0.2, 0.3, 0.5])
    np.testing.assert_array_equal(next_token_pmf(unigram, []), [0.2, 0.3, 0.5])


def test_order1_lookup(two_state):
    np.testing.assert_array_equal(next_token_pmf(two_state, [2, 2, 1]), [0.9, 0.1])


def test_order2_uses_last_two():
    rows = {ctx: np.eye(3)[(ctx[0] + ctx[1]) % 3] * 0.5 + 0.5 / 3 for ctx in
            [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]}
    k = MarkovKernel.from_rows(2, 3, rows)
    np.testing.assert_allclose(next_token_pmf(k, [3, 1, 2]), rows[(1, 2)])


def test_short_context_left_padded(two_state):
    np.testing.assert_array_equal(next_token_pmf(two_state, []), two_state.row((1,)))


def test_sparse_kernel_unknown_context():
    k = MarkovKernel.from_rows(1, 2, {(1,): [0.5, 0.5]})
    with pytest.raises(UnknownContextError):
        next_token_pmf(k, [2])
    k2 = MarkovKernel.from_rows(1, 2, {(1,): [0.5, 0.5]}, default_row=[0.1, 0.9])
    np.testing.assert_array_equal(next_token_pmf(k2, [2]), [0.1, 0.9])


def test_context_codec_round_trip():
    for c in range(27):
        assert encode_context(decode_context(c, 3, 3), 3, 3) == c
    assert encode_context((1, 3), 3, 2) == 2  # oldest token is the high digit


def test_one_hot_source():
    k = MarkovKernel.from_rows(0, 3, [1.0, 0.0, 0.0])
    toks, tr = sample_datapoint(k, 4, seed=0)
    assert toks.tokens == (1, 1, 1, 1)
    assert tr.cum_before.tolist() == [0.0] * 4 and tr.p_tok.tolist() == [1.0] * 4


def test_sampling_deterministic(two_state):
    a = sample_datapoint(two_state, 50, seed=3)
    b = sample_datapoint(two_state, 50, seed=3)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].cum_before, b[1].cum_before)
    assert sample_datapoint(two_state, 50, seed=4)[0] != a[0]


def test_uniform_frequencies_within_3_sigma():
    k = MarkovKernel.from_rows(0, 4, [0.25] * 4)
    toks = sample_tokens(k, 10_000, seed=11)
    freq = np.bincount(toks, minlength=5)[1:] / 10_000
    sigma = np.sqrt(0.25 * 0.75 / 10_000)
    assert np.all(np.abs(freq - 0.25) <= 3 * sigma)


def test_trace_hand_values(unigram):
    tr = trace_under_model([2], unigram)
    assert tr.cum_before[0] == pytest.approx(0.2) and tr.p_tok[0] == pytest.approx(0.3)


def test_trace_flags_unsupported_token():
    k = MarkovKernel.from_rows(0, 3, [0.5, 0.5, 0.0])
    tr = trace_under_model([1, 3, 2], k)
    assert tr.degenerate_steps.tolist() == [1]


def test_trace_out_of_vocab(unigram):
    with pytest.raises(ValueError):
        trace_under_model([4], unigram)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_sampled_trace_reproduced_bit_for_bit(V, m, seed):
    k = random_kernel(np.random.default_rng(seed), V, m, 0.5)
    toks, tr = sample_datapoint(k, 200, seed)
    again = trace_under_model(toks, k)
    np.testing.assert_array_equal(tr.cum_before, again.cum_before)
    np.testing.assert_array_equal(tr.p_tok, again.p_tok)
    assert validate_trace(tr) == []
    assert np.all(tr.p_tok > 0)


def test_train_counts():
    k = train_markov([(1, 2, 1, 2, 1)], order=1)
    np.testing.assert_array_equal(k.row((1,)), [0.0, 1.0])
    np.testing.assert_array_equal(k.row((2,)), [1.0, 0.0])


def test_train_laplace_unseen_is_uniform():
    k = train_markov([(1, 1, 1)], order=1, laplace=1.0, vocab_size=3)
    np.testing.assert_allclose(k.row((3,)), [1 / 3] * 3)
    np.testing.assert_allclose(k.row((1,)), [3 / 5, 1 / 5, 1 / 5])


def test_train_unigram():
    k = train_markov([(1, 2, 2, 3), (3, 3)], order=0)
    np.testing.assert_allclose(k.row(()), [1 / 6, 2 / 6, 3 / 6])


def test_train_order_too_large():
    with pytest.raises(ValueError):
        train_markov([(1, 2)], order=3)


def test_stationary_symmetric():
    k = MarkovKernel.from_rows(1, 2, {(1,): [0.5, 0.5], (2,): [0.5, 0.5]})
    np.testing.assert_allclose(stationary_distribution(k).probs, [0.5, 0.5], atol=1e-12)


def test_stationary_hand_solution(two_state):
    pi = stationary_distribution(two_state)
    assert pi[(1,)] == pytest.approx(5 / 6, abs=1e-12)
    assert pi[(2,)] == pytest.approx(1 / 6, abs=1e-12)


def test_stationary_identity_kernel_fails():
    with pytest.raises(ChainConvergenceError):
        stationary_distribution(MarkovKernel.from_rows(1, 2, {(1,): [1.0, 0.0], (2,): [0.0, 1.0]}))


def test_stationary_periodic_fails():
    with pytest.raises(ChainConvergenceError):
        stationary_distribution(MarkovKernel.from_rows(1, 2, {(1,): [0.0, 1.0], (2,): [1.0, 0.0]}))


def test_stationary_with_transient_state():
    k = MarkovKernel.from_rows(1, 3, {(1,): [0.0, 0.5, 0.5], (2,): [0.0, 0.3, 0.7], (3,): [0.0, 0.6, 0.4]})
    pi = stationary_distribution(k)
    assert pi[(1,)] == 0.0
    assert pi.probs.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_stationary_residual(V, m, seed):
    k = random_kernel(np.random.default_rng(seed), V, m)
    pi = stationary_distribution(k, tol=1e-12)
    T = context_transition_matrix(k)
    assert np.abs(pi.probs @ T - pi.probs).sum() <= 1e-12
    assert abs(pi.probs.sum() - 1.0) <= 1e-9
    assert np.all(pi.probs >= 0)


def test_temperature_identity_and_hand_value():
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(transform_pmf(p, Transform("temperature", 1.0)), p, atol=1e-15)
    out = transform_pmf([0.9, 0.1], Transform("temperature", 0.5))
    np.testing.assert_allclose(out, [0.81 / 0.82, 0.01 / 0.82], atol=1e-12)
    assert out[0] == pytest.approx(0.9878, abs=1e-4)


def test_top_p_prefix():
    np.testing.assert_allclose(transform_pmf([0.5, 0.4, 0.1], Transform("top_p", 0.9)), [5 / 9, 4 / 9, 0.0])
    np.testing.assert_allclose(transform_pmf([0.5, 0.4, 0.1], Transform("top_p", 0.91)), [0.5, 0.4, 0.1])
    np.testing.assert_allclose(transform_pmf([0.5, 0.4, 0.1], Transform("top_p", 0.3)), [1.0, 0.0, 0.0])


def test_top_k_and_ties():
    np.testing.assert_allclose(transform_pmf([0.1, 0.6, 0.3], Transform("top_k", 2)), [0.0, 2 / 3, 1 / 3])
    # tie between tokens 1 and 3 goes to the lower id
    np.testing.assert_array_equal(transform_pmf([0.4, 0.2, 0.4], Transform("top_k", 1)), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(transform_pmf([0.4, 0.2, 0.4], Transform("greedy")), [1.0, 0.0, 0.0])


def test_transform_argument_checks():
    for t in (Transform("temperature", 0.0), Transform("top_k", 0), Transform("top_k", 4),
              Transform("top_p", 0.0), Transform("top_p", 1.5), Transform("beam", 2)):
        with pytest.raises(ValueError):
            transform_pmf([0.2, 0.3, 0.5], t)


def test_transform_parse():
    assert Transform.parse("temperature=0.6") == Transform("temperature", 0.6)
    assert Transform.parse(" greedy ") == Transform("greedy")
    assert str(Transform.parse("top_k=2")) == "top_k=2"
    with pytest.raises(ValueError):
        Transform.parse("beam=3")


pmfs = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12).filter(lambda xs: sum(xs) > 1e-3)


@given(pmfs, st.sampled_from(["temperature=0.3", "temperature=2", "top_k=1", "top_k=2", "top_p=0.5",
                              "top_p=1", "greedy"]))
def test_transform_returns_prob_vector(xs, spec):
    p = np.array(xs) / np.sum(xs)
    t = Transform.parse(spec)
    if t.kind == "top_k" and t.value > p.size:
        return
    out = transform_pmf(p, t)
    assert np.all(out >= 0) and abs(out.sum() - 1.0) < 1e-9


@given(pmfs)
def test_greedy_equals_top1(xs):
    p = np.array(xs) / np.sum(xs)
    np.testing.assert_array_equal(transform_pmf(p, Transform("greedy")), transform_pmf(p, Transform("top_k", 1)))


def test_transform_kernel_left_to_right(two_state):
    ts = [Transform("temperature", 0.6), Transform("top_p", 0.9)]
    k = transform_kernel(two_state, ts)
    expect = transform_pmf(transform_pmf([0.5, 0.5], ts[0]), ts[1])
    np.testing.assert_allclose(k.row((2,)), expect)


def test_ranked_and_reversed_kernels():
    k = ranked_kernel(np.random.default_rng(0), 8, 1)
    assert k.table.shape == (8, 8)
    np.testing.assert_allclose(k.table.sum(axis=1), 1.0)
    # the shared Zipf shape makes token 1 the average favourite
    assert np.argmax(k.table.mean(axis=0)) == 0
    r = reversed_kernel(k)
    np.testing.assert_allclose(r.table[:, 0], k.table[:, -1], rtol=1e-15)
