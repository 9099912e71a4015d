import numpy as np
import pytest

from umival.models import MarkovKernel
from umival.types import DataPointTrace, TraceMeta


def make_trace(tokens, cum, p, vocab_size=3, pmfs=None):
    return DataPointTrace(np.asarray(tokens), np.asarray(cum, dtype=float), np.asarray(p, dtype=float),
                          TraceMeta(vocab_size=vocab_size), pmfs)


@pytest.fixture
def two_state():
    return MarkovKernel.from_rows(1, 2, {(1,): [0.9, 0.1], (2,): [0.5, 0.5]})


@pytest.fixture
def unigram():
    return MarkovKernel.from_rows(0, 3, [0.2, 0.3, 0.5])
