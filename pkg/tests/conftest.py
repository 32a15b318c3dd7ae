import numpy as np
import pytest

from lmviterbi import build_trellis, parse_generator_spec, train_ngram

from synthetic_text import make_sentences


@pytest.fixture(scope="session")
def trellis75():
    return build_trellis(parse_generator_spec(["7", "5"], 3))


@pytest.fixture(scope="session")
def trellis75_rsc():
    return build_trellis(parse_generator_spec(["7", "5"], 3, recursive=True))


@pytest.fixture(scope="session")
def text_world():
    """Shared synthetic corpus: (train sentences, test sentences, 3-gram model)."""
    rng = np.random.default_rng(20240817)
    train = make_sentences(rng, 500)
    test = make_sentences(rng, 120)
    model = train_ngram(train, order=3, alpha=0.1)
    return train, test, model
