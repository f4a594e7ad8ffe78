import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emofocus.backend import train_ngram
from emofocus.synthetic import generate_benchmark, train_eval_split


@pytest.fixture(scope="session")
def benchmark():
    """The shipped synthetic benchmark at its default operating point."""
    return generate_benchmark(n_emotions=8, n_sentences=4000, seed=0)


@pytest.fixture(scope="session")
def benchmark_split(benchmark):
    return train_eval_split(benchmark, held_out_fraction=0.1)


@pytest.fixture(scope="session")
def trained_model(benchmark_split):
    train, _ = benchmark_split
    return train_ngram(
        [(ex.emotion, ex.text) for ex in train], order=3, discount=0.75
    )


@pytest.fixture(scope="session")
def small_model():
    """Model trained on a 500-sentence slice, for cheaper unit tests."""
    examples = generate_benchmark(n_emotions=8, n_sentences=500, seed=123)
    return train_ngram(
        [(ex.emotion, ex.text) for ex in examples], order=3, discount=0.75
    )
