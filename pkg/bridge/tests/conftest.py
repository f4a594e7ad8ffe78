import sys

import pytest

from emofocus.backend import save_model, train_ngram
from emofocus.synthetic import generate_benchmark, train_eval_split


@pytest.fixture(scope="session")
def model_and_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("bridge")
    examples = generate_benchmark(n_emotions=8, n_sentences=800, seed=0)
    train, held = train_eval_split(examples, held_out_fraction=0.1)
    model = train_ngram(
        [(ex.emotion, ex.text) for ex in train], order=3, discount=0.75
    )
    path = root / "model.pcm"
    save_model(model, str(path))
    return {"model": model, "path": str(path), "held": held}


@pytest.fixture(scope="session")
def mock_command(model_and_data):
    return (
        f"{sys.executable} -m emofocus_bridge.mock "
        f"--model {model_and_data['path']}"
    )
