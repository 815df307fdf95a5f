from pathlib import Path

import numpy as np
import pytest

import ablab

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "tests" / "fixtures"


@pytest.fixture(scope="module")
def vocab():
    return ablab.Vocabulary.load(str(ROOT / "recipes" / "vocab.yaml"))


def test_vocabulary(vocab):
    assert "corgi" in vocab.tokens
    assert vocab.kind("vangogh") == "style"
    assert vocab.data_dim == 6
    assert len(vocab) == len(vocab.tokens)


def test_ground_truth_scores(vocab):
    x = ablab.sample_ground_truth(vocab, "corgi", 300, seed=1)
    assert x.shape == (300, 6)
    again = ablab.sample_ground_truth(vocab, "corgi", 300, seed=1)
    assert np.array_equal(x, again)
    own = ablab.alignment_score(x, vocab, "corgi", ["corgi", "dog", "car"])
    other = ablab.alignment_score(x, vocab, "car", ["corgi", "dog", "car"])
    assert own["posterior"] > 0.95
    assert other["posterior"] < 0.05
    assert own["n"] == 300


def test_gradcheck_passes():
    rows = ablab.gradcheck()
    assert rows
    assert all(err < tol for _, err, tol in rows)


def test_invalid_config_raises():
    with pytest.raises(ValueError, match="grumpy"):
        ablab.Config.load(str(FIXTURES / "invalid.yaml"))


def test_pipeline_round_trip(tmp_path, vocab):
    cfg = ablab.Config.load(str(FIXTURES / "tiny.yaml"))
    cfg.output_dir = str(tmp_path / "run")
    cfg.cache_dir = str(tmp_path / "cache")
    result = ablab.run_pipeline(cfg)
    assert set(result["scores"]) == {"noise", "model"}
    assert result["verdict"] is not None
    assert "report.json" in result["artifacts"]

    model = ablab.load_checkpoint(str(tmp_path / "run" / "checkpoints" / "ablated-model"))
    assert model.config["vocab_size"] == len(vocab)
    samples = model.sample(vocab, "dog", 50, seed=3)
    assert samples.shape == (50, 6)
    assert np.isfinite(samples).all()

    ablab.save_checkpoint(model, str(tmp_path / "copy"))
    assert model.identical(ablab.load_checkpoint(str(tmp_path / "copy")))
