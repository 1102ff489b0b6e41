import math

import numpy as np
import pytest

import msap

SMALL = {
    "corpus.train_per_class": "2",
    "corpus.test_per_class": "1",
    "model.hidden": "8",
    "model.diff_channels": "4",
    "model.feature_dim": "4",
    "train.epochs": "1",
}


def test_config_overrides():
    cfg = msap.TrainConfig({"optimizer.lr": "0.001", "train.epochs": "3"})
    assert cfg.epochs == 3
    assert cfg.as_dict()["optimizer.lr"] == "0.001"
    with pytest.raises(ValueError):
        msap.TrainConfig({"nonsense": "1"})


def test_segments_and_ratios():
    assert msap.segment_bounds(60, 10)[0] == (0, 6)
    assert msap.observation_ratio(3, 10) == pytest.approx(0.3)
    cfg = msap.TrainConfig()
    assert msap.bayes_bound(cfg, 0.3) == 0.5
    assert msap.bayes_bound(cfg, 1.0) == 1.0


def test_clip_and_difference():
    cfg = msap.TrainConfig()
    clip = msap.generate_clip(cfg, 0, 5)
    assert clip.shape == (60, 3, 32, 32)
    assert clip.min() >= 0.0 and clip.max() <= 1.0
    paired = msap.generate_clip(cfg, 1, 5)
    assert np.array_equal(clip[:18], paired[:18])

    d = msap.temporal_difference(clip[10:15])
    assert d.shape == (12, 32, 32)
    assert np.array_equal(d, msap.temporal_difference(clip[10:15] + 0.125))


def test_model_prediction_is_causal():
    cfg = msap.TrainConfig(SMALL)
    model = msap.Model(cfg)
    clip = msap.generate_clip(cfg, 2, 9)
    full = model.predict_partial(clip, 10, 10)
    assert len(full) == 10 and len(full[0]) == 4
    noisy = clip.copy()
    noisy[18:] = np.random.default_rng(0).random(noisy[18:].shape)
    assert model.predict_partial(noisy, 3, 10) == full[:3]


def test_train_evaluate_roundtrip(tmp_path):
    cfg = msap.TrainConfig(SMALL)
    corpus = msap.generate_corpus(cfg)
    assert corpus.train_size == 8 and corpus.test_size == 4
    model = msap.Model(cfg)
    seen = []
    history = msap.train(model, corpus, cfg, seen.append)
    assert history.startswith("epoch,loss,lr,train_acc\n")
    assert len(seen) == 1 and math.isfinite(seen[0]["loss"])
    table = msap.evaluate(model, corpus)
    assert len(table["ratio"]) == 10
    assert table["average"] == pytest.approx(sum(table["accuracy"]) / 10, abs=1e-12)

    path = tmp_path / "m.ckpt"
    model.save(path, cfg)
    other = msap.Model(msap.TrainConfig({**SMALL, "seed": "99"}))
    other.load(path, cfg)
    name = model.parameter_names[0]
    assert np.array_equal(model.parameter(name), other.parameter(name))
    assert sum(map(sum, msap.confusion(model, corpus, 2))) == 4


def test_checks():
    assert msap.brightness_invariant()
    results = msap.gradient_suite()
    assert results and all(passed for _, passed, _ in results)
