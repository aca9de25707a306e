import itertools
import os
import pathlib

import numpy as np
import pytest

import llmvs

SOURCE_DIR = pathlib.Path(os.environ.get("LLMVS_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_window_and_prompt():
    w = llmvs.build_window(0, 7, 10)
    assert (w.lo, w.hi, w.center_position, len(w)) == (0, 3, 1, 4)
    captions = [f"Frame {i} shows something." for i in range(10)]
    text, begin, end = llmvs.render_prompt(captions, 5)
    assert end == len(text)
    assert text[begin:].startswith("Please evaluate the importance score of the central frame #4 in following 7 frames.")
    golden = (SOURCE_DIR / "tests/golden/query_w7.txt").read_text()
    assert golden.startswith(text[begin:begin + 40])


def test_parse_score():
    assert llmvs.parse_score("score: 7") == 7
    with pytest.raises(llmvs.LlmvsError):
        llmvs.parse_score("score: 15")


def test_rank_statistics():
    assert llmvs.kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(2 / 3, abs=1e-12)
    assert llmvs.spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    assert llmvs.kendall_tau([1, 1, 1], [1, 2, 3]) is None


def test_knapsack_against_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(1, 9))
        values = rng.random(n).tolist()
        lengths = rng.integers(1, 6, n).tolist()
        budget = int(rng.integers(0, sum(lengths) + 1))
        best = max(
            (sum(values[i] for i in s) for r in range(n + 1) for s in itertools.combinations(range(n), r)
             if sum(lengths[i] for i in s) <= budget),
        )
        selected, total, mask = llmvs.knapsack_select(values, lengths, budget)
        assert total == pytest.approx(best, abs=1e-12)
        assert sum(mask) <= budget
    assert llmvs.summary_budget(100) == 15


def test_kts_and_shot_scores():
    x = np.concatenate([np.zeros(6), np.full(6, 5.0), np.full(6, 1.0)]).reshape(-1, 1)
    shots = llmvs.kts_segment(x, 10)
    assert shots == [(0, 5), (6, 11), (12, 17)]
    assert llmvs.shot_scores(list(x[:, 0] / 5), shots) == pytest.approx([0.0, 1.0, 0.2])


def test_folds_cover_every_video():
    ids = [f"v{i}" for i in range(7)]
    folds = llmvs.make_folds(ids, 5, seed=1)
    assert sorted(folds) == ids
    assert sorted(np.bincount(list(folds.values()))) == [1, 1, 1, 2, 2]


def test_train_predict_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pooled = [rng.normal(size=(12, 5)) for _ in range(3)]
    targets = [list((p[:, 0] > 0).astype(float)) for p in pooled]
    model, history = llmvs.train(pooled, targets, projection_width=8, num_blocks=1, num_heads=2, epochs=20,
                                 learning_rate=1e-3)
    assert len(history) == 20 and history[-1] < history[0]
    pred = model.predict(pooled[0])
    assert len(pred) == 12
    path = tmp_path / "model.ckpt"
    model.save(path)
    assert llmvs.Model.load(path).predict(pooled[0]) == pred
    with pytest.raises(KeyError):
        llmvs.train(pooled, targets, heads=2)
