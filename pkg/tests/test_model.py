import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from falfa import selftest
from falfa.model import (PROB_EPS, MlpModel, TrainConfig, TrainingDiverged, cross_entropy_paper,
                         cross_entropy_standard, evaluate_accuracy, init_model, load_model,
                         loss_and_grads, predict_proba, save_model, softmax, train)


def test_init_deterministic_and_shapes():
    a, b = init_model(4, 1), init_model(4, 1)
    assert all(np.array_equal(x, y) for x, y in zip(a.params().values(), b.params().values()))
    assert a.W1.shape == (4, 128) and a.W2.shape == (128, 128) and a.W3.shape == (128, 2)
    assert not np.array_equal(a.W1, init_model(4, 2).W1)


def test_softmax_values():
    assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5], atol=0)
    p = softmax(np.array([1.0, 0.0]))
    assert p[0] == pytest.approx(math.e / (math.e + 1), abs=1e-15)
    assert p[0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert p[1] == pytest.approx(0.2689414213699951, abs=1e-15)
    with pytest.raises(ValueError):
        softmax(np.array([np.inf, 0.0]))


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-500, 500))
def test_softmax_sum_and_shift(z0, z1, c):
    p = softmax(np.array([z0, z1]))
    q = softmax(np.array([z0 + c, z1 + c]))
    assert abs(p.sum() - 1) <= 1e-12
    assert np.max(np.abs(p - q)) <= 1e-12


def test_cross_entropy_examples():
    assert cross_entropy_paper(np.array([0.3, 0.9]), np.array([0, 0])) == 0.0
    assert cross_entropy_paper(np.array([0.5]), np.array([1])) == pytest.approx(0.0, abs=1e-15)
    assert cross_entropy_paper(np.array([0.9]), np.array([1])) == pytest.approx(-2.1972245773, abs=1e-9)
    assert cross_entropy_standard(np.array([0.5]), np.array([1])) == pytest.approx(math.log(2), abs=1e-15)
    near = cross_entropy_standard(np.array([1.0]), np.array([1]))
    assert 0 < near <= 2 * PROB_EPS
    with pytest.raises(ValueError):
        cross_entropy_paper(np.array([0.5, 0.5]), np.array([1]))


def test_loss_identity():
    assert selftest.loss_identity_error(draws=100) <= 1e-12


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(1e-6, 1 - 1e-6), st.integers(0, 1)), min_size=1, max_size=50))
def test_loss_identity_property(pairs):
    p = np.array([a for a, _ in pairs])
    y = np.array([b for _, b in pairs])
    gap = cross_entropy_paper(p, y) - np.mean(np.log1p(-p)) - cross_entropy_standard(p, y)
    assert abs(gap) <= 1e-12


def test_gradient_check():
    errors = selftest.gradient_check(seed=0)
    assert set(errors) == {"W1", "b1", "W2", "b2", "W3", "b3"}
    assert max(errors.values()) < 1e-4, errors


def test_zero_weights_give_half():
    m = init_model(3, 0)
    zero = MlpModel(*(np.zeros_like(v) for v in m.params().values()))
    X = np.random.default_rng(0).uniform(size=(6, 3))
    y = np.array([0, 0, 0, 0, 1, 1])
    assert np.all(predict_proba(zero, X) == 0.5)
    # p = 0.5 predicts the positive class
    assert evaluate_accuracy(zero, X, y) == pytest.approx(2 / 6)
    assert predict_proba(m, X[:1]).shape == (1,)


def separable(n=20, seed=0, margin=0.3):
    """Points in the unit square at least `margin` away from the line x0 + x1 = 1."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        x = rng.uniform(0, 1, 2)
        if abs(x.sum() - 1) > margin:
            pts.append(x)
    X = np.array(pts)
    return X, (X.sum(axis=1) > 1).astype(int)


@pytest.mark.parametrize("seed", range(5))
def test_separable_toy_reaches_full_accuracy(seed):
    X, y = separable(seed=seed)
    model = train(init_model(2, seed), X, y, TrainConfig(seed=seed))
    assert evaluate_accuracy(model, X, y) == 1.0


def test_training_deterministic():
    X, y = separable(40)
    cfg = TrainConfig(max_epochs=20, batch_size=8, seed=3)
    a = train(init_model(2, 3), X, y, cfg)
    b = train(init_model(2, 3), X, y, cfg)
    assert all(np.array_equal(u, v) for u, v in zip(a.params().values(), b.params().values()))


def test_full_batch_loss_non_increasing():
    X, y = separable()
    losses = []
    train(init_model(2, 0), X, y, TrainConfig(max_epochs=200, batch_size=64, seed=0),
          callback=lambda e, m: losses.append(loss_and_grads(m, X, y)[0]))
    assert np.all(np.diff(losses) <= 1e-12)


def test_train_does_not_mutate_input():
    X, y = separable()
    m = init_model(2, 0)
    before = m.W1.copy()
    train(m, X, y, TrainConfig(max_epochs=2))
    assert np.array_equal(m.W1, before)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    X, y = separable()
    with pytest.raises(TrainingDiverged):
        train(init_model(2, 0), X * 1e200, y, TrainConfig(max_epochs=5, learning_rate=1e10))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)


def test_checkpoint_roundtrip(tmp_path):
    m = init_model(5, 0)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert all(np.array_equal(u, v) for u, v in zip(m.params().values(), back.params().values()))
