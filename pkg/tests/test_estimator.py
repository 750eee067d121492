import numpy as np
import pytest
from sklearn.base import clone

from emocert.estimator import EmotionNetClassifier
from emocert.validation import as_image_batch, as_label_indices
from emocert.rng import Rng


def quadrant_data(n_per_class=20, seed=0):
    """Bright-quadrant images, one quadrant per class."""
    rng = Rng(seed)
    n = 4 * n_per_class
    X = np.zeros((n, 48, 48), dtype=np.uint8)
    y = np.zeros(n, dtype=np.int64)
    corners = [(0, 0), (0, 24), (24, 0), (24, 24)]
    for i in range(n):
        cls = i % 4
        r, c = corners[cls]
        img = rng.uniform_array(48 * 48, 0, 40).reshape(48, 48)
        img[r : r + 24, c : c + 24] += 180
        X[i] = np.clip(img, 0, 255).astype(np.uint8)
        y[i] = cls
    return X, y


# -- validation helpers -------------------------------------------------------

def test_as_image_batch_accepts_three_layouts():
    flat = np.zeros((3, 2304), dtype=np.uint8)
    square = np.zeros((3, 48, 48), dtype=np.uint8)
    chan = np.zeros((3, 1, 48, 48), dtype=np.uint8)
    for X in (flat, square, chan):
        out = as_image_batch(X)
        assert out.shape == (3, 1, 48, 48)
        assert out.dtype == np.float32


def test_as_image_batch_rescales_uint8():
    X = np.full((1, 2304), 255, dtype=np.uint8)
    assert as_image_batch(X).max() == pytest.approx(1.0)


def test_as_image_batch_rejects_bad_shapes_and_ranges():
    with pytest.raises(ValueError):
        as_image_batch(np.zeros((3, 100)))
    with pytest.raises(ValueError):
        as_image_batch(np.zeros((0, 2304)))
    with pytest.raises(ValueError):
        as_image_batch(np.full((1, 2304), 2.0))


def test_as_label_indices_strings_and_ints():
    idx, classes = as_label_indices(np.array(["anger", "calm"]))
    assert idx.tolist() == [0, 2]
    assert classes.tolist() == ["anger", "fear", "calm", "surprise"]
    idx, classes = as_label_indices(np.array([3, 1]))
    assert idx.tolist() == [3, 1]
    assert classes.tolist() == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        as_label_indices(np.array(["joy"]))
    with pytest.raises(ValueError):
        as_label_indices(np.array([5]))


# -- the estimator ------------------------------------------------------------

def test_get_params_round_trip_and_clone():
    clf = EmotionNetClassifier(arch="baseline", max_epochs=2, seed=7)
    params = clf.get_params()
    assert params["arch"] == "baseline"
    assert params["seed"] == 7
    cloned = clone(clf)
    assert cloned.get_params() == params


def test_set_params_returns_self():
    clf = EmotionNetClassifier()
    assert clf.set_params(max_epochs=5) is clf
    assert clf.max_epochs == 5


def test_fit_predict_learns_separable_data():
    X, y = quadrant_data(24)
    clf = EmotionNetClassifier(arch="baseline", max_epochs=12, batch_size=16,
                               val_fraction=0.15, seed=0)
    assert clf.fit(X, y) is clf
    acc = (clf.predict(X) == y).mean()
    assert acc >= 0.9
    assert clf.n_parameters_ == 1944
    assert clf.classes_.tolist() == [0, 1, 2, 3]
    assert len(clf.history_) >= 1


def test_predict_proba_rows_sum_to_one():
    X, y = quadrant_data(12)
    clf = EmotionNetClassifier(arch="baseline", max_epochs=2, batch_size=16, seed=1).fit(X, y)
    probs = clf.predict_proba(X[:10])
    assert probs.shape == (10, 4)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_string_labels_round_trip():
    X, y = quadrant_data(12)
    names = np.array(["anger", "fear", "calm", "surprise"])[y]
    clf = EmotionNetClassifier(arch="baseline", max_epochs=2, batch_size=16, seed=2).fit(X, names)
    preds = clf.predict(X[:8])
    assert set(preds) <= {"anger", "fear", "calm", "surprise"}


def test_fit_is_seed_deterministic():
    X, y = quadrant_data(12)
    p1 = EmotionNetClassifier(arch="baseline", max_epochs=3, batch_size=16, seed=5).fit(X, y)
    p2 = EmotionNetClassifier(arch="baseline", max_epochs=3, batch_size=16, seed=5).fit(X, y)
    for name in p1.params_.tensors:
        np.testing.assert_array_equal(p1.params_.tensors[name], p2.params_.tensors[name])


def test_unfitted_predict_raises():
    with pytest.raises(RuntimeError, match="not fitted"):
        EmotionNetClassifier().predict(np.zeros((1, 2304), dtype=np.uint8))


def test_mismatched_lengths_rejected():
    X, y = quadrant_data(6)
    with pytest.raises(ValueError, match="samples"):
        EmotionNetClassifier(max_epochs=1).fit(X, y[:-3])


def test_bad_val_fraction_rejected():
    X, y = quadrant_data(6)
    with pytest.raises(ValueError, match="val_fraction"):
        EmotionNetClassifier(val_fraction=0.0).fit(X, y)
