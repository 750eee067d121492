"""Input validation helpers for the array-based estimator API."""

from __future__ import annotations

import numpy as np

from emocert.data.manifest import EMOTIONS

IMAGE_PIXELS = 48 * 48


def as_image_batch(X) -> np.ndarray:
    """Coerce X into a float32 (n, 1, 48, 48) batch in [0, 1].

    Accepts flat (n, 2304), (n, 48, 48) or (n, 1, 48, 48); uint8 arrays are
    rescaled by 1/255, float arrays must already lie in [0, 1].
    """
    X = np.asarray(X)
    if X.ndim == 2 and X.shape[1] == IMAGE_PIXELS:
        X = X.reshape(-1, 1, 48, 48)
    elif X.ndim == 3 and X.shape[1:] == (48, 48):
        X = X[:, None]
    elif X.ndim == 4 and X.shape[1:] == (1, 48, 48):
        pass
    else:
        raise ValueError(
            f"X must be (n, {IMAGE_PIXELS}), (n, 48, 48) or (n, 1, 48, 48); got shape {X.shape}"
        )
    if X.shape[0] == 0:
        raise ValueError("X must contain at least one sample")
    if X.dtype == np.uint8:
        return X.astype(np.float32) / 255.0
    X = X.astype(np.float32)
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("float pixel values must lie in [0, 1] (uint8 input is rescaled)")
    return X


def as_label_indices(y) -> tuple[np.ndarray, np.ndarray]:
    """Map labels to class indices 0..3.

    Accepts the four emotion names or integers 0..3; returns (indices,
    classes) where classes is the canonical class array in index order.
    """
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] == 0:
        raise ValueError("y must be a nonempty 1-d array")
    if y.dtype.kind in "UOS":
        index = {e: i for i, e in enumerate(EMOTIONS)}
        unknown = sorted({str(v) for v in y if str(v) not in index})
        if unknown:
            raise ValueError(f"unknown labels {unknown}; expected one of {list(EMOTIONS)}")
        return np.array([index[str(v)] for v in y], dtype=np.int64), np.array(EMOTIONS)
    if y.dtype.kind not in "iu":
        raise ValueError(f"y must be integers or emotion names, got dtype {y.dtype}")
    y = y.astype(np.int64)
    if y.min() < 0 or y.max() > 3:
        raise ValueError("integer labels must lie in [0, 3]")
    return y, np.arange(4)
