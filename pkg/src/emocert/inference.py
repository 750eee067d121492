"""Batch prediction over a manifest, producing prediction records."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from emocert.data.manifest import EMOTIONS, Manifest, Sample
from emocert.data.pgm import PgmError, read_pgm
from emocert.metrics import PredictionRecord
from emocert.nn.network import ModelSpec, Network, Parameters
from emocert.nn.training import ArrayDataset


def load_array_dataset(
    manifest: Manifest, images_dir: str | Path, split: str | None = None
) -> ArrayDataset:
    """All-readable image loading for training; any unreadable image raises."""
    samples = [s for s in manifest.samples if split is None or s.split == split]
    if not samples:
        raise ValueError(f"no samples in split {split!r}")
    images = np.empty((len(samples), 1, 48, 48), dtype=np.uint8)
    labels = np.empty(len(samples), dtype=np.int64)
    index = {e: i for i, e in enumerate(EMOTIONS)}
    root = Path(images_dir)
    for i, s in enumerate(samples):
        images[i, 0] = read_pgm(root / s.image)
        labels[i] = index[s.emotion]
    return ArrayDataset(images=images, labels=labels, ids=[s.id for s in samples])


def predict_records(
    spec: ModelSpec,
    params: Parameters,
    manifest: Manifest,
    images_dir: str | Path,
    split: str | None = None,
    batch_size: int = 256,
) -> tuple[list[PredictionRecord], list[tuple[str, str]]]:
    """One record per readable sample, in manifest order.

    Unreadable images are skipped and returned as (sample_id, reason)
    pairs; the run continues with a warning.
    """
    net = Network(spec)
    root = Path(images_dir)
    samples = [s for s in manifest.samples if split is None or s.split == split]
    loaded: list[tuple[Sample, np.ndarray]] = []
    skipped: list[tuple[str, str]] = []
    for s in samples:
        try:
            loaded.append((s, read_pgm(root / s.image)))
        except (OSError, PgmError) as exc:
            skipped.append((s.id, str(exc)))
    if skipped:
        warnings.warn(f"skipped {len(skipped)} unreadable image(s)", stacklevel=2)

    records: list[PredictionRecord] = []
    for start in range(0, len(loaded), batch_size):
        chunk = loaded[start : start + batch_size]
        x = np.stack([img for _, img in chunk])[:, None].astype(np.float32) / 255.0
        probs, _ = net.forward(params, x, mode="eval")
        for (s, _), p in zip(chunk, probs):
            records.append(
                PredictionRecord.from_probs(
                    sample_id=s.id,
                    probs=[float(v) for v in p],
                    true_class=s.emotion,
                    gender=s.gender,
                    race=s.race,
                    age_group=s.age_group,
                    augmentation=s.augmentation,
                )
            )
    return records, skipped
