from __future__ import annotations

import numpy as np
import pytest

from emocert.data.manifest import AGE_GROUPS, EMOTIONS, GENDERS, RACES, Manifest, Sample
from emocert.data.pgm import write_pgm
from emocert.rng import Rng


def make_sample(i: int, emotion: str = "anger", **overrides) -> Sample:
    fields = dict(
        id=f"{emotion}-{i:05d}",
        image=f"{emotion}-{i:05d}.pgm",
        emotion=emotion,
        gender=GENDERS[i % len(GENDERS)],
        race=RACES[i % len(RACES)],
        age_group=AGE_GROUPS[i % len(AGE_GROUPS)],
        source="test",
        split="train",
    )
    fields.update(overrides)
    return Sample(**fields)


def make_manifest(n_per_class: int = 3, **overrides) -> Manifest:
    samples = [
        make_sample(i, emotion, **overrides)
        for i in range(n_per_class)
        for emotion in EMOTIONS
    ]
    return Manifest(samples)


def write_images_for(manifest: Manifest, directory, seed: int = 7) -> None:
    rng = Rng(seed)
    for sample in manifest.samples:
        img = (rng.uniform_array(48 * 48, 0, 256).reshape(48, 48)).astype(np.uint8)
        write_pgm(img, directory / sample.image)


@pytest.fixture
def tiny_manifest():
    return make_manifest(3)
