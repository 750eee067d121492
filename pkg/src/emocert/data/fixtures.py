"""Synthetic desk-scale image fixtures.

Four visually separable 48x48 pattern families stand in for the four
emotion classes:

    anger     horizontal ramp (dark left, bright right)
    fear      vertical ramp (dark top, bright bottom)
    calm      centred bright blob
    surprise  inverted blob (dark centre, bright surround)

The families differ in coarse spatial structure that survives the
deployment-condition augmentations (top-band occlusions remove no class
signature; darkening and blur preserve the large-scale contrasts), which
keeps even very small models trainable on augmented variants.

Each sample jitters the pattern's base level, amplitude, phase and blob
geometry, then adds gaussian pixel noise.  Demographic labels are drawn
from a configurable mix; an optional bias knob adds extra noise to one
demographic group so a measurable accuracy gap can be produced on demand.
Everything derives from per-sample child streams keyed on the config seed
and the sample id, so regenerating any one image never changes another.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from emocert.data.manifest import AGE_GROUPS, EMOTIONS, GENDERS, RACES, Manifest, Sample
from emocert.data.pgm import IMAGE_SIZE, write_pgm
from emocert.rng import Rng, derive_seed

DEFAULT_MIX: dict[str, dict[str, float]] = {
    "gender": {"male": 0.46, "female": 0.46, "unsure": 0.08},
    "race": {"caucasian": 0.55, "african_american": 0.22, "asian": 0.23},
    "age_group": {"0-3": 0.08, "4-19": 0.22, "20-39": 0.35, "40-69": 0.27, "70+": 0.08},
}

_ALLOWED = {"gender": GENDERS, "race": RACES, "age_group": AGE_GROUPS}


@dataclass(frozen=True)
class FixtureConfig:
    n_per_class: int
    seed: int = 0
    demographic_mix: dict[str, dict[str, float]] = field(default_factory=lambda: DEFAULT_MIX)
    noise_sigma: float = 6.0
    bias_attribute: str | None = None  # demographic attribute the noise knob targets
    bias_group: str | None = None
    bias_extra_sigma: float = 0.0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        if set(self.demographic_mix) != set(_ALLOWED):
            raise ValueError(f"demographic_mix must cover exactly {sorted(_ALLOWED)}")
        for attr, mix in self.demographic_mix.items():
            unknown = set(mix) - set(_ALLOWED[attr])
            if unknown:
                raise ValueError(f"unknown {attr} categories {sorted(unknown)}")
            if abs(sum(mix.values()) - 1.0) > 1e-9:
                raise ValueError(f"{attr} mix fractions must sum to 1, got {sum(mix.values())}")
        if (self.bias_attribute is None) != (self.bias_group is None):
            raise ValueError("bias_attribute and bias_group must be set together")
        if self.bias_attribute is not None and self.bias_attribute not in _ALLOWED:
            raise ValueError(f"bias_attribute must be one of {sorted(_ALLOWED)}")


_GRID = np.linspace(0.0, 1.0, IMAGE_SIZE)
_COLS = np.broadcast_to(_GRID[None, :], (IMAGE_SIZE, IMAGE_SIZE))
_ROWS = np.broadcast_to(_GRID[:, None], (IMAGE_SIZE, IMAGE_SIZE))


def _radial(rng: Rng) -> np.ndarray:
    cy = 0.5 + rng.uniform(-0.08, 0.08)
    cx = 0.5 + rng.uniform(-0.08, 0.08)
    sigma = rng.uniform(0.20, 0.28)
    d2 = (_ROWS - cy) ** 2 + (_COLS - cx) ** 2
    return np.exp(-d2 / (2 * sigma * sigma))


def _pattern(emotion: str, rng: Rng) -> np.ndarray:
    base = rng.uniform(20.0, 50.0)
    amp = rng.uniform(150.0, 200.0)
    phase = rng.uniform(-0.08, 0.08)
    if emotion == "anger":
        field = np.clip(_COLS + phase, 0.0, 1.0)
    elif emotion == "fear":
        field = np.clip(_ROWS + phase, 0.0, 1.0)
    elif emotion == "calm":
        field = _radial(rng)
    elif emotion == "surprise":
        field = 1.0 - _radial(rng)
    else:
        raise ValueError(f"unknown emotion {emotion!r}")
    return base + amp * field


def _draw_category(rng: Rng, mix: dict[str, float], ordered: tuple[str, ...]) -> str:
    u = rng.uniform(0.0, 1.0)
    acc = 0.0
    for name in ordered:
        acc += mix.get(name, 0.0)
        if u < acc:
            return name
    return next(n for n in reversed(ordered) if mix.get(n, 0.0) > 0)


def generate_fixture(config: FixtureConfig, out_dir: str | Path) -> Manifest:
    """Write PGM images under out_dir and return the matching manifest.

    Samples are emitted round-robin over the four classes; every sample
    starts in the train split (use split_dataset to assign real splits).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples: list[Sample] = []
    for i in range(config.n_per_class):
        for emotion in EMOTIONS:
            sample_id = f"{emotion}-{i:05d}"
            demo_rng = Rng(derive_seed(config.seed, "demographics", sample_id))
            attrs = {
                attr: _draw_category(demo_rng.spawn(attr), config.demographic_mix[attr], _ALLOWED[attr])
                for attr in ("gender", "race", "age_group")
            }
            sigma = config.noise_sigma
            if config.bias_attribute is not None and attrs[config.bias_attribute] == config.bias_group:
                sigma += config.bias_extra_sigma
            img_rng = Rng(derive_seed(config.seed, "image", sample_id))
            img = _pattern(emotion, img_rng)
            if sigma > 0:
                img = img + img_rng.gaussian_array(img.size, 0.0, sigma).reshape(img.shape)
            img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
            write_pgm(img, out / f"{sample_id}.pgm")
            samples.append(
                Sample(
                    id=sample_id,
                    image=f"{sample_id}.pgm",
                    emotion=emotion,
                    source="fixture",
                    split="train",
                    **attrs,
                )
            )
    return Manifest(samples, created_seed=config.seed, notes="synthetic fixture")
