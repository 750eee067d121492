"""Dataset composition analysis, class rebalancing and stratified splits."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

from emocert.data.manifest import (
    AGE_GROUPS,
    AUGMENTATIONS,
    EMOTIONS,
    GENDERS,
    RACES,
    SPLITS,
    Manifest,
    Sample,
)
from emocert.rng import Rng

_ATTRIBUTES = ("emotion", "gender", "race", "age_group", "source", "split", "augmentation")


@dataclass
class DatasetReport:
    counts: dict[str, dict[str, int]]
    fractions: dict[str, dict[str, float]]
    total_samples: int
    total_originals: int
    expansion_factor: float

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "fractions": self.fractions,
            "total_samples": self.total_samples,
            "total_originals": self.total_originals,
            "expansion_factor": self.expansion_factor,
        }


def analyze_dataset(manifest: Manifest) -> DatasetReport:
    """Exact per-attribute counts and fractions; originals tallied separately."""
    if not manifest.samples:
        raise ValueError("cannot analyze an empty manifest")
    total = len(manifest.samples)
    counts: dict[str, dict[str, int]] = {}
    fractions: dict[str, dict[str, float]] = {}
    for attr in _ATTRIBUTES:
        tally = Counter(getattr(s, attr) for s in manifest.samples)
        counts[attr] = dict(sorted(tally.items()))
        fractions[attr] = {k: v / total for k, v in counts[attr].items()}
    originals = sum(1 for s in manifest.samples if s.is_original())
    return DatasetReport(
        counts=counts,
        fractions=fractions,
        total_samples=total,
        total_originals=originals,
        expansion_factor=total / originals if originals else math.inf,
    )


def rebalance_class(
    manifest: Manifest,
    emotion: str = "calm",
    keep_fraction: float = 0.5,
    rng: Rng | None = None,
) -> Manifest:
    """Keep ceil(keep_fraction * n) uniformly chosen originals of one class.

    Augmented children follow their parent; all other classes untouched.
    Manifest order is preserved for retained samples.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if keep_fraction == 1.0:
        return Manifest(list(manifest.samples), manifest.schema_version,
                        manifest.created_seed, manifest.notes)
    if rng is None:
        raise ValueError("rebalance_class needs an rng for sampling")
    class_originals = [s.id for s in manifest.samples if s.is_original() and s.emotion == emotion]
    if not class_originals:
        warnings.warn(f"no originals with emotion {emotion!r}; manifest unchanged", stacklevel=2)
        return Manifest(list(manifest.samples), manifest.schema_version,
                        manifest.created_seed, manifest.notes)
    n_keep = math.ceil(keep_fraction * len(class_originals))
    order = rng.permutation(len(class_originals))
    kept = {class_originals[i] for i in order[:n_keep]}
    dropped = set(class_originals) - kept
    samples = [s for s in manifest.samples if s.origin_id not in dropped]
    return Manifest(samples, manifest.schema_version, manifest.created_seed, manifest.notes)


def _largest_remainder(total: int, fractions: list[float]) -> list[int]:
    raw = [total * f for f in fractions]
    alloc = [int(x) for x in raw]
    shortfall = total - sum(alloc)
    order = sorted(range(len(raw)), key=lambda i: (raw[i] - alloc[i], -i), reverse=True)
    for i in order[:shortfall]:
        alloc[i] += 1
    return alloc


def split_dataset(manifest: Manifest, fractions: dict[str, float], rng: Rng) -> Manifest:
    """Assign split tags, stratified by emotion over originals.

    Augmented children inherit their parent's split, so no origin ever
    spans two splits.  Per-stratum counts come from largest-remainder
    rounding of the fractions.  Raises if a stratum cannot give at least
    one sample to every nonzero-fraction split.
    """
    unknown = set(fractions) - set(SPLITS)
    if unknown:
        raise ValueError(f"unknown split names {sorted(unknown)}")
    names = [s for s in SPLITS if fractions.get(s, 0.0) > 0]
    fracs = [fractions[s] for s in names]
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")

    assignment: dict[str, str] = {}
    for emotion in EMOTIONS:
        ids = [s.id for s in manifest.samples if s.is_original() and s.emotion == emotion]
        if not ids:
            continue
        alloc = _largest_remainder(len(ids), fracs)
        if any(a == 0 for a in alloc):
            empty = [names[i] for i, a in enumerate(alloc) if a == 0]
            raise ValueError(
                f"stratum {emotion!r} has {len(ids)} originals, too few to populate split(s) {empty}"
            )
        order = rng.permutation(len(ids))
        pos = 0
        for name, count in zip(names, alloc):
            for j in order[pos : pos + count]:
                assignment[ids[j]] = name
            pos += count

    samples = []
    for s in manifest.samples:
        split = assignment.get(s.origin_id, s.split)
        samples.append(Sample(**{**s.to_dict(), "split": split}))
    return Manifest(samples, manifest.schema_version, manifest.created_seed, manifest.notes)
