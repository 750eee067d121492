"""Deterministic 10,000-record golden prediction file.

The construction orders records as 6,819 correct followed by 3,181
incorrect, then assigns each attribute independently by slicing those two
pools, so every per-attribute marginal is exact simultaneously:

    gender        female 5,530/3,859 correct   male 4,470/2,960
    race          caucasian 6,000/4,206   asian 2,400/1,617
                  african_american 1,600/996      (gap exactly 0.0785)
    age group     600/410, 2,000/1,370, 4,000/2,726, 2,800/1,907, 600/406
    augmentation  none 3,500/2,450, blur 900/494 (the weakest tag),
                  seven other tags at 800 each with 553-554 correct

Correct records carry probs (0.85, .05, .05, .05); incorrect ones put 0.70
on the wrong class, keeping mean confidence ~0.80 and mean entropy ~0.68.
"""

from __future__ import annotations

from emocert.data.manifest import AGE_GROUPS, EMOTIONS
from emocert.metrics import PredictionRecord

N_TOTAL = 10_000
N_CORRECT = 6_819

GENDER_SLICES = [("female", 3_859, 1_671), ("male", 2_960, 1_510)]
RACE_SLICES = [
    ("caucasian", 4_206, 1_794),
    ("asian", 1_617, 783),
    ("african_american", 996, 604),
]
AGE_SLICES = [
    ("0-3", 410, 190),
    ("4-19", 1_370, 630),
    ("20-39", 2_726, 1_274),
    ("40-69", 1_907, 893),
    ("70+", 406, 194),
]
AUG_SLICES = [
    ("none", 2_450, 1_050),
    ("blur", 494, 406),
    ("dark", 554, 246),
    ("noise", 554, 246),
    ("contrast", 554, 246),
    ("rotation", 554, 246),
    ("rotation_ccw", 553, 247),
    ("occlusion_rect", 553, 247),
    ("occlusion_diag", 553, 247),
]


def _assign(slices):
    """Per-record values: first over the correct pool, then the incorrect pool."""
    values = [None] * N_TOTAL
    pos = 0
    for name, n_correct, _ in slices:
        for i in range(pos, pos + n_correct):
            values[i] = name
        pos += n_correct
    assert pos == N_CORRECT
    pos = N_CORRECT
    for name, _, n_wrong in slices:
        for i in range(pos, pos + n_wrong):
            values[i] = name
        pos += n_wrong
    assert pos == N_TOTAL
    return values


def golden_records() -> list[PredictionRecord]:
    gender = _assign(GENDER_SLICES)
    race = _assign(RACE_SLICES)
    age = _assign(AGE_SLICES)
    augmentation = _assign(AUG_SLICES)
    records = []
    for i in range(N_TOTAL):
        true_class = EMOTIONS[i % 4]
        correct = i < N_CORRECT
        predicted = true_class if correct else EMOTIONS[(i + 1) % 4]
        probs = [0.05 if correct else 0.1] * 4
        if correct:
            probs[EMOTIONS.index(predicted)] = 0.85
        else:
            probs = [0.03] * 4
            probs[EMOTIONS.index(predicted)] = 0.70
            probs[EMOTIONS.index(true_class)] = 0.20
            remaining = [j for j in range(4) if j not in
                         (EMOTIONS.index(predicted), EMOTIONS.index(true_class))]
            probs[remaining[0]] = 0.07
        records.append(
            PredictionRecord.from_probs(
                f"g{i:05d}", probs, true_class,
                gender=gender[i], race=race[i], age_group=age[i],
                augmentation=augmentation[i],
            )
        )
    return records
