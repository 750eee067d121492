"""Dataset manifests: one JSON object per line, strict schema, full validation.

A manifest file is UTF-8 JSON lines.  The first line may be a header object
(recognised by its ``schema_version`` key) carrying the schema version, the
seed the dataset was created with and free-form notes.  Every other line is
one sample with exactly the fields
``id,image,emotion,gender,race,age_group,source,split,augmentation,origin_id``.

Validation reports every violation with its 1-based line number, not just
the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

EMOTIONS = ("anger", "fear", "calm", "surprise")
GENDERS = ("male", "female", "unsure")
RACES = ("caucasian", "african_american", "asian")
AGE_GROUPS = ("0-3", "4-19", "20-39", "40-69", "70+")
SPLITS = ("train", "val", "test")
AUGMENTATIONS = (
    "none",
    "rotation",
    "rotation_ccw",
    "dark",
    "contrast",
    "noise",
    "blur",
    "occlusion_rect",
    "occlusion_diag",
    "forehead_bar",
    "hair_strand",
)

SAMPLE_FIELDS = (
    "id",
    "image",
    "emotion",
    "gender",
    "race",
    "age_group",
    "source",
    "split",
    "augmentation",
    "origin_id",
)

SCHEMA_VERSION = 1


class ManifestError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid manifest:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class Sample:
    id: str
    image: str
    emotion: str
    gender: str
    race: str
    age_group: str
    source: str
    split: str
    augmentation: str = "none"
    origin_id: str = ""

    def __post_init__(self):
        if not self.origin_id:
            self.origin_id = self.id

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in SAMPLE_FIELDS}

    def is_original(self) -> bool:
        return self.augmentation == "none"


@dataclass
class Manifest:
    samples: list[Sample]
    schema_version: int = SCHEMA_VERSION
    created_seed: int | None = None
    notes: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def originals(self) -> list[Sample]:
        return [s for s in self.samples if s.is_original()]


def _check_sample(sample: Sample, where: str, problems: list[str]) -> None:
    checks = (
        ("emotion", sample.emotion, EMOTIONS),
        ("gender", sample.gender, GENDERS),
        ("race", sample.race, RACES),
        ("age_group", sample.age_group, AGE_GROUPS),
        ("split", sample.split, SPLITS),
        ("augmentation", sample.augmentation, AUGMENTATIONS),
    )
    for name, value, allowed in checks:
        if value not in allowed:
            problems.append(f"{where}: unknown {name} {value!r}")
    if not sample.id:
        problems.append(f"{where}: empty id")
    if (sample.augmentation == "none") != (sample.origin_id == sample.id):
        problems.append(
            f"{where}: augmentation {sample.augmentation!r} inconsistent with "
            f"origin_id {sample.origin_id!r} (originals and only originals are their own origin)"
        )


def validate_samples(samples: list[Sample], lines: list[int] | None = None) -> list[str]:
    """Every invariant violation, tagged with line numbers when given."""
    problems: list[str] = []
    where = lambda i: f"line {lines[i]}" if lines else f"sample {i}"
    seen: dict[str, int] = {}
    for i, sample in enumerate(samples):
        _check_sample(sample, where(i), problems)
        if sample.id in seen:
            problems.append(f"{where(i)}: duplicate id {sample.id!r} (first at {where(seen[sample.id])})")
        else:
            seen[sample.id] = i
    by_id = {s.id: s for s in samples}
    for i, sample in enumerate(samples):
        if sample.is_original():
            continue
        parent = by_id.get(sample.origin_id)
        if parent is None:
            problems.append(f"{where(i)}: origin_id {sample.origin_id!r} does not resolve")
            continue
        if not parent.is_original():
            problems.append(f"{where(i)}: origin {sample.origin_id!r} is itself augmented")
        if parent.split != sample.split:
            problems.append(
                f"{where(i)}: split {sample.split!r} differs from its origin's "
                f"split {parent.split!r} (leakage)"
            )
    return problems


def load_manifest(path: str | Path) -> Manifest:
    raw_lines = Path(path).read_text(encoding="utf-8").splitlines()
    samples: list[Sample] = []
    line_numbers: list[int] = []
    problems: list[str] = []
    header: dict = {}
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: malformed JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict):
            problems.append(f"line {lineno}: expected an object")
            continue
        if lineno == 1 and "schema_version" in obj:
            header = obj
            continue
        missing = [f for f in SAMPLE_FIELDS if f not in obj]
        unknown = [f for f in obj if f not in SAMPLE_FIELDS]
        if missing:
            problems.append(f"line {lineno}: missing fields {missing}")
        if unknown:
            problems.append(f"line {lineno}: unknown fields {unknown}")
        if missing or unknown:
            continue
        if not all(isinstance(obj[f], str) for f in SAMPLE_FIELDS):
            problems.append(f"line {lineno}: all fields must be strings")
            continue
        samples.append(Sample(**obj))
        line_numbers.append(lineno)
    problems += validate_samples(samples, line_numbers)
    if problems:
        raise ManifestError(problems)
    return Manifest(
        samples=samples,
        schema_version=int(header.get("schema_version", SCHEMA_VERSION)),
        created_seed=header.get("created_seed"),
        notes=str(header.get("notes", "")),
    )


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    problems = validate_samples(manifest.samples)
    if problems:
        raise ManifestError(problems)
    header = {
        "schema_version": manifest.schema_version,
        "created_seed": manifest.created_seed,
        "notes": manifest.notes,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for sample in manifest.samples:
        lines.append(json.dumps(sample.to_dict()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
