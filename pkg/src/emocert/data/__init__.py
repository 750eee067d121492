from emocert.data.manifest import (
    AGE_GROUPS,
    AUGMENTATIONS,
    EMOTIONS,
    GENDERS,
    RACES,
    SPLITS,
    Manifest,
    ManifestError,
    Sample,
    load_manifest,
    save_manifest,
)
from emocert.data.ops import DatasetReport, analyze_dataset, rebalance_class, split_dataset
from emocert.data.fixtures import FixtureConfig, generate_fixture
from emocert.data.pgm import PgmError, read_pgm, write_pgm

__all__ = [
    "AGE_GROUPS",
    "AUGMENTATIONS",
    "EMOTIONS",
    "GENDERS",
    "RACES",
    "SPLITS",
    "DatasetReport",
    "FixtureConfig",
    "Manifest",
    "ManifestError",
    "PgmError",
    "Sample",
    "analyze_dataset",
    "generate_fixture",
    "load_manifest",
    "read_pgm",
    "rebalance_class",
    "save_manifest",
    "split_dataset",
    "write_pgm",
]
