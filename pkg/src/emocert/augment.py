"""Deployment-condition image augmentations and the 11x dataset expansion.

Ten canonical variants, applied per original image:

    rotation      +12 degrees, bilinear, edge replication
    rotation_ccw  -12 degrees, bilinear, edge replication
    dark          multiply by gain 0.4
    contrast      linear stretch by 1.6 about level 128
    noise         additive gaussian, sigma 10 (8-bit scale)
    blur          gaussian sigma 1.5, 5x5 kernel, edge replication
    occlusion_rect   rows 0-11 set to 0 (head-covering band)
    occlusion_diag   upper-left triangle, legs 20 px, set to 0
    forehead_bar     rows 8-13 set to 0 (headband)
    hair_strand      three 1-px dark polylines from the top edge with
                     seeded lateral jitter

Stochastic variants (noise, hair_strand) draw from a child stream keyed on
(dataset seed, origin id, variant kind), so regenerating one image never
shifts another.  All outputs stay valid 48x48 uint8 images.
"""

from __future__ import annotations

import math
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from emocert.data.manifest import Manifest, Sample
from emocert.data.pgm import IMAGE_SIZE, read_pgm, write_pgm
from emocert.rng import Rng, derive_seed


@dataclass(frozen=True)
class AugmentVariant:
    kind: str
    tag: str  # manifest augmentation tag
    params: tuple[tuple[str, float], ...] = ()

    def param(self, name: str) -> float:
        return dict(self.params)[name]


CANONICAL_VARIANTS: tuple[AugmentVariant, ...] = (
    AugmentVariant("rotation_cw", "rotation", (("angle_deg", 12.0),)),
    AugmentVariant("rotation_ccw", "rotation_ccw", (("angle_deg", -12.0),)),
    AugmentVariant("dark", "dark", (("gain", 0.4),)),
    AugmentVariant("contrast", "contrast", (("factor", 1.6), ("pivot", 128.0))),
    AugmentVariant("noise", "noise", (("sigma", 10.0),)),
    AugmentVariant("blur", "blur", (("sigma", 1.5), ("kernel", 5.0))),
    AugmentVariant("occlusion_rect", "occlusion_rect", (("rows", 12.0),)),
    AugmentVariant("occlusion_diag", "occlusion_diag", (("legs", 20.0),)),
    AugmentVariant("forehead_bar", "forehead_bar", (("row_lo", 8.0), ("row_hi", 13.0))),
    AugmentVariant("hair_strand", "hair_strand", (("strands", 3.0),)),
)

EXPANSION_FACTOR = 1 + len(CANONICAL_VARIANTS)


def _rotate(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Bilinear rotation about the centre; out-of-frame samples replicate edges."""
    c = (IMAGE_SIZE - 1) / 2.0
    t = math.radians(angle_deg)
    cos_t, sin_t = math.cos(t), math.sin(t)
    rows = np.arange(IMAGE_SIZE, dtype=np.float64)
    yy = np.broadcast_to(rows[:, None], (IMAGE_SIZE, IMAGE_SIZE)) - c
    xx = np.broadcast_to(rows[None, :], (IMAGE_SIZE, IMAGE_SIZE)) - c
    # inverse map: source coordinates for each destination pixel
    sy = c + yy * cos_t + xx * sin_t
    sx = c - yy * sin_t + xx * cos_t
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, IMAGE_SIZE - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, IMAGE_SIZE - 1)
    y1 = np.clip(y0 + 1, 0, IMAGE_SIZE - 1)
    x1 = np.clip(x0 + 1, 0, IMAGE_SIZE - 1)
    fy = np.clip(sy, 0, IMAGE_SIZE - 1) - y0
    fx = np.clip(sx, 0, IMAGE_SIZE - 1) - x0
    f = img.astype(np.float64)
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _blur(img: np.ndarray, sigma: float, ksize: int) -> np.ndarray:
    half = ksize // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2 * sigma * sigma))
    kernel /= kernel.sum()
    padded = np.pad(img.astype(np.float64), half, mode="edge")
    tmp = np.zeros((IMAGE_SIZE, IMAGE_SIZE + 2 * half))
    for i, w in enumerate(kernel):  # vertical pass
        tmp += w * padded[i : i + IMAGE_SIZE, :]
    out = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    for i, w in enumerate(kernel):  # horizontal pass
        out += w * tmp[:, i : i + IMAGE_SIZE]
    return out


def _hair_strands(img: np.ndarray, rng: Rng, strands: int) -> np.ndarray:
    out = img.copy()
    for _ in range(strands):
        col = int(rng.uniform(4, IMAGE_SIZE - 4))
        depth = int(rng.uniform(24, 40))
        for row in range(depth):
            out[row, min(max(col, 0), IMAGE_SIZE - 1)] = 0
            step = rng.uniform(0.0, 1.0)
            col += -1 if step < 1 / 3 else (1 if step > 2 / 3 else 0)
    return out


def _to_u8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def augment_image(img: np.ndarray, variant: AugmentVariant, rng: Rng | None = None) -> np.ndarray:
    """Apply one variant; deterministic given (image, variant, rng seed)."""
    if img.shape != (IMAGE_SIZE, IMAGE_SIZE) or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 {IMAGE_SIZE}x{IMAGE_SIZE} image, got {img.dtype} {img.shape}")
    kind = variant.kind
    if kind in ("rotation_cw", "rotation_ccw"):
        return _to_u8(_rotate(img, variant.param("angle_deg")))
    if kind == "dark":
        return _to_u8(img.astype(np.float64) * variant.param("gain"))
    if kind == "contrast":
        pivot = variant.param("pivot")
        return _to_u8(pivot + variant.param("factor") * (img.astype(np.float64) - pivot))
    if kind == "noise":
        if rng is None:
            raise ValueError("noise variant requires an rng")
        noise = rng.gaussian_array(img.size, 0.0, variant.param("sigma")).reshape(img.shape)
        return _to_u8(img.astype(np.float64) + noise)
    if kind == "blur":
        return _to_u8(_blur(img, variant.param("sigma"), int(variant.param("kernel"))))
    if kind == "occlusion_rect":
        out = img.copy()
        out[: int(variant.param("rows")), :] = 0
        return out
    if kind == "occlusion_diag":
        out = img.copy()
        legs = int(variant.param("legs"))
        rr, cc = np.meshgrid(np.arange(IMAGE_SIZE), np.arange(IMAGE_SIZE), indexing="ij")
        out[rr + cc < legs] = 0
        return out
    if kind == "forehead_bar":
        out = img.copy()
        out[int(variant.param("row_lo")) : int(variant.param("row_hi")) + 1, :] = 0
        return out
    if kind == "hair_strand":
        if rng is None:
            raise ValueError("hair_strand variant requires an rng")
        return _hair_strands(img, rng, int(variant.param("strands")))
    raise ValueError(f"unknown augmentation kind {kind!r}")


def child_sample(parent: Sample, variant: AugmentVariant) -> Sample:
    """Augmented child: inherits labels, demographics and split from the parent."""
    child_id = f"{parent.id}__{variant.tag}"
    return Sample(
        id=child_id,
        image=f"{child_id}.pgm",
        emotion=parent.emotion,
        gender=parent.gender,
        race=parent.race,
        age_group=parent.age_group,
        source=parent.source,
        split=parent.split,
        augmentation=variant.tag,
        origin_id=parent.id,
    )


def expand_dataset(
    manifest: Manifest,
    images_dir: str | Path,
    out_dir: str | Path | None = None,
    seed: int = 0,
) -> Manifest:
    """Emit every original plus all 10 variants: an exact 11x expansion.

    Augmented images are written next to the originals (or into out_dir,
    in which case the originals are copied so the output is
    self-contained).  Rejects manifests that already contain augmented
    samples.
    """
    pre_augmented = [s.id for s in manifest.samples if not s.is_original()]
    if pre_augmented:
        raise ValueError(
            f"manifest already contains {len(pre_augmented)} augmented samples "
            f"(e.g. {pre_augmented[0]!r}); expand_dataset needs originals only"
        )
    images_dir = Path(images_dir)
    target = Path(out_dir) if out_dir is not None else images_dir
    target.mkdir(parents=True, exist_ok=True)
    copy_originals = target.resolve() != images_dir.resolve()

    samples: list[Sample] = []
    for parent in manifest.samples:
        img = read_pgm(images_dir / parent.image)
        if copy_originals:
            shutil.copyfile(images_dir / parent.image, target / parent.image)
        samples.append(parent)
        for variant in CANONICAL_VARIANTS:
            rng = Rng(derive_seed(seed, parent.id, variant.kind))
            child = child_sample(parent, variant)
            write_pgm(augment_image(img, variant, rng), target / child.image)
            samples.append(child)
    return Manifest(samples, manifest.schema_version, manifest.created_seed, manifest.notes)
