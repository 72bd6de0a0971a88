"""Ingest a PNG tree, balance provenance per class and split per class."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..seeding import stream
from .records import IMAGE_SHAPE, PROVENANCES, ImageRecord, Manifest

log = logging.getLogger(__name__)


def to_unit_range(rgb: np.ndarray) -> np.ndarray:
    """8-bit H x W x 3 -> 3 x H x W in [-1, 1]."""
    return (np.asarray(rgb, dtype=np.float32) / np.float32(127.5) - 1.0).transpose(2, 0, 1)


def load_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.format != "PNG":
            raise ValueError(f"not a PNG file ({img.format})")
        if img.mode != "RGB":
            raise ValueError(f"expected 8-bit RGB, got mode {img.mode}")
        img = img.resize(IMAGE_SHAPE[1:][::-1], Image.Resampling.BILINEAR)
        return to_unit_range(np.asarray(img))


def ingest(root) -> Manifest:
    """Read ``root/<class>/{real,fake}/*.png`` in sorted path order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no classes found under {root}")
    records, warnings = [], 0
    for cdir in class_dirs:
        found = 0
        for prov in PROVENANCES:
            for path in sorted((cdir / prov).glob("*.png")):
                try:
                    pixels = load_png(path)
                except (OSError, ValueError, UnidentifiedImageError) as exc:
                    log.warning("skipping %s: %s", path, exc)
                    warnings += 1
                    continue
                rel = path.relative_to(root).as_posix()
                records.append(ImageRecord(cdir.name, prov == "fake", np.clip(pixels, -1, 1), rel))
                found += 1
        if found == 0:
            raise ValueError(f"class '{cdir.name}' has no readable images")
    return Manifest(records, classes=[c.name for c in class_dirs], warnings=warnings)


def balance(manifest: Manifest, seed: int = 0) -> Manifest:
    """Undersample the majority provenance of each class down to the minority count."""
    keep: set[int] = set()
    for label in manifest.classes:
        idx = [i for i, r in enumerate(manifest.records) if r.label == label]
        real = [i for i in idx if not manifest.records[i].fake]
        fake = [i for i in idx if manifest.records[i].fake]
        if not real or not fake:
            missing = "real" if not real else "fake"
            raise ValueError(f"class '{label}' has no {missing} images; cannot balance")
        m = min(len(real), len(fake))
        for group in (real, fake):
            if len(group) > m:
                chosen = stream(seed, "balance", label).choice(len(group), size=m, replace=False)
                group = [group[j] for j in chosen]
            keep.update(group)
    return manifest.subset([r for i, r in enumerate(manifest.records) if i in keep])


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def check(self) -> None:
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ValueError(f"need three non-negative fractions, got {self.fractions}")
        if sum(Fraction(str(f)) for f in self.fractions) != 1:
            raise ValueError(f"split fractions must sum to 1, got {self.fractions}")


MIN_CLASS_SIZE = 5


def split_sizes(n: int, fractions=(0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    """floor(f_train n), floor(f_val n), remainder."""
    a = int(Fraction(str(fractions[0])) * n)
    b = int(Fraction(str(fractions[1])) * n)
    return a, b, n - a - b


def split(manifest: Manifest, spec: SplitSpec | None = None) -> tuple[Manifest, Manifest, Manifest]:
    """Per-class shuffle then train / validation / test by the floor rule."""
    spec = spec or SplitSpec()
    spec.check()
    parts: list[list[ImageRecord]] = [[], [], []]
    for label in manifest.classes:
        recs = manifest.by_class(label)
        if len(recs) < MIN_CLASS_SIZE:
            raise ValueError(f"class '{label}' has {len(recs)} images; splitting needs at least {MIN_CLASS_SIZE}")
        order = stream(spec.seed, "split", label).permutation(len(recs))
        a, b, _ = split_sizes(len(recs), spec.fractions)
        for part, chunk in zip(parts, (order[:a], order[a : a + b], order[a + b :])):
            part.extend(recs[i] for i in sorted(chunk))
    return tuple(manifest.subset(p) for p in parts)
