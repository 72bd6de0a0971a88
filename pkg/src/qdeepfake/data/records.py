"""Image records and dataset manifests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IMAGE_SHAPE = (3, 32, 32)
PROVENANCES = ("real", "fake")


@dataclass(eq=False)
class ImageRecord:
    label: str
    fake: bool
    pixels: np.ndarray
    source: str

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.shape != IMAGE_SHAPE:
            raise ValueError(f"record '{self.source}' has shape {self.pixels.shape}, expected {IMAGE_SHAPE}")
        if not np.all(np.abs(self.pixels) <= 1.0):
            raise ValueError(f"record '{self.source}' has pixels outside [-1, 1]")

    @property
    def provenance(self) -> str:
        return PROVENANCES[int(self.fake)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageRecord):
            return NotImplemented
        return (self.label, self.fake, self.source) == (other.label, other.fake, other.source) and \
            self.pixels.tobytes() == other.pixels.tobytes()


@dataclass(eq=False)
class Manifest:
    records: list[ImageRecord] = field(default_factory=list)
    classes: list[str] | None = None
    warnings: int = 0

    def __post_init__(self):
        if self.classes is None:
            self.classes = sorted({r.label for r in self.records})
        missing = sorted({r.label for r in self.records} - set(self.classes))
        if missing:
            raise ValueError(f"records use classes missing from the class table: {', '.join(missing)}")

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return self.classes == other.classes and self.records == other.records

    def counts(self) -> dict[str, tuple[int, int]]:
        """class -> (real, fake)."""
        out = {c: [0, 0] for c in self.classes}
        for r in self.records:
            out[r.label][int(r.fake)] += 1
        return {c: (a, b) for c, (a, b) in out.items()}

    def by_class(self, label: str) -> list[ImageRecord]:
        return [r for r in self.records if r.label == label]

    def subset(self, records: list[ImageRecord]) -> "Manifest":
        return Manifest(list(records), classes=list(self.classes))

    def class_index(self, label: str) -> int:
        return self.classes.index(label)

    def arrays(self, label: str | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(pixels N x 3 x 32 x 32, class index, fake flag), optionally one class only."""
        recs = self.records if label is None else self.by_class(label)
        x = np.stack([r.pixels for r in recs]) if recs else np.zeros((0, *IMAGE_SHAPE), np.float32)
        c = np.array([self.class_index(r.label) for r in recs], dtype=np.int64)
        f = np.array([int(r.fake) for r in recs], dtype=np.int64)
        return x, c, f
