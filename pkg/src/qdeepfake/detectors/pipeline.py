"""Two-stage detection: classify the sign type, then ask that type's detector real or fake."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import confusion
from ..tensor import nn
from ..tensor.checkpoint import load_module, save_module
from .classical import build_classical_cnn
from .hybrid import build_hybrid
from .training import predict

REAL, FAKE = 0, 1


def build_detector(spec: dict, seed: int = 0) -> nn.Module:
    """``{"kind": "classical", "depth": d}`` or ``{"kind": "hybrid"}``."""
    kind = spec.get("kind")
    if kind == "classical":
        return build_classical_cnn(int(spec.get("depth", 1)), seed=seed)
    if kind == "hybrid":
        return build_hybrid(seed=seed, grad_method=spec.get("grad_method", "analytic"))
    raise ValueError(f"unknown detector kind '{kind}' (expected 'classical' or 'hybrid')")


def _labels(model, x) -> np.ndarray:
    if isinstance(model, nn.Module):
        return predict(model, x)
    return np.asarray(model(x), dtype=np.int64).reshape(len(x))


@dataclass
class DetectorBank:
    """Sign class index -> detector. ``class_names[i]`` names class ``i`` in messages."""

    detectors: dict[int, object] = field(default_factory=dict)
    class_names: list[str] | None = None
    specs: dict[int, dict] = field(default_factory=dict)

    def name(self, c: int) -> str:
        if self.class_names is not None and 0 <= c < len(self.class_names):
            return self.class_names[c]
        return str(c)

    def add(self, c: int, detector, spec: dict | None = None) -> None:
        self.detectors[int(c)] = detector
        if spec is not None:
            self.specs[int(c)] = dict(spec)

    def get(self, c: int):
        try:
            return self.detectors[int(c)]
        except KeyError:
            raise KeyError(f"no detector for sign class '{self.name(int(c))}'") from None

    def check_covers(self, classes) -> None:
        for c in sorted({int(c) for c in classes}):
            self.get(c)

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for c in sorted(self.detectors):
            if c not in self.specs:
                raise ValueError(f"detector for class '{self.name(c)}' has no build spec and cannot be saved")
            save_module(self.detectors[c], directory / f"detector_{c}")
            entries.append({"class": c, "spec": self.specs[c]})
        meta = {"class_names": self.class_names, "detectors": entries}
        (directory / "bank.json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def load(cls, directory) -> "DetectorBank":
        directory = Path(directory)
        meta = json.loads((directory / "bank.json").read_text())
        bank = cls(class_names=meta["class_names"])
        for e in meta["detectors"]:
            model = build_detector(e["spec"])
            load_module(model, directory / f"detector_{e['class']}")
            model.eval()
            bank.add(e["class"], model, e["spec"])
        return bank


def two_stage_detect(images, classifier, bank: DetectorBank) -> tuple[np.ndarray, np.ndarray]:
    """Per image: (sign class from ``classifier``, 0 real / 1 fake from that class's detector).

    A single 3x32x32 image gives length-1 arrays.
    """
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[None]
    classes = _labels(classifier, x)
    bank.check_covers(classes)
    flags = np.zeros(len(x), dtype=np.int64)
    for c in np.unique(classes):
        idx = np.flatnonzero(classes == c)
        flags[idx] = _labels(bank.get(c), x[idx])
    return classes, flags


def joint_label(classes, flags) -> np.ndarray:
    """Class and provenance folded into one index: class * 2 + flag."""
    return np.asarray(classes, dtype=np.int64) * 2 + np.asarray(flags, dtype=np.int64)


@dataclass
class TwoStageResult:
    classes: np.ndarray
    flags: np.ndarray
    joint: np.ndarray  # (2K, 2K) confusion over class * 2 + flag
    per_class: dict[int, np.ndarray]  # actual class -> 2x2 real/fake confusion


def evaluate_two_stage(images, sign_classes, fake_flags, classifier, bank: DetectorBank, k: int) -> TwoStageResult:
    """Run both stages and tally the joint and per-class real/fake confusions."""
    y_class = np.asarray(sign_classes, dtype=np.int64)
    y_fake = np.asarray(fake_flags, dtype=np.int64)
    classes, flags = two_stage_detect(images, classifier, bank)
    joint = confusion(joint_label(classes, flags), joint_label(y_class, y_fake), 2 * k)
    per_class = {int(c): confusion(flags[y_class == c], y_fake[y_class == c], 2) for c in np.unique(y_class)}
    return TwoStageResult(classes, flags, joint, per_class)
