"""Versioned binary dataset file.

Layout (little-endian): magic ``QDFDATA\\0``, u32 version, u32 class count,
per class (u16 length, UTF-8 name), u32 record count, per record (u32 class
index, u8 fake flag, u16 length, UTF-8 source id), then the pixel payload as
float32 in record order, 3,072 values per record.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .records import IMAGE_SHAPE, ImageRecord, Manifest

MAGIC = b"QDFDATA\0"
FORMAT_VERSION = 1
_PIXELS = int(np.prod(IMAGE_SHAPE))


class DatasetFileError(ValueError):
    pass


def _text(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"name too long to store: {s[:40]}...")
    return struct.pack("<H", len(raw)) + raw


def save_tensors(manifest: Manifest, path) -> None:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(manifest.classes))]
    parts += [_text(c) for c in manifest.classes]
    parts.append(struct.pack("<I", len(manifest.records)))
    for r in manifest.records:
        parts.append(struct.pack("<IB", manifest.class_index(r.label), int(r.fake)) + _text(r.source))
    for r in manifest.records:
        parts.append(np.ascontiguousarray(r.pixels, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob, self.pos, self.path = blob, 0, path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise DatasetFileError(
                f"{self.path}: truncated at offset {self.pos} reading {what}: "
                f"needed {n} bytes, {len(self.blob) - self.pos} remain (file size {len(self.blob)})"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def text(self, what: str) -> str:
        (n,) = self.unpack("<H", what)
        return self.take(n, what).decode("utf-8")


def load_tensors(path) -> Manifest:
    rd = _Reader(Path(path).read_bytes(), path)
    if rd.take(len(MAGIC), "magic") != MAGIC:
        raise DatasetFileError(f"{path}: not a dataset file (bad magic)")
    version, n_classes = rd.unpack("<II", "header")
    if version != FORMAT_VERSION:
        raise DatasetFileError(f"{path}: file format version {version}, this build reads version {FORMAT_VERSION}")
    classes = [rd.text(f"class name {i}") for i in range(n_classes)]
    (n_records,) = rd.unpack("<I", "record count")
    meta = []
    for i in range(n_records):
        c, fake = rd.unpack("<IB", f"record {i}")
        if c >= n_classes:
            raise DatasetFileError(f"{path}: record {i} has class index {c} but only {n_classes} classes")
        meta.append((c, bool(fake), rd.text(f"record {i} source")))
    payload = rd.take(4 * _PIXELS * n_records, "pixel payload")
    if rd.pos != len(rd.blob):
        raise DatasetFileError(f"{path}: {len(rd.blob) - rd.pos} trailing bytes after offset {rd.pos}")
    pixels = np.frombuffer(payload, dtype="<f4").reshape((n_records, *IMAGE_SHAPE)).astype(np.float32)
    records = [ImageRecord(classes[c], fake, pixels[i], src) for i, (c, fake, src) in enumerate(meta)]
    return Manifest(records, classes=classes)
