"""Checkpoint format shared by every model in the package.

``<prefix>.manifest`` is text::

    qdeepfake-checkpoint 1
    <name> f32 <d0>x<d1>x... <byte offset> <byte length> <param|buffer>

and ``<prefix>.bin`` holds the little-endian float32 payloads in manifest order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FORMAT_TAG = "qdeepfake-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _paths(prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + ".manifest"), prefix.with_name(prefix.name + ".bin")


def save_checkpoint(prefix, tensors: dict[str, tuple[np.ndarray, bool]]) -> None:
    """Write ``name -> (array, trainable)`` entries."""
    manifest, binary = _paths(prefix)
    manifest.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    offset = 0
    with open(binary, "wb") as fh:
        for name, (array, trainable) in tensors.items():
            if any(c.isspace() for c in name) or not name:
                raise CheckpointError(f"invalid tensor name {name!r}")
            arr = np.asarray(array, dtype="<f4")
            shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
            payload = arr.tobytes()
            fh.write(payload)
            kind = "param" if trainable else "buffer"
            lines.append(f"{name} f32 {shape} {offset} {len(payload)} {kind}")
            offset += len(payload)
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(prefix) -> list[dict]:
    manifest, _ = _paths(prefix)
    if not manifest.exists():
        raise FileNotFoundError(f"checkpoint manifest not found: {manifest}")
    lines = manifest.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CheckpointError(f"{manifest}: empty manifest")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_TAG:
        raise CheckpointError(f"{manifest}: not a checkpoint manifest")
    if int(head[1]) != FORMAT_VERSION:
        raise CheckpointError(f"{manifest}: format version {head[1]} unsupported (expected {FORMAT_VERSION})")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6 or parts[1] != "f32" or parts[5] not in ("param", "buffer"):
            raise CheckpointError(f"{manifest}:{lineno}: malformed entry {line!r}")
        shape = () if parts[2] == "scalar" else tuple(int(d) for d in parts[2].split("x"))
        entries.append(
            dict(name=parts[0], shape=shape, offset=int(parts[3]), length=int(parts[4]), trainable=parts[5] == "param")
        )
    return entries


def load_checkpoint(prefix) -> dict[str, tuple[np.ndarray, bool]]:
    _, binary = _paths(prefix)
    entries = read_manifest(prefix)
    blob = binary.read_bytes()
    out = {}
    for e in entries:
        expected = 4 * int(np.prod(e["shape"], dtype=np.int64))
        if e["length"] != expected:
            raise CheckpointError(f"{e['name']}: byte length {e['length']} does not match shape {e['shape']}")
        end = e["offset"] + e["length"]
        if end > len(blob):
            raise CheckpointError(f"{e['name']}: payload ends at byte {end} but {binary} has {len(blob)} bytes")
        arr = np.frombuffer(blob, dtype="<f4", count=e["length"] // 4, offset=e["offset"]).reshape(e["shape"])
        out[e["name"]] = (arr.astype(np.float32), e["trainable"])
    return out


def trainable_count(prefix) -> int:
    """Number of trainable scalars listed in a manifest."""
    return sum(int(np.prod(e["shape"], dtype=np.int64)) for e in read_manifest(prefix) if e["trainable"])


def save_module(module, prefix) -> None:
    tensors = {k: (p.data, True) for k, p in module.named_parameters().items()}
    tensors.update({k: (b, False) for k, b in module.named_buffers().items()})
    save_checkpoint(prefix, tensors)


def load_module(module, prefix) -> None:
    loaded = load_checkpoint(prefix)
    module.load_state_dict({k: v for k, (v, _) in loaded.items()})
