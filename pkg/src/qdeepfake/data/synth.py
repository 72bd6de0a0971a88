"""Procedural traffic-sign images for desk-scale runs.

Each class has an archetype: a sign shape, a face colour and a glyph. Real
images vary in background, position, size, rotation and noise. Fake images
come from a fixed corruption family: the face colour is always swapped
(red -> blue, yellow -> green, white -> orange) and about half the fakes also
have their shape swapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..seeding import stream

CANVAS = 64

COLORS = {
    "red": (200, 30, 35),
    "yellow": (240, 200, 30),
    "white": (240, 240, 235),
    "blue": (30, 60, 200),
    "green": (40, 170, 60),
    "orange": (245, 130, 20),
}
COLOR_SWAP = {"red": "blue", "yellow": "green", "white": "orange"}
SHAPE_SWAP = {"octagon": "circle", "diamond": "square", "circle": "triangle"}

DIGITS = {
    "0": "111101101101111", "1": "010110010010111", "2": "111001111100111",
    "3": "111001111001111", "4": "101101111001001", "5": "111100111001111",
    "6": "111100111101111", "7": "111001010010010", "8": "111101111101111",
    "9": "111101111001111",
}


@dataclass(frozen=True)
class Archetype:
    shape: str
    color: str
    glyph: str


ARCHETYPES = {
    "stop": Archetype("octagon", "red", "bar"),
    "signal_ahead": Archetype("diamond", "yellow", "lights"),
    "ped_xing": Archetype("diamond", "yellow", "walker"),
    "speed_limit_25": Archetype("circle", "white", "25"),
    "speed_limit_30": Archetype("circle", "white", "30"),
    "speed_limit_35": Archetype("circle", "white", "35"),
    "speed_limit_45": Archetype("circle", "white", "45"),
    "speed_limit_55": Archetype("circle", "white", "55"),
    "stop_ahead": Archetype("diamond", "yellow", "dot"),
    "synthetic_10": Archetype("octagon", "white", "cross"),
}
DEFAULT_CLASSES = list(ARCHETYPES)


def archetype(label: str) -> Archetype:
    if label in ARCHETYPES:
        return ARCHETYPES[label]
    # unknown names get a stable archetype derived from the name
    h = sum((i + 1) * ord(ch) for i, ch in enumerate(label))
    shapes, colors = ("octagon", "diamond", "circle"), ("red", "yellow", "white")
    return Archetype(shapes[h % 3], colors[(h // 3) % 3], str(10 + h % 90))


def _outline(shape: str, cx: float, cy: float, r: float, rot: float) -> list[tuple[float, float]] | None:
    sides = {"octagon": (8, math.pi / 8), "diamond": (4, 0.0), "square": (4, math.pi / 4), "triangle": (3, -math.pi / 2)}
    if shape == "circle":
        return None
    n, phase = sides[shape]
    return [(cx + r * math.cos(phase + rot + 2 * math.pi * k / n), cy + r * math.sin(phase + rot + 2 * math.pi * k / n))
            for k in range(n)]


def _draw_glyph(draw: ImageDraw.ImageDraw, glyph: str, cx: float, cy: float, r: float, ink) -> None:
    if glyph.isdigit():
        cell = max(2, int(r / 7))
        w = len(glyph) * 3 * cell + (len(glyph) - 1) * cell
        x0, y0 = cx - w / 2, cy - 2.5 * cell
        for d, ch in enumerate(glyph):
            bits = DIGITS[ch]
            for k, b in enumerate(bits):
                if b == "1":
                    x = x0 + d * 4 * cell + (k % 3) * cell
                    y = y0 + (k // 3) * cell
                    draw.rectangle([x, y, x + cell - 1, y + cell - 1], fill=ink)
    elif glyph == "bar":
        draw.rectangle([cx - 0.6 * r, cy - 0.15 * r, cx + 0.6 * r, cy + 0.15 * r], fill=(245, 245, 245))
    elif glyph == "lights":
        for dy, col in ((-0.4, (200, 30, 35)), (0.0, (240, 200, 30)), (0.4, (40, 170, 60))):
            s = 0.15 * r
            draw.ellipse([cx - s, cy + dy * r - s, cx + s, cy + dy * r + s], fill=col, outline=ink)
    elif glyph == "walker":
        s = r * 0.5
        draw.ellipse([cx - 0.12 * s, cy - s, cx + 0.12 * s, cy - 0.75 * s], fill=ink)
        draw.line([cx, cy - 0.7 * s, cx, cy + 0.2 * s], fill=ink, width=3)
        draw.line([cx, cy + 0.2 * s, cx - 0.4 * s, cy + s], fill=ink, width=3)
        draw.line([cx, cy + 0.2 * s, cx + 0.4 * s, cy + s], fill=ink, width=3)
        draw.line([cx - 0.5 * s, cy - 0.3 * s, cx + 0.5 * s, cy - 0.4 * s], fill=ink, width=3)
    elif glyph == "dot":
        s = 0.3 * r
        draw.regular_polygon((cx, cy, s), 8, fill=(200, 30, 35))
    elif glyph == "cross":
        draw.line([cx - 0.5 * r, cy - 0.5 * r, cx + 0.5 * r, cy + 0.5 * r], fill=ink, width=4)
        draw.line([cx - 0.5 * r, cy + 0.5 * r, cx + 0.5 * r, cy - 0.5 * r], fill=ink, width=4)
    else:
        raise ValueError(f"unknown glyph '{glyph}'")


def render_sign(label: str, fake: bool, rng: np.random.Generator) -> np.ndarray:
    """One CANVAS x CANVAS x 3 uint8 image."""
    arch = archetype(label)
    shape, color = arch.shape, arch.color
    if fake:
        color = COLOR_SWAP[color]
        if rng.random() < 0.5:
            shape = SHAPE_SWAP[shape]
    bg = rng.uniform(40, 200, size=3)
    ramp = np.linspace(-1, 1, CANVAS)[:, None, None] * rng.uniform(-30, 30, size=3)
    base = np.clip(np.broadcast_to(bg, (CANVAS, CANVAS, 3)) + ramp, 0, 255).astype(np.uint8)
    img = Image.fromarray(base, "RGB")
    draw = ImageDraw.Draw(img)
    cx, cy = CANVAS / 2 + rng.uniform(-4, 4, size=2)
    r = CANVAS * rng.uniform(0.34, 0.42)
    rot = rng.uniform(-0.14, 0.14)
    face, ink = COLORS[color], (20, 20, 20)
    pts = _outline(shape, cx, cy, r, rot)
    if pts is None:
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=face, outline=ink, width=2)
    else:
        draw.polygon(pts, fill=face, outline=ink, width=2)
    _draw_glyph(draw, arch.glyph, cx, cy, r, ink)
    out = np.asarray(img, dtype=np.float64) + rng.normal(0, 6, size=(CANVAS, CANVAS, 3))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def synth_signs(out_dir, classes=None, count: int = 30, seed: int = 0, fake_count: int | None = None) -> Path:
    """Write ``out_dir/<class>/{real,fake}/<class>_<i>.png``; ``count`` real and ``fake_count`` fake per class."""
    classes = list(DEFAULT_CLASSES if classes is None else classes)
    fake_count = count if fake_count is None else fake_count
    if count < 1 or fake_count < 1:
        raise ValueError(f"need at least one real and one fake image per class, got {count}/{fake_count}")
    if len(set(classes)) != len(classes) or not classes:
        raise ValueError("class list must be non-empty and without duplicates")
    out_dir = Path(out_dir)
    for label in classes:
        if not label or "/" in label or label.startswith("."):
            raise ValueError(f"invalid class name '{label}'")
        for prov, n in (("real", count), ("fake", fake_count)):
            d = out_dir / label / prov
            d.mkdir(parents=True, exist_ok=True)
            for i in range(n):
                pixels = render_sign(label, prov == "fake", stream(seed, "synth", label, prov, i))
                Image.fromarray(pixels, "RGB").save(d / f"{label}_{i:04d}.png", optimize=False)
    return out_dir
