"""Experiment reports: a plain-text table, a CSV file and a JSON-lines file.

All three are written from the same rows with a fixed column order and fixed
number formatting, so identical results give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import memory_mb
from .scores import Scores, metrics

COLUMNS = (
    "section", "model", "sign_class", "samples", "tp", "fp", "fn", "tn",
    "precision", "recall", "f1", "accuracy", "n_params", "memory_mb", "note",
)
UNDEFINED = "undefined"


@dataclass
class DetectionResult:
    model: str
    sign_class: str
    cm: np.ndarray

    @property
    def scores(self) -> Scores:
        return metrics(self.cm)


@dataclass
class ParamRow:
    model: str
    n_params: int
    note: str = ""


@dataclass
class Report:
    detections: list[DetectionResult] = field(default_factory=list)
    params: list[ParamRow] = field(default_factory=list)


def _score(v: float | None) -> str:
    return UNDEFINED if v is None else f"{v:.4f}"


def report_rows(report: Report) -> list[dict[str, str]]:
    rows = []
    for d in report.detections:
        cm = np.asarray(d.cm, dtype=np.int64)
        s = d.scores
        rows.append({
            "section": "detection", "model": d.model, "sign_class": d.sign_class,
            "samples": str(int(cm.sum())), "tp": str(cm[1, 1]), "fp": str(cm[0, 1]),
            "fn": str(cm[1, 0]), "tn": str(cm[0, 0]),
            "precision": _score(s.precision), "recall": _score(s.recall),
            "f1": _score(s.f1), "accuracy": _score(s.accuracy),
            "n_params": "", "memory_mb": "", "note": "",
        })
    for p in report.params:
        row = dict.fromkeys(COLUMNS, "")
        row.update(section="params", model=p.model, n_params=str(int(p.n_params)),
                   memory_mb=f"{memory_mb(p.n_params):.3f}", note=p.note)
        rows.append(row)
    return rows


def _text(rows: list[dict[str, str]]) -> str:
    det_cols = ("model", "sign_class", "samples", "precision", "recall", "f1", "accuracy")
    par_cols = ("model", "n_params", "memory_mb", "note")
    out = []
    for title, cols, section in (("detection scores (positive = fake)", det_cols, "detection"),
                                 ("trainable parameters and 32-bit memory", par_cols, "params")):
        body = [[r[c] for c in cols] for r in rows if r["section"] == section]
        widths = [max([len(c)] + [len(b[i]) for b in body]) for i, c in enumerate(cols)]
        out.append(f"# {title}")
        out.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())
        out.extend("  ".join(v.ljust(w) for v, w in zip(b, widths)).rstrip() for b in body)
        out.append("")
    return "\n".join(out)


def _csv(rows: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _jsonl(rows: list[dict[str, str]]) -> str:
    lines = [json.dumps({"record": "header", "columns": list(COLUMNS)})]
    numeric = {"samples", "tp", "fp", "fn", "tn", "n_params"}
    for r in rows:
        rec = {}
        for c in COLUMNS:
            v = r[c]
            if v == "" and c != "note":
                rec[c] = None
            elif c in numeric:
                rec[c] = int(v)
            elif c in ("precision", "recall", "f1", "accuracy", "memory_mb"):
                rec[c] = None if v == UNDEFINED else float(v)
            else:
                rec[c] = v
        lines.append(json.dumps({"record": "row", **rec}))
    return "\n".join(lines) + "\n"


def emit_report(report: Report, out_dir, stem: str = "report") -> dict[str, Path]:
    """Write ``<stem>.txt``, ``<stem>.csv`` and ``<stem>.jsonl`` into ``out_dir``."""
    out_dir = Path(out_dir)
    rows = report_rows(report)
    texts = {"txt": _text(rows), "csv": _csv(rows), "jsonl": _jsonl(rows)}
    paths = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc.strerror}") from exc
    for ext, text in texts.items():
        path = out_dir / f"{stem}.{ext}"
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
        paths[ext] = path
    return paths
