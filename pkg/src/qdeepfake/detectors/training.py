"""Mini-batch training with Adam, per-epoch scoring and best-validation restore."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..metrics import confusion, metrics
from ..seeding import stream
from ..tensor import Tensor, cross_entropy, nn, no_grad


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    restore_best: bool = True

    def check(self) -> None:
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")
        if not np.isfinite(self.lr) or self.lr < 0:
            raise ValueError(f"learning rate must be finite and non-negative, got {self.lr}")


class HistoryRow(NamedTuple):
    epoch: int
    split: str
    loss: float
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None


HISTORY_COLUMNS = HistoryRow._fields


@dataclass
class TrainResult:
    model: nn.Module
    history: list[HistoryRow] = field(default_factory=list)
    best_epoch: int = 0


def _as_dataset(data, name: str) -> tuple[np.ndarray, np.ndarray]:
    x, y = data
    x, y = np.asarray(x), np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise ValueError(f"{name} set is empty")
    if len(x) != len(y):
        raise ValueError(f"{name} set has {len(x)} inputs but {len(y)} labels")
    return x, y


def logits(model: nn.Module, x, batch_size: int = 64) -> np.ndarray:
    """Eval-mode logits, batched, without recording a graph."""
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            outs = [model(Tensor(x[i : i + batch_size])).data for i in range(0, len(x), batch_size)]
    finally:
        model.train(was_training)
    return np.concatenate(outs).astype(np.float64)


def predict(model: nn.Module, x, batch_size: int = 64) -> np.ndarray:
    return np.argmax(logits(model, x, batch_size), axis=1)


def score_labels(pred, y, k: int) -> tuple:
    """Binary: precision/recall/f1/accuracy with fake = 1 positive.
    K > 2: macro averages over classes whose score is defined."""
    cm = confusion(pred, y, k)
    if k == 2:
        return metrics(cm).as_tuple()
    tp = np.diag(cm).astype(np.float64)
    pred_n, true_n = cm.sum(axis=0), cm.sum(axis=1)
    precision = [tp[c] / pred_n[c] for c in range(k) if pred_n[c]]
    recall = [tp[c] / true_n[c] for c in range(k) if true_n[c]]
    f1 = [2 * tp[c] / (pred_n[c] + true_n[c]) for c in range(k) if tp[c]]
    macro = [float(np.mean(v)) if v else None for v in (precision, recall, f1)]
    return (*macro, float(np.trace(cm) / cm.sum()))


def evaluate(model: nn.Module, data, k: int, batch_size: int = 64) -> tuple[float, tuple]:
    x, y = data
    z = logits(model, x, batch_size)
    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(len(y)), y].mean())
    return loss, score_labels(np.argmax(z, axis=1), y, k)


def _output_width(model: nn.Module, x) -> int:
    return logits(model, x[:1]).shape[1]


def train(model: nn.Module, train_set, val_set, config: TrainConfig | None = None) -> TrainResult:
    config = config or TrainConfig()
    config.check()
    xtr, ytr = _as_dataset(train_set, "training")
    xva, yva = _as_dataset(val_set, "validation")
    k = _output_width(model, xtr)
    for name, y in (("training", ytr), ("validation", yva)):
        bad = (y < 0) | (y >= k)
        if bad.any():
            raise ValueError(f"{name} label {y[bad][0]} outside [0, {k})")

    for i, (_, m) in enumerate(_modules(model)):
        if isinstance(m, nn.Dropout):
            m.reseed(int(stream(config.seed, "dropout", i).integers(2**31)))
    opt = nn.Adam(model.named_parameters(), lr=config.lr)
    result = TrainResult(model)
    best_acc, best_state = -1.0, model.state_dict()

    def record(epoch):
        nonlocal best_acc, best_state
        for split, data in (("train", (xtr, ytr)), ("val", (xva, yva))):
            loss, scores = evaluate(model, data, k)
            result.history.append(HistoryRow(epoch, split, loss, *scores))
        acc = result.history[-1].accuracy
        if acc >= best_acc:
            best_acc, best_state, result.best_epoch = acc, model.state_dict(), epoch

    record(0)
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = stream(config.seed, "shuffle", epoch).permutation(len(xtr))
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start : start + config.batch_size]
            opt.zero_grad()
            loss = cross_entropy(model(Tensor(xtr[idx])), ytr[idx])
            if not np.isfinite(loss.item()):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            opt.step()
        record(epoch)
    if config.restore_best:
        model.load_state_dict(best_state)
    model.eval()
    return result


def _modules(module: nn.Module, prefix: str = ""):
    yield prefix, module
    for name, child in module.children():
        yield from _modules(child, prefix + name + ".")


def _cell(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def history_csv(rows: list[HistoryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for r in rows:
        writer.writerow([_cell(v) for v in r])
    return buf.getvalue()
