from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import LEAVES, ContractError, Label


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[Label, ...]
    counts: np.ndarray  # counts[true, predicted]

    @property
    def normalized(self) -> np.ndarray:
        """Row-normalized matrix; empty rows stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(rows > 0, self.counts / np.where(rows == 0, 1, rows), 0.0)
        return out

    def class_accuracy(self) -> dict[Label, float]:
        rows = self.counts.sum(axis=1)
        return {
            lab: float(self.counts[i, i] / rows[i]) if rows[i] else float("nan")
            for i, lab in enumerate(self.labels)
        }

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")


def confusion(labels_pred: Sequence, labels_true: Sequence,
              labels: Sequence[Label] = LEAVES) -> ConfusionMatrix:
    """Tally (true, predicted) pairs. Pairs whose true label is FISH are skipped."""
    if len(labels_pred) != len(labels_true):
        raise ContractError(
            f"label lists differ in length ({len(labels_pred)} vs {len(labels_true)})"
        )
    labels = tuple(Label(l) for l in labels)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, t in zip(labels_pred, labels_true):
        t = Label(t)
        if t is Label.FISH:
            continue
        p = Label(p)
        if t not in index or p not in index:
            raise ContractError(f"label pair ({t}, {p}) outside {[str(l) for l in labels]}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(labels, counts)
