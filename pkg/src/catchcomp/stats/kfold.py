from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from ..core import ContractError


def repeated_stratified_kfold(labels: Sequence, k: int = 5, repeats: int = 10,
                              seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """``repeats * k`` (train, validation) index splits, stratified by label.

    Within each repeat the members of every class are shuffled and dealt to
    the folds in turn, continuing the rotation from one class to the next,
    so per-class and total fold sizes each differ by at most one.
    """
    if k < 2:
        raise ContractError("k must be at least 2")
    if repeats < 1:
        raise ContractError("repeats must be at least 1")
    labels = list(labels)
    sizes = Counter(labels)
    small = sorted(str(c) for c, n in sizes.items() if n < k)
    if small:
        raise ContractError(f"classes with fewer than {k} members: {small}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    classes = sorted(sizes, key=str)
    members = {c: np.array([i for i, l in enumerate(labels) if l == c]) for c in classes}
    all_idx = np.arange(len(labels))
    splits = []
    for _ in range(repeats):
        fold_of = np.empty(len(labels), dtype=int)
        cursor = 0
        for c in classes:
            idx = rng.permutation(members[c])
            fold_of[idx] = (cursor + np.arange(idx.size)) % k
            cursor = (cursor + idx.size) % k
        for f in range(k):
            val = all_idx[fold_of == f]
            train = all_idx[fold_of != f]
            splits.append((train, val))
    return splits
