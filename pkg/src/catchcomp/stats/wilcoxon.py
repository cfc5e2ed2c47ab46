"""Wilcoxon signed-rank test with an exact null distribution for small samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm, rankdata

from ..core import ContractError

EXACT_MAX_N = 25
# Differences closer than this are treated as tied (binary rounding of
# decimal inputs otherwise splits true ties).
_TIE_DECIMALS = 9


class WilcoxonMethod(str, Enum):
    EXACT = "Exact"
    NORMAL = "NormalApprox"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_statistic: float
    p_value: float
    method: WilcoxonMethod
    w_plus: float = 0.0
    w_minus: float = 0.0
    degenerate: bool = False


def signed_ranks(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Mid-ranks of |a - b| over nonzero differences, and the difference signs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError("paired samples must be 1-D and of equal length")
    if a.size == 0:
        raise ContractError("need at least one pair")
    d = np.round(a - b, _TIE_DECIMALS)
    d = d[d != 0]
    return rankdata(np.abs(d)), np.sign(d)


def exact_null_counts(ranks) -> tuple[np.ndarray, int]:
    """Number of sign assignments giving each value of 2*W+.

    ``counts[s]`` is how many of the 2**n assignments have doubled positive
    rank sum ``s``; doubling keeps mid-ranks integral.
    """
    doubled = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    reach = 0
    for r in doubled:
        shifted = counts[: reach + 1].copy()
        counts[r: r + reach + 1] = counts[r: r + reach + 1] + shifted
        reach += r
    return counts, total


def exact_p_value(ranks, w_plus: float, alternative: str = "two-sided") -> float:
    counts, total = exact_null_counts(ranks)
    n = len(ranks)
    denom = 2 ** n
    s = int(round(2 * w_plus))
    if alternative == "greater":
        hits = int(sum(counts[s:]))
        return hits / denom
    if alternative == "less":
        hits = int(sum(counts[: s + 1]))
        return hits / denom
    low = min(s, total - s)
    hits = int(sum(counts[: low + 1]))
    return min(1.0, 2 * hits / denom)


def normal_p_value(ranks, w_plus: float, alternative: str = "two-sided") -> float:
    """Normal approximation with tie-corrected variance and continuity correction."""
    ranks = np.asarray(ranks)
    n = ranks.size
    mean = n * (n + 1) / 4
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48
    if var <= 0:
        return 1.0
    sd = math.sqrt(var)
    if alternative == "greater":
        return float(norm.sf((w_plus - mean - 0.5) / sd))
    if alternative == "less":
        return float(norm.cdf((w_plus - mean + 0.5) / sd))
    w = min(w_plus, ranks.sum() - w_plus)
    z = min(0.0, (w - mean + 0.5) / sd)
    return float(min(1.0, 2 * norm.cdf(z)))


def wilcoxon_signed_rank(a, b, method: str = "auto", alternative: str = "two-sided") -> WilcoxonResult:
    """Paired signed-rank test of ``a`` against ``b``.

    Zero differences are dropped. ``method="auto"`` uses the exact null
    distribution up to 25 nonzero pairs and the normal approximation above.
    ``alternative="greater"`` tests whether ``a`` tends to exceed ``b``.
    When every difference is zero the result is flagged ``degenerate``
    with p = 1.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ContractError(f"unknown alternative {alternative!r}")
    ranks, signs = signed_ranks(a, b)
    n = ranks.size
    w_plus = float(ranks[signs > 0].sum())
    w_minus = float(ranks[signs < 0].sum())
    if method == "auto":
        chosen = WilcoxonMethod.EXACT if n <= EXACT_MAX_N else WilcoxonMethod.NORMAL
    else:
        chosen = WilcoxonMethod(method) if method in ("Exact", "NormalApprox") else {
            "exact": WilcoxonMethod.EXACT, "normal": WilcoxonMethod.NORMAL,
            "approx": WilcoxonMethod.NORMAL}[method]
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, chosen, 0.0, 0.0, degenerate=True)
    if chosen is WilcoxonMethod.EXACT:
        if n > EXACT_MAX_N:
            raise ContractError(f"exact method limited to n <= {EXACT_MAX_N}, got {n}")
        p = exact_p_value(ranks, w_plus, alternative)
    else:
        p = normal_p_value(ranks, w_plus, alternative)
    p = max(p, np.nextafter(0.0, 1.0))
    return WilcoxonResult(n, min(w_plus, w_minus), float(p), chosen, w_plus, w_minus)
