"""Catch-composition estimates and their error against ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import LEAVES, ContractError, GroundTruthOperation, Label
from .stats.wilcoxon import wilcoxon_signed_rank

OVERALL = "all"


@dataclass(frozen=True)
class CompositionEstimate:
    afo_id: str
    counts: Optional[Mapping[Label, int]]
    percentages: Mapping[Label, float]
    segmented_fraction: Optional[float] = None

    @property
    def total(self) -> Optional[int]:
        return None if self.counts is None else sum(self.counts.values())

    @property
    def over_segmented(self) -> bool:
        return self.segmented_fraction is not None and self.segmented_fraction > 100.0


def segmented_fraction(tracked_count: int, gt_total: int) -> float:
    """Tracked individuals as a percentage of the true number; may exceed 100."""
    if gt_total <= 0:
        raise ContractError("ground-truth total must be positive")
    if tracked_count < 0:
        raise ContractError("tracked count must be nonnegative")
    return 100.0 * tracked_count / gt_total


def estimate_composition(labels, afo_id: str, gt_total: Optional[int] = None) -> CompositionEstimate:
    """Count labels per species; percentages are shares of labeled tracks."""
    labels = list(labels)
    if not labels:
        raise ContractError(f"no labeled tracks for {afo_id}")
    counts = {leaf: 0 for leaf in LEAVES}
    for item in labels:
        lab = Label(getattr(item, "label", item))
        if not lab.is_leaf:
            raise ContractError(f"composition needs leaf labels, got {lab}")
        counts[lab] += 1
    total = len(labels)
    pct = {leaf: 100.0 * counts[leaf] / total for leaf in LEAVES}
    frac = None if gt_total is None else segmented_fraction(total, gt_total)
    return CompositionEstimate(afo_id, counts, pct, frac)


@dataclass(frozen=True)
class ErrorCell:
    mae: float
    sd: float
    n: int
    errors: tuple[float, ...] = field(repr=False, default=())


@dataclass
class SpeciesErrorTable:
    """MAE (percentage points) per group and species."""

    cells: dict[str, dict[Label, ErrorCell]]
    ddof: int = 0

    def groups(self) -> list[str]:
        return list(self.cells)

    def mean_mae(self, group: str) -> float:
        return float(np.mean([c.mae for c in self.cells[group].values()]))


Grouping = Union[Mapping[str, str], Callable[[str], str], None]


def _group_of(grouping: Grouping, afo_id: str) -> Optional[str]:
    if grouping is None:
        return None
    if callable(grouping):
        return grouping(afo_id)
    return grouping[afo_id]


def trip_of(afo_id: str) -> str:
    """Trip prefix of IDs like ``1_03``."""
    return afo_id.split("_", 1)[0]


def _truth_pct(gt) -> dict[Label, float]:
    if isinstance(gt, GroundTruthOperation):
        return gt.composition()
    return dict(gt.percentages)


def species_mae(
    estimates: Sequence[CompositionEstimate],
    truths: Sequence,
    grouping: Grouping = None,
    ddof: int = 0,
) -> SpeciesErrorTable:
    """Mean and standard deviation of |predicted % - true %| across operations.

    Each operation contributes to its group (if ``grouping`` is given) and
    to the overall group ``"all"``. ``ddof`` selects population (0) or
    sample (1) standard deviation.
    """
    by_id = {}
    for gt in truths:
        if gt.afo_id in by_id:
            raise ContractError(f"duplicate ground truth for {gt.afo_id}")
        by_id[gt.afo_id] = gt
    errors: dict[str, dict[Label, list[float]]] = {}
    seen = set()
    for est in estimates:
        if est.afo_id not in by_id:
            raise ContractError(f"no ground truth for {est.afo_id}")
        if est.afo_id in seen:
            raise ContractError(f"duplicate estimate for {est.afo_id}")
        seen.add(est.afo_id)
        truth = _truth_pct(by_id[est.afo_id])
        groups = [OVERALL]
        g = _group_of(grouping, est.afo_id)
        if g is not None:
            groups.insert(0, g)
        for grp in groups:
            slot = errors.setdefault(grp, {leaf: [] for leaf in LEAVES})
            for leaf in LEAVES:
                slot[leaf].append(abs(est.percentages[leaf] - truth[leaf]))
    if set(by_id) - seen:
        raise ContractError(f"ground truth without estimate: {sorted(set(by_id) - seen)}")

    cells = {}
    for grp in sorted(errors, key=lambda g: (g == OVERALL, g)):
        cells[grp] = {}
        for leaf, errs in errors[grp].items():
            arr = np.array(sorted(errs))
            sd = float(arr.std(ddof=ddof)) if arr.size > ddof else math.nan
            cells[grp][leaf] = ErrorCell(float(arr.mean()), sd, arr.size, tuple(errs))
    return SpeciesErrorTable(cells, ddof)


def significance_marker(p: float, alpha_bands: Sequence[float] = (0.10, 0.05, 0.01)) -> str:
    """``*``, ``†`` or ``‡`` for the strictest alpha band ``p`` falls under."""
    marks = ("*", "†", "‡")
    bands = sorted(alpha_bands, reverse=True)
    out = ""
    for mark, alpha in zip(marks, bands):
        if p < alpha:
            out = mark
    return out


@dataclass(frozen=True)
class MaeRow:
    group: str
    species: Label
    method: str
    mae: float
    sd: float
    n: int
    p_value: float
    marker: str


def composition_significance(
    estimates: Sequence[CompositionEstimate], truths: Sequence, afo_ids: Sequence[str], leaf: Label
):
    est = {e.afo_id: e for e in estimates}
    tru = {t.afo_id: _truth_pct(t) for t in truths}
    pred = [est[a].percentages[leaf] for a in afo_ids]
    true = [tru[a][leaf] for a in afo_ids]
    return wilcoxon_signed_rank(true, pred)


def best_method_table(
    estimates_by_method: Mapping[str, Sequence[CompositionEstimate]],
    truths: Sequence,
    grouping: Grouping = trip_of,
    ddof: int = 0,
    alpha_bands: Sequence[float] = (0.10, 0.05, 0.01),
    method: Optional[str] = None,
) -> list[MaeRow]:
    """Per-group species MAE using, for each group, the method with lowest mean MAE.

    Pass ``method`` to force one method for every group. Each row carries a
    paired signed-rank test of true vs. predicted percentages.
    """
    tables = {
        m: species_mae(est, truths, grouping, ddof) for m, est in estimates_by_method.items()
    }
    first = next(iter(tables.values()))
    rows = []
    for grp in first.groups():
        if method is not None:
            chosen = method
        else:
            chosen = min(tables, key=lambda m: (tables[m].mean_mae(grp), m))
        table = tables[chosen]
        ests = estimates_by_method[chosen]
        ids = [e.afo_id for e in ests
               if grp == OVERALL or _group_of(grouping, e.afo_id) == grp]
        for leaf in LEAVES:
            cell = table.cells[grp][leaf]
            res = composition_significance(ests, truths, ids, leaf)
            rows.append(MaeRow(grp, leaf, chosen, cell.mae, cell.sd, cell.n, res.p_value,
                               significance_marker(res.p_value, alpha_bands)))
    return rows


@dataclass(frozen=True)
class SegmentationRow:
    group: str
    mean_a: float
    sd_a: float
    mean_b: float
    sd_b: float
    n: int
    p_value: float
    marker: str


def segmentation_comparison(
    fractions_a: Mapping[str, float],
    fractions_b: Mapping[str, float],
    grouping: Grouping = trip_of,
    ddof: int = 0,
    alpha_bands: Sequence[float] = (0.10, 0.05, 0.01),
    alternative: str = "two-sided",
) -> list[SegmentationRow]:
    """Compare paired per-operation segmented fractions of two approaches.

    Each group (and ``"all"``) gets the mean and SD of both approaches and
    a signed-rank test on the paired fractions.
    """
    if set(fractions_a) != set(fractions_b):
        raise ContractError("both approaches must cover the same operations")
    ids = sorted(fractions_a)
    groups: dict[str, list[str]] = {}
    for afo in ids:
        g = _group_of(grouping, afo)
        if g is not None:
            groups.setdefault(g, []).append(afo)
    groups[OVERALL] = ids
    rows = []
    for grp in sorted(groups, key=lambda g: (g == OVERALL, g)):
        a = np.array([fractions_a[i] for i in groups[grp]], dtype=float)
        b = np.array([fractions_b[i] for i in groups[grp]], dtype=float)
        res = wilcoxon_signed_rank(a, b, alternative=alternative)
        sd = (lambda x: float(x.std(ddof=ddof)) if x.size > ddof else math.nan)
        rows.append(SegmentationRow(grp, float(a.mean()), sd(a), float(b.mean()), sd(b),
                                    a.size, res.p_value,
                                    significance_marker(res.p_value, alpha_bands)))
    return rows
