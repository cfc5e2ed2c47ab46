"""Agreement between experts labeling the same fish as bigeye or yellowfin."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import ContractError, Label

SPECIES = (Label.BET, Label.YFT)


@dataclass(frozen=True)
class ExpertAnnotationMatrix:
    fish_ids: tuple[str, ...]
    expert_ids: tuple[str, ...]
    cells: tuple[tuple[Optional[Label], ...], ...]

    def __post_init__(self):
        if len(self.cells) != len(self.fish_ids):
            raise ContractError("one row of labels per fish is required")
        for fid, row in zip(self.fish_ids, self.cells):
            if len(row) != len(self.expert_ids):
                raise ContractError(f"fish {fid}: expected {len(self.expert_ids)} expert columns")
            for c in row:
                if c is not None and c not in SPECIES:
                    raise ContractError(f"fish {fid}: unexpected label {c}")

    @classmethod
    def from_rows(cls, rows: Mapping[str, Sequence], expert_ids=None) -> "ExpertAnnotationMatrix":
        parsed = {}
        for fid, row in rows.items():
            parsed[fid] = tuple(None if c in (None, "", "-") else Label(c) for c in row)
        width = len(next(iter(parsed.values()))) if parsed else 0
        experts = tuple(expert_ids or (f"expert_{i + 1}" for i in range(width)))
        return cls(tuple(parsed), experts, tuple(parsed.values()))

    def counts(self) -> np.ndarray:
        """``(n_fish, 2)`` array of BET and YFT label counts."""
        return np.array(
            [[row.count(Label.BET), row.count(Label.YFT)] for row in self.cells], dtype=int
        ).reshape(-1, 2)


@dataclass(frozen=True)
class SpeciesAgreement:
    mean: float
    sd: float
    unanimous: tuple[str, ...]


@dataclass(frozen=True)
class AgreementResult:
    min_experts: int
    retained: tuple[str, ...]
    per_fish: Mapping[str, tuple[float, float]]
    species: Mapping[Label, SpeciesAgreement]


def expert_agreement(matrix: ExpertAnnotationMatrix, min_experts: int = 4,
                     ddof: int = 1) -> AgreementResult:
    """Share of expert labels per species, averaged over sufficiently labeled fish.

    A fish is retained when at least ``min_experts`` experts labeled it.
    Its BET agreement is the fraction of its labels that are BET; YFT is the
    complement. A species is unanimous for a fish when every expert in the
    matrix gave that label.
    """
    if min_experts < 1:
        raise ContractError("min_experts must be >= 1")
    counts = matrix.counts()
    labeled = counts.sum(axis=1)
    keep = np.flatnonzero(labeled >= min_experts)
    if keep.size == 0:
        raise ContractError(f"no fish labeled by at least {min_experts} experts")
    bet = counts[keep, 0] / labeled[keep]
    yft = 1.0 - bet
    retained = tuple(matrix.fish_ids[i] for i in keep)
    n_exp = len(matrix.expert_ids)
    species = {}
    for k, (lab, share) in enumerate(zip(SPECIES, (bet, yft))):
        unanimous = tuple(matrix.fish_ids[i] for i in keep if counts[i, k] == n_exp)
        sd = float(share.std(ddof=ddof)) if share.size > ddof else float("nan")
        species[lab] = SpeciesAgreement(float(share.mean()), sd, unanimous)
    per_fish = {fid: (float(b), float(y)) for fid, b, y in zip(retained, bet, yft)}
    return AgreementResult(min_experts, retained, per_fish, species)
