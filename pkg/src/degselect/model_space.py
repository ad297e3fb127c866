"""Candidate degradation model space and its conditioning algebra.

Candidate models carry two structural labels: the process family (Wiener or
gamma) and the trend structure (linear or nonlinear).  Per-hierarchy
decisions, which may be an uncertain state, condition the candidate set down
to the subset consistent with every confident decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Union


class Hierarchy(Enum):
    FAMILY = "F"
    TREND = "T"


class Family(Enum):
    WIENER = "W"
    GAMMA = "G"


class Trend(Enum):
    LINEAR = "L"
    NONLINEAR = "NL"


Label = Union[Family, Trend]


@dataclass(frozen=True)
class Uncertain:
    """Uncertain state for one hierarchy; suspends conditioning there."""

    hierarchy: Hierarchy


Decision = Union[Family, Trend, Uncertain]


def label_hierarchy(label: Label) -> Hierarchy:
    """Hierarchy a label belongs to."""
    if isinstance(label, Family):
        return Hierarchy.FAMILY
    if isinstance(label, Trend):
        return Hierarchy.TREND
    raise TypeError(f"not a hierarchy label: {label!r}")


def parse_label(hierarchy: Hierarchy, token: str) -> Label:
    """Parse a label token ("W", "G", "L", "NL") for the given hierarchy."""
    space = Family if hierarchy is Hierarchy.FAMILY else Trend
    try:
        return space(token)
    except ValueError:
        raise ValueError(f"invalid {hierarchy.value} label: {token!r}") from None


@dataclass(frozen=True)
class CandidateModel:
    id: str
    family: Family
    trend: Trend
    param_count: int

    def __post_init__(self) -> None:
        if self.param_count < 2:
            raise ValueError(f"param_count must be >= 2, got {self.param_count}")


def structural_label(model: CandidateModel, h: Hierarchy) -> Label:
    """Structural label of a model on one hierarchy."""
    return model.family if h is Hierarchy.FAMILY else model.trend


@dataclass(frozen=True)
class CandidateSet:
    """Ordered, duplicate-free collection of candidate models."""

    models: tuple[CandidateModel, ...]

    def __post_init__(self) -> None:
        if not self.models:
            raise ValueError("candidate set must be non-empty at construction")
        ids = [m.id for m in self.models]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate model ids: {ids}")

    @classmethod
    def of(cls, models: Iterable[CandidateModel]) -> "CandidateSet":
        return cls(tuple(models))

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __contains__(self, model: CandidateModel) -> bool:
        return model in self.models

    def ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.models)


@dataclass(frozen=True)
class FilteredSet:
    """Result of conditioning; may be empty, unlike CandidateSet."""

    models: tuple[CandidateModel, ...]

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __contains__(self, model: CandidateModel) -> bool:
        return model in self.models

    def ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.models)


def subspace(cset: CandidateSet, h: Hierarchy, y: Label) -> FilteredSet:
    """Models whose label on hierarchy ``h`` equals ``y``; preserves order."""
    if label_hierarchy(y) is not h:
        raise ValueError(f"label {y} does not belong to hierarchy {h}")
    return FilteredSet(tuple(m for m in cset if structural_label(m, h) == y))


def condition(
    cset: CandidateSet, decisions: Mapping[Hierarchy, Decision]
) -> FilteredSet:
    """Intersection over confident hierarchies of their label subspaces.

    Hierarchies that are absent or decided Uncertain impose no constraint;
    an all-uncertain decision map returns the full input set.
    """
    retained = []
    for m in cset:
        keep = True
        for h, d in decisions.items():
            if isinstance(d, Uncertain):
                continue
            if label_hierarchy(d) is not h:
                raise ValueError(f"decision {d} does not belong to hierarchy {h}")
            if structural_label(m, h) != d:
                keep = False
                break
        if keep:
            retained.append(m)
    return FilteredSet(tuple(retained))


# Model ids shared with the simulator and the benchmark harness.
WIENER_FAMILY = "wiener_family"
GAMMA_FAMILY = "gamma_family"
LINEAR_WIENER = "linear_wiener"
NONLINEAR_WIENER = "nonlinear_wiener"
HOMOG_GAMMA = "homog_gamma"
NONHOMOG_GAMMA = "nonhomog_gamma"


def default_case_sets() -> tuple[CandidateSet, CandidateSet]:
    """Shipped candidate sets: family-level (2 models) and detailed (4)."""
    case1 = CandidateSet.of(
        [
            CandidateModel(WIENER_FAMILY, Family.WIENER, Trend.LINEAR, 2),
            CandidateModel(GAMMA_FAMILY, Family.GAMMA, Trend.LINEAR, 2),
        ]
    )
    case2 = CandidateSet.of(
        [
            CandidateModel(LINEAR_WIENER, Family.WIENER, Trend.LINEAR, 2),
            CandidateModel(NONLINEAR_WIENER, Family.WIENER, Trend.NONLINEAR, 3),
            CandidateModel(HOMOG_GAMMA, Family.GAMMA, Trend.LINEAR, 2),
            CandidateModel(NONHOMOG_GAMMA, Family.GAMMA, Trend.NONLINEAR, 3),
        ]
    )
    return case1, case2


def candidate_set_from_records(records: Iterable[Mapping]) -> CandidateSet:
    """Build a candidate set from config records.

    Each record: {"id": str, "family": "W"|"G", "trend": "L"|"NL",
    "param_count": int}.
    """
    models = []
    for rec in records:
        models.append(
            CandidateModel(
                id=str(rec["id"]),
                family=Family(rec["family"]),
                trend=Trend(rec["trend"]),
                param_count=int(rec["param_count"]),
            )
        )
    return CandidateSet.of(models)
