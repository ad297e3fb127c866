"""End-to-end inference: hierarchy decisions, space conditioning, selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .criteria import Criterion, ScoreTable, select_argmin
from .decisions import (
    ArbitrationConfig,
    HierarchyDecisionRecord,
    ProviderPair,
    decide_all_hierarchies,
    default_providers,
)
from .evidence import DEFAULT_TOP_K, EvidenceBank, RetrievedSet
from .model_space import (
    CandidateModel,
    CandidateSet,
    FilteredSet,
    Hierarchy,
    condition,
    default_case_sets,
)
from .simulate import Trajectory

DEFAULT_BANNED_TOKENS = ("rul", "failure time", "remaining life")


class Case(Enum):
    CASE1 = "case1"  # family level only
    CASE2 = "case2"  # family and trend


@dataclass(frozen=True)
class InferenceInput:
    trajectory: Trajectory
    context: str
    candidates: CandidateSet
    hierarchies: tuple[Hierarchy, ...] = (Hierarchy.FAMILY, Hierarchy.TREND)

    @classmethod
    def for_case(cls, case: Case, trajectory: Trajectory, context: str = "") -> "InferenceInput":
        case1, case2 = default_case_sets()
        if case is Case.CASE1:
            return cls(trajectory, context, case1, (Hierarchy.FAMILY,))
        return cls(trajectory, context, case2, (Hierarchy.FAMILY, Hierarchy.TREND))


@dataclass(frozen=True)
class PipelineConfig:
    criterion: Criterion = Criterion.EAL
    arbitration: ArbitrationConfig = ArbitrationConfig()
    top_k: int = DEFAULT_TOP_K
    strict_leakage: bool = False
    banned_tokens: tuple[str, ...] = DEFAULT_BANNED_TOKENS
    min_points: int = 4  # below: too short for the linear fitters


@dataclass
class SelectionResult:
    chosen: CandidateModel
    decisions: dict[Hierarchy, HierarchyDecisionRecord]
    retained: FilteredSet
    scores: Optional[ScoreTable]
    evidence_trail: dict[Hierarchy, RetrievedSet]
    diagnostics: list[str] = field(default_factory=list)


class EmptyRetainedSetError(ValueError):
    pass


class LeakageError(ValueError):
    pass


def validate_input(
    input: InferenceInput, cfg: PipelineConfig = PipelineConfig()
) -> list[str]:
    """Leakage and short-window checks; returns warnings, raises nothing."""
    warnings = []
    lowered = input.context.lower()
    for token in cfg.banned_tokens:
        if token in lowered:
            warnings.append(
                f"context may leak post-inspection information: contains {token!r}"
            )
    if len(input.trajectory) < cfg.min_points:
        warnings.append(
            f"trajectory has {len(input.trajectory)} points; "
            f"fitters need at least {cfg.min_points}"
        )
    return warnings


def run_inference(
    input: InferenceInput,
    bank: EvidenceBank,
    providers: Optional[ProviderPair] = None,
    cfg: PipelineConfig = PipelineConfig(),
) -> SelectionResult:
    """Decide each in-scope hierarchy, condition the space, pick the model."""
    providers = providers or default_providers()
    diagnostics = validate_input(input, cfg)
    if cfg.strict_leakage and any("leak" in w for w in diagnostics):
        raise LeakageError("; ".join(diagnostics))

    records = decide_all_hierarchies(
        input.trajectory,
        input.context,
        bank,
        providers,
        cfg.arbitration,
        hierarchies=input.hierarchies,
        top_k=cfg.top_k,
    )
    retained = condition(
        input.candidates, {h: rec.final for h, rec in records.items()}
    )
    if len(retained) == 0:
        raise EmptyRetainedSetError(
            "hierarchy decisions conditioned the candidate set to empty"
        )
    if len(retained) == 1:
        chosen = next(iter(retained))
        scores = None
    else:
        chosen, scores = select_argmin(retained, input.trajectory, cfg.criterion)
        diagnostics.extend(scores.notes)
    return SelectionResult(
        chosen=chosen,
        decisions=records,
        retained=retained,
        scores=scores,
        evidence_trail={h: rec.evidence for h, rec in records.items()},
        diagnostics=diagnostics,
    )
