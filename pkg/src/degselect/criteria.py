"""Statistical model-selection scores and the argmin selection rule.

All scores are lower-is-better.  Inapplicable fits (gamma models facing
non-positive increments, degenerate variance, ...) score +inf so the
selection rule can reject them naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .fitting import FitError, IncrementSeries, fit_model, increments, loglik
from .model_space import CandidateModel, CandidateSet, FilteredSet
from .simulate import Trajectory

INF = float("inf")

CV_FOLDS = 5


class Criterion(Enum):
    AIC = "aic"
    BIC = "bic"
    MDL = "mdl"
    CV = "cv"
    EAL = "eal"


@dataclass
class ScoreTable:
    criterion: Criterion
    entries: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


class NoApplicableModelError(ValueError):
    pass


def _cv_score(model: CandidateModel, inc: IncrementSeries) -> float:
    """Mean held-out negative log-likelihood over contiguous folds."""
    n = len(inc)
    if n < 2 * CV_FOLDS:
        return INF
    bounds = np.linspace(0, n, CV_FOLDS + 1).astype(int)
    fold_means = []
    for f in range(CV_FOLDS):
        lo, hi = bounds[f], bounds[f + 1]
        train = IncrementSeries(
            deltas=inc.deltas[:lo] + inc.deltas[hi:],
            step_indices=inc.step_indices[:lo] + inc.step_indices[hi:],
        )
        held = IncrementSeries(
            deltas=inc.deltas[lo:hi], step_indices=inc.step_indices[lo:hi]
        )
        try:
            fit = fit_model(model, train)
        except FitError:
            return INF
        ll = loglik(model, fit.params, held)
        if not math.isfinite(ll):
            return INF
        fold_means.append(-ll / len(held))
    return float(np.mean(fold_means))


def score(
    model: CandidateModel,
    traj: Trajectory,
    criterion: Criterion,
    notes: Optional[list[str]] = None,
) -> float:
    """Score one candidate on one trajectory; +inf when the fit fails."""
    inc = increments(traj)
    n = len(inc)
    if criterion is Criterion.CV:
        return _cv_score(model, inc)
    try:
        fit = fit_model(model, inc)
    except FitError as exc:
        if notes is not None:
            notes.append(f"{model.id}: {exc}")
        return INF
    ll = fit.loglik
    if not math.isfinite(ll):
        return INF
    k = model.param_count
    if criterion is Criterion.AIC:
        return 2.0 * k - 2.0 * ll
    if criterion is Criterion.BIC:
        return k * math.log(n) - 2.0 * ll
    if criterion is Criterion.MDL:
        # Two-part code; half the BIC, so the selection order is identical.
        return 0.5 * k * math.log(n) - ll
    return -ll / n  # EAL


def select_argmin(
    cset: CandidateSet | FilteredSet | Iterable[CandidateModel],
    traj: Trajectory,
    criterion: Criterion,
) -> tuple[CandidateModel, ScoreTable]:
    """Minimum-score model over a candidate collection.

    A singleton collection short-circuits without scoring.  Ties break by
    fewer parameters, then lexicographic id.
    """
    models = list(cset)
    if not models:
        raise ValueError("candidate collection must be non-empty")
    table = ScoreTable(criterion=criterion)
    if len(models) == 1:
        return models[0], table
    for m in models:
        table.entries[m.id] = score(m, traj, criterion, notes=table.notes)
    if all(v == INF for v in table.entries.values()):
        raise NoApplicableModelError(
            f"no applicable model among {[m.id for m in models]}"
        )
    best = min(models, key=lambda m: (table.entries[m.id], m.param_count, m.id))
    return best, table
