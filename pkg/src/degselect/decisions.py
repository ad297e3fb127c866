"""Per-hierarchy answer providers and the confidence arbitration rule.

Two answers are produced for every hierarchy: one from trajectory features
alone and one additionally conditioned on retrieved evidence.  A
deterministic four-branch rule then yields a confident label or the
uncertain state, based on agreement and the confidence margin.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .evidence import (
    DEFAULT_TOP_K,
    EvidenceBank,
    Query,
    RetrievedSet,
    build_query,
    feature_summary,
    retrieve_top_k,
)
from .fitting import (
    FitError,
    fit_homog_gamma,
    fit_linear_wiener,
    fit_nonhomog_gamma,
    fit_nonlinear_wiener,
    increments,
)
from .model_space import Decision, Family, Hierarchy, Label, Trend, Uncertain, label_hierarchy
from .simulate import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Answer:
    label: Label
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0) or not math.isfinite(self.confidence):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")

    @property
    def hierarchy(self) -> Hierarchy:
        return label_hierarchy(self.label)


@dataclass(frozen=True)
class ArbitrationConfig:
    delta: float = 0.05  # confidence margin

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")


def arbitrate(internal: Answer, contextual: Answer, cfg: ArbitrationConfig) -> Decision:
    """Four-branch rule: agreement, dominant confidence, or uncertain state."""
    if internal.hierarchy is not contextual.hierarchy:
        raise ValueError(
            f"answers belong to different hierarchies: "
            f"{internal.hierarchy} vs {contextual.hierarchy}"
        )
    if internal.label == contextual.label:
        return contextual.label
    gap = internal.confidence - contextual.confidence
    if gap > cfg.delta:
        return internal.label
    if -gap > cfg.delta:
        return contextual.label
    return Uncertain(internal.hierarchy)


class DecisionProvider(Protocol):
    def decide(
        self,
        hierarchy: Hierarchy,
        traj: Trajectory,
        context: str,
        evidence: Optional[RetrievedSet] = None,
    ) -> Answer:
        ...


@dataclass(frozen=True)
class HeuristicConfig:
    gamma_neg_threshold: float = 0.02  # below: monotone enough for gamma
    conf_scale: float = 0.15
    monotone_bonus: float = 0.2
    monotone_min_steps: int = 30
    lr_threshold: float = 3.84  # chi-square(1) at 5%
    lr_scale: float = 4.0
    conf_floor: float = 0.5
    conf_cap: float = 0.99


class HeuristicProvider:
    """Deterministic trajectory-feature answers (no evidence consulted)."""

    def __init__(self, cfg: HeuristicConfig = HeuristicConfig()):
        self.cfg = cfg

    def _clamp(self, c: float) -> float:
        return min(max(c, self.cfg.conf_floor), self.cfg.conf_cap)

    def favored_family(self, traj: Trajectory) -> Family:
        feats = feature_summary(traj)
        p = feats.neg_increment_fraction
        return Family.GAMMA if p < self.cfg.gamma_neg_threshold else Family.WIENER

    def _decide_family(self, traj: Trajectory) -> Answer:
        deltas = np.diff(np.asarray(traj.values))
        if np.max(np.abs(deltas)) < 1e-12:
            return Answer(Family.WIENER, self.cfg.conf_floor)  # flat: no signal
        feats = feature_summary(traj)
        p = feats.neg_increment_fraction
        label = (
            Family.GAMMA if p < self.cfg.gamma_neg_threshold else Family.WIENER
        )
        conf = 0.5 + abs(p - self.cfg.gamma_neg_threshold) / self.cfg.conf_scale
        strictly_monotone = bool(np.all(deltas > 0))
        if (
            label is Family.GAMMA
            and strictly_monotone
            and len(deltas) >= self.cfg.monotone_min_steps
        ):
            conf += self.cfg.monotone_bonus
        return Answer(label, self._clamp(conf))

    def _decide_trend(self, traj: Trajectory) -> Answer:
        try:
            inc = increments(traj)
            if self.favored_family(traj) is Family.GAMMA:
                ll_lin = fit_homog_gamma(inc).loglik
                ll_nl = fit_nonhomog_gamma(inc).loglik
            else:
                ll_lin = fit_linear_wiener(inc).loglik
                ll_nl = fit_nonlinear_wiener(inc).loglik
        except (FitError, ValueError):
            return Answer(Trend.LINEAR, self.cfg.conf_floor)
        lr = 2.0 * (ll_nl - ll_lin)
        label = Trend.NONLINEAR if lr > self.cfg.lr_threshold else Trend.LINEAR
        t = 1.0 / (1.0 + math.exp(-(lr - self.cfg.lr_threshold) / self.cfg.lr_scale))
        conf = 0.5 + 0.49 * abs(2.0 * t - 1.0)
        return Answer(label, self._clamp(conf))

    def decide(
        self,
        hierarchy: Hierarchy,
        traj: Trajectory,
        context: str = "",
        evidence: Optional[RetrievedSet] = None,
    ) -> Answer:
        if hierarchy is Hierarchy.FAMILY:
            return self._decide_family(traj)
        return self._decide_trend(traj)


def _label_sign(label: Label) -> float:
    # Sign convention: +1 for Wiener / nonlinear, -1 for gamma / linear.
    return 1.0 if label in (Family.WIENER, Trend.NONLINEAR) else -1.0


def _sign_label(hierarchy: Hierarchy, positive: bool) -> Label:
    if hierarchy is Hierarchy.FAMILY:
        return Family.WIENER if positive else Family.GAMMA
    return Trend.NONLINEAR if positive else Trend.LINEAR


class EvidenceBlendProvider:
    """Blends retrieved evidence hints with the feature-based answer."""

    def __init__(self, internal: Optional[HeuristicProvider] = None):
        self.internal = internal or HeuristicProvider()

    def decide(
        self,
        hierarchy: Hierarchy,
        traj: Trajectory,
        context: str = "",
        evidence: Optional[RetrievedSet] = None,
    ) -> Answer:
        base = self.internal.decide(hierarchy, traj, context)
        f = _label_sign(base.label) * (2.0 * base.confidence - 1.0)
        weights, votes = [], []
        for record, s in evidence or ():
            hint = record.hint.for_hierarchy(hierarchy) if record.hint else None
            if hint is None:
                continue
            weights.append(s)
            votes.append(_label_sign(hint))
        if weights:
            v = float(np.average(votes, weights=weights))
            u = 0.5 * v + 0.5 * f
        else:
            u = f
        if u == 0.0:
            label = base.label
        else:
            label = _sign_label(hierarchy, u > 0.0)
        return Answer(label, 0.5 + 0.49 * abs(u))


class RemoteTextGenProvider:
    """One-shot prompt to an HTTP text-generation endpoint.

    Request body {"prompt", "max_tokens"}; response body {"text"} whose first
    line must read "<LABEL> <confidence>".  Malformed output is retried once,
    then the internal provider answers with a diagnostic.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_tokens: int = 64,
        fallback: Optional[HeuristicProvider] = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_tokens = max_tokens
        self.fallback = fallback or HeuristicProvider()
        self.diagnostics: list[str] = []

    def _render_prompt(
        self,
        hierarchy: Hierarchy,
        traj: Trajectory,
        context: str,
        evidence: Optional[RetrievedSet],
    ) -> str:
        query = build_query(traj, context)
        labels = (
            ("W", "G") if hierarchy is Hierarchy.FAMILY else ("L", "NL")
        )
        lines = [
            "You are selecting the structure of a degradation model.",
            f"Observed trajectory characteristics: {query.text}.",
        ]
        if evidence:
            lines.append("Evidence:")
            lines.extend(f"- {r.proposition}" for r in evidence.records())
        lines.append(
            f"Answer on the first line with one label from {{{labels[0]}, {labels[1]}}} "
            "followed by a confidence in [0, 1], e.g. "
            f"'{labels[0]} 0.8'."
        )
        return "\n".join(lines)

    def _parse(self, hierarchy: Hierarchy, text: str) -> Optional[Answer]:
        first = text.strip().splitlines()[0] if text.strip() else ""
        parts = first.split()
        if len(parts) < 2:
            return None
        space = Family if hierarchy is Hierarchy.FAMILY else Trend
        try:
            label = space(parts[0].upper())
            conf = float(parts[1])
        except ValueError:
            return None
        if not math.isfinite(conf):
            return None
        if not 0.0 <= conf <= 1.0:
            self.diagnostics.append(f"confidence {conf} clamped to [0, 1]")
            log.warning("remote confidence %s out of range; clamped", conf)
            conf = min(max(conf, 0.0), 1.0)
        return Answer(label, conf)

    def decide(
        self,
        hierarchy: Hierarchy,
        traj: Trajectory,
        context: str = "",
        evidence: Optional[RetrievedSet] = None,
    ) -> Answer:
        import requests

        prompt = self._render_prompt(hierarchy, traj, context, evidence)
        for attempt in range(2):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"prompt": prompt, "max_tokens": self.max_tokens},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                answer = self._parse(hierarchy, json.loads(resp.text)["text"])
            except (requests.RequestException, KeyError, json.JSONDecodeError) as exc:
                self.diagnostics.append(f"remote request failed: {exc}")
                log.warning("remote provider failed (%s); internal fallback", exc)
                return self.fallback.decide(hierarchy, traj, context, evidence)
            if answer is not None:
                return answer
            self.diagnostics.append(f"malformed remote output (attempt {attempt + 1})")
        log.warning("remote output malformed twice; internal fallback")
        return self.fallback.decide(hierarchy, traj, context, evidence)


@dataclass(frozen=True)
class ProviderPair:
    internal: DecisionProvider
    contextual: DecisionProvider


def default_providers() -> ProviderPair:
    internal = HeuristicProvider()
    return ProviderPair(internal=internal, contextual=EvidenceBlendProvider(internal))


@dataclass(frozen=True)
class HierarchyDecisionRecord:
    hierarchy: Hierarchy
    internal: Answer
    contextual: Answer
    final: Decision
    evidence: RetrievedSet


def decide_all_hierarchies(
    traj: Trajectory,
    context: str,
    bank: EvidenceBank,
    providers: ProviderPair,
    cfg: ArbitrationConfig = ArbitrationConfig(),
    hierarchies: tuple[Hierarchy, ...] = (Hierarchy.FAMILY, Hierarchy.TREND),
    top_k: int = DEFAULT_TOP_K,
) -> dict[Hierarchy, HierarchyDecisionRecord]:
    """Query, retrieve, answer twice, and arbitrate for each hierarchy."""
    records: dict[Hierarchy, HierarchyDecisionRecord] = {}
    for h in hierarchies:
        query = build_query(traj, context)
        retrieved = retrieve_top_k(bank, query, top_k)
        internal = providers.internal.decide(h, traj, context)
        contextual = providers.contextual.decide(h, traj, context, retrieved)
        final = arbitrate(internal, contextual, cfg)
        records[h] = HierarchyDecisionRecord(
            hierarchy=h,
            internal=internal,
            contextual=contextual,
            final=final,
            evidence=retrieved,
        )
    return records
