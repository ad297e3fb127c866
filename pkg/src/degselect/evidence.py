"""Local evidence bank: loading, trajectory feature queries, BM25 retrieval.

The bank is a line-delimited file of proposition records with provenance.
Retrieval is purely lexical (BM25 over lowercased tokens) so results are
deterministic and fully offline.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .model_space import Family, Hierarchy, Trend
from .simulate import Trajectory

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_TOP_K = 8

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class EvidenceCategory(Enum):
    MECHANISM = "mechanism"
    PROCESS_THEORY = "process_theory"
    REVIEW = "review"


@dataclass(frozen=True)
class EvidenceHint:
    family: Optional[Family] = None
    trend: Optional[Trend] = None

    def for_hierarchy(self, h: Hierarchy):
        return self.family if h is Hierarchy.FAMILY else self.trend


@dataclass(frozen=True)
class EvidenceRecord:
    id: int
    proposition: str
    doc_id: str
    category: EvidenceCategory
    citation: str
    hint: Optional[EvidenceHint] = None

    def __post_init__(self) -> None:
        if not self.proposition:
            raise ValueError("proposition must be non-empty")


@dataclass(frozen=True)
class RetrievedSet:
    items: tuple[tuple[EvidenceRecord, float], ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def records(self) -> tuple[EvidenceRecord, ...]:
        return tuple(r for r, _ in self.items)


class EvidenceBank:
    """Immutable proposition store with an inverted index."""

    def __init__(self, records: Sequence[EvidenceRecord]):
        self.records = tuple(records)
        self._by_id = {r.id: r for r in self.records}
        if len(self._by_id) != len(self.records):
            raise ValueError("duplicate evidence record ids")
        self._doc_tokens = {r.id: tokenize(r.proposition) for r in self.records}
        self._doc_len = {rid: len(toks) for rid, toks in self._doc_tokens.items()}
        self._avg_len = (
            sum(self._doc_len.values()) / len(self.records) if self.records else 0.0
        )
        self._postings: dict[str, dict[int, int]] = {}
        for rid, toks in self._doc_tokens.items():
            for tok in toks:
                self._postings.setdefault(tok, {}).setdefault(rid, 0)
                self._postings[tok][rid] += 1

    def __len__(self) -> int:
        return len(self.records)

    def idf(self, term: str) -> float:
        df = len(self._postings.get(term, {}))
        n = len(self.records)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def bm25_scores(self, query_tokens: Sequence[str]) -> dict[int, float]:
        """BM25 score for every record matching at least one query term."""
        scores: dict[int, float] = {}
        for term in query_tokens:
            postings = self._postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for rid, tf in postings.items():
                norm = BM25_K1 * (
                    1.0 - BM25_B + BM25_B * self._doc_len[rid] / self._avg_len
                )
                scores[rid] = scores.get(rid, 0.0) + idf * tf * (BM25_K1 + 1.0) / (
                    tf + norm
                )
        return scores


def _parse_record(rec: dict) -> EvidenceRecord:
    hint = None
    if rec.get("hint") is not None:
        hraw = rec["hint"]
        hint = EvidenceHint(
            family=Family(hraw["family"]) if hraw.get("family") else None,
            trend=Trend(hraw["trend"]) if hraw.get("trend") else None,
        )
    return EvidenceRecord(
        id=int(rec["id"]),
        proposition=str(rec["proposition"]),
        doc_id=str(rec["doc_id"]),
        category=EvidenceCategory(rec["category"]),
        citation=str(rec.get("citation", "")),
        hint=hint,
    )


def load_bank(path) -> EvidenceBank:
    """Load a line-delimited evidence bank file."""
    records = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = _parse_record(json.loads(line))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad evidence record: {exc}")
            if rec.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate evidence id {rec.id}")
            seen.add(rec.id)
            records.append(rec)
    return EvidenceBank(records)


def default_bank() -> EvidenceBank:
    """The starter bank shipped with the package."""
    ref = resources.files("degselect").joinpath("data/evidence_bank.jsonl")
    with resources.as_file(ref) as path:
        return load_bank(path)


_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


def sentence_split_fallback(document: str, doc_id: str) -> list[EvidenceRecord]:
    """Naive proposition extraction: sentence split, drop short fragments."""
    records = []
    next_id = 1
    for raw in _SENTENCE_RE.split(document.strip()):
        sentence = raw.strip()
        if len(tokenize(sentence)) < 4:
            continue
        records.append(
            EvidenceRecord(
                id=next_id,
                proposition=sentence,
                doc_id=doc_id,
                category=EvidenceCategory.REVIEW,
                citation=doc_id,
            )
        )
        next_id += 1
    return records


@dataclass(frozen=True)
class FeatureSummary:
    neg_increment_fraction: float
    monotone: bool
    trend_curvature: float
    noise_scale_ratio: float


@dataclass(frozen=True)
class Query:
    text: str
    features: FeatureSummary


EPS = 1e-9


def feature_summary(traj: Trajectory) -> FeatureSummary:
    """Shape features of the observed trajectory used for query building."""
    if len(traj) < 3:
        raise ValueError("feature summary needs at least 3 observations")
    values = np.asarray(traj.values)
    times = np.asarray(traj.times)
    deltas = np.diff(values)
    neg_frac = float(np.mean(deltas < 0))
    monotone = neg_frac == 0.0
    pos = times > 0
    if np.count_nonzero(pos) >= 2:
        logt = np.log(times[pos])
        logy = np.log(np.maximum(values[pos], EPS))
        slope = float(np.polyfit(logt, logy, 1)[0])
        curvature = slope - 1.0
    else:
        curvature = 0.0
    noise_ratio = float(np.std(deltas) / (abs(float(np.mean(deltas))) + EPS))
    return FeatureSummary(
        neg_increment_fraction=neg_frac,
        monotone=monotone,
        trend_curvature=curvature,
        noise_scale_ratio=noise_ratio,
    )


CURVATURE_NONLINEAR = 0.25


def build_query(traj: Trajectory, context: str = "") -> Query:
    """Fixed template turning trajectory features plus context into a query."""
    feats = feature_summary(traj)
    phrases = []
    if feats.monotone:
        phrases.append("monotonic increase of the health indicator")
    else:
        phrases.append("local increases and decreases of the health indicator")
    if feats.trend_curvature > CURVATURE_NONLINEAR:
        phrases.append("accelerating nonlinear trend")
    else:
        phrases.append("approximately linear trend")
    if feats.noise_scale_ratio > 1.0:
        phrases.append("high measurement noise")
    text = "; ".join(phrases)
    if context:
        text = f"{text}; {context}"
    return Query(text=text, features=feats)


def retrieve_top_k(
    bank: EvidenceBank, query: Query, k: int = DEFAULT_TOP_K
) -> RetrievedSet:
    """Top-k BM25 matches; zero-score records excluded, ties by id."""
    if k < 1:
        raise ValueError("k must be positive")
    scores = bank.bm25_scores(tokenize(query.text))
    ranked = sorted(
        ((rid, s) for rid, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    items = tuple((bank._by_id[rid], s) for rid, s in ranked[:k])
    return RetrievedSet(items=items)
