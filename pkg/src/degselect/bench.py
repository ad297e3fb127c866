"""Benchmark harness: dataset protocol, baselines, metrics, perturbations."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .criteria import Criterion, NoApplicableModelError, select_argmin
from .decisions import (
    ArbitrationConfig,
    HeuristicProvider,
    ProviderPair,
    RemoteTextGenProvider,
    default_providers,
)
from .evidence import EvidenceBank, default_bank
from .model_space import CandidateSet, Family, default_case_sets
from .pipeline import Case, InferenceInput, PipelineConfig, run_inference
from .simulate import (
    SimKind,
    Trajectory,
    default_params,
    generate,
    split_dataset,
    truncate_at_progress,
)

REMOTE_URL_ENV = "DEGSELECT_REMOTE_URL"

# Domain context text per generating family, used as the "correct" context.
CONTEXT_BY_FAMILY = {
    Family.GAMMA: (
        "pipeline wall thickness loss from corrosion and cumulative wear; "
        "irreversible damage accumulation with monotonic material loss"
    ),
    Family.WIENER: (
        "vibration-based health indicator of rotating machinery; load "
        "fluctuations and operating condition changes cause local increases "
        "and decreases with measurement noise"
    ),
}

CASE1_LABEL_BY_KIND = {
    SimKind.LINEAR_WIENER: "wiener_family",
    SimKind.HOMOG_GAMMA: "gamma_family",
}

CASE_KINDS = {
    Case.CASE1: (SimKind.LINEAR_WIENER, SimKind.HOMOG_GAMMA),
    Case.CASE2: (
        SimKind.LINEAR_WIENER,
        SimKind.NONLINEAR_WIENER,
        SimKind.HOMOG_GAMMA,
        SimKind.NONHOMOG_GAMMA,
    ),
}

DEFAULT_PER_CLASS = {Case.CASE1: 60, Case.CASE2: 120}

KIND_FAMILY = {
    SimKind.LINEAR_WIENER: Family.WIENER,
    SimKind.NONLINEAR_WIENER: Family.WIENER,
    SimKind.HOMOG_GAMMA: Family.GAMMA,
    SimKind.NONHOMOG_GAMMA: Family.GAMMA,
}

CENSOR_RETRIES = 10


class Perturbation(Enum):
    NONE = "none"
    WRONG_HI = "wrong_hi"
    WRONG_CONTEXT = "wrong_context"
    WRONG_BOTH = "wrong_both"


class ProviderMode(Enum):
    HEURISTIC = "heuristic"
    REMOTE = "remote"


@dataclass(frozen=True)
class ExperimentConfig:
    case: Case = Case.CASE1
    n_values: tuple[int, ...] = (30, 50, 70)
    per_class_count: Optional[int] = None
    seed: int = 2024
    criterion: Criterion = Criterion.EAL
    provider_mode: ProviderMode = ProviderMode.HEURISTIC
    perturbation: Perturbation = Perturbation.NONE
    output_path: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if self.per_class_count is not None and self.per_class_count < 5:
            raise ValueError("per_class_count must be >= 5")


@dataclass
class MethodMetrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    f1: float
    confusion: dict[str, dict[str, int]]
    runtime_seconds: float = 0.0


@dataclass
class MetricsReport:
    case: Case
    entries: dict[tuple[int, str], MethodMetrics] = field(default_factory=dict)


def compute_metrics(
    true_labels: Sequence[str], predicted_labels: Sequence[str], classes: Sequence[str]
) -> MethodMetrics:
    """Accuracy, macro precision/recall, and their harmonic-mean F1."""
    if len(true_labels) != len(predicted_labels):
        raise ValueError("label lists must have equal length")
    classes = list(classes)
    confusion = {t: {p: 0 for p in classes} for t in classes}
    for t, p in zip(true_labels, predicted_labels):
        if t not in confusion or p not in confusion:
            raise ValueError(f"label outside class list: {t!r} / {p!r}")
        confusion[t][p] += 1
    correct = sum(confusion[c][c] for c in classes)
    total = len(true_labels)
    accuracy = correct / total if total else 0.0
    precisions, recalls = [], []
    for c in classes:
        tp = confusion[c][c]
        pred_c = sum(confusion[t][c] for t in classes)
        true_c = sum(confusion[c].values())
        precisions.append(tp / pred_c if pred_c else 0.0)
        recalls.append(tp / true_c if true_c else 0.0)
    macro_p = float(np.mean(precisions))
    macro_r = float(np.mean(recalls))
    f1 = 2.0 * macro_p * macro_r / (macro_p + macro_r) if macro_p + macro_r else 0.0
    return MethodMetrics(
        accuracy=accuracy,
        macro_precision=macro_p,
        macro_recall=macro_r,
        f1=f1,
        confusion=confusion,
    )


def generate_dataset(case: Case, per_class_count: int, seed: int) -> list[Trajectory]:
    """Labeled run-to-failure trajectories, one independent stream per unit."""
    trajs = []
    for kind_idx, kind in enumerate(CASE_KINDS[case]):
        for unit in range(per_class_count):
            base = seed + 1_000_003 * kind_idx + 97 * unit
            result = None
            for retry in range(CENSOR_RETRIES + 1):
                result = generate(
                    default_params(kind, seed=base + 10_000_019 * retry),
                    unit_id=f"{kind.value}-{unit:04d}",
                )
                if not result.censored:
                    break
            if result.censored:
                raise RuntimeError(
                    f"unit {kind.value}-{unit} censored after {CENSOR_RETRIES} retries"
                )
            traj = result.trajectory
            if case is Case.CASE1:
                traj = replace(traj, true_model_id=CASE1_LABEL_BY_KIND[kind])
            trajs.append(traj)
    return trajs


def correct_context(traj: Trajectory) -> str:
    kind = _kind_of(traj)
    return CONTEXT_BY_FAMILY[KIND_FAMILY[kind]]


def wrong_context(traj: Trajectory) -> str:
    kind = _kind_of(traj)
    family = KIND_FAMILY[kind]
    other = Family.GAMMA if family is Family.WIENER else Family.WIENER
    return CONTEXT_BY_FAMILY[other]


def _kind_of(traj: Trajectory) -> SimKind:
    label = traj.true_model_id
    if label in ("wiener_family",):
        return SimKind.LINEAR_WIENER
    if label in ("gamma_family",):
        return SimKind.HOMOG_GAMMA
    return SimKind(label)


def perturb_input(
    input: InferenceInput,
    mode: Perturbation,
    pool: Sequence[Trajectory] = (),
    rng_seed: int = 0,
) -> InferenceInput:
    """Substitute the trajectory and/or context with opposite-family versions."""
    if mode is Perturbation.NONE:
        return input
    out = input
    if mode in (Perturbation.WRONG_HI, Perturbation.WRONG_BOTH):
        if not pool:
            raise ValueError("wrong_hi perturbation needs an opposite-family pool")
        rng = np.random.default_rng(rng_seed)
        substitute = pool[int(rng.integers(len(pool)))]
        npts = min(len(substitute), len(input.trajectory))
        substitute = replace(
            substitute,
            times=substitute.times[:npts],
            values=substitute.values[:npts],
            true_model_id=input.trajectory.true_model_id,  # label kept
        )
        out = replace(out, trajectory=substitute)
    if mode in (Perturbation.WRONG_CONTEXT, Perturbation.WRONG_BOTH):
        out = replace(out, context=wrong_context(input.trajectory))
    return out


def _make_providers(cfg: ExperimentConfig) -> ProviderPair:
    if cfg.provider_mode is ProviderMode.REMOTE:
        endpoint = os.environ.get(REMOTE_URL_ENV)
        if not endpoint:
            raise ValueError(f"remote provider mode needs {REMOTE_URL_ENV} set")
        remote = RemoteTextGenProvider(endpoint)
        return ProviderPair(internal=remote, contextual=remote)
    return default_providers()


def _classes(case: Case) -> list[str]:
    case1, case2 = default_case_sets()
    return list((case1 if case is Case.CASE1 else case2).ids())


def run_experiment(
    cfg: ExperimentConfig, bank: Optional[EvidenceBank] = None
) -> MetricsReport:
    """Full protocol: generate, split, truncate, run all methods, score."""
    bank = bank or default_bank()
    per_class = cfg.per_class_count or DEFAULT_PER_CLASS[cfg.case]
    trajs = generate_dataset(cfg.case, per_class, cfg.seed)
    split = split_dataset(trajs, seed=cfg.seed)
    candidates = _classes(cfg.case)
    case1, case2 = default_case_sets()
    cset = case1 if cfg.case is Case.CASE1 else case2
    providers = _make_providers(cfg)
    pipe_cfg = PipelineConfig(criterion=cfg.criterion)
    report = MetricsReport(case=cfg.case)

    for n in cfg.n_values:
        test = [truncate_at_progress(t, n) for t in split.test]
        true_labels = [t.true_model_id for t in test]

        # Proposed pipeline (with optional input perturbation).
        start = time.perf_counter()
        predictions = []
        for idx, traj in enumerate(test):
            inp = InferenceInput.for_case(cfg.case, traj, correct_context(traj))
            if cfg.perturbation is not Perturbation.NONE:
                fam = KIND_FAMILY[_kind_of(traj)]
                pool = [
                    t for t in test if KIND_FAMILY[_kind_of(t)] is not fam
                ]
                inp = perturb_input(
                    inp, cfg.perturbation, pool, rng_seed=cfg.seed + idx
                )
            result = run_inference(inp, bank, providers, pipe_cfg)
            predictions.append(result.chosen.id)
        metrics = compute_metrics(true_labels, predictions, candidates)
        metrics.runtime_seconds = time.perf_counter() - start
        report.entries[(n, "proposed")] = metrics

        # Statistical baselines over the full candidate set, no conditioning.
        for crit in Criterion:
            start = time.perf_counter()
            predictions = []
            for traj in test:
                try:
                    chosen, _ = select_argmin(cset, traj, crit)
                    predictions.append(chosen.id)
                except NoApplicableModelError:
                    predictions.append(candidates[0])
            metrics = compute_metrics(true_labels, predictions, candidates)
            metrics.runtime_seconds = time.perf_counter() - start
            report.entries[(n, crit.value)] = metrics

    if cfg.output_path:
        emit_report(report, cfg.output_path, "csv")
    return report


def run_robustness(
    cfg: ExperimentConfig, bank: Optional[EvidenceBank] = None
) -> MetricsReport:
    """Perturbation sweep: proposed pipeline under all four input modes."""
    report = MetricsReport(case=cfg.case)
    for mode in Perturbation:
        sub = replace(cfg, perturbation=mode, output_path=None)
        partial = run_experiment(sub, bank=bank)
        for (n, method), metrics in partial.entries.items():
            if method == "proposed":
                report.entries[(n, mode.value)] = metrics
    if cfg.output_path:
        emit_report(report, cfg.output_path, "csv")
    return report


METRIC_FIELDS = ("accuracy", "macro_precision", "macro_recall", "f1", "runtime_seconds")


def emit_report(report: MetricsReport, path, format: str = "csv") -> None:
    """Write the report as CSV (one row per n/method/metric) or markdown."""
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "method", "metric", "value"])
            for (n, method), metrics in sorted(report.entries.items()):
                for fieldname in METRIC_FIELDS:
                    writer.writerow([n, method, fieldname, repr(getattr(metrics, fieldname))])
    elif format == "markdown":
        lines = [f"# Benchmark report ({report.case.value})", ""]
        n_values = sorted({n for n, _ in report.entries})
        for n in n_values:
            lines.append(f"## Observation window n = {n}%")
            lines.append("")
            lines.append("| method | accuracy | precision | recall | F1 | runtime (s) |")
            lines.append("|---|---|---|---|---|---|")
            for (n2, method), m in sorted(report.entries.items()):
                if n2 != n:
                    continue
                lines.append(
                    f"| {method} | {m.accuracy:.3f} | {m.macro_precision:.3f} "
                    f"| {m.macro_recall:.3f} | {m.f1:.3f} | {m.runtime_seconds:.2f} |"
                )
            lines.append("")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines))
    else:
        raise ValueError(f"unknown report format: {format!r}")


def parse_report_csv(path) -> dict[tuple[int, str], dict[str, float]]:
    """Reparse an emitted CSV report into {(n, method): {metric: value}}."""
    out: dict[tuple[int, str], dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["n"]), row["method"])
            out.setdefault(key, {})[row["metric"]] = float(row["value"])
    return out
