"""Run-to-failure trajectory simulation for the four degradation processes.

Increments are indexed by integer inspection steps j = 1, 2, ... with unit
interval, state starts at zero, and generation stops at the first step whose
cumulative state reaches the failure threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class SimKind(Enum):
    LINEAR_WIENER = "linear_wiener"
    NONLINEAR_WIENER = "nonlinear_wiener"
    HOMOG_GAMMA = "homog_gamma"
    NONHOMOG_GAMMA = "nonhomog_gamma"


@dataclass(frozen=True)
class Trajectory:
    """One unit's time-ordered health-indicator observations."""

    unit_id: str
    times: tuple[float, ...]
    values: tuple[float, ...]
    true_model_id: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if len(self.times) < 2:
            raise ValueError("trajectory needs at least 2 observations")
        t = np.asarray(self.times)
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SimParams:
    kind: SimKind
    m: float = 0.0  # Wiener drift
    s: float = 1.0  # Wiener diffusion
    beta: float = 1.0  # time-transform exponent
    alpha: float = 1.0  # gamma shape rate
    theta: float = 1.0  # gamma scale
    failure_threshold: float = 50.0
    max_steps: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.s < 0:
            raise ValueError("diffusion s must be non-negative")
        if self.beta <= 0 or self.alpha <= 0 or self.theta <= 0:
            raise ValueError("beta, alpha, theta must be positive")
        if self.failure_threshold <= 0:
            raise ValueError("failure threshold must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.kind in (SimKind.LINEAR_WIENER, SimKind.HOMOG_GAMMA) and self.beta != 1.0:
            raise ValueError(f"beta must be 1 for {self.kind.value}")


# Shipped simulation defaults.  Chosen so every kind has mean first hitting
# time near 100 steps at threshold 50, Wiener paths show ~10-25% negative
# increments, and the gamma kinds are close enough to Gaussian that short
# windows leave the families statistically overlapping.
DEFAULT_SIM_PARAMS = {
    SimKind.LINEAR_WIENER: dict(m=0.5, s=0.4),
    SimKind.NONLINEAR_WIENER: dict(m=0.05, s=0.4, beta=1.5),
    SimKind.HOMOG_GAMMA: dict(alpha=6.0, theta=1.0 / 12.0),
    SimKind.NONHOMOG_GAMMA: dict(alpha=0.6, theta=1.0 / 12.0, beta=1.5),
}


def default_params(kind: SimKind, seed: int = 0, **overrides) -> SimParams:
    """SimParams with the shipped defaults for one process kind."""
    kw = dict(DEFAULT_SIM_PARAMS[kind])
    kw.update(overrides)
    return SimParams(kind=kind, seed=seed, **kw)


def time_transform_increment(j: int, beta: float) -> float:
    """Per-step increment of the power time scale: j**beta - (j-1)**beta."""
    if j < 1:
        raise ValueError(f"step index must be >= 1, got {j}")
    return float(j) ** beta - float(j - 1) ** beta


def time_transform_increments(n: int, beta: float) -> np.ndarray:
    """Vectorized d_j for j = 1..n."""
    j = np.arange(0, n + 1, dtype=float)
    return np.diff(j**beta)


@dataclass(frozen=True)
class SimResult:
    trajectory: Trajectory
    censored: bool  # threshold not reached within max_steps


def generate(params: SimParams, unit_id: str = "unit") -> SimResult:
    """Simulate one run-to-failure trajectory, deterministic given the seed."""
    rng = np.random.default_rng(params.seed)
    n = params.max_steps
    d = time_transform_increments(n, params.beta)
    if params.kind is SimKind.LINEAR_WIENER:
        deltas = rng.normal(params.m, params.s, size=n)
    elif params.kind is SimKind.NONLINEAR_WIENER:
        deltas = rng.normal(params.m * d, params.s)
    elif params.kind is SimKind.HOMOG_GAMMA:
        deltas = rng.gamma(shape=params.alpha, scale=params.theta, size=n)
    else:
        deltas = rng.gamma(shape=params.alpha * d, scale=params.theta)

    x = np.concatenate([[0.0], np.cumsum(deltas)])
    crossed = np.nonzero(x >= params.failure_threshold)[0]
    if crossed.size:
        end = int(crossed[0])
        censored = False
    else:
        end = n
        censored = True
    traj = Trajectory(
        unit_id=unit_id,
        times=tuple(float(j) for j in range(end + 1)),
        values=tuple(float(v) for v in x[: end + 1]),
        true_model_id=params.kind.value,
    )
    return SimResult(trajectory=traj, censored=censored)


def first_hitting_time(traj: Trajectory, threshold: float) -> Optional[float]:
    """Smallest observation time whose value reaches the threshold."""
    for t, y in zip(traj.times, traj.values):
        if y >= threshold:
            return t
    return None


class WindowTooShortError(ValueError):
    pass


def truncate_at_progress(
    traj: Trajectory, n_percent: int, threshold: Optional[float] = None
) -> Trajectory:
    """Keep observations up to a percentage of the realized failure time.

    The failure time is the first crossing of ``threshold`` when given,
    otherwise the final observation time (run-to-failure trajectories end at
    the first crossing).  Observations with t <= ceil(n% * FHT) are kept.
    """
    if not 0 < n_percent <= 100:
        raise ValueError(f"n_percent must be in (0, 100], got {n_percent}")
    if threshold is not None:
        fht = first_hitting_time(traj, threshold)
        if fht is None:
            raise ValueError("trajectory never reaches the failure threshold")
    else:
        fht = traj.times[-1]
    cutoff = math.ceil(n_percent / 100.0 * fht)
    keep = [k for k, t in enumerate(traj.times) if t <= cutoff]
    if len(keep) < 2:
        raise WindowTooShortError(
            f"truncation at {n_percent}% leaves {len(keep)} points"
        )
    return replace(
        traj,
        times=tuple(traj.times[k] for k in keep),
        values=tuple(traj.values[k] for k in keep),
    )


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Trajectory, ...]
    validation: tuple[Trajectory, ...]
    test: tuple[Trajectory, ...]


def split_dataset(trajs: Sequence[Trajectory], seed: int) -> DatasetSplit:
    """Deterministic 60/20/20 trajectory-level split.

    Stratified by true_model_id when every trajectory carries a label;
    train receives the rounding remainder.
    """
    if len(trajs) < 5:
        raise ValueError(f"need at least 5 trajectories, got {len(trajs)}")
    rng = np.random.default_rng(seed)
    if all(t.true_model_id is not None for t in trajs):
        groups: dict[str, list[Trajectory]] = {}
        for t in trajs:
            groups.setdefault(t.true_model_id, []).append(t)
        strata = [groups[k] for k in sorted(groups)]
    else:
        strata = [list(trajs)]

    train: list[Trajectory] = []
    val: list[Trajectory] = []
    test: list[Trajectory] = []
    for group in strata:
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]
        n = len(group)
        n_val = n // 5
        n_test = n // 5
        test.extend(shuffled[:n_test])
        val.extend(shuffled[n_test : n_test + n_val])
        train.extend(shuffled[n_test + n_val :])
    return DatasetSplit(tuple(train), tuple(val), tuple(test))


def save_trajectories(path, trajs: Sequence[Trajectory]) -> None:
    """Write trajectories as line-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in trajs:
            fh.write(
                json.dumps(
                    {
                        "unit_id": t.unit_id,
                        "true_model_id": t.true_model_id,
                        "times": list(t.times),
                        "values": list(t.values),
                    }
                )
                + "\n"
            )


def load_trajectories(path) -> list[Trajectory]:
    """Read a line-delimited trajectory record file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Trajectory(
                        unit_id=str(rec["unit_id"]),
                        times=tuple(float(x) for x in rec["times"]),
                        values=tuple(float(x) for x in rec["values"]),
                        true_model_id=rec.get("true_model_id"),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad trajectory record: {exc}")
    return out
