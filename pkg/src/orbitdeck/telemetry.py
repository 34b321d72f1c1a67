"""Observation augmentation, closest-approach bookkeeping and run reports.

The prograde vector is the unit relative velocity expressed in the vessel
frame: ``p = R^T (v_self - v_target) / |v_self - v_target|`` with R the
vessel->inertial attitude.  The score combines the episode-minimum
distances to the target and to the guard:

    score = dm_lb^2 + a / (dm_bg + b)        (lower is better)

with ``a`` scaling the guard term so that ~100 m of target approach is
worth about as much as 100 m of guard clearance, and ``b`` a small offset
preventing division by zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyRunSetError,
    MissingGuardDistanceError,
    ZeroRelativeVelocityError,
)

#: Below this relative speed (m/s) the prograde direction is undefined.
PROGRADE_EPSILON = 1e-6


@dataclass
class Observation:
    """What the agent sees each step, all vectors in its own vessel frame.

    ``rel_position``/``rel_velocity`` follow the target-minus-self
    convention; ``prograde`` is the unit relative-velocity direction of
    self with respect to target (None when the relative speed is ~zero);
    ``guard_rel_position`` is present only in guard scenarios.
    """

    time: float
    fuel: float
    rel_position: np.ndarray
    rel_velocity: np.ndarray
    prograde: np.ndarray | None
    guard_rel_position: np.ndarray | None = None

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.rel_position))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.rel_velocity))

    @property
    def guard_distance(self) -> float | None:
        if self.guard_rel_position is None:
            return None
        return float(np.linalg.norm(self.guard_rel_position))


def prograde(
    v_self: np.ndarray, v_target: np.ndarray, attitude: np.ndarray
) -> np.ndarray:
    """Unit relative-velocity vector in the vessel frame.

    ``attitude`` rotates vessel coordinates into the inertial frame, so the
    inertial relative velocity is mapped back with its transpose.

    Raises ZeroRelativeVelocityError when |v_self - v_target| is below
    PROGRADE_EPSILON; callers substitute a "no prograde" telemetry phrase.
    """
    rel = np.asarray(v_self, dtype=np.float64) - np.asarray(v_target, dtype=np.float64)
    n = np.linalg.norm(rel)
    if n < PROGRADE_EPSILON:
        raise ZeroRelativeVelocityError(f"relative speed {n:g} m/s below threshold")
    return np.asarray(attitude).T @ (rel / n)


@dataclass(frozen=True)
class ScoreParams:
    """Constants of the scoring formula."""

    a: float = 1e6
    b: float = 0.1

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("score parameters a and b must be positive")


@dataclass
class ScoreLedger:
    """Running closest approaches, sampled at physics-step resolution.

    ``dm_bg`` is None for pursuer-evader episodes, which have no guard.
    Fresh ledgers start at +inf so the first update sets the values.
    """

    dm_lb: float = math.inf
    dm_bg: float | None = None
    samples: int = 0

    @classmethod
    def for_guard(cls) -> "ScoreLedger":
        return cls(dm_bg=math.inf)

    @property
    def tracks_guard(self) -> bool:
        return self.dm_bg is not None

    def update(self, dist_lb: float, dist_bg: float | None = None) -> None:
        """Fold one distance sample into the running minima."""
        if dist_lb < 0 or (dist_bg is not None and dist_bg < 0):
            raise ValueError("distances must be >= 0")
        self.dm_lb = min(self.dm_lb, dist_lb)
        if self.dm_bg is not None and dist_bg is not None:
            self.dm_bg = min(self.dm_bg, dist_bg)
        self.samples += 1


def score(ledger: ScoreLedger, params: ScoreParams = ScoreParams()) -> float:
    """Evaluate the scoring formula on a guard-tracking ledger."""
    if ledger.dm_bg is None or not math.isfinite(ledger.dm_bg) or not math.isfinite(
        ledger.dm_lb
    ):
        raise MissingGuardDistanceError(
            "score requires recorded target and guard distances"
        )
    return ledger.dm_lb**2 + params.a / (ledger.dm_bg + params.b)


@dataclass
class RunReport:
    """Aggregated episode metrics in benchmark-table column order."""

    label: str
    episodes: int
    best_dist: float
    avg_dist: float
    avg_guard_dist: float | None
    avg_score: float | None
    latency_best: float
    latency_worst: float
    latency_avg: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "episodes": self.episodes,
            "best_dist_m": self.best_dist,
            "avg_dist_m": self.avg_dist,
            "avg_guard_dist_m": self.avg_guard_dist,
            "avg_score": self.avg_score,
            "latency_best_ms": self.latency_best,
            "latency_worst_ms": self.latency_worst,
            "latency_avg_ms": self.latency_avg,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def aggregate_runs(
    ledgers: Sequence[ScoreLedger],
    latencies_ms: Iterable[float] = (),
    score_params: ScoreParams = ScoreParams(),
    label: str = "",
) -> RunReport:
    """Fold per-episode ledgers and per-decision latencies into a report.

    ``best_dist`` is the minimum dm_lb over episodes, the averages are
    arithmetic means, and the latency stats run over every agent decision
    across all episodes (0/0/0 when no latencies were recorded).
    """
    ledgers = list(ledgers)
    if not ledgers:
        raise EmptyRunSetError("aggregate_runs needs at least one episode")
    dists = [lg.dm_lb for lg in ledgers]
    best = min(dists)
    avg = sum(dists) / len(dists)
    guard_vals = [lg.dm_bg for lg in ledgers if lg.dm_bg is not None]
    avg_guard = sum(guard_vals) / len(guard_vals) if guard_vals else None
    if all(lg.tracks_guard and math.isfinite(lg.dm_bg) for lg in ledgers):
        scores = [score(lg, score_params) for lg in ledgers]
        avg_score = sum(scores) / len(scores)
    else:
        avg_score = None
    lats = list(latencies_ms)
    if lats:
        lat_best, lat_worst, lat_avg = min(lats), max(lats), sum(lats) / len(lats)
    else:
        lat_best = lat_worst = lat_avg = 0.0
    return RunReport(
        label=label,
        episodes=len(ledgers),
        best_dist=best,
        avg_dist=avg,
        avg_guard_dist=avg_guard,
        avg_score=avg_score,
        latency_best=lat_best,
        latency_worst=lat_worst,
        latency_avg=lat_avg,
    )


_PERF_COLUMNS = ["Method", "Best Dist. (m)", "Avg. Dist. (m)", "Avg. to Guard (m)", "Avg. Score"]
_LAT_COLUMNS = ["Method", "Best Latency (ms)", "Worst Latency (ms)", "Average Latency (ms)"]


def _fmt(value: float | None, nd: int = 2) -> str:
    if value is None:
        return "-"
    return f"{value:.{nd}f}"


def _table(columns: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c)
              for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)


def performance_table(reports: Sequence[RunReport]) -> str:
    """Aligned plain-text table of distance/score metrics."""
    rows = [
        [r.label or "-", _fmt(r.best_dist), _fmt(r.avg_dist),
         _fmt(r.avg_guard_dist), _fmt(r.avg_score)]
        for r in reports
    ]
    return _table(_PERF_COLUMNS, rows)


def latency_table(reports: Sequence[RunReport]) -> str:
    """Aligned plain-text table of decision-latency metrics."""
    rows = [
        [r.label or "-", _fmt(r.latency_best), _fmt(r.latency_worst), _fmt(r.latency_avg)]
        for r in reports
    ]
    return _table(_LAT_COLUMNS, rows)
