"""Peak picking and tolerance-window onset evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dsp import NoveltyCurve
from .errors import EmptyReference

TOLERANCE = 0.050
MIN_SEPARATION = 0.050
N_THRESHOLDS = 200
TARGET_RECALL = 0.80


class OnsetSource(enum.Enum):
    DETECTED = "detected"
    ANNOTATED = "annotated"


@dataclass(frozen=True)
class OnsetList:
    times: np.ndarray
    source: OnsetSource = OnsetSource.DETECTED
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if t.size and (np.any(t < 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("onset times must be non-negative and strictly increasing")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != t.size:
                raise ValueError("one label per onset time is required")
            object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def shifted(self, delta: float) -> "OnsetList":
        return OnsetList(self.times + delta, self.source, self.labels)


@dataclass(frozen=True)
class EvalReport:
    n_ref: int
    n_det: int
    true_positives: int
    tolerance: float
    matched_pairs: list[tuple[float, float]] = field(default_factory=list)

    @property
    def precision(self) -> float:
        if self.n_det == 0:
            return 1.0 if self.n_ref == 0 else 0.0
        return self.true_positives / self.n_det

    @property
    def recall(self) -> float:
        if self.n_ref == 0:
            return 1.0 if self.n_det == 0 else 0.0
        return self.true_positives / self.n_ref

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def percentages(self) -> tuple[float, float, float]:
        return 100 * self.precision, 100 * self.recall, 100 * self.f1

    def as_dict(self) -> dict:
        return {
            "n_ref": self.n_ref,
            "n_det": self.n_det,
            "true_positives": self.true_positives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tolerance": self.tolerance,
        }


def _surviving_peaks(nov: NoveltyCurve, min_separation: float) -> tuple[np.ndarray, np.ndarray]:
    """Frame indices and values of peaks left after separation pruning.

    Pruning visits peaks in descending value order, so the survivors at any
    threshold are exactly these survivors with value >= threshold.
    """
    v = nov.values
    if v.size == 0:
        return np.empty(0, dtype=int), np.empty(0)
    if min_separation < nov.hop - 1e-12:
        raise ValueError("min_separation must be at least one hop")
    # run-length encode so a plateau is compared as a single sample
    starts = np.r_[0, np.flatnonzero(np.diff(v) != 0) + 1]
    vals = v[starts]
    left = np.r_[-np.inf, vals[:-1]]
    right = np.r_[vals[1:], -np.inf]
    cand = starts[(vals > left) & (vals > right)]
    order = cand[np.lexsort((cand, -v[cand]))]
    radius = int(np.ceil(min_separation / nov.hop - 1e-9)) - 1
    blocked = np.zeros(v.size, dtype=bool)
    kept = []
    for i in order.tolist():
        if blocked[i]:
            continue
        kept.append(i)
        blocked[max(0, i - radius) : i + radius + 1] = True
    kept = np.sort(np.asarray(kept, dtype=int))
    return kept, v[kept]


def _to_onsets(nov: NoveltyCurve, idx: np.ndarray) -> OnsetList:
    times = nov.start_offset + idx * nov.hop
    return OnsetList(times[times >= 0])


def pick_peaks(
    nov: NoveltyCurve, threshold: float, min_separation: float = MIN_SEPARATION
) -> OnsetList:
    """Local maxima of ``nov`` at or above ``threshold``.

    A flat-topped maximum counts once, at its first frame. Peaks closer
    than ``min_separation`` compete: the larger survives, ties go to the
    earlier one.
    """
    idx, vals = _surviving_peaks(nov, min_separation)
    return _to_onsets(nov, idx[vals >= threshold])


def match_onsets(
    det: Sequence[float], ref: Sequence[float], tolerance: float = TOLERANCE
) -> list[tuple[int, int]]:
    """One-to-one matching of detections to references within ``tolerance``.

    Greedy in time order: each reference, earliest first, takes the
    earliest unused detection inside its window. Because every window has
    the same width this yields a maximum-cardinality matching.

    Returns index pairs ``(ref_index, det_index)``.
    """
    det = np.asarray(det, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    tol = tolerance + 1e-12
    pairs = []
    j = 0
    for i, r in enumerate(ref):
        while j < det.size and det[j] < r - tol:
            j += 1
        if j < det.size and det[j] <= r + tol:
            pairs.append((i, j))
            j += 1
    return pairs


def evaluate(det: OnsetList, ref: OnsetList, tolerance: float = TOLERANCE) -> EvalReport:
    pairs = match_onsets(det.times, ref.times, tolerance)
    return EvalReport(
        n_ref=len(ref),
        n_det=len(det),
        true_positives=len(pairs),
        tolerance=tolerance,
        matched_pairs=[(float(ref.times[i]), float(det.times[j])) for i, j in pairs],
    )


def merge_reports(reports: Iterable[EvalReport]) -> EvalReport:
    """Pool counts across recordings (micro-averaging)."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to merge")
    return EvalReport(
        n_ref=sum(r.n_ref for r in reports),
        n_det=sum(r.n_det for r in reports),
        true_positives=sum(r.true_positives for r in reports),
        tolerance=reports[0].tolerance,
        matched_pairs=[p for r in reports for p in r.matched_pairs],
    )


@dataclass
class Sweep:
    """Operating curve of one detector over a descending threshold grid."""

    points: list[tuple[float, EvalReport]]

    def max_f1(self) -> tuple[float, EvalReport]:
        # ties resolved towards the higher threshold (fewer detections)
        return max(self.points, key=lambda p: p[1].f1)

    def at_recall(self, target: float = TARGET_RECALL) -> tuple[float, EvalReport] | None:
        """Highest threshold whose recall reaches ``target``.

        Walking the grid from the top, this is the first point where recall
        reaches the target, i.e. the most precise such operating point.
        """
        for thr, rep in self.points:
            if rep.recall >= target:
                return thr, rep
        return None


def threshold_grid(values: np.ndarray, n: int = N_THRESHOLDS) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    return np.linspace(hi, lo, n)


def sweep_operating_points(
    nov: NoveltyCurve | Sequence[NoveltyCurve],
    ref: OnsetList | Sequence[OnsetList],
    tolerance: float = TOLERANCE,
    min_separation: float = MIN_SEPARATION,
    n_thresholds: int = N_THRESHOLDS,
) -> Sweep:
    """Evaluate peak picking over a descending threshold grid.

    Several (curve, reference) pairs may be passed; a single global
    threshold is then applied to all of them and counts are pooled.
    """
    curves = [nov] if isinstance(nov, NoveltyCurve) else list(nov)
    refs = [ref] if isinstance(ref, OnsetList) else list(ref)
    if len(curves) != len(refs):
        raise ValueError("one reference list per novelty curve is required")
    if sum(len(r) for r in refs) == 0:
        raise EmptyReference("reference onsets are empty")
    grid = threshold_grid(np.concatenate([c.values for c in curves]), n_thresholds)
    peaks = [_surviving_peaks(c, min_separation) for c in curves]
    points = []
    for thr in grid:
        reps = [
            evaluate(_to_onsets(c, idx[vals >= thr]), r, tolerance)
            for c, (idx, vals), r in zip(curves, peaks, refs)
        ]
        points.append((float(thr), merge_reports(reps)))
    return Sweep(points)
