"""Per-syllable timing deviations in matras and their per-beat aggregates."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .align import AlignmentMap
from .errors import OutOfGridRange, UnknownLine
from .grid import TalaGrid, canonical_time

SHIFT_RANGE = 2
UNDERFLOW = "<-2"
OVERFLOW = ">2"


@dataclass(frozen=True)
class DeviationRecord:
    line_id: int
    cycle_index: int
    beat_index: int
    sub_beat: Fraction
    canonical_time: float
    onset_time: float
    deviation_matras: float  # positive: sung late


@dataclass(frozen=True)
class BeatStats:
    beat_index: int
    count: int
    mean: float | None
    std: float | None
    mean_abs: float | None


@dataclass(frozen=True)
class Fingerprint:
    bins: tuple[BeatStats, ...]

    def __getitem__(self, beat_index: int) -> BeatStats:
        return self.bins[beat_index - 1]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)


def deviations(alignment: AlignmentMap, grid: TalaGrid) -> list[DeviationRecord]:
    """One record per aligned pair, ordered by onset time.

    The deviation is measured in local matras of the half-cycle that holds
    the canonical position. It is not wrapped: a syllable one full beat late
    reads +1.0.
    """
    records = []
    for ev, lab in alignment.pairs:
        try:
            t = canonical_time(grid, ev.cycle_index, ev.cycle_beat, ev.sub_beat)
            matra = grid.matra_at(ev.cycle_index, ev.cycle_beat)
        except OutOfGridRange as exc:
            raise OutOfGridRange(f"aligned pair outside the grid: {exc}") from None
        records.append(
            DeviationRecord(
                ev.line_id, ev.cycle_index, ev.cycle_beat, ev.sub_beat,
                t, lab.time, (lab.time - t) / matra,
            )
        )
    records.sort(key=lambda r: (r.onset_time, r.canonical_time))
    return records


def fingerprint(records: Iterable[DeviationRecord], beats_per_cycle: int = 16) -> Fingerprint:
    """Mean, population std and count of deviations per cycle beat.

    Multi-syllable beats fold into their host beat. ``mean_abs`` is the mean
    deviation magnitude, for plots that read the dip as |deviation|.
    """
    groups: dict[int, list[float]] = {b: [] for b in range(1, beats_per_cycle + 1)}
    for r in records:
        groups[r.beat_index].append(r.deviation_matras)
    bins = []
    for b, vals in groups.items():
        if vals:
            a = np.asarray(vals)
            bins.append(BeatStats(b, a.size, float(a.mean()), float(a.std()), float(np.abs(a).mean())))
        else:
            bins.append(BeatStats(b, 0, None, None, None))
    return Fingerprint(tuple(bins))


def merge_fingerprints(a: Fingerprint, b: Fingerprint) -> Fingerprint:
    """Count-weighted merge, equal to the fingerprint of the concatenated records."""
    out = []
    for x, y in zip(a.bins, b.bins):
        n = x.count + y.count
        if n == 0:
            out.append(BeatStats(x.beat_index, 0, None, None, None))
            continue
        parts = [s for s in (x, y) if s.count]
        mean = sum(s.count * s.mean for s in parts) / n
        second = sum(s.count * (s.std**2 + s.mean**2) for s in parts) / n
        mean_abs = sum(s.count * s.mean_abs for s in parts) / n
        out.append(BeatStats(x.beat_index, n, mean, float(np.sqrt(max(second - mean**2, 0.0))), mean_abs))
    return Fingerprint(tuple(out))


def line_profile(
    records: Sequence[DeviationRecord],
    line_id: int,
    beats_per_cycle: int = 16,
    line_ids: Iterable[int] | None = None,
) -> list[tuple[float, float]]:
    """Scatter points ``(cycle_position, deviation)`` for one line.

    Repetitions of the line are laid end to end: the k-th performed cycle
    of the line (k from 0) is offset by ``k * beats_per_cycle``.

    ``line_ids`` lists the composition's lines; a listed line without
    records gives an empty profile. Without it, the known lines are those
    present in ``records`` (any line is accepted when ``records`` is empty).

    Raises
    ------
    UnknownLine
    """
    mine = [r for r in records if r.line_id == line_id]
    if not mine:
        known = set(line_ids) if line_ids is not None else {r.line_id for r in records}
        if (line_ids is not None or records) and line_id not in known:
            raise UnknownLine(f"line {line_id} is not a line of this performance")
        return []
    ordinal = {c: k for k, c in enumerate(sorted({r.cycle_index for r in mine}))}
    return [
        (r.beat_index + float(r.sub_beat) + beats_per_cycle * ordinal[r.cycle_index], r.deviation_matras)
        for r in sorted(mine, key=lambda r: (r.cycle_index, r.beat_index, r.sub_beat))
    ]


def shift_bin(deviation: float) -> int | str:
    k = int(np.floor(deviation + 0.5))
    if k < -SHIFT_RANGE:
        return UNDERFLOW
    if k > SHIFT_RANGE:
        return OVERFLOW
    return k


def structural_shift_summary(records: Iterable[DeviationRecord | float]) -> dict[int | str, int]:
    """Counts of deviations rounded to the nearest whole matra.

    Bins run from -2 to +2 with ``"<-2"`` / ``">2"`` overflow bins; all
    bins are present in the result, most of them usually zero.
    """
    counts = Counter(
        shift_bin(r.deviation_matras if isinstance(r, DeviationRecord) else float(r)) for r in records
    )
    keys: list[int | str] = [UNDERFLOW, *range(-SHIFT_RANGE, SHIFT_RANGE + 1), OVERFLOW]
    return {k: counts.get(k, 0) for k in keys}
