"""Canonical-to-performed syllable alignment.

Alignment runs per half-cycle in two passes:

1. placement - slide a window the length of the canonical half-cycle over
   the labeled syllables and keep the start with the best gapped
   sequence-alignment score;
2. refinement - inside the placed window (plus a small allowance at its
   edges) find the order-preserving one-to-one pairing that maximizes
   ``similarity - timing_weight * |offset in matras|``, rejecting pairs more
   than ``max_shift`` matras apart.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EmptySearchRange, OutOfGridRange, ScheduleExhaustsLabels
from .grid import TalaGrid, canonical_time
from .notation import CanonicalEvent, Composition, Half, half_cycle_events

GAP_PENALTY = 0.4
TIMING_WEIGHT = 0.25
MAX_SHIFT = 2.0
EDGE_ALLOWANCE = 3

_VOWEL_FOLDS = (("aa", "a"), ("ii", "i"), ("uu", "u"))


@dataclass(frozen=True)
class LabeledOnset:
    time: float
    syllable: str

    def __post_init__(self):
        if not normalize_syllable(self.syllable):
            raise ValueError(f"labeled onset at {self.time} s has an empty syllable")


@dataclass(frozen=True)
class ScheduledEvent:
    """A canonical event placed in a specific performed cycle."""

    event: CanonicalEvent
    cycle_index: int

    @property
    def line_id(self) -> int:
        return self.event.line_id

    @property
    def cycle_beat(self) -> int:
        return self.event.cycle_beat

    @property
    def sub_beat(self) -> Fraction:
        return self.event.sub_beat

    @property
    def syllable(self) -> str:
        return self.event.syllable

    def key(self) -> tuple:
        return (self.cycle_index, self.event.line_id, self.event.cycle_beat, self.event.sub_beat)


@dataclass(frozen=True)
class WindowPlacement:
    line_id: int
    cycle_index: int
    half: Half
    start: int
    stop: int
    score: float


@dataclass
class AlignmentMap:
    pairs: list[tuple[ScheduledEvent, LabeledOnset]] = field(default_factory=list)
    unmatched_canonical: list[ScheduledEvent] = field(default_factory=list)
    unmatched_labeled: list[LabeledOnset] = field(default_factory=list)
    window_placements: list[WindowPlacement] = field(default_factory=list)
    score: float = 0.0

    def extend(self, other: "AlignmentMap") -> None:
        self.pairs.extend(other.pairs)
        self.unmatched_canonical.extend(other.unmatched_canonical)
        self.unmatched_labeled.extend(other.unmatched_labeled)
        self.window_placements.extend(other.window_placements)
        self.score += other.score

    def pair_keys(self) -> set[tuple]:
        return {(ev.key(), lab.time) for ev, lab in self.pairs}


def normalize_syllable(s: str) -> str:
    """Lowercase, strip diacritics and fold long vowels (``aa`` -> ``a``)."""
    decomposed = unicodedata.normalize("NFKD", s.strip().lower())
    out = "".join(ch for ch in decomposed if not unicodedata.combining(ch) and ch.isalnum())
    for long, short in _VOWEL_FOLDS:
        out = out.replace(long, short)
    return out


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def syllable_similarity(a: str, b: str) -> float:
    """``1 - edit_distance / max_len`` on normalized syllables."""
    a, b = normalize_syllable(a), normalize_syllable(b)
    if a == b:
        return 1.0
    return 1.0 - edit_distance(a, b) / max(len(a), len(b))


def sequence_score(canonical: Sequence[str], labeled: Sequence[str], gap: float = GAP_PENALTY) -> float:
    """Global alignment score: matched similarities minus ``gap`` per skipped item."""
    n, m = len(canonical), len(labeled)
    d = np.zeros((n + 1, m + 1))
    d[:, 0] = -gap * np.arange(n + 1)
    d[0, :] = -gap * np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = max(
                d[i - 1, j - 1] + syllable_similarity(canonical[i - 1], labeled[j - 1]),
                d[i - 1, j] - gap,
                d[i, j - 1] - gap,
            )
    return float(d[n, m])


def match_half_cycle(
    canonical: Sequence[str],
    labeled: Sequence[LabeledOnset],
    search_range: range,
    gap: float = GAP_PENALTY,
) -> tuple[range, float]:
    """Best window placement over ``search_range`` of window start indices.

    The window holds ``len(canonical)`` labeled syllables (fewer at the end
    of the sequence). Ties go to the earliest start.
    """
    if not canonical:
        raise ValueError("canonical sequence is empty")
    starts = [s for s in search_range if 0 <= s < len(labeled)]
    if not starts:
        raise EmptySearchRange(f"no window start in {search_range} for {len(labeled)} labels")
    n = len(canonical)
    best = None
    for s in starts:
        window = [lab.syllable for lab in labeled[s : s + n]]
        score = sequence_score(canonical, window, gap)
        if best is None or score > best[1] + 1e-12:
            best = (range(s, min(s + n, len(labeled))), score)
    return best


def pair_weight(
    ev_time: float, matra: float, syllable: str, lab: LabeledOnset,
    timing_weight: float = TIMING_WEIGHT, max_shift: float = MAX_SHIFT,
) -> float | None:
    """Weight of pairing an event with a labeled onset, or ``None`` if too far."""
    offset = abs(lab.time - ev_time) / matra
    if offset > max_shift + 1e-9:
        return None
    return syllable_similarity(syllable, lab.syllable) - timing_weight * offset


def weight_matrix(events, ev_times, ev_matras, labels, timing_weight, max_shift) -> np.ndarray:
    """Pair weights; ``-inf`` where a pair is not allowed."""
    w = np.full((len(events), len(labels)), -np.inf)
    for i, ev in enumerate(events):
        for j, lab in enumerate(labels):
            v = pair_weight(ev_times[i], ev_matras[i], ev.syllable, lab, timing_weight, max_shift)
            if v is not None:
                w[i, j] = v
    return w


def best_assignment(w: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Order-preserving partial matching maximizing the sum of positive weights."""
    n, m = w.shape
    d = np.zeros((n + 1, m + 1))
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            take = d[i - 1, j - 1] + w[i - 1, j - 1] if w[i - 1, j - 1] > 0 else -np.inf
            d[i, j] = max(d[i - 1, j], d[i, j - 1], take)
    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        if d[i, j] == d[i - 1, j]:
            i -= 1
        elif d[i, j] == d[i, j - 1]:
            j -= 1
        else:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
    pairs.reverse()
    return float(d[n, m]), pairs


def refine(
    placement: range,
    events: Sequence[ScheduledEvent],
    labeled: Sequence[LabeledOnset],
    grid: TalaGrid,
    max_shift: float = MAX_SHIFT,
    timing_weight: float = TIMING_WEIGHT,
    edge_allowance: int = EDGE_ALLOWANCE,
    lower_bound: int = 0,
    lookahead: Sequence[ScheduledEvent] = (),
) -> tuple[AlignmentMap, list[int]]:
    """Pair events with labels inside the placed window.

    Labels up to ``edge_allowance`` positions beyond either edge of the
    window are eligible, never below ``lower_bound`` (labels already owned
    by an earlier window). ``lookahead`` events (the start of the next
    half-cycle) compete for the same labels but are never paired in the
    result, so a label past the window edge goes to whichever side fits it
    better.

    Returns the map for this window and the labeled indices it pairs.
    """
    rows = list(events) + list(lookahead)
    try:
        ev_times = [canonical_time(grid, e.cycle_index, e.cycle_beat, e.sub_beat) for e in rows]
        ev_matras = [grid.matra_at(e.cycle_index, e.cycle_beat) for e in rows]
    except OutOfGridRange as exc:
        raise OutOfGridRange(f"canonical position outside the grid: {exc}") from None
    lo = max(lower_bound, placement.start - edge_allowance)
    hi = min(len(labeled), placement.stop + edge_allowance)
    cand = list(range(lo, hi))
    w = weight_matrix(rows, ev_times, ev_matras, [labeled[j] for j in cand], timing_weight, max_shift)
    _, pairs = best_assignment(w)
    pairs = [(i, j) for i, j in pairs if i < len(events)]
    out = AlignmentMap(score=float(sum(w[i, j] for i, j in pairs)))
    matched_ev = {i for i, _ in pairs}
    out.pairs = [(events[i], labeled[cand[j]]) for i, j in pairs]
    out.unmatched_canonical = [e for i, e in enumerate(events) if i not in matched_ev]
    return out, [cand[j] for _, j in pairs]


@dataclass(frozen=True)
class ScheduleEntry:
    cycle_index: int
    line_id: int
    half: Half | None = None  # None: both halves


def scheduled_events(
    composition: Composition, entry: ScheduleEntry
) -> list[tuple[Half, list[ScheduledEvent]]]:
    halves = [entry.half] if entry.half is not None else [Half.FIRST, Half.SECOND]
    out = []
    for half in halves:
        evs = half_cycle_events(composition, entry.line_id, half)
        out.append((half, [ScheduledEvent(e, entry.cycle_index) for e in evs]))
    return out


def align_performance(
    composition: Composition,
    line_schedule: Sequence[ScheduleEntry | tuple[int, int]],
    labeled: Sequence[LabeledOnset],
    grid: TalaGrid,
    max_shift: float = MAX_SHIFT,
    timing_weight: float = TIMING_WEIGHT,
    gap: float = GAP_PENALTY,
    edge_allowance: int = EDGE_ALLOWANCE,
) -> AlignmentMap:
    """Align every scheduled half-cycle in turn, moving monotonically through the labels.

    ``line_schedule`` entries are :class:`ScheduleEntry` or ``(line_id,
    cycle_index)`` tuples. The window search for a half-cycle covers label
    starts at or after the previous window whose time lies between the
    half-cycle's first and last canonical syllable, widened by
    ``max_shift + 1`` matras on both sides.

    Raises
    ------
    UnknownLine
        A schedule entry names a line missing from the composition.
    ScheduleExhaustsLabels
        Labels ran out while scheduled half-cycles remain.
    """
    entries = [
        e if isinstance(e, ScheduleEntry) else ScheduleEntry(cycle_index=e[1], line_id=e[0])
        for e in line_schedule
    ]
    labeled = sorted(labeled, key=lambda lab: lab.time)
    halves = [
        (entry, half, events)
        for entry in sorted(entries, key=lambda e: e.cycle_index)
        for half, events in scheduled_events(composition, entry)
        if events
    ]
    result = AlignmentMap()
    cursor = 0
    for k, (entry, half, events) in enumerate(halves):
        t0 = canonical_time(grid, entry.cycle_index, events[0].cycle_beat, events[0].sub_beat)
        t1 = canonical_time(grid, entry.cycle_index, events[-1].cycle_beat, events[-1].sub_beat)
        matra = grid.matra_at(entry.cycle_index, events[0].cycle_beat)
        reach = (max_shift + 1) * matra
        if cursor >= len(labeled):
            if not labeled or labeled[-1].time < t0 - reach:
                raise ScheduleExhaustsLabels(
                    f"labels exhausted before cycle {entry.cycle_index} "
                    f"({half.name.lower()} half of line {entry.line_id})"
                )
        starts = [
            j for j in range(cursor, len(labeled)) if t0 - reach <= labeled[j].time <= t1 + reach
        ]
        syllables = [e.syllable for e in events]
        if starts:
            placement, score = match_half_cycle(syllables, labeled, range(starts[0], starts[-1] + 1), gap)
        else:
            placement, score = range(cursor, cursor), 0.0
        lookahead = halves[k + 1][2][:edge_allowance] if k + 1 < len(halves) else []
        part, used = refine(
            placement, events, labeled, grid, max_shift, timing_weight,
            edge_allowance, lower_bound=cursor, lookahead=lookahead,
        )
        new_cursor = max(used) + 1 if used else max(cursor, placement.start)
        used_set = set(used)
        part.unmatched_labeled = [
            labeled[j] for j in range(cursor, new_cursor) if j not in used_set
        ]
        part.window_placements = [
            WindowPlacement(entry.line_id, entry.cycle_index, half, placement.start, placement.stop, score)
        ]
        result.extend(part)
        cursor = new_cursor
    return result
