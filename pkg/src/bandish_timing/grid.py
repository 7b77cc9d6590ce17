"""Tala beat grid interpolated from annotated sam/khali anchors.

Each interval between consecutive anchors is split into equal matras
(eight per half-cycle for teentaal). Positions before the first anchor or
after the last one are out of range; nothing is extrapolated.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import AlternationViolation, AnchorOrderViolation, OutOfGridRange, TooFewAnchors
from .notation import TEENTAAL, TalaSpec


class AnchorKind(enum.Enum):
    SAM = "sam"
    KHALI = "khali"


@dataclass(frozen=True)
class TalaAnchor:
    time: float
    kind: AnchorKind
    cycle_index: int = 0


@dataclass(frozen=True)
class Beat:
    time: float
    cycle_index: int
    beat_index: int


@dataclass(frozen=True)
class TalaGrid:
    beats: tuple[Beat, ...]
    tala: TalaSpec
    # per-beat duration of the segment starting at each beat (last beat closes the grid)
    matras: tuple[float, ...]

    @property
    def start(self) -> float:
        return self.beats[0].time

    @property
    def end(self) -> float:
        return self.beats[-1].time

    def times(self) -> np.ndarray:
        return np.array([b.time for b in self.beats])

    def _index(self, cycle_index: int, beat_index: int) -> int:
        first = self.beats[0]
        n = self.tala.beats_per_cycle
        k = (cycle_index - first.cycle_index) * n + (beat_index - first.beat_index)
        if not 0 <= k < len(self.beats):
            raise OutOfGridRange(
                f"cycle {cycle_index} beat {beat_index} lies outside the annotated grid"
            )
        return k

    def matra_at(self, cycle_index: int, beat_index: int) -> float:
        """Local matra duration of the half-cycle holding this beat."""
        k = self._index(cycle_index, beat_index)
        if k == len(self.beats) - 1:
            k -= 1
        return self.matras[k]


def assign_cycles(times: Sequence[float], kinds: Sequence[AnchorKind], first_cycle: int = 0):
    """Anchors with cycle indices counted from the first one."""
    cycle = first_cycle
    out = []
    for i, (t, kind) in enumerate(zip(times, kinds)):
        if i > 0 and kind is AnchorKind.SAM:
            cycle += 1
        out.append(TalaAnchor(float(t), kind, cycle))
    return out


def build_grid(anchors: Sequence[TalaAnchor], tala: TalaSpec = TEENTAAL) -> TalaGrid:
    """Equal division of every anchor-to-anchor interval into matras.

    Raises
    ------
    TooFewAnchors, AnchorOrderViolation, AlternationViolation
    """
    if len(anchors) < 2:
        raise TooFewAnchors(f"need at least 2 anchors, got {len(anchors)}")
    for a, b in zip(anchors, anchors[1:]):
        if not b.time > a.time:
            raise AnchorOrderViolation(f"anchor at {b.time} s does not follow {a.time} s")
        if a.kind is b.kind:
            raise AlternationViolation(
                f"two consecutive {a.kind.value} anchors at {a.time} s and {b.time} s"
            )
        expected = a.cycle_index + (1 if b.kind is AnchorKind.SAM else 0)
        if b.cycle_index != expected:
            raise AlternationViolation(
                f"anchor at {b.time} s has cycle {b.cycle_index}, expected {expected}"
            )
    first_half = tala.khali_index - tala.sam_index
    second_half = tala.beats_per_cycle - first_half
    beats: list[Beat] = []
    matras: list[float] = []
    for a, b in zip(anchors, anchors[1:]):
        if a.kind is AnchorKind.SAM:
            n, start_beat = first_half, tala.sam_index
        else:
            n, start_beat = second_half, tala.khali_index
        step = (b.time - a.time) / n
        for k in range(n):
            beat_index = (start_beat - 1 + k) % tala.beats_per_cycle + 1
            cycle = a.cycle_index + (1 if beat_index < start_beat else 0)
            t = a.time if k == 0 else a.time + k * step
            beats.append(Beat(t, cycle, beat_index))
            matras.append(step)
    last = anchors[-1]
    beats.append(
        Beat(last.time, last.cycle_index, tala.sam_index if last.kind is AnchorKind.SAM else tala.khali_index)
    )
    matras.append(matras[-1])
    return TalaGrid(tuple(beats), tala, tuple(matras))


def canonical_time(
    g: TalaGrid, cycle_index: int, beat_index: int, sub_beat: Fraction | float = 0
) -> float:
    """Clock time of a score position, interpolating linearly inside the beat."""
    k = g._index(cycle_index, beat_index)
    base = g.beats[k].time
    if sub_beat == 0:
        return base
    if k == len(g.beats) - 1 or not 0 <= sub_beat < 1:
        raise OutOfGridRange(
            f"cycle {cycle_index} beat {beat_index} + {sub_beat} lies outside the grid"
        )
    return base + float(sub_beat) * g.matras[k]


def locate(g: TalaGrid, t: float) -> tuple[int, int, float]:
    """Inverse of :func:`canonical_time`: ``(cycle_index, beat_index, fraction)``."""
    if not g.start <= t <= g.end:
        raise OutOfGridRange(f"time {t} s outside grid span [{g.start}, {g.end}] s")
    times = [b.time for b in g.beats]
    k = bisect.bisect_right(times, t) - 1
    beat = g.beats[k]
    if k == len(g.beats) - 1:
        return beat.cycle_index, beat.beat_index, 0.0
    frac = (t - beat.time) / g.matras[k]
    return beat.cycle_index, beat.beat_index, min(max(frac, 0.0), np.nextafter(1.0, 0.0))


def tempo_profile(g: TalaGrid) -> list[tuple[int, float]]:
    """Matras per minute of each anchored half-cycle, as ``(cycle_index, rate)``."""
    out = []
    for beat, matra in zip(g.beats[:-1], g.matras[:-1]):
        if beat.beat_index in (g.tala.sam_index, g.tala.khali_index):
            out.append((beat.cycle_index, 60.0 / matra))
    return out


def constant_tempo_anchors(
    start: float, matra: float, n_cycles: int, tala: TalaSpec = TEENTAAL
) -> list[TalaAnchor]:
    """Sam/khali anchors for ``n_cycles`` full cycles at a fixed matra, closed by a final sam."""
    first_half = tala.khali_index - tala.sam_index
    anchors = []
    for c in range(n_cycles):
        t0 = start + c * tala.beats_per_cycle * matra
        anchors.append(TalaAnchor(t0, AnchorKind.SAM, c))
        anchors.append(TalaAnchor(t0 + first_half * matra, AnchorKind.KHALI, c))
    anchors.append(TalaAnchor(start + n_cycles * tala.beats_per_cycle * matra, AnchorKind.SAM, n_cycles))
    return anchors
