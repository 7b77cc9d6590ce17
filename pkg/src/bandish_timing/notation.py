"""Canonical bandish notation on a tala grid.

The machine-readable layout is a CSV file with an optional ``key,value``
metadata block terminated by a blank line, followed by one row group per
composition line::

    title,yeri aali
    raga,yaman
    tala,teentaal

    VERSE,sthayi
    LYR,ye,ri,aa,li,...      lyric syllables (16 beat columns)
    VIB,x,,,,2,,,,0,,,,3,,,  vibhag markers at the quarter-cycle starts
    ORN,,,,,...              ornament symbols (optional per cell)
    NOT,ni,re,ga,...         sargam notes, stored verbatim

A lyric cell is either empty (rest), exactly ``s`` (continuation of the
previous note) or one or more whitespace-separated syllables sharing the
beat. ``VERSE`` rows are optional and apply to every following group.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import (
    InvalidToken,
    NotationError,
    OrphanContinuation,
    RowGroupMalformed,
    UnknownLine,
    WidthMismatch,
)

CONTINUATION = "s"
ROW_TAGS = ("LYR", "VIB", "ORN", "NOT")
METADATA_KEYS = ("title", "raga", "tala", "laya")

_BAD_CONTINUATION = re.compile(r"^s[^a-z]", re.IGNORECASE)


class CellKind(enum.Enum):
    SYLLABLE = "syllable"
    REST = "rest"
    CONTINUATION = "continuation"


class Verse(enum.Enum):
    STHAYI = "sthayi"
    ANTARA = "antara"


class Half(enum.Enum):
    FIRST = 1
    SECOND = 2


@dataclass(frozen=True)
class TalaSpec:
    name: str
    beats_per_cycle: int
    vibhag_starts: tuple[int, ...]
    sam_index: int = 1
    khali_index: int = 9

    def __post_init__(self):
        n = self.beats_per_cycle
        if n < 2:
            raise ValueError("beats_per_cycle must be at least 2")
        starts = tuple(self.vibhag_starts)
        object.__setattr__(self, "vibhag_starts", starts)
        if not starts or starts[0] != 1:
            raise ValueError("vibhag_starts must start with beat 1")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("vibhag_starts must be strictly increasing")
        for idx in (*starts, self.sam_index, self.khali_index):
            if not 1 <= idx <= n:
                raise ValueError(f"beat index {idx} outside 1..{n}")
        if self.khali_index <= self.sam_index:
            raise ValueError("khali must come after sam within the cycle")

    @property
    def half_length(self) -> int:
        """Number of beats in the sam half (sam up to khali)."""
        return self.khali_index - self.sam_index

    def half_of(self, beat_index: int) -> Half:
        if self.sam_index <= beat_index < self.khali_index:
            return Half.FIRST
        return Half.SECOND


TEENTAAL = TalaSpec("teentaal", 16, (1, 5, 9, 13), sam_index=1, khali_index=9)

TALAS = {TEENTAAL.name: TEENTAAL}


@dataclass(frozen=True)
class BeatCell:
    kind: CellKind
    syllables: tuple[str, ...] = ()
    note: str = ""
    ornament: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "syllables", tuple(self.syllables))
        if (self.kind is CellKind.SYLLABLE) != bool(self.syllables):
            raise ValueError("syllables must be non-empty exactly for syllable cells")

    @property
    def subdivisions(self) -> int:
        return max(1, len(self.syllables))

    @classmethod
    def rest(cls, note: str = "", ornament: str | None = None) -> "BeatCell":
        return cls(CellKind.REST, (), note, ornament)

    @classmethod
    def continuation(cls, note: str = "", ornament: str | None = None) -> "BeatCell":
        return cls(CellKind.CONTINUATION, (), note, ornament)

    @classmethod
    def syllable(cls, *syllables: str, note: str = "", ornament: str | None = None) -> "BeatCell":
        return cls(CellKind.SYLLABLE, tuple(syllables), note, ornament)

    def lyric_text(self) -> str:
        if self.kind is CellKind.REST:
            return ""
        if self.kind is CellKind.CONTINUATION:
            return CONTINUATION
        return " ".join(self.syllables)


@dataclass(frozen=True)
class CompositionLine:
    line_id: int
    cells: tuple[BeatCell, ...]
    verse: Verse = Verse.STHAYI

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))

    def syllables(self) -> list[str]:
        return [s for cell in self.cells for s in cell.syllables]


@dataclass(frozen=True)
class Composition:
    title: str
    raga: str
    tala: TalaSpec
    lines: tuple[CompositionLine, ...]
    laya: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        validate(self)

    def line(self, line_id: int) -> CompositionLine:
        for line in self.lines:
            if line.line_id == line_id:
                return line
        raise UnknownLine(f"unknown line id {line_id}")

    @property
    def line_ids(self) -> list[int]:
        return [line.line_id for line in self.lines]


@dataclass(frozen=True)
class CanonicalEvent:
    line_id: int
    cycle_beat: int
    sub_beat: Fraction
    syllable: str
    note: str = ""


def validate(c: Composition) -> None:
    """Check the structural invariants of a composition, raising on failure."""
    if not c.lines:
        raise NotationError("a composition needs at least one line")
    n = c.tala.beats_per_cycle
    seen = set()
    for pos, line in enumerate(c.lines):
        if line.line_id in seen:
            raise NotationError(f"duplicate line id {line.line_id}")
        seen.add(line.line_id)
        if len(line.cells) != n:
            raise WidthMismatch(
                f"line {line.line_id} has {len(line.cells)} cells, tala {c.tala.name} needs {n}"
            )
        for beat, cell in enumerate(line.cells, start=1):
            if cell.kind is not CellKind.CONTINUATION:
                continue
            before = line.cells[: beat - 1]
            if all(b.kind is CellKind.REST for b in before) and (pos == 0 or before):
                raise OrphanContinuation(
                    f"line {line.line_id} beat {beat}: continuation with nothing to continue"
                )


def _parse_lyric(text: str, where: str) -> tuple[CellKind, tuple[str, ...]]:
    tokens = text.split()
    if not tokens:
        return CellKind.REST, ()
    if CONTINUATION in tokens:
        if len(tokens) > 1:
            raise InvalidToken(f"{where}: continuation mixed with syllables in {text!r}")
        return CellKind.CONTINUATION, ()
    for tok in tokens:
        if _BAD_CONTINUATION.match(tok):
            raise InvalidToken(f"{where}: continuation marker with trailing text {tok!r}")
    return CellKind.SYLLABLE, tuple(tokens)


def _norm(text: str) -> str:
    return " ".join(text.split())


def _vibhag_marks(tala: TalaSpec) -> list[str]:
    marks = [""] * tala.beats_per_cycle
    ordinal = 2
    for start in tala.vibhag_starts:
        if start == tala.sam_index:
            marks[start - 1] = "x"
        elif start == tala.khali_index:
            marks[start - 1] = "0"
        else:
            marks[start - 1] = str(ordinal)
            ordinal += 1
    return marks


def parse_notation(csv_text: str, tala: TalaSpec = TEENTAAL) -> Composition:
    """Parse notation CSV text into a :class:`Composition`.

    Raises
    ------
    RowGroupMalformed
        A row group is incomplete, out of order, or carries an unknown tag.
    WidthMismatch
        A row has a number of beat columns different from the tala.
    InvalidToken
        A lyric cell misuses the continuation marker.
    """
    rows = list(csv.reader(io.StringIO(csv_text)))
    meta: dict[str, str] = {}
    body_start = 0
    first = next((i for i, r in enumerate(rows) if any(f.strip() for f in r)), len(rows))
    if first < len(rows) and rows[first][0].strip() not in ROW_TAGS + ("VERSE",):
        # metadata block up to the first blank row
        i = first
        while i < len(rows) and any(f.strip() for f in rows[i]):
            key = rows[i][0].strip().lower()
            value = rows[i][1].strip() if len(rows[i]) > 1 else ""
            if key not in METADATA_KEYS:
                raise NotationError(f"row {i + 1}: unknown metadata key {key!r}")
            meta[key] = value
            i += 1
        body_start = i
    else:
        body_start = first

    if "tala" in meta and meta["tala"].lower() != tala.name.lower():
        raise NotationError(f"notation declares tala {meta['tala']!r}, expected {tala.name!r}")

    n = tala.beats_per_cycle
    expected_vib = set(tala.vibhag_starts)
    lines: list[CompositionLine] = []
    verse = Verse.STHAYI
    group: list[tuple[int, list[str]]] = []

    def close_group():
        tags = [r[0].strip() for _, r in group]
        rowno = group[0][0] + 1
        if tags != list(ROW_TAGS):
            raise RowGroupMalformed(
                f"row {rowno}: expected a {'/'.join(ROW_TAGS)} group, got {'/'.join(tags)}"
            )
        for idx, row in group:
            if len(row) - 1 != n:
                raise WidthMismatch(
                    f"row {idx + 1}: {len(row) - 1} beat columns, tala {tala.name} needs {n}"
                )
        lyr, vib, orn, nots = (r[1:] for _, r in group)
        marked = {b for b, v in enumerate(vib, start=1) if v.strip()}
        if marked != expected_vib:
            raise RowGroupMalformed(
                f"row {group[1][0] + 1}: vibhag markers at beats {sorted(marked)}, "
                f"expected {sorted(expected_vib)}"
            )
        cells = []
        for b in range(n):
            kind, syls = _parse_lyric(lyr[b], f"row {rowno} beat {b + 1}")
            ornament = _norm(orn[b]) or None
            cells.append(BeatCell(kind, syls, _norm(nots[b]), ornament))
        lines.append(CompositionLine(len(lines) + 1, tuple(cells), verse))
        group.clear()

    for idx in range(body_start, len(rows)):
        row = rows[idx]
        if not any(f.strip() for f in row):
            if group:
                raise RowGroupMalformed(f"row {idx + 1}: blank row inside a row group")
            continue
        tag = row[0].strip()
        if tag == "VERSE":
            if group:
                raise RowGroupMalformed(f"row {idx + 1}: VERSE row inside a row group")
            name = row[1].strip().lower() if len(row) > 1 else ""
            try:
                verse = Verse(name)
            except ValueError:
                raise RowGroupMalformed(f"row {idx + 1}: unknown verse {name!r}") from None
            continue
        if tag not in ROW_TAGS:
            raise RowGroupMalformed(f"row {idx + 1}: unknown row tag {tag!r}")
        if tag == ROW_TAGS[0] and group:
            close_group()
        group.append((idx, row))
        if len(group) == len(ROW_TAGS):
            close_group()
    if group:
        raise RowGroupMalformed(
            f"row {group[0][0] + 1}: incomplete row group ({len(group)} of {len(ROW_TAGS)} rows)"
        )

    return Composition(
        title=meta.get("title", ""),
        raga=meta.get("raga", ""),
        tala=tala,
        lines=tuple(lines),
        laya=meta.get("laya", ""),
    )


def serialize_notation(c: Composition) -> str:
    """Render a composition back to notation CSV (inverse of :func:`parse_notation`)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for key in METADATA_KEYS:
        value = c.tala.name if key == "tala" else getattr(c, key)
        w.writerow([key, value])
    w.writerow([])
    marks = _vibhag_marks(c.tala)
    verse = None
    for line in c.lines:
        if line.verse is not verse:
            w.writerow(["VERSE", line.verse.value])
            verse = line.verse
        w.writerow(["LYR", *(cell.lyric_text() for cell in line.cells)])
        w.writerow(["VIB", *marks])
        w.writerow(["ORN", *(cell.ornament or "" for cell in line.cells)])
        w.writerow(["NOT", *(cell.note for cell in line.cells)])
    return buf.getvalue()


def canonical_events(c: Composition, line_id: int) -> list[CanonicalEvent]:
    """Syllable events of one line, ordered by beat and sub-beat offset.

    A cell holding k syllables spreads them evenly across the beat at
    offsets 0, 1/k, ..., (k-1)/k.
    """
    line = c.line(line_id)
    events = []
    for beat, cell in enumerate(line.cells, start=1):
        k = len(cell.syllables)
        for i, syl in enumerate(cell.syllables):
            events.append(CanonicalEvent(line_id, beat, Fraction(i, k), syl, cell.note))
    return events


def half_cycle_events(c: Composition, line_id: int, half: Half) -> list[CanonicalEvent]:
    return [e for e in canonical_events(c, line_id) if c.tala.half_of(e.cycle_beat) is half]


def half_cycle_syllables(c: Composition, line_id: int, half: Half) -> list[str]:
    return [e.syllable for e in half_cycle_events(c, line_id, half)]


def syllable_vocabulary(c: Composition) -> list[str]:
    """Distinct syllables in order of first appearance."""
    seen: dict[str, None] = {}
    for line in c.lines:
        for s in line.syllables():
            seen.setdefault(s)
    return list(seen)


def build_composition(
    lyric_rows: Sequence[Sequence[str]],
    note_rows: Sequence[Sequence[str]] | None = None,
    tala: TalaSpec = TEENTAAL,
    title: str = "",
    raga: str = "",
    verses: Sequence[Verse] | None = None,
) -> Composition:
    """Convenience constructor from raw lyric cell strings, one row per line."""
    lines = []
    for i, lyr in enumerate(lyric_rows):
        notes = note_rows[i] if note_rows is not None else [""] * len(lyr)
        cells = []
        for b, text in enumerate(lyr):
            kind, syls = _parse_lyric(text, f"line {i + 1} beat {b + 1}")
            cells.append(BeatCell(kind, syls, _norm(notes[b])))
        verse = verses[i] if verses is not None else Verse.STHAYI
        lines.append(CompositionLine(i + 1, tuple(cells), verse))
    return Composition(title, raga, tala, tuple(lines))
