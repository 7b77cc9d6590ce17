"""Readers and writers for the on-disk formats.

* onset / label / anchor files: TSV ``time_seconds<TAB>label`` (a header
  line and three-column ``start<TAB>end<TAB>label`` exports are accepted)
* schedule: CSV ``cycle_index,line_id,half``
* alignment, deviation, fingerprint, shift and feature dumps: CSV with header
* audio: PCM (8/16/32-bit) or float WAV, multi-channel averaged to mono
"""

from __future__ import annotations

import csv
import os
import tempfile
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.io.wavfile

from .align import AlignmentMap, LabeledOnset, ScheduleEntry
from .dsp import AudioClip, FrameSeries, NoveltyCurve
from .errors import AlternationViolation, FormatError
from .grid import AnchorKind, TalaAnchor, TalaGrid, assign_cycles
from .notation import Half
from .timing import DeviationRecord, Fingerprint


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_wav(path) -> AudioClip:
    try:
        rate, data = scipy.io.wavfile.read(path)
    except (ValueError, EOFError) as exc:
        raise FormatError(f"{path}: cannot decode WAV ({exc})") from None
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        x = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise FormatError(f"{path}: WAV file has no samples")
    return AudioClip(x, int(rate))


def write_wav(path, clip: AudioClip) -> None:
    scipy.io.wavfile.write(path, clip.sample_rate, clip.samples.astype(np.float32))


def read_tsv(path) -> list[tuple[float, str]]:
    """Rows of ``(time, label)``; the label is empty when absent."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if not _is_number(fields[0]):
                if not rows and lineno == 1:
                    continue  # header
                raise FormatError(f"{path}:{lineno}: time {fields[0]!r} is not a number")
            if len(fields) >= 3 and _is_number(fields[1]):
                label = fields[2]
            else:
                label = fields[1] if len(fields) > 1 else ""
            rows.append((float(fields[0]), label.strip()))
    times = [t for t, _ in rows]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise FormatError(f"{path}: times are not strictly increasing")
    if any(t < 0 for t in times):
        raise FormatError(f"{path}: negative time")
    return rows


def write_tsv(path, rows: Iterable[tuple[float, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for t, label in rows:
            fh.write(f"{t:.9f}\t{label}\n")


def read_labels(path) -> list[LabeledOnset]:
    out = []
    for t, label in read_tsv(path):
        if not label:
            raise FormatError(f"{path}: onset at {t} s has no syllable label")
        out.append(LabeledOnset(t, label))
    return out


def write_labels(path, labels: Sequence[LabeledOnset]) -> None:
    write_tsv(path, ((lab.time, lab.syllable) for lab in labels))


def read_anchors(path) -> list[TalaAnchor]:
    rows = read_tsv(path)
    kinds = []
    for t, label in rows:
        try:
            kinds.append(AnchorKind(label.lower()))
        except ValueError:
            raise FormatError(f"{path}: anchor at {t} s has label {label!r}, expected sam/khali") from None
    try:
        return assign_cycles([t for t, _ in rows], kinds)
    except AlternationViolation as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_anchors(path, anchors: Sequence[TalaAnchor]) -> None:
    write_tsv(path, ((a.time, a.kind.value) for a in anchors))


_HALVES = {"": None, "both": None, "1": Half.FIRST, "first": Half.FIRST, "2": Half.SECOND, "second": Half.SECOND}


def read_schedule(path) -> list[ScheduleEntry]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue  # header
            try:
                cycle, line_id = int(row[0]), int(row[1])
                half = _HALVES[(row[2] if len(row) > 2 else "").strip().lower()]
            except (ValueError, IndexError, KeyError):
                raise FormatError(f"{path}:{lineno}: expected cycle_index,line_id,half") from None
            out.append(ScheduleEntry(cycle, line_id, half))
    return out


def write_schedule(path, entries: Sequence[ScheduleEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle_index", "line_id", "half"])
        for e in entries:
            w.writerow([e.cycle_index, e.line_id, "both" if e.half is None else e.half.name.lower()])


def _fmt_frac(f: Fraction) -> str:
    return str(Fraction(f))


ALIGNMENT_HEADER = [
    "line_id", "cycle_beat", "sub_beat", "canonical_syllable",
    "onset_time", "labeled_syllable", "status", "cycle_index",
]


def write_alignment(path, m: AlignmentMap) -> None:
    rows = []
    for ev, lab in m.pairs:
        rows.append((lab.time, [ev.line_id, ev.cycle_beat, _fmt_frac(ev.sub_beat), ev.syllable,
                                f"{lab.time:.9f}", lab.syllable, "paired", ev.cycle_index]))
    for lab in m.unmatched_labeled:
        rows.append((lab.time, ["", "", "", "", f"{lab.time:.9f}", lab.syllable, "unmatched_labeled", ""]))
    unmatched = [[ev.line_id, ev.cycle_beat, _fmt_frac(ev.sub_beat), ev.syllable,
                  "", "", "unmatched_canonical", ev.cycle_index] for ev in m.unmatched_canonical]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ALIGNMENT_HEADER)
        for _, row in sorted(rows, key=lambda r: r[0]):
            w.writerow(row)
        w.writerows(unmatched)


DEVIATION_HEADER = [
    "line_id", "cycle_index", "beat_index", "sub_beat", "canonical_time", "onset_time", "deviation_matras",
]


def write_deviations(path, records: Sequence[DeviationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEVIATION_HEADER)
        for r in records:
            w.writerow([r.line_id, r.cycle_index, r.beat_index, _fmt_frac(r.sub_beat),
                        f"{r.canonical_time:.9f}", f"{r.onset_time:.9f}", repr(float(r.deviation_matras))])


def read_deviations(path) -> list[DeviationRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        try:
            return [
                DeviationRecord(int(r["line_id"]), int(r["cycle_index"]), int(r["beat_index"]),
                                Fraction(r["sub_beat"]), float(r["canonical_time"]),
                                float(r["onset_time"]), float(r["deviation_matras"]))
                for r in reader
            ]
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: malformed deviation CSV ({exc})") from None


def _opt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_fingerprint(path, fp: Fingerprint) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beat_index", "mean", "std", "count", "mean_abs"])
        for b in fp.bins:
            w.writerow([b.beat_index, _opt(b.mean), _opt(b.std), b.count, _opt(b.mean_abs)])


def write_shift_summary(path, hist: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shift_matras", "count"])
        for k, v in hist.items():
            w.writerow([k, v])


def write_line_profiles(path, profiles: dict[int, list[tuple[float, float]]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "cycle_position", "deviation_matras"])
        for line_id, points in profiles.items():
            for pos, dev in points:
                w.writerow([line_id, repr(pos), repr(dev)])


def write_series(path, series: FrameSeries | NoveltyCurve) -> None:
    """Feature dump: ``time, ch0, ch1, ...``."""
    values = series.values if series.values.ndim == 2 else series.values[:, None]
    times = series.times()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", *(f"ch{j}" for j in range(values.shape[1]))])
        for t, row in zip(times, values):
            w.writerow([f"{t:.6f}", *(f"{v:.9g}" for v in row)])


def write_grid(path, g: TalaGrid) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle_index", "beat_index", "time", "matra"])
        for b, m in zip(g.beats, g.matras):
            w.writerow([b.cycle_index, b.beat_index, f"{b.time:.9f}", f"{m:.9f}"])


@contextmanager
def atomic_outputs(*paths):
    """Yield temporary paths; rename them onto ``paths`` only if the block succeeds.

    On any exception every temporary file is removed and no target is touched.
    """
    targets = [Path(p) for p in paths]
    temps = []
    try:
        for t in targets:
            t.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{t.name}.", suffix=".tmp", dir=t.parent)
            os.close(fd)
            temps.append(Path(tmp))
        yield temps
        for tmp, t in zip(temps, targets):
            os.replace(tmp, t)
    finally:
        for tmp in temps:
            if tmp.exists():
                tmp.unlink()
