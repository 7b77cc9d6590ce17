"""Synthetic performances with known ground truth.

A performance sings a composition cycle after cycle at a constant tempo.
Syllable onsets are displaced from their canonical positions by a rubato
model: a lag at the start of each cycle that is absorbed linearly by a
given beat, per-syllable jitter and occasional one-matra structural
shifts. The last syllable before every sam and khali is kept close to its
beat.

The audio renders each syllable as a short noise burst with little energy
in the 640-2800 Hz band followed by a harmonic vowel concentrated there,
so that every onset is a sub-band energy rise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .align import AlignmentMap, LabeledOnset, ScheduledEvent, ScheduleEntry
from .dsp import ANALYSIS_RATE, AudioClip
from .errors import TempoOutOfRange
from .grid import TalaAnchor, TalaGrid, build_grid, constant_tempo_anchors
from .notation import CellKind, Composition, canonical_events
from .timing import DeviationRecord

TEMPO_RANGE = (60.0, 300.0)
LEAD_IN = 1.0
TAIL = 1.0
MIN_GAP = 0.07
F0 = 220.0
VOWEL_HARMONICS = (3, 5, 9)
ALT_VOWEL_HARMONICS = (2, 7, 12)
BURST_LEN = 0.020
BURST_MID_DB = -15.0
NOISE_FLOOR_DB = -60.0


@dataclass(frozen=True)
class RubatoModel:
    initial_lag: float = 0.0
    compression_onset_beat: int = 8
    jitter_std: float = 0.0
    structural_shift_prob: float = 0.0
    seed: int = 0
    # largest |deviation| allowed for the last syllable before sam/khali
    boundary_tolerance: float = 0.2

    def __post_init__(self):
        if self.initial_lag < 0:
            raise ValueError("initial_lag must be >= 0")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be >= 0")
        if not 0 <= self.structural_shift_prob < 1:
            raise ValueError("structural_shift_prob must be in [0, 1)")
        if not 0 < self.boundary_tolerance < 0.25:
            raise ValueError("boundary_tolerance must be in (0, 0.25)")
        if self.compression_onset_beat < 1:
            raise ValueError("compression_onset_beat must be a beat index")

    def lag(self, position: float) -> float:
        """Deterministic lag (matras) at cycle position ``beat + sub_beat``."""
        end = self.compression_onset_beat
        if end <= 1:
            return self.initial_lag if position < 1 + 1e-12 else 0.0
        return self.initial_lag * max(0.0, 1.0 - (position - 1.0) / (end - 1.0))


@dataclass
class SynthOutput:
    audio: AudioClip | None
    labels: list[LabeledOnset]
    anchors: list[TalaAnchor]
    truth: AlignmentMap
    truth_deviations: list[DeviationRecord]
    schedule: list[ScheduleEntry] = field(default_factory=list)
    tempo: float = 0.0

    @property
    def grid(self) -> TalaGrid:
        return build_grid(self.anchors)


def default_schedule(composition: Composition, n_cycles: int) -> list[ScheduleEntry]:
    ids = composition.line_ids
    return [ScheduleEntry(c, ids[c % len(ids)]) for c in range(n_cycles)]


def _sounding_length(composition: Composition, line_id: int) -> dict[tuple[int, Fraction], float]:
    """Canonical duration in matras of every syllable, through its continuations."""
    line = composition.line(line_id)
    out = {}
    cells = line.cells
    for beat, cell in enumerate(cells, start=1):
        k = len(cell.syllables)
        for i in range(k):
            length = 1.0 / k
            if i == k - 1:
                nxt = beat
                while nxt < len(cells) and cells[nxt].kind is CellKind.CONTINUATION:
                    length += 1.0
                    nxt += 1
            out[(beat, Fraction(i, k))] = length
    return out


def synthesize(
    composition: Composition,
    tempo_matra_per_min: float,
    model: RubatoModel,
    n_cycles: int,
    schedule: Sequence[ScheduleEntry] | None = None,
    render_audio: bool = True,
    sample_rate: int = ANALYSIS_RATE,
    lead_in: float = LEAD_IN,
) -> SynthOutput:
    """Generate one performance; deterministic for a fixed ``model.seed``."""
    lo, hi = TEMPO_RANGE
    if not lo <= tempo_matra_per_min <= hi:
        raise TempoOutOfRange(f"tempo {tempo_matra_per_min} outside [{lo}, {hi}] matra/min")
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    rng = np.random.default_rng(model.seed)
    tala = composition.tala
    n = tala.beats_per_cycle
    matra = 60.0 / tempo_matra_per_min
    anchors = constant_tempo_anchors(lead_in, matra, n_cycles, tala)
    schedule = list(schedule) if schedule is not None else default_schedule(composition, n_cycles)

    events: list[ScheduledEvent] = []
    canon: list[float] = []
    onsets: list[float] = []
    boundary: list[bool] = []
    lengths: list[float] = []
    for entry in schedule:
        evs = canonical_events(composition, entry.line_id)
        sounding = _sounding_length(composition, entry.line_id)
        last_of_half = {}
        for idx, e in enumerate(evs):
            last_of_half[tala.half_of(e.cycle_beat)] = idx
        for idx, e in enumerate(evs):
            pos = e.cycle_beat + float(e.sub_beat)
            t_c = lead_in + ((entry.cycle_index * n) + pos - 1.0) * matra
            is_boundary = idx in last_of_half.values()
            dev = model.lag(pos) + (rng.normal(0.0, model.jitter_std) if model.jitter_std else 0.0)
            shift = rng.random() < model.structural_shift_prob
            if shift and not is_boundary:
                dev += 1.0
            if is_boundary:
                tol = model.boundary_tolerance
                dev = min(max(dev, -tol), tol)
            events.append(ScheduledEvent(e, entry.cycle_index))
            canon.append(t_c)
            onsets.append(t_c + dev * matra)
            boundary.append(is_boundary)
            lengths.append(sounding[(e.cycle_beat, e.sub_beat)] * matra)

    onsets = _enforce_spacing(onsets, boundary, events, tala, MIN_GAP)
    labels = [LabeledOnset(t, ev.syllable) for t, ev in zip(onsets, events)]
    truth = AlignmentMap(pairs=list(zip(events, labels)))
    truth_dev = [
        DeviationRecord(ev.line_id, ev.cycle_index, ev.cycle_beat, ev.sub_beat, tc, t, (t - tc) / matra)
        for ev, tc, t in zip(events, canon, onsets)
    ]
    audio = None
    if render_audio:
        duration = anchors[-1].time + TAIL
        audio = render_performance(onsets, lengths, duration, rng, sample_rate)
    return SynthOutput(audio, labels, anchors, truth, truth_dev, schedule, tempo_matra_per_min)


def _enforce_spacing(onsets, boundary, events, tala, gap):
    """Keep onsets strictly ordered with at least ``gap`` seconds between them.

    Within each half-cycle, syllables before the boundary syllable are
    pulled earlier; a half-cycle start crowding the previous boundary is
    pushed later.
    """
    t = list(onsets)
    for i in range(len(t) - 2, -1, -1):
        same_half = (
            events[i].cycle_index == events[i + 1].cycle_index
            and tala.half_of(events[i].cycle_beat) is tala.half_of(events[i + 1].cycle_beat)
        )
        if same_half and t[i] > t[i + 1] - gap:
            t[i] = t[i + 1] - gap
    for i in range(1, len(t)):
        if t[i] < t[i - 1] + gap:
            t[i] = t[i - 1] + gap
    return t


def _band_noise(rng, n: int, sr: int, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(f < lo) | (f >= hi)] = 0.0
    x = np.fft.irfft(spec, n)
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _ramp(n: int, attack: int, release: int) -> np.ndarray:
    env = np.ones(n)
    a, r = min(attack, n // 2), min(release, n // 2)
    if a:
        env[:a] = np.linspace(0.0, 1.0, a, endpoint=False)
    if r:
        env[n - r :] = np.linspace(1.0, 0.0, r)
    return env


def harmonic_tone(n: int, sr: int, harmonics: Sequence[int], f0: float = F0, phase0: float = 0.0):
    """Unit-rms sum of harmonics of ``f0`` with decreasing amplitudes."""
    t = np.arange(n) / sr
    x = np.zeros(n)
    for rank, h in enumerate(harmonics):
        x += (0.7**rank) * np.sin(2 * np.pi * h * f0 * t + phase0 * h)
    return x / np.sqrt(np.mean(x**2))


def render_performance(
    onsets: Sequence[float],
    lengths: Sequence[float],
    duration: float,
    rng: np.random.Generator,
    sample_rate: int = ANALYSIS_RATE,
) -> AudioClip:
    """Consonant burst plus vowel for each onset over a faint noise floor."""
    sr = sample_rate
    n_total = int(np.ceil(duration * sr))
    nyq = sr / 2
    y = rng.standard_normal(n_total) * 10 ** (NOISE_FLOOR_DB / 20)
    burst_n = int(round(BURST_LEN * sr))
    mid = (640.0, 2800.0)
    high = (2800.0, min(7500.0, nyq * 0.95))
    for k, t0 in enumerate(onsets):
        level = 0.25 * 10 ** (rng.uniform(-10.0, 0.0) / 20)
        nxt = onsets[k + 1] if k + 1 < len(onsets) else duration
        end = min(t0 + max(lengths[k] * 0.9, 2 * BURST_LEN), nxt - 0.005, duration)
        i0 = int(round(t0 * sr))
        i1 = i0 + burst_n
        i2 = int(round(end * sr))
        if i1 >= i2 or i0 < 0:
            continue
        hi_part = _band_noise(rng, burst_n, sr, *high) * level * 10 ** (rng.uniform(-6.0, 0.0) / 20)
        mid_part = _band_noise(rng, burst_n, sr, *mid) * level * 10 ** (BURST_MID_DB / 20)
        y[i0:i1] += (hi_part + mid_part) * _ramp(burst_n, int(0.002 * sr), int(0.002 * sr))
        vn = i2 - i1
        vowel = harmonic_tone(vn, sr, VOWEL_HARMONICS, phase0=rng.uniform(0, 2 * np.pi))
        decay = np.exp(-np.arange(vn) / sr / 0.6)
        y[i1:i2] += vowel * level * decay * _ramp(vn, int(0.005 * sr), int(0.015 * sr))
    peak = np.max(np.abs(y))
    if peak > 1.0:
        y /= peak
    return AudioClip(y, sr)


def render_vowel_change(
    change_time: float, duration: float, sample_rate: int = ANALYSIS_RATE, seed: int = 0
) -> AudioClip:
    """A sustained vowel that switches timbre at ``change_time`` (same loudness)."""
    sr = sample_rate
    rng = np.random.default_rng(seed)
    n = int(round(duration * sr))
    c = int(round(change_time * sr))
    a = harmonic_tone(n, sr, VOWEL_HARMONICS)
    b = harmonic_tone(n, sr, ALT_VOWEL_HARMONICS)
    fade = int(0.005 * sr)
    mix = np.clip((np.arange(n) - c + fade / 2) / fade, 0.0, 1.0)
    y = 0.2 * ((1 - mix) * a + mix * b)
    y += rng.standard_normal(n) * 10 ** (NOISE_FLOOR_DB / 20)
    return AudioClip(y, sr)


def degrade(out: SynthOutput, insert_prob: float, delete_prob: float, seed: int) -> SynthOutput:
    """Delete true labels and insert spurious ones, updating the truth.

    Deleted labels turn their canonical events into unmatched canonical
    events; inserted labels (random syllables from the performed
    vocabulary, placed between surviving neighbours) are unmatched labels.
    """
    if not (0 <= insert_prob < 1 and 0 <= delete_prob < 1):
        raise ValueError("probabilities must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    kept_pairs = []
    unmatched_canonical = list(out.truth.unmatched_canonical)
    for ev, lab in out.truth.pairs:
        if rng.random() < delete_prob:
            unmatched_canonical.append(ev)
        else:
            kept_pairs.append((ev, lab))
    kept_labels = {lab.time for _, lab in kept_pairs}
    survivors = [lab for lab in out.labels if lab.time in kept_labels or lab in out.truth.unmatched_labeled]
    vocab = sorted({lab.syllable for lab in out.labels}) or ["a"]
    inserted = []
    bounds = [0.0, *[lab.time for lab in survivors]]
    for a, b in zip(bounds, bounds[1:]):
        if b - a > 2 * MIN_GAP and rng.random() < insert_prob:
            t = rng.uniform(a + MIN_GAP, b - MIN_GAP)
            inserted.append(LabeledOnset(float(t), vocab[rng.integers(len(vocab))]))
    labels = sorted(survivors + inserted, key=lambda lab: lab.time)
    truth = AlignmentMap(
        pairs=kept_pairs,
        unmatched_canonical=sorted(unmatched_canonical, key=lambda e: e.key()),
        unmatched_labeled=sorted(list(out.truth.unmatched_labeled) + inserted, key=lambda lab: lab.time),
    )
    kept_keys = {ev.key() for ev, _ in kept_pairs}
    truth_dev = [
        r for r in out.truth_deviations
        if (r.cycle_index, r.line_id, r.beat_index, r.sub_beat) in kept_keys
    ]
    return replace(out, labels=labels, truth=truth, truth_deviations=truth_dev)
