from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandish_timing import synth
from bandish_timing.align import AlignmentMap, LabeledOnset, ScheduleEntry, ScheduledEvent, scheduled_events
from bandish_timing.errors import OutOfGridRange, UnknownLine
from bandish_timing.grid import AnchorKind, TalaAnchor, build_grid, constant_tempo_anchors
from bandish_timing.notation import CanonicalEvent, build_composition
from bandish_timing.timing import (
    DeviationRecord,
    deviations,
    fingerprint,
    line_profile,
    merge_fingerprints,
    structural_shift_summary,
)

from conftest import random_composition


def rec(beat, dev, line_id=1, cycle=0, sub=Fraction(0)):
    return DeviationRecord(line_id, cycle, beat, sub, 0.0, 0.0, dev)


def single_pair(beat, onset, matra=0.5):
    g = build_grid(constant_tempo_anchors(0.0, matra, 1))
    ev = ScheduledEvent(CanonicalEvent(1, beat, Fraction(0), "ye", ""), 0)
    return deviations(AlignmentMap(pairs=[(ev, LabeledOnset(onset, "ye"))]), g)[0]


def test_deviation_examples():
    assert single_pair(3, 1.0).deviation_matras == 0.0
    assert single_pair(3, 1.1).deviation_matras == pytest.approx(0.2)
    assert single_pair(3, 0.75).deviation_matras == pytest.approx(-0.5)


def test_deviation_not_wrapped():
    assert single_pair(3, 1.5).deviation_matras == pytest.approx(1.0)


def test_deviation_uses_half_cycle_matra():
    g = build_grid([TalaAnchor(0.0, AnchorKind.SAM, 0), TalaAnchor(4.0, AnchorKind.KHALI, 0),
                    TalaAnchor(12.0, AnchorKind.SAM, 1)])
    ev = ScheduledEvent(CanonicalEvent(1, 9, Fraction(0), "ye", ""), 0)
    (r,) = deviations(AlignmentMap(pairs=[(ev, LabeledOnset(4.5, "ye"))]), g)
    assert r.deviation_matras == pytest.approx(0.5)


def test_deviation_outside_grid():
    g = build_grid(constant_tempo_anchors(0.0, 0.5, 1))
    ev = ScheduledEvent(CanonicalEvent(1, 3, Fraction(0), "ye", ""), 4)
    with pytest.raises(OutOfGridRange):
        deviations(AlignmentMap(pairs=[(ev, LabeledOnset(1.0, "ye"))]), g)


def test_fingerprint_examples():
    fp = fingerprint([])
    assert all(b.count == 0 and b.mean is None and b.std is None for b in fp.bins)
    fp = fingerprint([rec(5, 0.3), rec(5, -0.3, cycle=1)])
    assert (fp[5].mean, fp[5].std, fp[5].count) == (0.0, pytest.approx(0.3), 2)
    fp = fingerprint([rec(1, 0.1), rec(1, 0.2, sub=Fraction(1, 2))])
    assert fp[1].count == 2
    assert sum(b.count == 0 for b in fp.bins) == 15


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 16), st.floats(-3, 3)), max_size=40),
       st.lists(st.tuples(st.integers(1, 16), st.floats(-3, 3)), max_size=40))
def test_fingerprint_conservation_and_merge(a, b):
    ra = [rec(k, d) for k, d in a]
    rb = [rec(k, d) for k, d in b]
    whole = fingerprint(ra + rb)
    assert whole.total == len(ra) + len(rb)
    merged = merge_fingerprints(fingerprint(ra), fingerprint(rb))
    for x, y in zip(whole.bins, merged.bins):
        assert x.count == y.count
        if x.count:
            assert x.mean == pytest.approx(y.mean, abs=1e-9)
            assert x.std == pytest.approx(y.std, abs=1e-6)
            assert x.mean_abs == pytest.approx(y.mean_abs, abs=1e-9)


def test_line_profile_examples():
    assert line_profile([rec(3, 1.0)], 1) == [(3.0, 1.0)]
    assert line_profile([], 1) == []
    assert line_profile([rec(3, 1.0)], 2, line_ids=[1, 2]) == []
    with pytest.raises(UnknownLine):
        line_profile([rec(3, 1.0)], 2)
    with pytest.raises(UnknownLine):
        line_profile([], 5, line_ids=[1, 2])


def test_line_profile_repetitions_laid_end_to_end():
    records = [rec(2, 0.1, cycle=0), rec(2, 0.2, cycle=4), rec(4, 0.3, cycle=4, sub=Fraction(1, 2))]
    assert line_profile(records, 1) == [(2.0, 0.1), (18.0, 0.2), (20.5, 0.3)]


def test_shift_summary_examples():
    h = structural_shift_summary([0.05, 0.95, 1.1])
    assert h[0] == 1 and h[1] == 2 and sum(h.values()) == 3
    assert structural_shift_summary([0.0] * 5)[0] == 5
    assert structural_shift_summary([2.6])[">2"] == 1
    assert structural_shift_summary([-2.6])["<-2"] == 1
    assert list(structural_shift_summary([])) == ["<-2", -2, -1, 0, 1, 2, ">2"]


def random_alignment(rng, g):
    comp = random_composition(rng, n_lines=1)
    pairs = []
    for _, evs in scheduled_events(comp, ScheduleEntry(0, 1)):
        for e in evs:
            t = g.beats[(e.cycle_beat - 1)].time + float(e.sub_beat) * g.matras[e.cycle_beat - 1]
            pairs.append((e, t + rng.uniform(-0.4, 0.4)))
    return pairs


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.5, 0.5), st.floats(0.2, 5.0))
def test_translation_covariance_and_tempo_invariance(seed, delta, s):
    rng = np.random.default_rng(seed)
    matra = rng.uniform(0.3, 0.6)
    anchors = constant_tempo_anchors(2.0, matra, 2)
    g = build_grid(anchors)
    pairs = random_alignment(rng, g)
    if not pairs:
        return
    amap = AlignmentMap(pairs=[(e, LabeledOnset(t, e.syllable)) for e, t in pairs])
    base = [r.deviation_matras for r in deviations(amap, g)]
    moved = AlignmentMap(pairs=[(e, LabeledOnset(t + delta, e.syllable)) for e, t in pairs])
    shifted = [r.deviation_matras for r in deviations(moved, g)]
    np.testing.assert_allclose(np.array(shifted) - base, delta / matra, atol=1e-9)
    g_s = build_grid([TalaAnchor(a.time * s, a.kind, a.cycle_index) for a in anchors])
    scaled = AlignmentMap(pairs=[(e, LabeledOnset(t * s, e.syllable)) for e, t in pairs])
    np.testing.assert_allclose([r.deviation_matras for r in deviations(scaled, g_s)], base, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(90, 200))
def test_deviations_match_generator_truth(seed, tempo):
    comp = random_composition(np.random.default_rng(seed))
    out = synth.synthesize(comp, tempo, synth.RubatoModel(0.6, 8, 0.2, 0.1, seed=seed), 3, render_audio=False)
    got = {(r.cycle_index, r.line_id, r.beat_index, r.sub_beat): r.deviation_matras for r in deviations(out.truth, out.grid)}
    for r in out.truth_deviations:
        assert abs(got[(r.cycle_index, r.line_id, r.beat_index, r.sub_beat)] - r.deviation_matras) < 1e-6


def test_records_sorted_by_onset():
    out = synth.synthesize(build_composition([["ye", "ri", "a", "li"] + [""] * 12]), 120,
                           synth.RubatoModel(jitter_std=0.2, seed=1), 3, render_audio=False)
    times = [r.onset_time for r in deviations(out.truth, out.grid)]
    assert times == sorted(times)
