import csv
from fractions import Fraction

import numpy as np
import pytest
import scipy.io.wavfile

from bandish_timing import io, synth
from bandish_timing.align import LabeledOnset, ScheduleEntry
from bandish_timing.dsp import AudioClip
from bandish_timing.errors import FormatError
from bandish_timing.grid import AnchorKind
from bandish_timing.notation import Half


def test_wav_int16_and_stereo(tmp_path):
    x = (np.sin(np.linspace(0, 20, 1600)) * 16000).astype(np.int16)
    path = tmp_path / "a.wav"
    scipy.io.wavfile.write(path, 8000, np.column_stack([x, x]))
    clip = io.read_wav(path)
    assert clip.sample_rate == 8000 and clip.samples.ndim == 1
    np.testing.assert_allclose(clip.samples, x / 32768.0)


def test_wav_float_round_trip(tmp_path):
    clip = AudioClip(np.linspace(-0.5, 0.5, 400), 16000)
    io.write_wav(tmp_path / "f.wav", clip)
    back = io.read_wav(tmp_path / "f.wav")
    np.testing.assert_allclose(back.samples, clip.samples, atol=1e-7)


def test_wav_undecodable(tmp_path):
    (tmp_path / "bad.wav").write_bytes(b"not a wave file at all")
    with pytest.raises(FormatError):
        io.read_wav(tmp_path / "bad.wav")


def test_tsv_formats(tmp_path):
    p = tmp_path / "l.tsv"
    p.write_text("time\tlabel\n0.5\tye\n1.25\tri\n# note\n\n2.0\n")
    assert io.read_tsv(p) == [(0.5, "ye"), (1.25, "ri"), (2.0, "")]
    p.write_text("0.5\t0.6\tye\n1.0\t1.1\tri\n")
    assert io.read_tsv(p) == [(0.5, "ye"), (1.0, "ri")]


@pytest.mark.parametrize("text", ["1.0\ta\n0.5\tb\n", "1.0\ta\nabc\tb\n", "-1\ta\n"])
def test_tsv_errors(tmp_path, text):
    p = tmp_path / "bad.tsv"
    p.write_text(text)
    with pytest.raises(FormatError):
        io.read_tsv(p)


def test_labels_round_trip(tmp_path):
    labels = [LabeledOnset(0.123456789, "ye"), LabeledOnset(1.5, "rī")]
    io.write_labels(tmp_path / "l.tsv", labels)
    assert io.read_labels(tmp_path / "l.tsv") == labels


def test_label_required(tmp_path):
    (tmp_path / "l.tsv").write_text("0.5\t\n")
    with pytest.raises(FormatError):
        io.read_labels(tmp_path / "l.tsv")


def test_anchors(tmp_path):
    p = tmp_path / "a.tsv"
    p.write_text("1.0\tsam\n5.0\tKhali\n9.0\tsam\n")
    a = io.read_anchors(p)
    assert [(x.kind, x.cycle_index) for x in a] == [(AnchorKind.SAM, 0), (AnchorKind.KHALI, 0), (AnchorKind.SAM, 1)]
    p.write_text("1.0\tsam\n5.0\ttali\n")
    with pytest.raises(FormatError):
        io.read_anchors(p)
    io.write_anchors(tmp_path / "b.tsv", a)
    assert io.read_anchors(tmp_path / "b.tsv") == a


def test_schedule_round_trip(tmp_path):
    entries = [ScheduleEntry(0, 1), ScheduleEntry(1, 2, Half.SECOND)]
    io.write_schedule(tmp_path / "s.csv", entries)
    assert io.read_schedule(tmp_path / "s.csv") == entries
    (tmp_path / "t.csv").write_text("0,1\n1,2,first\n")
    assert io.read_schedule(tmp_path / "t.csv") == [ScheduleEntry(0, 1), ScheduleEntry(1, 2, Half.FIRST)]
    (tmp_path / "u.csv").write_text("0,x\n")
    with pytest.raises(FormatError):
        io.read_schedule(tmp_path / "u.csv")


def test_alignment_and_deviation_csv(tmp_path, sample):
    out = synth.synthesize(sample, 140, synth.RubatoModel(0.5, jitter_std=0.2, seed=1), 2, render_audio=False)
    out = synth.degrade(out, 0.2, 0.2, seed=2)
    io.write_alignment(tmp_path / "a.csv", out.truth)
    with open(tmp_path / "a.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == io.ALIGNMENT_HEADER[:]
    status = [r["status"] for r in rows]
    assert status.count("paired") == len(out.truth.pairs)
    assert status.count("unmatched_labeled") == len(out.truth.unmatched_labeled)
    assert status.count("unmatched_canonical") == len(out.truth.unmatched_canonical)
    io.write_deviations(tmp_path / "d.csv", out.truth_deviations)
    back = io.read_deviations(tmp_path / "d.csv")
    assert len(back) == len(out.truth_deviations)
    for a, b in zip(back, out.truth_deviations):
        assert (a.line_id, a.cycle_index, a.beat_index, a.sub_beat) == (b.line_id, b.cycle_index, b.beat_index, b.sub_beat)
        assert a.deviation_matras == b.deviation_matras
        assert abs(a.onset_time - b.onset_time) <= 5e-10 and abs(a.canonical_time - b.canonical_time) <= 5e-10


def test_fingerprint_csv_header(tmp_path):
    from bandish_timing.timing import fingerprint
    io.write_fingerprint(tmp_path / "f.csv", fingerprint([]))
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].startswith("beat_index,mean,std,count")
    assert len(lines) == 17 and lines[1] == "1,,,0,"


def test_atomic_outputs_commit_and_rollback(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    with io.atomic_outputs(target) as (tmp,):
        tmp.write_text("ok")
    assert target.read_text() == "ok"
    with pytest.raises(RuntimeError):
        with io.atomic_outputs(target, tmp_path / "y.txt") as (t1, t2):
            t1.write_text("new")
            raise RuntimeError("boom")
    assert target.read_text() == "ok"
    assert not (tmp_path / "y.txt").exists()
    assert sorted(p.name for p in tmp_path.rglob("*")) == ["sub", "x.txt"]


def test_sub_beat_fraction_text(tmp_path):
    from bandish_timing.timing import DeviationRecord
    r = DeviationRecord(1, 0, 3, Fraction(1, 3), 1.0, 1.1, 0.2)
    io.write_deviations(tmp_path / "d.csv", [r])
    assert "1/3" in (tmp_path / "d.csv").read_text()
    assert io.read_deviations(tmp_path / "d.csv") == [r]
