"""Command-line interface: ``bandish-timing <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import io, onset, pipeline, synth
from .config import PipelineConfig, load_config
from .dsp import resample
from .errors import BandishError, ConfigError
from .grid import build_grid, tempo_profile
from .notation import TALAS, TEENTAAL, canonical_events, parse_notation, serialize_notation


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (BandishError, OSError) as exc:
        raise StageError(name, exc) from exc


def _read_notation(path):
    text = Path(path).read_text(encoding="utf-8")
    tala = TEENTAAL
    for line in text.splitlines():
        key, _, value = line.partition(",")
        if key.strip().lower() == "tala" and value.strip().lower() in TALAS:
            tala = TALAS[value.strip().lower()]
            break
    return parse_notation(text, tala)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (override the config file)")
    g.add_argument("--config", type=Path, help="flat key = value config file")
    g.add_argument("--dump-config", type=Path, help="write the effective config here")
    for f in fields(PipelineConfig):
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {
        f.name: getattr(args, f"cfg_{f.name}")
        for f in fields(PipelineConfig)
        if getattr(args, f"cfg_{f.name}", None) is not None
    }
    cfg = cfg.with_values(overrides)
    if getattr(args, "dump_config", None):
        with io.atomic_outputs(args.dump_config) as (tmp,):
            tmp.write_text(cfg.dumps(), encoding="utf-8")
    return cfg


def cmd_detect(args) -> int:
    cfg = _config(args)
    clip = _stage("audio", io.read_wav, args.audio)
    nov, det = _stage("detect", pipeline.detect, clip, cfg)
    outputs = [args.output] + ([args.novelty_out] if args.novelty_out else [])
    with io.atomic_outputs(*outputs) as tmps:
        io.write_tsv(tmps[0], ((t, "") for t in det.times))
        if args.novelty_out:
            io.write_series(tmps[1], nov)
    print(f"{len(det)} onsets -> {args.output}")
    return 0


def _onsets(path, source):
    rows = io.read_tsv(path)
    return onset.OnsetList([t for t, _ in rows], source)


def _report_lines(rep: onset.EvalReport) -> str:
    p, r, f = rep.percentages()
    return (
        "Precision(%) Recall(%) F1(%)\n"
        f"{p:.1f} {r:.1f} {f:.1f}\n"
        f"# n_ref={rep.n_ref} n_det={rep.n_det} tp={rep.true_positives} tolerance={rep.tolerance:g}s"
    )


def cmd_evaluate(args) -> int:
    det = _stage("detected onsets", _onsets, args.detected, onset.OnsetSource.DETECTED)
    ref = _stage("reference onsets", _onsets, args.reference, onset.OnsetSource.ANNOTATED)
    rep = onset.evaluate(det, ref, args.tolerance)
    print(_report_lines(rep))
    if args.json:
        with io.atomic_outputs(args.json) as (tmp,):
            tmp.write_text(json.dumps(rep.as_dict(), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if len(args.pairs) % 2:
        raise SystemExit("sweep takes AUDIO REF pairs")
    curves, refs = [], []
    for audio, ref in zip(args.pairs[::2], args.pairs[1::2]):
        clip = _stage("audio", io.read_wav, audio)
        curves.append(_stage("novelty", pipeline.novelty, clip, cfg))
        refs.append(_stage("reference onsets", _onsets, ref, onset.OnsetSource.ANNOTATED))
    sw = _stage("sweep", onset.sweep_operating_points, curves, refs, cfg.tolerance,
                cfg.min_separation, cfg.n_thresholds)
    thr, best = sw.max_f1()
    print(f"max F1       threshold={thr:.6g}")
    print(_report_lines(best))
    fixed = sw.at_recall(cfg.target_recall)
    if fixed is None:
        print(f"recall >= {cfg.target_recall:g} not reached")
    else:
        print(f"fixed recall threshold={fixed[0]:.6g}")
        print(_report_lines(fixed[1]))
    if args.output:
        with io.atomic_outputs(args.output) as (tmp,):
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("threshold,precision,recall,f1,n_det,tp\n")
                for t, rep in sw.points:
                    fh.write(f"{t:.9g},{rep.precision:.6f},{rep.recall:.6f},{rep.f1:.6f},"
                             f"{rep.n_det},{rep.true_positives}\n")
    return 0


def cmd_parse_notation(args) -> int:
    comp = _stage("notation", _read_notation, args.notation)
    n_events = sum(len(canonical_events(comp, lid)) for lid in comp.line_ids)
    print(f"{comp.title or '(untitled)'}: {len(comp.lines)} lines, {n_events} syllables, "
          f"tala {comp.tala.name} ({comp.tala.beats_per_cycle} beats)")
    outputs = [p for p in (args.events, args.normalized) if p]
    with io.atomic_outputs(*outputs) as tmps:
        tmps = list(tmps)
        if args.events:
            with open(tmps.pop(0), "w", encoding="utf-8") as fh:
                fh.write("line_id,cycle_beat,sub_beat,syllable,note\n")
                for lid in comp.line_ids:
                    for e in canonical_events(comp, lid):
                        fh.write(f"{e.line_id},{e.cycle_beat},{e.sub_beat},{e.syllable},{e.note}\n")
        if args.normalized:
            tmps.pop(0).write_text(serialize_notation(comp), encoding="utf-8")
    return 0


def cmd_build_grid(args) -> int:
    anchors = _stage("anchors", io.read_anchors, args.anchors)
    grid = _stage("grid", build_grid, anchors)
    rates = [r for _, r in tempo_profile(grid)]
    print(f"{len(grid.beats)} beats, {min(rates):.1f}-{max(rates):.1f} matra/min")
    if args.output:
        with io.atomic_outputs(args.output) as (tmp,):
            io.write_grid(tmp, grid)
    return 0


def _analysis_inputs(args):
    comp = _stage("notation", _read_notation, args.notation)
    labels = _stage("labels", io.read_labels, args.labels)
    anchors = _stage("anchors", io.read_anchors, args.anchors)
    schedule = _stage("schedule", io.read_schedule, args.schedule)
    return comp, labels, anchors, schedule


def cmd_align(args) -> int:
    cfg = _config(args)
    comp, labels, anchors, schedule = _analysis_inputs(args)
    result = _stage("align", pipeline.analyze, comp, labels, anchors, schedule, cfg)
    with io.atomic_outputs(args.output) as (tmp,):
        io.write_alignment(tmp, result.alignment)
    m = result.alignment
    print(f"{len(m.pairs)} paired, {len(m.unmatched_canonical)} unmatched canonical, "
          f"{len(m.unmatched_labeled)} unmatched labeled")
    return 0


ANALYSIS_FILES = ("alignment.csv", "deviations.csv", "fingerprint.csv", "shifts.csv", "line_profiles.csv")


def cmd_analyze(args) -> int:
    cfg = _config(args)
    comp, labels, anchors, schedule = _analysis_inputs(args)
    res = _stage("analyze", pipeline.analyze, comp, labels, anchors, schedule, cfg)
    out = Path(args.out_dir)
    with io.atomic_outputs(*(out / name for name in ANALYSIS_FILES)) as tmps:
        io.write_alignment(tmps[0], res.alignment)
        io.write_deviations(tmps[1], res.records)
        io.write_fingerprint(tmps[2], res.fingerprint)
        io.write_shift_summary(tmps[3], res.shifts)
        io.write_line_profiles(tmps[4], res.profiles)
    print(f"{len(res.records)} deviation records -> {out}")
    return 0


SYNTH_FILES = ("labels.tsv", "anchors.tsv", "schedule.csv", "truth_alignment.csv",
               "truth_deviations.csv", "notation.csv")


def cmd_synth(args) -> int:
    if args.n_cycles < 1:
        raise ConfigError("n-cycles must be at least 1")
    if not (0 <= args.insert_prob < 1 and 0 <= args.delete_prob < 1):
        raise ConfigError("insert/delete probabilities must lie in [0, 1)")
    try:
        model = synth.RubatoModel(
            initial_lag=args.initial_lag, compression_onset_beat=args.compression_beat,
            jitter_std=args.jitter, structural_shift_prob=args.shift_prob, seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    comp = _stage("notation", _read_notation, args.notation)
    out = _stage("synth", synth.synthesize, comp, args.tempo, model, args.n_cycles,
                 render_audio=not args.no_audio)
    if args.insert_prob or args.delete_prob:
        out = synth.degrade(out, args.insert_prob, args.delete_prob, args.seed + 1)
    d = Path(args.out_dir)
    names = list(SYNTH_FILES) + ([] if args.no_audio else ["audio.wav"])
    with io.atomic_outputs(*(d / n for n in names)) as tmps:
        io.write_labels(tmps[0], out.labels)
        io.write_anchors(tmps[1], out.anchors)
        io.write_schedule(tmps[2], out.schedule)
        io.write_alignment(tmps[3], out.truth)
        io.write_deviations(tmps[4], out.truth_deviations)
        tmps[5].write_text(serialize_notation(comp), encoding="utf-8")
        if not args.no_audio:
            io.write_wav(tmps[6], resample(out.audio))
    print(f"{len(out.labels)} labeled onsets over {args.n_cycles} cycles -> {d}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandish-timing",
        description="Syllable onsets, score alignment and expressive timing for bandish performances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect syllable onsets in a WAV file")
    p.add_argument("audio", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="onset TSV")
    p.add_argument("--novelty-out", type=Path, help="novelty curve CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="precision/recall/F1 of detected vs reference onsets")
    p.add_argument("detected", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("--tolerance", type=float, default=onset.TOLERANCE)
    p.add_argument("--json", type=Path, help="machine-readable report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="threshold sweep: max-F1 and fixed-recall operating points")
    p.add_argument("pairs", nargs="+", metavar="AUDIO REF", help="audio/reference pairs")
    p.add_argument("-o", "--output", type=Path, help="operating curve CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("parse-notation", help="validate a notation CSV")
    p.add_argument("notation", type=Path)
    p.add_argument("--events", type=Path, help="canonical events CSV")
    p.add_argument("--normalized", type=Path, help="re-serialized notation")
    p.set_defaults(func=cmd_parse_notation)

    p = sub.add_parser("build-grid", help="tala grid from sam/khali anchors")
    p.add_argument("anchors", type=Path)
    p.add_argument("-o", "--output", type=Path, help="grid CSV")
    p.set_defaults(func=cmd_build_grid)

    for name, func, helptext in (
        ("align", cmd_align, "align labeled syllables to the canonical score"),
        ("analyze", cmd_analyze, "alignment plus deviations, fingerprint and shift histogram"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("notation", type=Path)
        p.add_argument("labels", type=Path)
        p.add_argument("anchors", type=Path)
        p.add_argument("schedule", type=Path)
        if name == "align":
            p.add_argument("-o", "--output", type=Path, required=True)
        else:
            p.add_argument("-d", "--out-dir", type=Path, required=True)
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a synthetic performance with ground truth")
    p.add_argument("notation", type=Path)
    p.add_argument("-d", "--out-dir", type=Path, required=True)
    p.add_argument("--tempo", type=float, default=140.0, help="matras per minute")
    p.add_argument("--n-cycles", type=int, default=8)
    p.add_argument("--initial-lag", type=float, default=0.5)
    p.add_argument("--compression-beat", type=int, default=8)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--shift-prob", type=float, default=0.0)
    p.add_argument("--insert-prob", type=float, default=0.0)
    p.add_argument("--delete-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-audio", action="store_true")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (BandishError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
