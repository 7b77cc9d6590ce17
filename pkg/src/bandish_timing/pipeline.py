"""End-to-end stages composed from the core modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import dsp, onset
from .align import AlignmentMap, LabeledOnset, ScheduleEntry, align_performance
from .config import PipelineConfig
from .grid import TalaAnchor, TalaGrid, build_grid
from .notation import Composition
from .timing import DeviationRecord, Fingerprint, deviations, fingerprint, line_profile, structural_shift_summary


def novelty(clip: dsp.AudioClip, cfg: PipelineConfig = PipelineConfig()) -> dsp.NoveltyCurve:
    clip = dsp.resample(clip, cfg.sample_rate)
    kernel = dsp.make_biphasic_kernel(cfg.rise_sigma, cfg.fall_sigma, cfg.separation, cfg.hop)
    if cfg.novelty == "mfcc":
        coeffs = dsp.mfcc(clip, cfg.n_mels, cfg.n_coeffs, cfg.frame_len, cfg.hop)
        return dsp.novelty_mfcc(coeffs, kernel)
    energies = dsp.band_energies(clip, cfg.bands, cfg.frame_len, cfg.hop)
    return dsp.novelty_subband(energies, kernel, cfg.band_weights)


def detect(clip: dsp.AudioClip, cfg: PipelineConfig = PipelineConfig()):
    """Novelty curve and the onsets picked from it at ``cfg.threshold``."""
    nov = novelty(clip, cfg)
    return nov, onset.pick_peaks(nov, cfg.threshold, cfg.min_separation)


@dataclass
class Analysis:
    grid: TalaGrid
    alignment: AlignmentMap
    records: list[DeviationRecord]
    fingerprint: Fingerprint
    shifts: dict
    profiles: dict[int, list[tuple[float, float]]]


def analyze(
    composition: Composition,
    labels: Sequence[LabeledOnset],
    anchors: Sequence[TalaAnchor],
    schedule: Sequence[ScheduleEntry],
    cfg: PipelineConfig = PipelineConfig(),
) -> Analysis:
    grid = build_grid(anchors, composition.tala)
    amap = align_performance(
        composition, schedule, labels, grid,
        max_shift=cfg.max_shift, timing_weight=cfg.timing_weight,
        gap=cfg.gap_penalty, edge_allowance=cfg.edge_allowance,
    )
    records = deviations(amap, grid)
    n = composition.tala.beats_per_cycle
    ids = composition.line_ids
    profiles = {lid: line_profile(records, lid, n, ids) for lid in ids}
    return Analysis(grid, amap, records, fingerprint(records, n), structural_shift_summary(records), profiles)
