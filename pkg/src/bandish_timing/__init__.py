"""Expressive-timing analysis of bandish performances in Hindustani vocal music."""

from .align import AlignmentMap, LabeledOnset, ScheduleEntry, align_performance
from .config import PipelineConfig
from .dsp import AudioClip, band_energies, make_biphasic_kernel, mfcc, novelty_mfcc, novelty_subband
from .grid import AnchorKind, TalaAnchor, build_grid, canonical_time, locate, tempo_profile
from .notation import TEENTAAL, Composition, Half, TalaSpec, canonical_events, parse_notation, serialize_notation
from .onset import OnsetList, evaluate, pick_peaks, sweep_operating_points
from .synth import RubatoModel, degrade, synthesize
from .timing import deviations, fingerprint, line_profile, structural_shift_summary

__version__ = "0.1.0"
