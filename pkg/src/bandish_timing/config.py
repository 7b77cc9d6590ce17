"""Flat ``key = value`` pipeline configuration with strict key checking."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from . import align, dsp, onset
from .errors import BandOutOfRange, ConfigError


def _parse_bands(text: str) -> tuple[tuple[float, float], ...]:
    bands = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise ConfigError(f"band {part!r} is not of the form low-high")
        bands.append((float(lo), float(hi)))
    return tuple(bands)


def _fmt_bands(bands) -> str:
    return ",".join(f"{lo:g}-{hi:g}" for lo, hi in bands)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate: int = dsp.ANALYSIS_RATE
    frame_len: float = dsp.FRAME_LEN
    hop: float = dsp.HOP
    novelty: str = "subband"
    bands: tuple[tuple[float, float], ...] = dsp.DEFAULT_BANDS
    band_weights: tuple[float, ...] = dsp.DEFAULT_BAND_WEIGHTS
    n_mels: int = dsp.N_MELS
    n_coeffs: int = dsp.N_COEFFS
    rise_sigma: float = dsp.RISE_SIGMA
    fall_sigma: float = dsp.FALL_SIGMA
    separation: float = dsp.SEPARATION
    threshold: float = 3.0
    target_recall: float = onset.TARGET_RECALL
    min_separation: float = onset.MIN_SEPARATION
    tolerance: float = onset.TOLERANCE
    n_thresholds: int = onset.N_THRESHOLDS
    timing_weight: float = align.TIMING_WEIGHT
    gap_penalty: float = align.GAP_PENALTY
    max_shift: float = align.MAX_SHIFT
    edge_allowance: int = align.EDGE_ALLOWANCE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if not 0 < self.hop <= self.frame_len:
            raise ConfigError("need 0 < hop <= frame_len")
        if self.novelty not in ("subband", "mfcc"):
            raise ConfigError("novelty must be 'subband' or 'mfcc'")
        try:
            dsp.validate_bands(self.bands, self.sample_rate)
        except BandOutOfRange as exc:
            raise ConfigError(str(exc)) from None
        if len(self.band_weights) != len(self.bands):
            raise ConfigError("band_weights needs one weight per band")
        if not 1 <= self.n_coeffs < self.n_mels:
            raise ConfigError("need 1 <= n_coeffs < n_mels")
        if min(self.rise_sigma, self.fall_sigma, self.separation) <= 0:
            raise ConfigError("kernel parameters must be positive")
        if not 0 < self.target_recall <= 1:
            raise ConfigError("target_recall must be in (0, 1]")
        if self.min_separation < self.hop:
            raise ConfigError("min_separation must be at least hop")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be >= 0")
        if self.n_thresholds < 2:
            raise ConfigError("n_thresholds must be at least 2")
        if self.timing_weight < 0 or self.gap_penalty < 0:
            raise ConfigError("timing_weight and gap_penalty must be >= 0")
        if self.max_shift <= 0:
            raise ConfigError("max_shift must be positive")
        if self.edge_allowance < 0:
            raise ConfigError("edge_allowance must be >= 0")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_values(self, values: dict[str, str]) -> "PipelineConfig":
        """Copy with string-valued overrides parsed to each field's type."""
        parsed = {}
        known = {f.name: f for f in fields(self)}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(self, key)
            try:
                if key == "bands":
                    parsed[key] = _parse_bands(raw)
                elif key == "band_weights":
                    parsed[key] = _parse_floats(raw)
                elif isinstance(current, bool):
                    parsed[key] = raw.strip().lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    parsed[key] = int(raw)
                elif isinstance(current, float):
                    parsed[key] = float(raw)
                else:
                    parsed[key] = raw.strip()
            except ValueError:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
        return dataclasses.replace(self, **parsed)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "bands":
                v = _fmt_bands(v)
            elif f.name == "band_weights":
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key = key.strip()
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return (base or PipelineConfig()).with_values(values)


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
