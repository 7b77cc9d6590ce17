"""Frame-level features and novelty curves for sung-syllable onsets.

Two feature routes feed the same smoothed-derivative stage:

* log sub-band energies, whose rise at a consonant-vowel boundary marks
  the onset (strongest in the 640-2800 Hz band), and
* MFCCs without the loudness coefficient, whose frame-to-frame change
  follows phone identity.

Frame ``i`` of every series is centred at ``start_offset + i * hop``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft
import scipy.signal

from .errors import BandOutOfRange, ClipTooShort, DegenerateKernel

ANALYSIS_RATE = 16000
FRAME_LEN = 0.030
HOP = 0.010
EPS = 1e-10
DEFAULT_BANDS = ((0.0, 640.0), (640.0, 2800.0), (2800.0, 8000.0))
DEFAULT_BAND_WEIGHTS = (0.5, 1.0, 0.5)
N_MELS = 40
N_COEFFS = 13
MEL_FMAX = 8000.0
RISE_SIGMA = 0.020
FALL_SIGMA = 0.020
SEPARATION = 0.040


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("AudioClip samples must be mono (1-D)")
        if x.size == 0:
            raise ValueError("AudioClip must be non-empty")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate)


@dataclass(frozen=True)
class FrameSeries:
    values: np.ndarray  # (n_frames, n_channels)
    hop: float
    start_offset: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def times(self) -> np.ndarray:
        return self.start_offset + np.arange(self.n_frames) * self.hop


@dataclass(frozen=True)
class NoveltyCurve:
    values: np.ndarray
    hop: float
    start_offset: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("novelty values must be 1-D")
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        object.__setattr__(self, "values", v)

    def times(self) -> np.ndarray:
        return self.start_offset + np.arange(self.values.size) * self.hop


@dataclass(frozen=True)
class BiphasicKernel:
    taps: np.ndarray
    center_index: int
    hop: float = field(default=HOP)

    def offsets(self) -> np.ndarray:
        """Tap positions in seconds relative to the centre tap."""
        return (np.arange(self.taps.size) - self.center_index) * self.hop


def resample(clip: AudioClip, rate: int = ANALYSIS_RATE) -> AudioClip:
    if clip.sample_rate == rate:
        return clip
    g = np.gcd(int(clip.sample_rate), int(rate))
    y = scipy.signal.resample_poly(clip.samples, rate // g, int(clip.sample_rate) // g)
    return AudioClip(y, rate)


def validate_bands(bands: Sequence[tuple[float, float]], sample_rate: int) -> None:
    nyq = sample_rate / 2
    if not bands:
        raise BandOutOfRange("at least one band is required")
    for lo, hi in bands:
        if not (0 <= lo < hi <= nyq):
            raise BandOutOfRange(f"band ({lo}, {hi}) Hz invalid for Nyquist {nyq} Hz")


def power_spectrogram(clip: AudioClip, frame_len: float = FRAME_LEN, hop: float = HOP):
    """Hann-windowed power spectra, one row per frame.

    Frame ``i`` covers samples ``[i * hop_len, i * hop_len + win_len)`` and
    lies wholly inside the clip (no padding); its centre is at
    ``offset + i * hop`` with ``offset`` half a window. Power is scaled so a
    full-scale sine totals 0.5, i.e. the mean power of the signal.

    Returns ``(power, freqs, hop_seconds, offset_seconds)``.
    """
    if frame_len < hop:
        raise ValueError("frame_len must be at least hop")
    sr = clip.sample_rate
    win_len = int(round(frame_len * sr))
    hop_len = int(round(hop * sr))
    if hop_len < 1 or win_len < 2:
        raise ClipTooShort("frame parameters shorter than one sample")
    if clip.samples.size < win_len:
        raise ClipTooShort(
            f"clip has {clip.samples.size} samples, one frame needs {win_len}"
        )
    n_fft = int(2 ** np.ceil(np.log2(win_len)))
    window = scipy.signal.get_window("hann", win_len, fftbins=True)
    x = clip.samples
    n_frames = 1 + (x.size - win_len) // hop_len
    frames = np.lib.stride_tricks.sliding_window_view(x, win_len)[::hop_len][:n_frames]
    spec = np.fft.rfft(frames * window, n=n_fft, axis=1)
    power = (spec.real**2 + spec.imag**2) * (2.0 / (n_fft * np.sum(window**2)))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    return power, freqs, hop_len / sr, (win_len / 2) / sr


def _band_mask(freqs: np.ndarray, lo: float, hi: float, nyq: float) -> np.ndarray:
    if hi >= nyq:
        return (freqs >= lo) & (freqs <= hi)
    return (freqs >= lo) & (freqs < hi)


def band_energies(
    clip: AudioClip,
    bands: Sequence[tuple[float, float]] = DEFAULT_BANDS,
    frame_len: float = FRAME_LEN,
    hop: float = HOP,
    eps: float = EPS,
) -> FrameSeries:
    """Log band energies ``log(eps + sum |X(f)|^2)`` per frame and band.

    A bin at frequency ``f`` belongs to band ``(lo, hi)`` when
    ``lo <= f < hi``; a band reaching Nyquist includes the Nyquist bin.
    """
    validate_bands(bands, clip.sample_rate)
    power, freqs, hop_s, offset = power_spectrogram(clip, frame_len, hop)
    nyq = clip.sample_rate / 2
    out = np.empty((power.shape[0], len(bands)))
    for j, (lo, hi) in enumerate(bands):
        out[:, j] = np.log(eps + power[:, _band_mask(freqs, lo, hi, nyq)].sum(axis=1))
    return FrameSeries(out, hop_s, offset)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, freqs: np.ndarray, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters evenly spaced on the mel scale, shape (n_mels, n_bins)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def mfcc(
    clip: AudioClip,
    n_mels: int = N_MELS,
    n_coeffs: int = N_COEFFS,
    frame_len: float = FRAME_LEN,
    hop: float = HOP,
    fmax: float = MEL_FMAX,
    eps: float = EPS,
) -> FrameSeries:
    """MFCCs 1..n_coeffs (coefficient 0, the loudness term, is dropped).

    Uses an orthonormal DCT-II, so a constant offset of the mel
    log-energies (a gain change) only moves the dropped coefficient. Mel
    energies are floored at ``eps`` rather than offset by it, which keeps
    that offset exact while every filter stays above the floor.
    """
    if not 1 <= n_coeffs < n_mels:
        raise ValueError("need 1 <= n_coeffs < n_mels (coefficient 0 is excluded)")
    power, freqs, hop_s, offset = power_spectrogram(clip, frame_len, hop)
    fmax = min(fmax, clip.sample_rate / 2)
    fb = mel_filterbank(n_mels, freqs, 0.0, fmax)
    logmel = np.log(np.maximum(power @ fb.T, eps))
    coeffs = scipy.fft.dct(logmel, type=2, norm="ortho", axis=1)
    return FrameSeries(coeffs[:, 1 : n_coeffs + 1], hop_s, offset)


def make_biphasic_kernel(
    rise_sigma: float = RISE_SIGMA,
    fall_sigma: float = FALL_SIGMA,
    separation: float = SEPARATION,
    hop: float = HOP,
) -> BiphasicKernel:
    """Zero-sum smoothed differentiator sampled at the frame rate.

    A positive Gaussian lobe (width ``rise_sigma``) sits ``separation/2``
    after the centre and a negative one (width ``fall_sigma``) the same
    distance before it, so correlating with a rising edge peaks at the
    edge. Taps span ``separation/2 + 4 * max(sigma)`` each side.
    """
    if min(rise_sigma, fall_sigma, separation, hop) <= 0:
        raise DegenerateKernel("kernel parameters must all be positive")
    half_span = separation / 2 + 4 * max(rise_sigma, fall_sigma)
    n_half = int(np.floor(half_span / hop + 1e-9))
    if 2 * n_half + 1 < 3:
        raise DegenerateKernel(f"fewer than 3 taps at hop {hop} s")
    tau = np.arange(-n_half, n_half + 1) * hop
    pos = np.exp(-0.5 * ((tau - separation / 2) / rise_sigma) ** 2)
    neg = np.exp(-0.5 * ((tau + separation / 2) / fall_sigma) ** 2)
    if pos.sum() <= 0 or neg.sum() <= 0:
        raise DegenerateKernel("a kernel lobe vanishes at this hop")
    taps = pos / pos.sum() - neg / neg.sum()
    # Unequal widths can leave a far tail of the wider lobe on the wrong
    # side; drop those so the kernel keeps a single sign change.
    centre = n_half
    neg_side = taps[:centre] > 0
    pos_side = taps[centre + 1 :] < 0
    taps[:centre][neg_side] = 0.0
    taps[centre + 1 :][pos_side] = 0.0
    p, q = taps[taps > 0].sum(), -taps[taps < 0].sum()
    if p <= 0 or q <= 0:
        raise DegenerateKernel("kernel has an empty lobe at this hop")
    taps = np.where(taps > 0, taps / p, taps / q)
    return BiphasicKernel(taps, centre, hop)


def apply_kernel(x: np.ndarray, kernel: BiphasicKernel) -> np.ndarray:
    """Centred correlation along axis 0, with edge replication.

    ``out[n] = sum_m taps[m] * x[n + m - center]``; constant input maps to
    (numerically) zero everywhere, edges included.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    c = kernel.center_index
    right = kernel.taps.size - 1 - c
    padded = np.pad(x, ((c, right), (0, 0)), mode="edge")
    out = np.empty_like(x)
    flipped = kernel.taps[::-1]
    for j in range(x.shape[1]):
        out[:, j] = np.convolve(padded[:, j], flipped, mode="valid")
    return out[:, 0] if squeeze else out


def novelty_subband(
    energies: FrameSeries,
    kernel: BiphasicKernel,
    weights: Sequence[float] | None = None,
) -> NoveltyCurve:
    """Half-wave rectified kernel response per band, weighted and summed."""
    if energies.n_frames == 0:
        raise ValueError("energies must be non-empty")
    n_ch = energies.values.shape[1]
    if weights is None:
        weights = DEFAULT_BAND_WEIGHTS if n_ch == len(DEFAULT_BAND_WEIGHTS) else (1.0,) * n_ch
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_ch,):
        raise ValueError(f"{w.size} weights for {n_ch} channels")
    resp = apply_kernel(energies.values, kernel)
    nov = np.maximum(resp, 0.0) @ w
    return NoveltyCurve(nov, energies.hop, energies.start_offset)


def novelty_mfcc(coeffs: FrameSeries, kernel: BiphasicKernel) -> NoveltyCurve:
    """Euclidean norm across coefficients of the kernel response."""
    if coeffs.n_frames == 0:
        raise ValueError("coefficients must be non-empty")
    resp = apply_kernel(coeffs.values, kernel)
    return NoveltyCurve(np.sqrt(np.sum(resp**2, axis=1)), coeffs.hop, coeffs.start_offset)
