import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bandish_timing import dsp, synth
from bandish_timing.errors import BandOutOfRange, ClipTooShort, DegenerateKernel

SR = 16000


def sine(freq, dur=1.0, amp=1.0, sr=SR):
    t = np.arange(int(dur * sr)) / sr
    return dsp.AudioClip(amp * np.sin(2 * np.pi * freq * t), sr)


def dft_band_energy(x, sr, frame_len, hop, band):
    """Log band energy per frame by explicit DFT summation (no FFT)."""
    n = int(round(frame_len * sr))
    h = int(round(hop * sr))
    n_fft = int(2 ** np.ceil(np.log2(n)))
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    ks = np.arange(n_fft // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(ks, np.arange(n)) / n_fft)
    freqs = ks * sr / n_fft
    lo, hi = band
    sel = (freqs >= lo) & ((freqs < hi) | ((hi >= sr / 2) & (freqs <= hi)))
    out = []
    for start in range(0, x.size - n + 1, h):
        X = basis @ (x[start : start + n] * w)
        p = np.abs(X) ** 2 * 2.0 / (n_fft * np.sum(w**2))
        out.append(np.log(dsp.EPS + p[sel].sum()))
    return np.array(out)


def direct_correlation(x, taps, c):
    """``out[n] = sum_m taps[m] x[clip(n + m - c)]`` by explicit loops."""
    out = np.zeros(len(x))
    for n in range(len(x)):
        for m, tap in enumerate(taps):
            out[n] += tap * x[min(max(n + m - c, 0), len(x) - 1)]
    return out


# ---------------------------------------------------------------- features

def test_sine_band_separation_matches_dft_oracle():
    clip = sine(1000.0, dur=0.5)
    bands = ((640.0, 2800.0), (3000.0, 5000.0))
    e = dsp.band_energies(clip, bands)
    oracle = np.column_stack([dft_band_energy(clip.samples, SR, 0.03, 0.01, b) for b in bands])
    np.testing.assert_allclose(e.values, oracle, rtol=0, atol=1e-7)
    assert np.all(e.values[:, 0] - e.values[:, 1] >= 20.0)


def test_full_scale_sine_total_power_is_half():
    p, _, _, _ = dsp.power_spectrogram(sine(1000.0, dur=0.2))
    np.testing.assert_allclose(p.sum(axis=1), 0.5, rtol=1e-6)


def test_silence_gives_log_eps_exactly():
    e = dsp.band_energies(dsp.AudioClip(np.zeros(SR // 2), SR))
    assert np.all(e.values == np.log(dsp.EPS))


def test_doubling_amplitude_adds_log4():
    clip = dsp.AudioClip(np.random.default_rng(3).standard_normal(SR // 2) * 0.1, SR)
    a = dsp.band_energies(clip).values
    b = dsp.band_energies(clip.scaled(2.0)).values
    np.testing.assert_allclose(b - a, np.log(4.0), atol=1e-6)


def test_timebase():
    e = dsp.band_energies(sine(440.0, dur=0.25))
    assert e.hop == pytest.approx(0.01)
    assert e.start_offset == pytest.approx(0.015)
    np.testing.assert_allclose(np.diff(e.times()), 0.01)
    # 4000 samples, window 480, hop 160
    assert e.n_frames == 1 + (4000 - 480) // 160


def test_band_errors():
    clip = sine(440.0, dur=0.2)
    with pytest.raises(BandOutOfRange):
        dsp.band_energies(clip, ((0.0, 9000.0),))
    with pytest.raises(BandOutOfRange):
        dsp.band_energies(clip, ((500.0, 400.0),))
    with pytest.raises(ClipTooShort):
        dsp.band_energies(dsp.AudioClip(np.zeros(100), SR))


def test_band_reaching_nyquist_includes_nyquist_bin():
    p, freqs, _, _ = dsp.power_spectrogram(sine(440.0, dur=0.2))
    assert freqs[-1] == SR / 2
    assert dsp._band_mask(freqs, 2800.0, 8000.0, 8000.0)[-1]
    assert not dsp._band_mask(freqs, 0.0, 640.0, 8000.0)[np.searchsorted(freqs, 640.0)]


def test_resample_preserves_frequency():
    clip = sine(1000.0, dur=0.5, sr=44100)
    r = dsp.resample(clip, SR)
    assert r.sample_rate == SR
    spec = np.abs(np.fft.rfft(r.samples))
    assert np.fft.rfftfreq(r.samples.size, 1 / SR)[spec.argmax()] == pytest.approx(1000.0, abs=2.0)


def test_mfcc_shape_and_silence_constant():
    m = dsp.mfcc(dsp.AudioClip(np.zeros(SR // 2), SR))
    assert m.values.shape[1] == dsp.N_COEFFS
    assert np.all(m.values == m.values[0])


def test_mfcc_excludes_c0():
    with pytest.raises(ValueError):
        dsp.mfcc(sine(440.0), n_mels=13, n_coeffs=13)


def test_mel_filterbank_covers_range():
    freqs = np.linspace(0, 8000, 257)
    fb = dsp.mel_filterbank(40, freqs, 0.0, 8000.0)
    assert fb.shape == (40, 257)
    assert np.all(fb >= 0) and np.all(fb <= 1)
    assert np.all(fb.max(axis=1) > 0)
    np.testing.assert_allclose(dsp.mel_to_hz(dsp.hz_to_mel(1234.5)), 1234.5)


def test_mfcc_stationary_vs_vowel_change():
    rng = np.random.default_rng(0)
    noise = dsp.AudioClip(rng.standard_normal(2 * SR) * 0.1, SR)
    long_frames = dict(frame_len=0.1, hop=0.01)
    stationary = np.diff(dsp.mfcc(noise, **long_frames).values, axis=0).var()
    change = synth.render_vowel_change(1.0, 2.0, SR, seed=0)
    m = dsp.mfcc(change, **long_frames)
    t = m.times()
    near = (t > 0.9) & (t < 1.1)
    across = np.diff(m.values[near], axis=0).var()
    assert stationary * 10 < across


def min_mel_energy(clip):
    p, freqs, _, _ = dsp.power_spectrogram(clip)
    return (p @ dsp.mel_filterbank(dsp.N_MELS, freqs, 0.0, dsp.MEL_FMAX).T).min()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 0.5), st.floats(0.01, 100.0))
def test_mfcc_novelty_amplitude_invariant(seed, noise, gain):
    base = synth.render_vowel_change(0.6, 1.2, SR, seed=seed)
    x = base.samples + noise * np.random.default_rng(seed).standard_normal(base.samples.size)
    clip = dsp.AudioClip(x, SR)
    # the log floor must stay inactive at both gains
    assume(min_mel_energy(clip) * min(1.0, gain**2) > 10 * dsp.EPS)
    k = dsp.make_biphasic_kernel()
    a = dsp.novelty_mfcc(dsp.mfcc(clip), k).values
    b = dsp.novelty_mfcc(dsp.mfcc(clip.scaled(gain)), k).values
    assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_vowel_change_novelty_peak_within_50ms(seed):
    change = 0.8 + 0.1 * seed
    clip = synth.render_vowel_change(change, change + 1.0, SR, seed=seed)
    nov = dsp.novelty_mfcc(dsp.mfcc(clip), dsp.make_biphasic_kernel())
    assert abs(nov.times()[np.argmax(nov.values)] - change) <= 0.05


# ------------------------------------------------------------------ kernel

def test_default_kernel_shape():
    k = dsp.make_biphasic_kernel()
    assert k.taps.size == 21 and k.center_index == 10
    assert abs(k.taps.sum()) < 1e-9
    # positive lobe after centre, negative before
    assert k.taps[k.center_index + 2] > 0 > k.taps[k.center_index - 2]


@settings(max_examples=200, deadline=None)
@given(st.floats(0.005, 0.06), st.floats(0.005, 0.06), st.floats(0.01, 0.1), st.sampled_from([0.005, 0.01]))
def test_kernel_zero_sum_and_single_sign_change(rise, fall, sep, hop):
    k = dsp.make_biphasic_kernel(rise, fall, sep, hop)
    assert abs(k.taps.sum()) < 1e-9
    signs = np.sign(k.taps[k.taps != 0])
    assert np.count_nonzero(np.diff(signs)) == 1
    assert signs[0] < 0 < signs[-1]


@pytest.mark.parametrize("args", [(0, 0.02, 0.04, 0.01), (0.02, 0.02, -1, 0.01), (0.001, 0.001, 0.001, 0.1)])
def test_degenerate_kernel(args):
    with pytest.raises(DegenerateKernel):
        dsp.make_biphasic_kernel(*args)


def test_apply_kernel_matches_direct_loop():
    k = dsp.make_biphasic_kernel()
    x = np.random.default_rng(1).standard_normal(60)
    np.testing.assert_allclose(dsp.apply_kernel(x, k), direct_correlation(x, k.taps, k.center_index), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.integers(1, 200), st.integers(1, 5))
def test_constant_input_zero_novelty(c, n, ch):
    k = dsp.make_biphasic_kernel()
    series = dsp.FrameSeries(np.full((n, ch), c), 0.01)
    assert np.all(np.abs(dsp.apply_kernel(series.values, k)) < 1e-9)
    assert np.all(np.abs(dsp.novelty_subband(series, k, [1.0] * ch).values) < 1e-9)
    assert np.all(np.abs(dsp.novelty_mfcc(series, k).values) < 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 50, 3))
    k = dsp.make_biphasic_kernel()
    np.testing.assert_allclose(dsp.apply_kernel(a + b, k), dsp.apply_kernel(a, k) + dsp.apply_kernel(b, k), atol=1e-12)


def test_step_response_single_peak_and_mirror():
    k = dsp.make_biphasic_kernel()
    x = np.r_[np.zeros(40), np.ones(40)]
    y = dsp.apply_kernel(x, k)
    assert np.all(y >= -1e-12)
    peak = int(np.argmax(y))
    assert abs(peak - 40) <= 1
    assert np.all(np.diff(y[:peak + 1]) >= -1e-12) and np.all(np.diff(y[peak:]) <= 1e-12)
    assert abs(y[0]) < 1e-12 and abs(y[-1]) < 1e-12
    np.testing.assert_allclose(dsp.apply_kernel(1 - x, k), -y, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(12, 90), st.integers(0, 2), st.floats(0.1, 50.0), st.floats(-20, 20))
def test_step_peak_localization(k_step, channel, height, base):
    n = 100
    values = np.full((n, 3), base)
    values[k_step:, channel] += height
    nov = dsp.novelty_subband(dsp.FrameSeries(values, 0.01), dsp.make_biphasic_kernel())
    assert abs(int(np.argmax(nov.values)) - k_step) <= 1
    coeffs = dsp.FrameSeries(values, 0.01)
    assert abs(int(np.argmax(dsp.novelty_mfcc(coeffs, dsp.make_biphasic_kernel()).values)) - k_step) <= 1


def test_two_steps_oracle():
    k = dsp.make_biphasic_kernel()
    x = np.zeros(100)
    x[30:] += 1.0
    x[50:] += 1.0  # 200 ms later
    nov = dsp.novelty_subband(dsp.FrameSeries(x, 0.01), k, [1.0])
    oracle = np.maximum(direct_correlation(x, k.taps, k.center_index), 0)
    np.testing.assert_allclose(nov.values, oracle, atol=1e-12)
    v = nov.values
    maxima = [i for i in range(1, 99) if v[i] > v[i - 1] and v[i] >= v[i + 1]]
    assert len(maxima) == 2
    assert abs(maxima[0] - 30) <= 1 and abs(maxima[1] - 50) <= 1


def test_subband_weights_validated():
    with pytest.raises(ValueError):
        dsp.novelty_subband(dsp.FrameSeries(np.zeros((10, 3)), 0.01), dsp.make_biphasic_kernel(), [1.0])
