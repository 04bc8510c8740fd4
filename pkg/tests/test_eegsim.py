"""Forward model: evoked-response kernel, superposition, noise, container I/O."""

from __future__ import annotations

import math

import numpy as np
import pytest

from baisim import eegsim, stimulus
from baisim.errors import BadStimulusId, ParseError, ShapeMismatch


@pytest.fixture(scope="module")
def timeline():
    return stimulus.build_timeline(stimulus.default_codebook())


def test_kernel_shape_and_gains():
    k = eegsim.default_kernel()
    assert k.impulse_response.shape == (6, 250)
    assert k.duration_samples == 250
    assert k.channel_gains == (1.0, 0.8, 0.8, 0.9, 0.6, 0.6)
    # Rows are scaled copies of the same waveform.
    ref = k.impulse_response[0]
    for row, g in zip(k.impulse_response, k.channel_gains):
        np.testing.assert_allclose(row, g * ref, atol=1e-15)


def test_kernel_waveform_properties():
    k = eegsim.default_kernel()
    wave = k.impulse_response[0]
    assert wave[0] == 0.0  # sin(0)
    peak_idx = int(np.argmax(np.abs(wave)))
    assert peak_idx < 50  # peak within first 50 ms
    peak = abs(wave[peak_idx])
    assert abs(wave[-1]) < 0.01 * peak
    # Closed-form check at an arbitrary sample: t = 23 ms.
    t = 0.023
    assert wave[23] == pytest.approx(math.exp(-t / 0.080) * math.sin(2 * math.pi * 10 * t))


def test_segment_length(timeline):
    seg = eegsim.synthesize(timeline, 0, eegsim.default_kernel())
    # ceil((10850 + 250) ms * 1 kHz) samples
    assert seg.n_samples == 11100
    assert seg.samples.shape == (6, 11100)
    assert seg.channels == eegsim.CHANNEL_NAMES
    assert seg.sample_rate_hz == 1000


def test_single_on_frame_equals_kernel():
    # One-frame timeline with the attended stimulus ON: output is exactly
    # the kernel at t=0 and zero afterwards.
    frame = stimulus.FrameEvent(frame_index=0, onset_ms=0.0, states=(1, 0))
    tl = stimulus.FrameTimeline(
        frame_duration_ms=50.0, frame_rate_hz=20.0, max_repetitions=1, frames=(frame,)
    )
    k = eegsim.default_kernel()
    seg = eegsim.synthesize(tl, 0, k)
    np.testing.assert_array_equal(seg.samples[:, :250], k.impulse_response)
    np.testing.assert_array_equal(seg.samples[:, 250:], 0.0)


def test_all_off_is_silent():
    frames = tuple(
        stimulus.FrameEvent(frame_index=i, onset_ms=50.0 * i, states=(0, 0))
        for i in range(4)
    )
    tl = stimulus.FrameTimeline(
        frame_duration_ms=50.0, frame_rate_hz=20.0, max_repetitions=1, frames=frames
    )
    seg = eegsim.synthesize(tl, 1, eegsim.default_kernel())
    np.testing.assert_array_equal(seg.samples, 0.0)


def test_superposition_is_linear(timeline):
    # Clean output for the full timeline equals the sum of per-frame kernels.
    k = eegsim.default_kernel()
    seg = eegsim.synthesize(timeline, 3, k)
    expected = np.zeros_like(seg.samples)
    for fr in timeline.frames:
        if fr.states[3]:
            onset = int(round(fr.onset_ms))
            expected[:, onset : onset + 250] += k.impulse_response
    np.testing.assert_allclose(seg.samples, expected, atol=1e-12)


def test_attended_shift_covariance(timeline):
    # Stimulus codes are circular shifts of each other, so within one code
    # period the clean response to stimulus 1 is the response to stimulus 0
    # advanced by shift_step frames.
    k = eegsim.default_kernel()
    a = eegsim.synthesize(timeline, 0, k).samples
    b = eegsim.synthesize(timeline, 1, k).samples
    shift = 3 * 50  # shift_step frames at 50 samples per frame
    # Compare only where every contributing frame exists on both sides:
    # skip the first kernel duration (tails of pre-window frames) and stop
    # before the shifted side would need frames past the end of the timeline.
    lo, hi = 250, (217 - 3) * 50
    np.testing.assert_allclose(b[:, lo:hi], a[:, lo + shift : hi + shift], atol=1e-12)


def test_bad_attended_rejected(timeline):
    with pytest.raises(BadStimulusId):
        eegsim.synthesize(timeline, 10, eegsim.default_kernel())
    with pytest.raises(BadStimulusId):
        eegsim.synthesize(timeline, -1, eegsim.default_kernel())


def test_noise_determinism(timeline):
    k = eegsim.default_kernel()
    n = eegsim.NoiseModel(kind="white", sigma=0.5, rng_seed=99)
    a = eegsim.synthesize(timeline, 2, k, noise=n)
    b = eegsim.synthesize(timeline, 2, k, noise=n)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = eegsim.synthesize(timeline, 2, k, noise=eegsim.NoiseModel("white", 0.5, 100))
    assert not np.array_equal(a.samples, c.samples)


def test_zero_sigma_skips_generator(timeline):
    k = eegsim.default_kernel()
    clean = eegsim.synthesize(timeline, 0, k)
    noisy0 = eegsim.synthesize(timeline, 0, k, noise=eegsim.NoiseModel("white", 0.0, 7))
    np.testing.assert_array_equal(clean.samples, noisy0.samples)


@pytest.mark.parametrize("kind", ["white", "pink"])
def test_noise_changes_signal_but_keeps_shape(timeline, kind):
    k = eegsim.default_kernel()
    seg = eegsim.synthesize(timeline, 0, k, noise=eegsim.NoiseModel(kind, 1.0, 5))
    assert seg.samples.shape == (6, 11100)
    clean = eegsim.synthesize(timeline, 0, k)
    assert not np.array_equal(seg.samples, clean.samples)


def test_pink_noise_spectrum_slopes_down():
    # Pink noise should concentrate power at low frequencies: the bottom
    # decade carries far more than the top decade for the same bandwidth.
    rng = np.random.default_rng(3)
    rows = eegsim._pink_rows(rng, 1, 2**15)
    spectrum = np.abs(np.fft.rfft(rows[0])) ** 2
    freqs = np.fft.rfftfreq(2**15, d=1e-3)
    low = spectrum[(freqs > 0.5) & (freqs < 5)].mean()
    high = spectrum[(freqs > 50) & (freqs < 500)].mean()
    assert low > 10 * high


def test_snr_known_value(timeline):
    k = eegsim.default_kernel()
    clean = eegsim.synthesize(timeline, 0, k)
    # Residual with exactly the clean power -> 0 dB.
    noisy = eegsim.EegSegment(
        channels=clean.channels,
        sample_rate_hz=clean.sample_rate_hz,
        samples=clean.samples + clean.samples[:, ::-1],
    )
    flipped_power = np.mean(clean.samples[:, ::-1] ** 2)
    clean_power = np.mean(clean.samples**2)
    assert flipped_power == pytest.approx(clean_power)
    assert eegsim.snr_estimate(noisy, clean) == pytest.approx(0.0, abs=1e-9)


def test_snr_doubling_noise_costs_six_db(timeline):
    k = eegsim.default_kernel()
    clean = eegsim.synthesize(timeline, 0, k)
    rng = np.random.default_rng(0)
    noise = rng.normal(size=clean.samples.shape)

    def with_noise(scale):
        return eegsim.EegSegment(
            channels=clean.channels,
            sample_rate_hz=clean.sample_rate_hz,
            samples=clean.samples + scale * noise,
        )

    d1 = eegsim.snr_estimate(with_noise(1.0), clean)
    d2 = eegsim.snr_estimate(with_noise(2.0), clean)
    assert d1 - d2 == pytest.approx(20 * math.log10(2.0), abs=1e-9)


def test_snr_sentinels(timeline):
    k = eegsim.default_kernel()
    clean = eegsim.synthesize(timeline, 0, k)
    assert eegsim.snr_estimate(clean, clean) == math.inf
    zero = eegsim.EegSegment(
        channels=clean.channels,
        sample_rate_hz=clean.sample_rate_hz,
        samples=np.zeros_like(clean.samples),
    )
    noisy_zero = eegsim.EegSegment(
        channels=clean.channels,
        sample_rate_hz=clean.sample_rate_hz,
        samples=np.ones_like(clean.samples),
    )
    assert eegsim.snr_estimate(noisy_zero, zero) == -math.inf


def test_snr_shape_mismatch(timeline):
    k = eegsim.default_kernel()
    clean = eegsim.synthesize(timeline, 0, k)
    short = eegsim.EegSegment(
        channels=clean.channels,
        sample_rate_hz=clean.sample_rate_hz,
        samples=clean.samples[:, :100],
    )
    with pytest.raises(ShapeMismatch):
        eegsim.snr_estimate(short, clean)


def test_leakage_gain_adds_background(timeline):
    k = eegsim.default_kernel()
    quiet = eegsim.synthesize(timeline, 0, k)
    leaky = eegsim.synthesize(timeline, 0, k, leakage_gain=0.1)
    assert not np.array_equal(quiet.samples, leaky.samples)
    # Default path is leak-free.
    np.testing.assert_array_equal(
        quiet.samples, eegsim.synthesize(timeline, 0, k, leakage_gain=0.0).samples
    )


def test_segment_roundtrip(tmp_path, timeline):
    k = eegsim.default_kernel()
    seg = eegsim.synthesize(
        timeline, 5, k, noise=eegsim.NoiseModel("pink", 0.3, 11)
    )
    path = tmp_path / "trial.eeg"
    eegsim.save_segment(seg, path)
    loaded = eegsim.load_segment(path)
    assert loaded.channels == seg.channels
    assert loaded.sample_rate_hz == 1000
    assert loaded.n_samples == seg.n_samples
    # float32 storage: round trip within single precision.
    np.testing.assert_allclose(loaded.samples, seg.samples, atol=1e-5)


def test_segment_container_layout(tmp_path):
    seg = eegsim.EegSegment(
        channels=("a", "b"),
        sample_rate_hz=1000,
        samples=np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
    )
    path = tmp_path / "tiny.eeg"
    eegsim.save_segment(seg, path)
    blob = path.read_bytes()
    assert blob[:7] == b"BAIEEG1"
    assert np.frombuffer(blob, dtype="<u4", offset=7, count=3).tolist() == [2, 1000, 3]
    data = np.frombuffer(blob, dtype="<f4", offset=19)
    assert data.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.eeg"
    path.write_bytes(b"NOTEEG" + b"\x00" * 40)
    with pytest.raises(ParseError):
        eegsim.load_segment(path)
    path.write_bytes(b"BAIEEG1" + np.array([2, 1000, 3], "<u4").tobytes() + b"\x00" * 5)
    with pytest.raises(ParseError):
        eegsim.load_segment(path)
