"""Synthetic EEG for the closed loop.

Forward model: each frame in which the attended stimulus is ON contributes
one copy of a fixed evoked-response kernel starting at the frame onset, and
contributions add linearly.  Non-attended stimuli contribute nothing by
default (covert-attention idealization; a leakage gain is available).  Noise
is seeded white Gaussian or pink via the Voss-McCartney row summation.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadStimulusId, ParseError, ShapeMismatch

CHANNEL_NAMES = ("POz", "PO3", "PO4", "Oz", "O9", "O10")
SAMPLE_RATE_HZ = 1000
KERNEL_DURATION_MS = 250
# Occipital montage: response strongest at the midline, tapering laterally.
DEFAULT_CHANNEL_GAINS = (1.0, 0.8, 0.8, 0.9, 0.6, 0.6)

EEG_MAGIC = b"BAIEEG1"


@dataclass(frozen=True)
class VepKernel:
    """Per-channel impulse response to a single ON frame."""

    impulse_response: np.ndarray  # (channels, duration_samples)
    duration_ms: int
    channel_gains: tuple

    @property
    def duration_samples(self):
        return self.impulse_response.shape[1]


@dataclass(frozen=True)
class EegSegment:
    """Multi-channel sampled signal with a sample clock origin."""

    channels: tuple
    sample_rate_hz: int
    samples: np.ndarray  # (channels, N)
    t0_ms: float = 0.0

    @property
    def n_samples(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "white"  # white | pink
    sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("white", "pink"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def default_kernel(duration_ms=KERNEL_DURATION_MS, channel_gains=DEFAULT_CHANNEL_GAINS):
    """Damped 10 Hz sinusoid, exp(-t / 80 ms) envelope, one row per channel.

    At 250 ms the envelope has decayed below 1% of the peak, so consecutive
    frames overlap at most five kernels deep and the superposition stays
    bounded.
    """
    n = int(round(duration_ms * SAMPLE_RATE_HZ / 1000.0))
    t = np.arange(n) / SAMPLE_RATE_HZ
    wave = np.exp(-t / 0.080) * np.sin(2.0 * math.pi * 10.0 * t)
    gains = np.asarray(channel_gains, dtype=float)
    return VepKernel(
        impulse_response=gains[:, None] * wave[None, :],
        duration_ms=int(duration_ms),
        channel_gains=tuple(channel_gains),
    )


def _pink_rows(rng, n_channels, n_samples, rows=16):
    """Voss-McCartney style 1/f noise, unit variance per sample."""
    out = np.zeros((n_channels, n_samples))
    for k in range(rows):
        step = 2**k
        n_vals = -(-n_samples // step)  # ceil
        vals = rng.normal(size=(n_channels, n_vals))
        out += np.repeat(vals, step, axis=1)[:, :n_samples]
    return out / math.sqrt(rows)


def synthesize(timeline, attended, kernel, noise=None, codebook=None, leakage_gain=0.0):
    """Render the EEG a user attending ``attended`` would produce.

    The segment covers the timeline span plus one kernel duration so the last
    frame's response and its classification window fit entirely inside it.
    Deterministic given the noise seed; sigma 0 skips the generator so the
    noiseless output is exactly the clean superposition.
    """
    num_stimuli = len(timeline.frames[0].states)
    if not 0 <= attended < num_stimuli:
        raise BadStimulusId(f"attended={attended} outside 0..{num_stimuli - 1}")
    span_ms = timeline.span_ms
    n = math.ceil((span_ms + kernel.duration_ms) * SAMPLE_RATE_HZ / 1000.0)
    data = np.zeros((len(CHANNEL_NAMES), n))
    klen = kernel.duration_samples
    for frame in timeline.frames:
        onset = int(round(frame.onset_ms * SAMPLE_RATE_HZ / 1000.0))
        if frame.states[attended]:
            data[:, onset : onset + klen] += kernel.impulse_response
        elif leakage_gain:
            # Leakage from non-attended flicker, summed over the other codes.
            on_others = sum(frame.states) - frame.states[attended]
            if on_others:
                data[:, onset : onset + klen] += (
                    leakage_gain * on_others * kernel.impulse_response
                )
    if noise is not None and noise.sigma > 0:
        rng = np.random.default_rng(noise.rng_seed)
        if noise.kind == "white":
            data = data + rng.normal(0.0, noise.sigma, size=data.shape)
        else:
            data = data + noise.sigma * _pink_rows(rng, data.shape[0], n)
    return EegSegment(channels=CHANNEL_NAMES, sample_rate_hz=SAMPLE_RATE_HZ, samples=data)


def snr_estimate(segment, clean):
    """10*log10(clean power / residual power), in dB.

    Returns +inf for a noiseless segment (zero residual) and -inf when the
    clean reference itself carries no power.
    """
    if segment.samples.shape != clean.samples.shape:
        raise ShapeMismatch(
            f"{segment.samples.shape} vs {clean.samples.shape}"
        )
    clean_power = float(np.mean(clean.samples**2))
    noise_power = float(np.mean((segment.samples - clean.samples) ** 2))
    if noise_power == 0.0:
        return math.inf
    if clean_power == 0.0:
        return -math.inf
    return 10.0 * math.log10(clean_power / noise_power)


def save_segment(segment, path):
    """Binary container: magic, uint32 channels/rate/samples, float32 LE data."""
    header = EEG_MAGIC + struct.pack(
        "<III", len(segment.channels), segment.sample_rate_hz, segment.n_samples
    )
    body = segment.samples.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_segment(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(EEG_MAGIC):
        raise ParseError(f"{path}: bad magic")
    offset = len(EEG_MAGIC)
    n_channels, rate, n_samples = struct.unpack_from("<III", blob, offset)
    offset += 12
    expected = n_channels * n_samples * 4
    if len(blob) - offset != expected:
        raise ParseError(f"{path}: expected {expected} data bytes")
    data = np.frombuffer(blob, dtype="<f4", offset=offset).astype(float)
    data = data.reshape(n_channels, n_samples)
    names = CHANNEL_NAMES if n_channels == len(CHANNEL_NAMES) else tuple(
        f"ch{i}" for i in range(n_channels)
    )
    return EegSegment(channels=names, sample_rate_hz=int(rate), samples=data)
