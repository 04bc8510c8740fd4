"""Flicker code generation.

Maximum-length sequences from a linear feedback shift register, the
time-shifted codebook that assigns one circularly shifted copy of the base
code to each on-screen stimulus, and the 20 Hz frame timeline that the
simulator and decoder share.
"""

from dataclasses import dataclass

from .errors import DegenerateSequence, ShiftCollision, ZeroSeed

DEFAULT_DEGREE = 5
DEFAULT_TAPS = (5, 2)
DEFAULT_NUM_STIMULI = 10
DEFAULT_SHIFT_STEP = 3
DEFAULT_AMPLITUDE = 0.5
FRAME_RATE_HZ = 20.0
FRAME_DURATION_MS = 50.0
MAX_REPETITIONS = 7


@dataclass(frozen=True)
class MSequence:
    """Full-period output of a binary LFSR with primitive feedback taps."""

    bits: tuple
    degree: int
    taps: tuple

    def __len__(self):
        return len(self.bits)


def generate_msequence(degree, taps, seed_state=None):
    """Run a Fibonacci LFSR for one full period and return its output.

    The register state is (s1, ..., sk); each step outputs s_k, computes the
    feedback bit as the XOR of the tapped positions (1-based), and shifts the
    feedback in at position 1.  ``seed_state`` is given as bits (s1, ..., sk)
    and defaults to (0, ..., 0, 1).

    Raises ZeroSeed for an all-zero seed and DegenerateSequence when the taps
    are not primitive, i.e. the state walk returns to the seed in fewer than
    2^degree - 1 steps.
    """
    if not 2 <= degree <= 16:
        raise ValueError(f"degree must be in [2, 16], got {degree}")
    taps = tuple(sorted(set(int(t) for t in taps)))
    if any(t < 1 or t > degree for t in taps):
        raise ValueError(f"taps must be 1-based positions <= {degree}")
    if seed_state is None:
        seed_state = (0,) * (degree - 1) + (1,)
    state = tuple(int(b) & 1 for b in seed_state)
    if len(state) != degree:
        raise ValueError(f"seed_state must have {degree} bits")
    if not any(state):
        raise ZeroSeed("seed state must be nonzero")

    period = 2**degree - 1
    out = []
    seen = state
    for step in range(period):
        out.append(state[-1])
        feedback = 0
        for t in taps:
            feedback ^= state[t - 1]
        state = (feedback,) + state[:-1]
        if state == seen and step + 1 < period:
            raise DegenerateSequence(
                f"taps {taps} give period {step + 1}, expected {period}"
            )
    if state != seen:
        # Full period never revisited the seed: taps are not even a
        # permutation cycle through the nonzero states.
        raise DegenerateSequence(f"taps {taps} do not return to the seed state")
    return MSequence(bits=tuple(out), degree=degree, taps=taps)


def circular_shift(bits, n):
    """Rotate so that output[i] == input[(i + n) mod len]."""
    bits = tuple(bits)
    length = len(bits)
    n %= length
    return bits[n:] + bits[:n]


def periodic_autocorrelation(bits, lag):
    """Unnormalized periodic autocorrelation after mapping 0/1 to -1/+1.

    For an m-sequence this is the code length at lag 0 and exactly -1 at
    every nonzero lag, which is what makes shifted copies usable as
    near-orthogonal codes.
    """
    bits = tuple(bits)
    length = len(bits)
    if not 0 <= lag < length:
        raise ValueError(f"lag must be in [0, {length}), got {lag}")
    total = 0
    for i in range(length):
        a = 2 * bits[i] - 1
        b = 2 * bits[(i + lag) % length] - 1
        total += a * b
    return total


@dataclass(frozen=True)
class StimulusCodebook:
    """One circularly shifted copy of the base code per stimulus."""

    base: MSequence
    shifts: tuple
    amplitude: float = DEFAULT_AMPLITUDE

    @property
    def num_stimuli(self):
        return len(self.shifts)

    def bit(self, stimulus, frame_index):
        """Code bit of ``stimulus`` at an absolute frame index."""
        length = len(self.base)
        return self.base.bits[(frame_index + self.shifts[stimulus]) % length]

    def code(self, stimulus):
        """Full-period bit tuple of one stimulus."""
        return circular_shift(self.base.bits, self.shifts[stimulus])


def build_codebook(
    base,
    num_stimuli=DEFAULT_NUM_STIMULI,
    shift_step=DEFAULT_SHIFT_STEP,
    amplitude=DEFAULT_AMPLITUDE,
):
    """Assign shift s*step (mod code length) to stimulus s.

    Raises ShiftCollision when two stimuli land on the same effective shift,
    e.g. when more stimuli are requested than the code period allows.
    """
    length = len(base)
    shifts = tuple((s * shift_step) % length for s in range(num_stimuli))
    if len(set(shifts)) != num_stimuli:
        raise ShiftCollision(
            f"{num_stimuli} stimuli with step {shift_step} collide over length {length}"
        )
    return StimulusCodebook(base=base, shifts=shifts, amplitude=amplitude)


@dataclass(frozen=True)
class FrameEvent:
    frame_index: int
    onset_ms: float
    states: tuple


@dataclass(frozen=True)
class FrameTimeline:
    """Frame-by-frame on/off states for every stimulus."""

    frame_duration_ms: float
    frame_rate_hz: float
    max_repetitions: int
    frames: tuple

    @property
    def span_ms(self):
        return len(self.frames) * self.frame_duration_ms


def build_timeline(codebook, frame_rate_hz=FRAME_RATE_HZ, max_repetitions=MAX_REPETITIONS):
    """Lay out max_repetitions full code periods as timed frame events.

    Defaults give 7 * 31 = 217 frames of 50 ms each, 10.85 s total.
    """
    if frame_rate_hz <= 0:
        raise ValueError("frame_rate_hz must be positive")
    frame_duration_ms = 1000.0 / frame_rate_hz
    length = len(codebook.base)
    n_frames = max_repetitions * length
    frames = []
    for i in range(n_frames):
        states = tuple(codebook.bit(s, i) for s in range(codebook.num_stimuli))
        frames.append(FrameEvent(frame_index=i, onset_ms=i * frame_duration_ms, states=states))
    return FrameTimeline(
        frame_duration_ms=frame_duration_ms,
        frame_rate_hz=frame_rate_hz,
        max_repetitions=max_repetitions,
        frames=tuple(frames),
    )


def default_codebook():
    """The stock 10-stimulus codebook over the degree-5 sequence."""
    return build_codebook(generate_msequence(DEFAULT_DEGREE, DEFAULT_TAPS))


def export_codebook(codebook):
    """Plain-text export: key-value header, then one '0'/'1' row per stimulus.

    The shift_step header field is recovered from shifts[1] when present so
    the export round-trips the builder arguments for the common case.
    """
    step = codebook.shifts[1] if len(codebook.shifts) > 1 else 0
    lines = [
        f"degree={codebook.base.degree}",
        f"taps={','.join(str(t) for t in codebook.base.taps)}",
        f"shift_step={step}",
    ]
    for s in range(codebook.num_stimuli):
        lines.append("".join(str(b) for b in codebook.code(s)))
    return "\n".join(lines) + "\n"
