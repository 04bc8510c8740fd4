"""Online selection from a stream of per-frame bit predictions.

Each pushed bit extends a rolling window of the most recent 31 predictions.
From frame 16 onward the window is compared against every stimulus code,
aligned by absolute frame index, giving one agreement fraction per stimulus.
A stimulus is selected once its agreement reaches the selection threshold
while every other stimulus stays below the rejection ceiling; the dedicated
"finished" stimulus must additionally meet that condition on ten pushes.
If no selection happens by frame 217 the highest-agreement stimulus wins,
ties going to the lowest id.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .classifier import predict, windows_from_segment
from .errors import AlreadyDecided, EmptyInput

DEFAULT_FINISHED_STIMULUS = 9
ACQUISITION_TAIL_MS = 200


@dataclass(frozen=True)
class DecoderConfig:
    select_threshold: float = 0.8
    reject_ceiling: float = 0.6
    min_frames: int = 16
    window_frames: int = 31
    max_frames: int = 217
    finished_stimulus: int = DEFAULT_FINISHED_STIMULUS
    finished_required_frames: int = 10
    finished_consecutive: bool = False

    def __post_init__(self):
        if not 0 < self.reject_ceiling < self.select_threshold <= 1:
            raise ValueError("need 0 < reject_ceiling < select_threshold <= 1")
        if not self.min_frames <= self.window_frames <= self.max_frames:
            raise ValueError("need min_frames <= window_frames <= max_frames")


@dataclass(frozen=True)
class DecisionOutcome:
    kind: str  # Selected | Timeout
    stimulus: int
    frames_to_decision: int

    @property
    def selection_time_ms(self):
        # Wall time includes the 200 ms acquisition tail of the last window.
        return self.frames_to_decision * 50 + ACQUISITION_TAIL_MS


@dataclass
class DecoderState:
    num_stimuli: int
    predicted_bits: list = field(default_factory=list)
    frames_seen: int = 0
    accuracies: np.ndarray = None
    finished_hits: int = 0
    decided: DecisionOutcome = None
    codes: np.ndarray = None  # (num_stimuli, period) cache, filled on first push


@dataclass(frozen=True)
class TrialLogRecord:
    """One line of the trial log, emitted after every push."""

    frame_index: int
    bit: int
    accuracies: tuple
    decided: bool

    def to_json(self):
        return json.dumps(
            {
                "frame_index": self.frame_index,
                "bit": self.bit,
                "accuracies": [round(a, 6) for a in self.accuracies],
                "decided": self.decided,
            }
        )


def parse_trial_log_line(line):
    rec = json.loads(line)
    return TrialLogRecord(
        frame_index=rec["frame_index"],
        bit=rec["bit"],
        accuracies=tuple(rec["accuracies"]),
        decided=rec["decided"],
    )


def _agreements(state, codebook, cfg):
    """Agreement fraction per stimulus over the most recent window.

    The window holds predictions for absolute frames
    [frames_seen - w, frames_seen); each is compared to the stimulus code bit
    at the same absolute index.
    """
    if state.codes is None:
        state.codes = np.array(
            [codebook.code(s) for s in range(state.num_stimuli)], dtype=int
        )
    w = min(state.frames_seen, cfg.window_frames)
    start = state.frames_seen - w
    idx = (start + np.arange(w)) % state.codes.shape[1]
    window_bits = np.asarray(state.predicted_bits[-w:], dtype=int)
    return (state.codes[:, idx] == window_bits).mean(axis=1)


def push_prediction(state, bit, codebook, cfg=None):
    """Append one predicted bit and apply the decision rule.

    Returns a DecisionOutcome once, then raises AlreadyDecided on further
    pushes.  Pure state transition: the same state and bit always produce the
    same successor, so trials replay exactly.
    """
    if cfg is None:
        cfg = DecoderConfig()
    if state.decided is not None:
        raise AlreadyDecided("decoder already produced an outcome")
    bit = int(bit)
    state.predicted_bits.append(bit)
    if len(state.predicted_bits) > cfg.window_frames:
        state.predicted_bits.pop(0)
    state.frames_seen += 1

    if state.frames_seen < cfg.min_frames:
        return None
    accs = _agreements(state, codebook, cfg)
    state.accuracies = accs

    qualifying = None
    for s in range(state.num_stimuli):
        if accs[s] >= cfg.select_threshold and all(
            accs[o] < cfg.reject_ceiling for o in range(state.num_stimuli) if o != s
        ):
            qualifying = s
            break
    if qualifying is not None:
        if qualifying != cfg.finished_stimulus:
            state.decided = DecisionOutcome("Selected", qualifying, state.frames_seen)
            return state.decided
        state.finished_hits += 1
        if state.finished_hits >= cfg.finished_required_frames:
            state.decided = DecisionOutcome("Selected", qualifying, state.frames_seen)
            return state.decided
    elif cfg.finished_consecutive:
        state.finished_hits = 0

    if state.frames_seen >= cfg.max_frames:
        # argmax returns the first maximum, which is the lowest stimulus id.
        winner = int(np.argmax(accs))
        state.decided = DecisionOutcome("Timeout", winner, state.frames_seen)
        return state.decided
    return None


def run_offline(segment, timeline, model, codebook, cfg=None, on_push=None):
    """Replay a stored segment through windowing, prediction, and decision.

    Equivalent to extract_window + predict + push_prediction frame by frame;
    prediction runs as one batch up front since the model is fixed.  The
    optional on_push callback receives a TrialLogRecord per frame.
    """
    if cfg is None:
        cfg = DecoderConfig()
    windows = windows_from_segment(segment, timeline, model.hyper["window"])
    probs = predict(model, windows)
    bits = (probs >= 0.5).astype(int)
    state = DecoderState(num_stimuli=codebook.num_stimuli)
    for i, bit in enumerate(bits):
        outcome = push_prediction(state, bit, codebook, cfg)
        if on_push is not None:
            accs = tuple(state.accuracies) if state.accuracies is not None else (
                (0.0,) * codebook.num_stimuli
            )
            on_push(TrialLogRecord(i, int(bit), accs, outcome is not None))
        if outcome is not None:
            return outcome
    # Stream shorter than max_frames and no decision: report a timeout over
    # what was seen.
    if state.accuracies is None:
        state.accuracies = _agreements(state, codebook, cfg)
    winner = int(np.argmax(state.accuracies))
    state.decided = DecisionOutcome("Timeout", winner, state.frames_seen)
    return state.decided


def selection_accuracy(trials):
    """Fraction of (true stimulus, outcome) pairs the decoder got right."""
    trials = list(trials)
    if not trials:
        raise EmptyInput("no trials")
    correct = sum(1 for true, outcome in trials if outcome.stimulus == true)
    return correct / len(trials)
