"""Closed-loop experiment harness.

Ties the modules together: a training session that fits the classifier on
simulated labeled trials, a scenario runner where a scripted conversation
partner asks questions and a simulated user attends the stimulus whose
option matches the script's target, and a plain accuracy evaluation over
known targets.  Everything is seeded through one master seed plus per-use
labels, so runs replay byte for byte.
"""

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import classifier, decoder, dialogue, eegsim, stimulus
from .errors import ConfigError, EmptyInput, EmptyQuestion

# Tile layout: six keyword slots, then the four special options.
TILE_CORRECTION = 6
TILE_MORE = 7
TILE_NONE = 8
TILE_FINISHED = 9
SPECIAL_TILES = {
    "Correction": TILE_CORRECTION,
    "More": TILE_MORE,
    "Previous": TILE_MORE,
    "None": TILE_NONE,
    "Finished": TILE_FINISHED,
}


@dataclass(frozen=True)
class EngineConfig:
    frame_rate_hz: float = stimulus.FRAME_RATE_HZ
    code_degree: int = stimulus.DEFAULT_DEGREE
    code_taps: tuple = stimulus.DEFAULT_TAPS
    num_stimuli: int = stimulus.DEFAULT_NUM_STIMULI
    shift_step: int = stimulus.DEFAULT_SHIFT_STEP
    amplitude: float = stimulus.DEFAULT_AMPLITUDE
    max_repetitions: int = stimulus.MAX_REPETITIONS
    select_threshold: float = 0.8
    reject_ceiling: float = 0.6
    min_frames: int = 16
    window_frames: int = 31
    finished_required_frames: int = 10
    finished_consecutive: bool = False
    window_samples: int = classifier.WINDOW_SAMPLES
    budget: int = dialogue.DEFAULT_BUDGET
    knowledge_base_path: str = ""
    provider_mode: str = "mock"  # mock | remote
    provider_url: str = ""
    noise_kind: str = "white"
    noise_sigma: float = 0.3
    training_trials: int = 7
    master_seed: int = 0

    def __post_init__(self):
        if self.provider_mode not in ("mock", "remote"):
            raise ConfigError(f"provider_mode must be mock or remote, got {self.provider_mode!r}")


def parse_config(text):
    """Key-value config document; unknown keys are rejected."""
    by_name = {f.name: f for f in fields(EngineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: missing '='")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in by_name:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw, by_name[key].type)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: {exc}") from exc
    return EngineConfig(**values)


def _coerce(key, raw, annotation):
    if annotation in (bool, "bool"):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key} must be a boolean, got {raw!r}")
    if annotation in (int, "int"):
        return int(raw)
    if annotation in (float, "float"):
        return float(raw)
    if annotation in (tuple, "tuple"):
        return tuple(int(part) for part in raw.split(",") if part.strip())
    return raw


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def derive_seed(master_seed, label):
    """Stable per-component seed: low 8 bytes of sha256("master:label")."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class EngineBundle:
    """The shared stimulus-side objects every run needs."""

    config: EngineConfig
    codebook: stimulus.StimulusCodebook
    timeline: stimulus.FrameTimeline
    kernel: eegsim.VepKernel
    decoder_config: decoder.DecoderConfig


def build_engine(config=None):
    if config is None:
        config = EngineConfig()
    base = stimulus.generate_msequence(config.code_degree, config.code_taps)
    codebook = stimulus.build_codebook(
        base, config.num_stimuli, config.shift_step, config.amplitude
    )
    timeline = stimulus.build_timeline(codebook, config.frame_rate_hz, config.max_repetitions)
    dec_cfg = decoder.DecoderConfig(
        select_threshold=config.select_threshold,
        reject_ceiling=config.reject_ceiling,
        min_frames=config.min_frames,
        window_frames=config.window_frames,
        max_frames=len(timeline.frames),
        finished_stimulus=config.num_stimuli - 1,
        finished_required_frames=config.finished_required_frames,
        finished_consecutive=config.finished_consecutive,
    )
    return EngineBundle(
        config=config,
        codebook=codebook,
        timeline=timeline,
        kernel=eegsim.default_kernel(),
        decoder_config=dec_cfg,
    )


def make_provider(config):
    if config.provider_mode == "remote":
        return dialogue.RemoteProvider(config.provider_url)
    return dialogue.MockProvider()


def load_knowledge_base(config):
    if config.knowledge_base_path:
        with open(config.knowledge_base_path, encoding="utf-8") as fh:
            return dialogue.parse_knowledge_base(fh.read())
    return dialogue.DEFAULT_KNOWLEDGE_BASE


def simulate_trial(bundle, attended, sigma, seed, noise_kind=None):
    """One stimulation's worth of synthetic EEG."""
    kind = noise_kind or bundle.config.noise_kind
    noise = eegsim.NoiseModel(kind=kind, sigma=sigma, rng_seed=seed)
    return eegsim.synthesize(bundle.timeline, attended, bundle.kernel, noise)


def trial_labels(bundle, attended):
    """Ground-truth frame labels: the attended stimulus's code bits."""
    return np.array(
        [frame.states[attended] for frame in bundle.timeline.frames], dtype=float
    )


def run_training_session(config=None, hyper=None, sigma=None):
    """Simulate the labeled training block and fit the classifier.

    The user attends a known stimulus per trial (their click supplies the
    label), for training_trials trials plus one held-out trial.  Trial noise
    cycles through {0, sigma/2, sigma} so the model sees the clean regime
    too, then the report's held-out accuracy is measured at full sigma.
    """
    bundle = build_engine(config)
    config = bundle.config
    if sigma is None:
        sigma = config.noise_sigma
    if hyper is None:
        hyper = dict(classifier.DEFAULT_CNN_HYPER)
        hyper["seed"] = derive_seed(config.master_seed, "classifier-init")
    sigma_cycle = (0.0, sigma / 2.0, sigma)

    all_windows = []
    all_labels = []
    sources = []
    for trial in range(config.training_trials):
        attended = trial % config.num_stimuli
        segment = simulate_trial(
            bundle, attended, sigma_cycle[trial % len(sigma_cycle)],
            derive_seed(config.master_seed, f"train-trial:{trial}"),
        )
        all_windows.append(classifier.windows_from_segment(segment, bundle.timeline, config.window_samples))
        all_labels.append(trial_labels(bundle, attended))
        sources.append(f"train:{trial}")
    data = classifier.TrainingSet(
        windows=np.concatenate(all_windows),
        labels=np.concatenate(all_labels),
        sources=tuple(sources),
    )
    model = classifier.train(data, hyper)

    held_attended = config.training_trials % config.num_stimuli
    held_segment = simulate_trial(
        bundle, held_attended, sigma, derive_seed(config.master_seed, "held-out-trial")
    )
    held_windows = classifier.windows_from_segment(held_segment, bundle.timeline, config.window_samples)
    held_labels = trial_labels(bundle, held_attended)
    held_probs = classifier.predict(model, held_windows)
    held_acc = float(np.mean((held_probs >= 0.5) == held_labels))

    report = {
        "training_frames": int(len(data.labels)),
        "training_trials": config.training_trials,
        "held_out_frame_accuracy": held_acc,
        "final_loss": model.history[-1] if model.history else None,
        "epochs_run": len(model.history),
    }
    return model, report


# ---------------------------------------------------------------------------
# scenario running

@dataclass(frozen=True)
class ScenarioScript:
    """Scripted partner plus the simulated user's intent per question.

    interactions pairs each partner question with the keyword text the user
    wants to convey, or one of Correction/More/None/Finished.  The first
    question doubles as the scenario's opening line.
    """

    goal: str
    interactions: tuple  # ((question, target), ...)
    tag: str = "EVAL"

    @property
    def opening_line(self):
        return self.interactions[0][0]

    def __post_init__(self):
        if not self.interactions or not self.interactions[0][0].strip():
            raise ValueError("scenario needs a nonempty opening line")


PIZZERIA_SCRIPT = ScenarioScript(
    goal="Make a reservation for 5 people at the pizzeria for Monday at 1pm under the name 'Anna'.",
    interactions=(
        ("Pizzeria Romano, how can I help you?", "Reservations"),
        ("What day would you like to make the reservation for?", "Monday"),
        ("At what time would you like to come by?", "1pm"),
        ("How many people is the reservation for?", "5"),
        ("What is your name?", "Anna"),
        ("Is there anything else I can help you with?", "Finished"),
    ),
)

TRAINING_SCRIPT = ScenarioScript(
    goal="Training block. Follow the experimenter's instructions.",
    interactions=(
        ("How are you doing today?", "Good"),
        ("What day is it today?", "Monday"),
        ("How many people are in the room?", "2"),
        ("Now please choose correction.", "Correction"),
        ("Now please choose none.", "None"),
        ("What time should we meet?", "9am"),
        ("Please end the session by selecting finished.", "Finished"),
    ),
    tag="TRAIN",
)


def _find_option(pages, target):
    """(page, index) of the option matching the target text, or None.

    Exact match wins over case-insensitive containment in either direction;
    page 0 is searched before page 1.
    """
    for page in (0, 1):
        for idx, option in enumerate(pages[page]):
            if option == target:
                return page, idx
    low = target.lower()
    for page in (0, 1):
        for idx, option in enumerate(pages[page]):
            opt = option.lower()
            if low in opt or opt in low:
                return page, idx
    return None


def choose_tile(state, target):
    """The simulated user's click: which tile they attend for this target."""
    if target in SPECIAL_TILES:
        return SPECIAL_TILES[target]
    found = _find_option(state.keyword_pages, target)
    if found is None:
        return TILE_NONE
    page, idx = found
    if page != state.current_page:
        return TILE_MORE
    return idx


def tile_to_selection(tile):
    if tile == TILE_CORRECTION:
        return dialogue.CORRECTION
    if tile == TILE_MORE:
        return dialogue.MORE_OR_PREVIOUS
    if tile == TILE_NONE:
        return dialogue.NONE_OPTION
    if tile == TILE_FINISHED:
        return dialogue.FINISHED
    return dialogue.Selection.keyword(tile)


@dataclass
class ScenarioResult:
    transcript: str
    outcomes: list
    trial_records: list
    intended_tiles: list
    decided_tiles: list


def run_scenario(config, script, model=None):
    """Close the loop for one scripted scenario.

    Per question: ingest, let the simulated user pick a tile, synthesize the
    EEG for that attention target, decode it, and apply whatever the decoder
    says (not what the user meant) to the conversation.  A model of None
    runs the ground-truth-bit oracle instead of EEG classification.
    """
    bundle = build_engine(config)
    config = bundle.config
    session = dialogue.DialogueSession(
        provider=make_provider(config),
        knowledge_base=load_knowledge_base(config),
        budget=config.budget,
    )
    writer = dialogue.TranscriptWriter()
    writer.scenario_header(script.tag, script.goal)
    result = ScenarioResult(
        transcript="", outcomes=[], trial_records=[], intended_tiles=[], decided_tiles=[]
    )
    trial_counter = 0

    ended = False
    for question, target in script.interactions:
        if ended:
            break
        try:
            session.ingest_question(question)
        except EmptyQuestion:
            writer.question(question)
            writer.answer(dialogue.REPEAT_REQUEST)
            continue
        writer.question(question)
        # One question can take several stimulations (page flips).
        for _ in range(4):
            tile = choose_tile(session.state, target)
            page_index = session.state.current_page
            page = session.state.keyword_pages[page_index]
            outcome = _decode_attended(bundle, model, tile, trial_counter, result)
            trial_counter += 1
            selection = tile_to_selection(outcome.stimulus)
            writer.options(page, page_index, selection)
            action = session.apply_selection(selection)
            result.intended_tiles.append(tile)
            result.decided_tiles.append(outcome.stimulus)
            if action.kind == "RepageOnly" and session.state.status == dialogue.AWAITING_SELECTION:
                continue
            if action.text is not None:
                writer.answer(action.text)
            if action.kind == "EndScenario":
                ended = True
            break
        else:
            # Paging never settled (possible under heavy misdecoding); give
            # up on this question so the conversation can move on.
            page_index = session.state.current_page
            writer.options(session.state.keyword_pages[page_index], page_index, dialogue.NONE_OPTION)
            action = session.apply_selection(dialogue.NONE_OPTION)
            if action.text is not None:
                writer.answer(action.text)
            if action.kind == "EndScenario":
                ended = True
    writer.separator()
    result.transcript = writer.text()
    return result


def _decode_attended(bundle, model, tile, trial_counter, result):
    config = bundle.config
    seed = derive_seed(config.master_seed, f"scenario-trial:{trial_counter}")
    on_push = result.trial_records.append
    if model is None:
        # Oracle mode: push the attended stimulus's true bits.
        state = decoder.DecoderState(num_stimuli=config.num_stimuli)
        outcome = None
        for frame in bundle.timeline.frames:
            bit = frame.states[tile]
            outcome = decoder.push_prediction(state, bit, bundle.codebook, bundle.decoder_config)
            on_push(
                decoder.TrialLogRecord(
                    frame.frame_index,
                    int(bit),
                    tuple(state.accuracies) if state.accuracies is not None else (0.0,) * config.num_stimuli,
                    outcome is not None,
                )
            )
            if outcome is not None:
                break
        result.outcomes.append(outcome)
        return outcome
    segment = simulate_trial(bundle, tile, config.noise_sigma, seed)
    outcome = decoder.run_offline(
        segment, bundle.timeline, model, bundle.codebook, bundle.decoder_config, on_push=on_push
    )
    result.outcomes.append(outcome)
    return outcome


def run_accuracy_evaluation(config, model=None, n_questions=20):
    """Known-target trials; reports accuracy against the 1/stimuli chance."""
    if n_questions <= 0:
        raise EmptyInput("need at least one evaluation question")
    bundle = build_engine(config)
    config = bundle.config
    trials = []
    for i in range(n_questions):
        intended = i % config.num_stimuli
        if model is None:
            state = decoder.DecoderState(num_stimuli=config.num_stimuli)
            outcome = None
            for frame in bundle.timeline.frames:
                outcome = decoder.push_prediction(
                    state, frame.states[intended], bundle.codebook, bundle.decoder_config
                )
                if outcome is not None:
                    break
        else:
            segment = simulate_trial(
                bundle, intended, config.noise_sigma,
                derive_seed(config.master_seed, f"eval-trial:{i}"),
            )
            outcome = decoder.run_offline(
                segment, bundle.timeline, model, bundle.codebook, bundle.decoder_config
            )
        trials.append((intended, outcome))
    return {
        "trials": trials,
        "accuracy": decoder.selection_accuracy(trials),
        "chance_level": 1.0 / config.num_stimuli,
    }
