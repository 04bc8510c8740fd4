"""Fine-tuning corpus construction.

From plain-text conversations to prompt/completion records: keyword
extraction (RAKE plus a simplified YAKE in two presets), contraction
expansion, negation injection, history-depth sampling, the 110-character
answer filter, and the two dataset variants — "xl" draws one extractor
uniformly per sample, "cr" keeps the nonempty extraction with the fewest
keywords.
"""

import difflib
import json
import math
import re
import statistics
from dataclasses import dataclass

import numpy as np

from .dialogue import STOP_TOKEN, format_sentence_prompt, parse_sentence_prompt
from .errors import EmptyCorpus, ParseError

MAX_ANSWER_CHARS = 110
HISTORY_DEPTH_PROBS = (0.50, 0.35, 0.08, 0.07)

# Bundled English stoplist, version 1.  Frozen here because extraction
# scores (and therefore dataset contents) change whenever it changes.
STOPLIST_VERSION = 1
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not of off on once only or other our ours ourselves out over own same she
should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what
when where which while who whom why will with you your yours yourself
yourselves
""".split())


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: tuple  # ordered (question, answer) pairs


@dataclass(frozen=True)
class DatasetSample:
    sample_id: str
    prompt: str
    completion: str
    history_depth: int
    extractor_used: str


@dataclass(frozen=True)
class ExtractorConfig:
    kind: str  # rake | yake_sparse | yake_dense
    n: int = 1
    dedup_lim: float = 0.9


EXTRACTOR_PRESETS = {
    "rake": ExtractorConfig("rake"),
    "yake_sparse": ExtractorConfig("yake_sparse", n=1, dedup_lim=0.9),
    "yake_dense": ExtractorConfig("yake_dense", n=5, dedup_lim=0.0),
}
# Fixed precedence for deterministic tie-breaks in the cr variant.
EXTRACTOR_ORDER = ("rake", "yake_sparse", "yake_dense")


# ---------------------------------------------------------------------------
# tokenization shared by both extractors

def _sentences(text):
    return [s for s in re.split(r"(?<=[.!?])\s+", text) if s.strip()]


def _tokens(sentence):
    return re.findall(r"[A-Za-z0-9']+", sentence)


def _phrase_runs(tokens):
    """Maximal runs of consecutive non-stopword tokens."""
    runs = []
    current = []
    for tok in tokens:
        if tok.lower() in STOPWORDS:
            if current:
                runs.append(current)
                current = []
        else:
            current.append(tok)
    if current:
        runs.append(current)
    return runs


# ---------------------------------------------------------------------------
# RAKE

def rake_keywords(text):
    """Stopword-delimited phrases scored by summed word degree/frequency."""
    phrases = []
    for sentence in _sentences(text):
        for run in _phrase_runs(_tokens(sentence)):
            phrases.append([t.lower() for t in run])
    if not phrases:
        return []
    freq = {}
    degree = {}
    for phrase in phrases:
        for word in phrase:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(phrase) - 1
    for word in freq:
        degree[word] += freq[word]
    scored = []
    seen = set()
    for order, phrase in enumerate(phrases):
        key = " ".join(phrase)
        if key in seen:
            continue
        seen.add(key)
        score = sum(degree[w] / freq[w] for w in phrase)
        scored.append((-score, order, key))
    scored.sort()
    return [key for _, _, key in scored]


# ---------------------------------------------------------------------------
# simplified YAKE

def _yake_term_scores(sentences):
    """Lower is better.  Features: casing, sentence position, frequency
    relative to the corpus mean, and dispersion across sentences."""
    occurrences = {}
    for s_idx, tokens in enumerate(sentences):
        for tok in tokens:
            low = tok.lower()
            occurrences.setdefault(low, []).append((s_idx, tok))
    if not occurrences:
        return {}
    tfs = [len(v) for v in occurrences.values()]
    tf_mean = statistics.mean(tfs)
    tf_std = statistics.pstdev(tfs)
    scores = {}
    for term, occ in occurrences.items():
        tf = len(occ)
        cap = sum(1 for _, tok in occ if tok[:1].isupper())
        casing = 1.0 + cap / tf
        median_sentence = statistics.median(idx for idx, _ in occ)
        position = math.log(3.0 + median_sentence)
        freq_norm = tf / (tf_mean + tf_std + 1e-9)
        dispersion = len({idx for idx, _ in occ}) / len(sentences)
        scores[term] = position / (casing * (1.0 + freq_norm + dispersion))
    return scores


def yake_keywords(text, n=1, dedup_lim=0.9):
    """Statistical term scoring assembled into n-gram candidates.

    Candidate score is prod(term scores) / (tf * (1 + sum(term scores))),
    ranked ascending.  A candidate too similar to an already kept one
    (difflib ratio above dedup_lim) is dropped.
    """
    sentences = [_tokens(s) for s in _sentences(text)]
    term_scores = _yake_term_scores(sentences)
    candidates = {}
    order = {}
    counter = 0
    for tokens in sentences:
        for run in _phrase_runs(tokens):
            for size in range(1, n + 1):
                for start in range(0, len(run) - size + 1):
                    gram = " ".join(t.lower() for t in run[start : start + size])
                    candidates[gram] = candidates.get(gram, 0) + 1
                    if gram not in order:
                        order[gram] = counter
                        counter += 1
    scored = []
    for gram, tf in candidates.items():
        terms = gram.split(" ")
        prod = 1.0
        total = 0.0
        for t in terms:
            prod *= term_scores[t]
            total += term_scores[t]
        scored.append((prod / (tf * (1.0 + total)), order[gram], gram))
    scored.sort()
    kept = []
    for _, _, gram in scored:
        if any(difflib.SequenceMatcher(None, gram, k).ratio() > dedup_lim for k in kept):
            continue
        kept.append(gram)
    return kept


def extract_keywords(text, cfg):
    """Dispatch one extractor preset; an empty list is a valid result."""
    if cfg.kind == "rake":
        return rake_keywords(text)
    if cfg.kind in ("yake_sparse", "yake_dense"):
        return yake_keywords(text, n=cfg.n, dedup_lim=cfg.dedup_lim)
    raise ValueError(f"unknown extractor kind {cfg.kind!r}")


# ---------------------------------------------------------------------------
# text normalization

_CONTRACTION_TABLE = {
    "won't": "will not", "can't": "cannot", "shan't": "shall not",
    "don't": "do not", "doesn't": "does not", "didn't": "did not",
    "isn't": "is not", "aren't": "are not", "wasn't": "was not",
    "weren't": "were not", "hasn't": "has not", "haven't": "have not",
    "hadn't": "had not", "wouldn't": "would not", "couldn't": "could not",
    "shouldn't": "should not", "mustn't": "must not", "needn't": "need not",
    "i'm": "I am", "i've": "I have", "i'll": "I will", "i'd": "I would",
    "you're": "you are", "you've": "you have", "you'll": "you will",
    "you'd": "you would", "he's": "he is", "he'll": "he will",
    "he'd": "he would", "she's": "she is", "she'll": "she will",
    "she'd": "she would", "it's": "it is", "it'll": "it will",
    "we're": "we are", "we've": "we have", "we'll": "we will",
    "we'd": "we would", "they're": "they are", "they've": "they have",
    "they'll": "they will", "they'd": "they would", "that's": "that is",
    "that'll": "that will", "what's": "what is", "who's": "who is",
    "there's": "there is", "here's": "here is", "let's": "let us",
    "could've": "could have", "would've": "would have",
    "should've": "should have",
}

_CONTRACTION_RE = re.compile(
    r"\b(" + "|".join(re.escape(k) for k in sorted(_CONTRACTION_TABLE, key=len, reverse=True)) + r")\b",
    re.IGNORECASE,
)


def expand_contractions(text):
    """Table-driven replacement; idempotent since expansions are full forms."""

    def repl(match):
        expansion = _CONTRACTION_TABLE[match.group(0).lower()]
        if match.group(0)[0].isupper():
            return expansion[0].upper() + expansion[1:]
        return expansion

    return _CONTRACTION_RE.sub(repl, text)


NEGATION_MARKERS = frozenset({"not", "never", "no", "none", "cannot"})
_NEGATION_RE = re.compile(r"\b(" + "|".join(sorted(NEGATION_MARKERS)) + r")\b", re.IGNORECASE)


def inject_negation(keywords, answer):
    """Prepend "not" when the answer negates but no keyword does."""
    if not _NEGATION_RE.search(answer):
        return list(keywords)
    if any(_NEGATION_RE.search(k) for k in keywords):
        return list(keywords)
    return ["not"] + list(keywords)


def sample_history_depth(rng):
    return int(rng.choice(len(HISTORY_DEPTH_PROBS), p=HISTORY_DEPTH_PROBS))


# ---------------------------------------------------------------------------
# corpus and dataset I/O

def parse_corpus(text):
    """Blank-line separated conversations of alternating speaker lines."""
    conversations = []
    for b_idx, block in enumerate(re.split(r"\n\s*\n", text.strip())):
        lines = [ln.strip() for ln in block.splitlines() if ln.strip()]
        if not lines:
            continue
        if len(lines) % 2 != 0:
            raise ParseError(f"conversation {b_idx}: odd number of lines")
        turns = tuple((lines[i], lines[i + 1]) for i in range(0, len(lines), 2))
        conversations.append(Conversation(id=str(b_idx), turns=turns))
    if not conversations:
        raise EmptyCorpus("corpus contains no conversations")
    return conversations


def format_corpus(conversations):
    blocks = []
    for conv in conversations:
        blocks.append("\n".join(line for q, a in conv.turns for line in (q, a)))
    return "\n\n".join(blocks) + "\n"


def build_dataset(conversations, variant="xl", rng=None):
    """One candidate sample per usable QA pair.

    Per pair, in a fixed draw order (history depth first, then the xl
    extractor permutation): expand contractions, drop answers over the
    length limit, extract keywords, inject the missing negation, and emit
    the prompt/completion pair.  Each conversation gets its own child
    generator, so the build is deterministic and order-independent across
    conversations.
    """
    conversations = list(conversations)
    if not conversations:
        raise EmptyCorpus("no conversations to build from")
    if variant not in ("xl", "cr"):
        raise ValueError(f"unknown variant {variant!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    samples = []
    children = rng.spawn(len(conversations))
    for conv, crng in zip(conversations, children):
        history = []
        for j, (raw_q, raw_a) in enumerate(conv.turns):
            question = expand_contractions(raw_q)
            answer = expand_contractions(raw_a)
            depth = min(sample_history_depth(crng), len(history))
            if len(answer) <= MAX_ANSWER_CHARS:
                picked = _pick_extraction(answer, variant, crng)
                if picked is not None:
                    name, keywords = picked
                    keywords = inject_negation(keywords, answer)
                    prompt = format_sentence_prompt(
                        history[len(history) - depth :], question, keywords
                    )
                    samples.append(
                        DatasetSample(
                            sample_id=f"{conv.id}:{j}",
                            prompt=prompt,
                            completion=answer + STOP_TOKEN,
                            history_depth=depth,
                            extractor_used=name,
                        )
                    )
            # Long or keyword-less answers still happened; keep them as
            # context for later pairs.
            history.append((question, answer))
    return samples


def _pick_extraction(answer, variant, crng):
    if variant == "xl":
        for pick in crng.permutation(len(EXTRACTOR_ORDER)):
            name = EXTRACTOR_ORDER[int(pick)]
            keywords = extract_keywords(answer, EXTRACTOR_PRESETS[name])
            if keywords:
                return name, keywords
        return None
    best = None
    for name in EXTRACTOR_ORDER:
        keywords = extract_keywords(answer, EXTRACTOR_PRESETS[name])
        if keywords and (best is None or len(keywords) < len(best[1])):
            best = (name, keywords)
    return best


def write_dataset(samples, path):
    """Line-delimited JSON, exactly the two text fields per record."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(
                {"prompt": sample.prompt, "completion": sample.completion},
                ensure_ascii=False,
            ))
            fh.write("\n")


def read_dataset(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def read_overrides(path):
    """Review file: one JSON object per line keyed by sample id."""
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "id" not in rec:
                raise ParseError(f"override line {lineno}: missing 'id'")
            overrides[rec["id"]] = rec
    return overrides


def apply_overrides(samples, overrides):
    """Re-render reviewed samples with edited keywords and/or answers."""
    out = []
    for sample in samples:
        edit = overrides.get(sample.sample_id)
        if edit is None:
            out.append(sample)
            continue
        history, question, keywords = parse_sentence_prompt(sample.prompt)
        keywords = list(edit.get("keywords", keywords))
        answer = edit.get("answer", sample.completion[: -len(STOP_TOKEN)])
        out.append(
            DatasetSample(
                sample_id=sample.sample_id,
                prompt=format_sentence_prompt(history, question, keywords),
                completion=answer + STOP_TOKEN,
                history_depth=sample.history_depth,
                extractor_used=f"{sample.extractor_used}+override",
            )
        )
    return out
