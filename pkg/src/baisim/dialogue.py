"""Conversation orchestration.

A question comes in, a provider turns it into twelve keyword options plus a
category, the options are paged six at a time next to four special options,
and the decoded selection becomes either a generated full-sentence answer or
one of the canned special replies.  Categories present in the knowledge base
bypass the provider's keywords entirely.

Providers implement one contract: ``respond(prompt, timeout=...) -> text``.
MockProvider answers both prompt kinds deterministically so the whole engine
runs offline; RemoteProvider posts the prompt to an HTTP endpoint.
"""

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .errors import (
    EmptyCompletion,
    EmptyQuestion,
    Ended,
    EngineError,
    InvalidIndex,
    ParseError,
    ProviderUnavailable,
)

CORRECTION_REPLY = "I am sorry, I misspoke earlier."
NONE_REPLY = "I am sorry, I cannot answer this question right now."
FINISHED_REPLY = "Thank you, goodbye."
REPEAT_REQUEST = "Could you please repeat that?"

PROMPT_TERMINATOR = "\n\n###\n\n"
STOP_TOKEN = "END"
PROVIDER_TIMEOUT_S = 10.0
KEYWORDS_PER_PAGE = 6
NUM_KEYWORDS = 12
DEFAULT_BUDGET = 30

AWAITING_QUESTION = "AwaitingQuestion"
AWAITING_SELECTION = "AwaitingSelection"
ENDED = "Ended"

KEYWORD_PROMPT_TEMPLATE = (
    "Generate N keywords that might help a speech-impaired person respond to a "
    "given question. The keywords should be as short as possible and only "
    "describe one possible answer each. Provide answers which are as different "
    "as possible and try to include every viewpoint in the answers. For example "
    "if one of the answers is yes, also include no, and when one of the answers "
    "is good, also include bad. When the question is asking for a day or time, "
    "be specific in your suggested answers. In addition to suggesting answers, "
    "also provide the category of what the question is asking for. For example, "
    "if the question is asking for the name of a person, the category should be "
    "NAME. If the question is asking for an address or street name, the "
    "category should be ADDRESS. Here are some examples:\n"
    "\n"
    "Example 1:\n"
    "Question: How was your day?\n"
    "N: 6\n"
    "Answers: 1. Good; 2. Fantastic; 3. Bad; 4. Horrible; 5. Splendid; 6. Boring\n"
    "Category: ADJECTIVE\n"
    "Example 2:\n"
    "Question: How many people are living in your household?\n"
    "N: 10\n"
    "Answers: 1. 1; 2. 2; 3. 3; 4. 4; 5. 5; 6. 6; 7. 7; 8. 8; 9. 9; 10. 10\n"
    "Category: NUMBER\n"
    "Example 3:\n"
    "Question: What is your mother's name?\n"
    "N: 4\n"
    "Answers: 1. Rose; 2. Mary; 3. Miriam; 4. Joanna\n"
    "Category: NAME\n"
    "Example 4:\n"
    "Question: Are you hungry?\n"
    "N: 3\n"
    "Answers: 1. Yes; 2. No; 3. Very\n"
    "Category: YESNO\n"
    "\n"
    "Question: {question}\n"
    "N: {n_keywords}\n"
)


# ---------------------------------------------------------------------------
# selections and actions

@dataclass(frozen=True)
class Selection:
    kind: str  # keyword | correction | more | none | finished
    index: int = None

    @classmethod
    def keyword(cls, index):
        return cls("keyword", index)


CORRECTION = Selection("correction")
MORE_OR_PREVIOUS = Selection("more")
NONE_OPTION = Selection("none")
FINISHED = Selection("finished")


@dataclass(frozen=True)
class Action:
    kind: str  # Answer | RepageOnly | EndScenario
    text: str = None


@dataclass(frozen=True)
class KeywordSet:
    keywords: tuple  # exactly NUM_KEYWORDS entries, none empty
    category: str


@dataclass(frozen=True)
class KnowledgeBase:
    entries: dict  # category -> tuple of option texts


@dataclass
class ConversationState:
    history: list = field(default_factory=list)
    current_question: str = ""
    keyword_pages: tuple = ((), ())
    current_page: int = 0
    category: str = ""
    selections_used: int = 0
    budget: int = DEFAULT_BUDGET
    status: str = AWAITING_QUESTION


# ---------------------------------------------------------------------------
# providers

_YESNO = ("Yes", "No", "Maybe", "Definitely", "Probably", "Not sure",
          "Always", "Never", "Sometimes", "Often", "Rarely", "Very")
_ADJECTIVES = ("Good", "Great", "Fine", "Okay", "Bad", "Horrible",
               "Fantastic", "Boring", "Splendid", "Tired", "Busy", "Relaxed")
_NAMES = ("Anna", "Mary", "David", "Laura", "Oliver", "Sophia",
          "James", "Emma", "Michael", "Rose", "Miriam", "Joanna")
_ADDRESSES = ("Main Street 1", "Oak Avenue 12", "Park Road 7", "Station Square 3",
              "Hill Lane 22", "River Walk 9", "Market Street 4", "Church Road 15",
              "Garden Way 6", "Bridge Street 11", "School Lane 2", "Harbor View 8")
_DAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday",
         "Sunday", "Today", "Tomorrow", "Next week", "Weekend", "Any day")
_TIMES = ("8am", "9am", "10am", "11am", "12pm", "1pm",
          "2pm", "3pm", "4pm", "5pm", "6pm", "7pm")
_NUMBERS = tuple(str(i) for i in range(1, 13))
_REQUESTS = ("Reservations", "Order", "Delivery", "Menu", "Prices", "Hours",
             "Takeout", "Directions", "Admission", "Schedule", "Sign up", "Join")
# Keep generic fills clear of the special-option labels.
_GENERAL = ("Yes", "No", "Good", "Bad", "Okay", "Fine",
            "Later", "Now", "Please", "Thanks", "Maybe", "Soon")

_AUX_WORDS = {"are", "is", "do", "does", "did", "can", "could", "would",
              "will", "have", "has", "was", "were", "should", "may", "am"}

_OPPOSING_PAIRS = (("yes", "No"), ("no", "Yes"), ("good", "Bad"), ("bad", "Good"),
                   ("always", "Never"), ("never", "Always"))


def _mock_keyword_table(question):
    q = question.lower()
    if re.search(r"\bname\b", q):
        return "NAME", _NAMES
    if re.search(r"\baddress\b|\bstreet\b", q):
        return "ADDRESS", _ADDRESSES
    if re.search(r"\bhow (can|may) i help\b", q):
        return "REQUEST", _REQUESTS
    if re.search(r"\bhow (was|is|are)\b|\bhow do you feel\b", q):
        return "ADJECTIVE", _ADJECTIVES
    if re.search(r"\bhow many\b|\bhow much\b|\bnumber\b", q):
        return "NUMBER", _NUMBERS
    if re.search(r"\bday\b", q):
        return "DAY", _DAYS
    if re.search(r"\btime\b|\bwhen\b", q):
        return "TIME", _TIMES
    first = re.findall(r"[a-z']+", q)
    if first and first[0] in _AUX_WORDS:
        return "YESNO", _YESNO
    return "GENERAL", _GENERAL


def _with_opposites(keywords):
    """Every viewpoint gets its counterpart: yes brings no, good brings bad."""
    result = list(keywords)
    lowered = [k.lower() for k in result]
    for word, partner in _OPPOSING_PAIRS:
        if word in lowered and partner.lower() not in lowered:
            result[-1] = partner
            lowered[-1] = partner.lower()
    return tuple(result)


class MockProvider:
    """Deterministic offline provider for both prompt kinds.

    Keyword prompts get table-driven answers in the same Answers/Category
    layout the template's examples use; sentence prompts get the keyword list
    echoed as a sentence, terminated by the stop token.
    """

    def respond(self, prompt, timeout=PROVIDER_TIMEOUT_S):
        if prompt.endswith(PROMPT_TERMINATOR):
            return self._sentence(prompt)
        match = re.search(r"Question: (.*)\nN: (\d+)\n$", prompt)
        if match is None:
            raise EmptyCompletion("prompt matches neither known layout")
        return self._keywords(match.group(1), int(match.group(2)))

    def _keywords(self, question, n):
        category, table = _mock_keyword_table(question)
        kws = _with_opposites(table[:n])
        listing = "; ".join(f"{i + 1}. {k}" for i, k in enumerate(kws))
        return f"Answers: {listing}\nCategory: {category}"

    def _sentence(self, prompt):
        body = prompt[: -len(PROMPT_TERMINATOR)]
        match = re.search(r"Keyword: (.*)\nAnswer:$", body)
        if match is None:
            raise EmptyCompletion("sentence prompt has no keyword line")
        return f"{match.group(1)}.{STOP_TOKEN}"


class RemoteProvider:
    """Posts {"prompt": ...} as JSON and expects {"text": ...} back."""

    def __init__(self, url, timeout=PROVIDER_TIMEOUT_S):
        self.url = url
        self.timeout = timeout

    def respond(self, prompt, timeout=None):
        payload = json.dumps({"prompt": prompt}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=timeout or self.timeout) as resp:
                reply = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if "text" not in reply:
            raise ProviderUnavailable("response missing 'text' field")
        return reply["text"]


# ---------------------------------------------------------------------------
# prompt building and provider-facing operations

def format_sentence_prompt(history, question, keywords):
    """History as Question/Answer line pairs, then the keyword line.

    The prompt ends with "Answer:" plus the fixed terminator so the trained
    completion model knows where its turn starts.
    """
    parts = []
    for past_q, past_a in history:
        parts.append(f"Question: {past_q}\nAnswer: {past_a}\n")
    parts.append(f"Question: {question}\nKeyword: {', '.join(keywords)}\nAnswer:")
    return "".join(parts) + PROMPT_TERMINATOR


def parse_sentence_prompt(prompt):
    """Inverse of format_sentence_prompt: (history, question, keywords).

    Only works on prompts whose texts contain no newlines, which is what the
    builder produces from single-line conversation turns.
    """
    if not prompt.endswith(PROMPT_TERMINATOR):
        raise ParseError("prompt missing its terminator")
    lines = prompt[: -len(PROMPT_TERMINATOR)].split("\n")
    if len(lines) < 3 or lines[-1] != "Answer:":
        raise ParseError("prompt does not end with an open Answer line")
    if not lines[-2].startswith("Keyword: "):
        raise ParseError("prompt missing its Keyword line")
    keywords = lines[-2][len("Keyword: ") :].split(", ")
    if not lines[-3].startswith("Question: "):
        raise ParseError("prompt missing its Question line")
    question = lines[-3][len("Question: ") :]
    pair_lines = lines[:-3]
    if len(pair_lines) % 2 != 0:
        raise ParseError("history lines do not pair up")
    history = []
    for i in range(0, len(pair_lines), 2):
        q_line, a_line = pair_lines[i], pair_lines[i + 1]
        if not q_line.startswith("Question: ") or not a_line.startswith("Answer: "):
            raise ParseError(f"malformed history pair at line {i}")
        history.append((q_line[len("Question: ") :], a_line[len("Answer: ") :]))
    return history, question, keywords


def keyword_prompt(question, n_keywords=NUM_KEYWORDS):
    return KEYWORD_PROMPT_TEMPLATE.format(question=question, n_keywords=n_keywords)


def generate_sentence(prompt, provider, fallback_keyword=None, timeout=PROVIDER_TIMEOUT_S):
    """Provider completion truncated at the first stop token occurrence."""
    try:
        raw = provider.respond(prompt, timeout=timeout)
    except ProviderUnavailable:
        if fallback_keyword is None:
            raise
        return f"{fallback_keyword}."
    answer = raw.split(STOP_TOKEN, 1)[0].strip()
    if not answer:
        raise EmptyCompletion("provider returned no answer text")
    return answer


def _parse_keyword_response(text):
    answers_match = re.search(r"Answers:\s*(.+)", text)
    category_match = re.search(r"Category:\s*([A-Za-z_]+)", text)
    if answers_match is None:
        return None, ""
    keywords = []
    for chunk in answers_match.group(1).split(";"):
        cleaned = re.sub(r"^\s*\d+\.\s*", "", chunk).strip()
        # Commas and brackets are transcript delimiters, keep options clean.
        cleaned = cleaned.replace(",", " ").replace("[", "").replace("]", "")
        cleaned = re.sub(r"\s+", " ", cleaned).strip()
        if cleaned:
            keywords.append(cleaned)
    category = category_match.group(1).upper() if category_match else ""
    return keywords, category


def generate_keywords(question, n_keywords=NUM_KEYWORDS, provider=None, timeout=PROVIDER_TIMEOUT_S):
    """Exactly n keyword options plus a category for one question.

    Provider failures and unparseable responses fall back to the mock tables;
    short lists are padded from them as well, so the keyword count invariant
    holds regardless of provider quality.
    """
    if not question.strip():
        raise EmptyQuestion(REPEAT_REQUEST)
    if provider is None:
        provider = MockProvider()
    prompt = keyword_prompt(question, n_keywords)
    mock = MockProvider()
    try:
        raw = provider.respond(prompt, timeout=timeout)
    except (ProviderUnavailable, EmptyCompletion):
        raw = mock.respond(prompt)
    keywords, category = _parse_keyword_response(raw)
    if not keywords:
        keywords, category = _parse_keyword_response(mock.respond(prompt))
    if not category:
        category = _mock_keyword_table(question)[0]

    seen = {k.lower() for k in keywords}
    if len(keywords) < n_keywords:
        table = _mock_keyword_table(question)[1]
        for fill in table + _GENERAL + tuple(f"Option {i + 1}" for i in range(n_keywords)):
            if len(keywords) >= n_keywords:
                break
            if fill.lower() not in seen:
                keywords.append(fill)
                seen.add(fill.lower())
    return KeywordSet(keywords=tuple(keywords[:n_keywords]), category=category)


# ---------------------------------------------------------------------------
# knowledge base

def parse_knowledge_base(text):
    """Key-value document: one "CATEGORY=option, option, ..." line per entry."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"knowledge base line {lineno}: missing '='")
        key, _, values = line.partition("=")
        options = tuple(v.strip() for v in values.split(",") if v.strip())
        if not options:
            raise ParseError(f"knowledge base line {lineno}: no options for {key.strip()}")
        entries[key.strip().upper()] = options
    return KnowledgeBase(entries=entries)


def format_knowledge_base(kb):
    lines = [f"{cat}={', '.join(options)}" for cat, options in kb.entries.items()]
    return "\n".join(lines) + "\n"


DEFAULT_KNOWLEDGE_BASE = KnowledgeBase(
    entries={
        "NAME": ("Anna", "Anna Mayer", "David Mayer", "Laura", "Oliver", "Sophia",
                 "Emma", "Michael", "Rose", "Miriam", "Joanna", "James"),
        "ADDRESS": ("Main Street 1", "Oak Avenue 12", "Park Road 7",
                    "Station Square 3", "Hill Lane 22", "River Walk 9",
                    "Market Street 4", "Church Road 15", "Garden Way 6",
                    "Bridge Street 11", "School Lane 2", "Harbor View 8"),
    }
)


# ---------------------------------------------------------------------------
# the session state machine

class DialogueSession:
    def __init__(self, provider=None, knowledge_base=None, budget=DEFAULT_BUDGET,
                 n_keywords=NUM_KEYWORDS, timeout=PROVIDER_TIMEOUT_S):
        self.provider = provider if provider is not None else MockProvider()
        self.knowledge_base = knowledge_base if knowledge_base is not None else KnowledgeBase({})
        self.n_keywords = n_keywords
        self.timeout = timeout
        self.state = ConversationState(budget=budget)

    def ingest_question(self, text):
        """Store the question and page its keyword options.

        Knowledge-base categories replace the provider's keywords entirely;
        entries are cycled to fill all twelve slots.
        """
        state = self.state
        if state.status == ENDED:
            raise Ended("conversation has ended")
        if state.status != AWAITING_QUESTION:
            raise EngineError(f"question ingested while {state.status}")
        if not text.strip():
            raise EmptyQuestion(REPEAT_REQUEST)
        kwset = generate_keywords(text, self.n_keywords, self.provider, self.timeout)
        keywords = kwset.keywords
        if kwset.category in self.knowledge_base.entries:
            pool = self.knowledge_base.entries[kwset.category]
            keywords = tuple(pool[i % len(pool)] for i in range(self.n_keywords))
        state.current_question = text
        state.category = kwset.category
        state.keyword_pages = (
            keywords[:KEYWORDS_PER_PAGE],
            keywords[KEYWORDS_PER_PAGE : 2 * KEYWORDS_PER_PAGE],
        )
        state.current_page = 0
        state.status = AWAITING_SELECTION
        return state

    def apply_selection(self, sel):
        """Map one decoded selection onto the conversation.

        Keyword, correction, and none selections speak (and enter history);
        more/previous only flips the page; finished says goodbye and ends the
        scenario.  Exhausting the selection budget also ends it.
        """
        state = self.state
        if state.status == ENDED:
            raise Ended("conversation has ended")
        if state.status != AWAITING_SELECTION:
            raise InvalidIndex(f"selection applied while {state.status}")
        state.selections_used += 1

        if sel.kind == "keyword":
            page = state.keyword_pages[state.current_page]
            if sel.index is None or not 0 <= sel.index < len(page):
                raise InvalidIndex(f"keyword index {sel.index} not on the current page")
            keyword = page[sel.index]
            prompt = format_sentence_prompt(state.history, state.current_question, [keyword])
            answer = generate_sentence(prompt, self.provider, fallback_keyword=keyword,
                                       timeout=self.timeout)
            state.history.append((state.current_question, answer))
            state.current_question = ""
            state.status = AWAITING_QUESTION
            action = Action("Answer", answer)
        elif sel.kind == "correction":
            state.history.append((state.current_question, CORRECTION_REPLY))
            state.current_question = ""
            state.status = AWAITING_QUESTION
            action = Action("Answer", CORRECTION_REPLY)
        elif sel.kind == "none":
            state.history.append((state.current_question, NONE_REPLY))
            state.current_question = ""
            state.status = AWAITING_QUESTION
            action = Action("Answer", NONE_REPLY)
        elif sel.kind == "more":
            state.current_page = 1 - state.current_page
            action = Action("RepageOnly")
        elif sel.kind == "finished":
            state.status = ENDED
            action = Action("EndScenario", FINISHED_REPLY)
        else:
            raise InvalidIndex(f"unknown selection kind {sel.kind!r}")

        if state.status != ENDED and state.selections_used >= state.budget:
            state.status = ENDED
            action = Action("EndScenario", action.text)
        return action


# ---------------------------------------------------------------------------
# transcript format

SEPARATOR = "-" * 10


def special_labels(page_index):
    return ("Correction", "Previous" if page_index else "More", "None", "Finished")


def _option_labels(keywords, page_index):
    return tuple(keywords) + special_labels(page_index)


def _selection_slot(sel):
    if sel is None:
        return None
    return {"keyword": sel.index, "correction": 6, "more": 7,
            "none": 8, "finished": 9}[sel.kind]


class TranscriptWriter:
    """Accumulates the session transcript in its line format."""

    def __init__(self):
        self.lines = []

    def scenario_header(self, tag, goal):
        self.lines.append(f"({tag}) {goal}")

    def question(self, text):
        self.lines.append(f"Q: {text}")

    def options(self, keywords, page_index, chosen=None):
        labels = list(_option_labels(keywords, page_index))
        slot = _selection_slot(chosen)
        if slot is not None:
            labels[slot] = f"[{labels[slot]}]"
        self.lines.append("KW: " + ", ".join(labels))

    def answer(self, text):
        self.lines.append(f"A: {text}")

    def separator(self):
        self.lines.append(SEPARATOR)

    def text(self):
        return "\n".join(self.lines) + ("\n" if self.lines else "")


_HEADER_RE = re.compile(r"^\(([A-Z]+)\) (.*)$")


def parse_transcript(text):
    """Inverse of TranscriptWriter: scenarios with Q/KW/A turns.

    Each KW line yields its ten options, the bracket-marked chosen slot, and
    the page (0 when the eighth option reads More, 1 for Previous).
    """
    scenarios = []
    current = None
    turn = None

    def close_turn():
        nonlocal turn
        if turn is not None:
            current["turns"].append(turn)
            turn = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        header = _HEADER_RE.match(line)
        if header:
            close_turn()
            current = {"tag": header.group(1), "goal": header.group(2), "turns": []}
            scenarios.append(current)
            continue
        if line == SEPARATOR:
            close_turn()
            current = None
            continue
        if current is None:
            raise ParseError(f"transcript line {lineno}: content outside a scenario")
        if line.startswith("Q: "):
            close_turn()
            turn = {"question": line[3:], "kw_lines": [], "answer": None}
        elif line.startswith("KW: "):
            if turn is None:
                raise ParseError(f"transcript line {lineno}: KW before any question")
            entries = line[4:].split(", ")
            if len(entries) != KEYWORDS_PER_PAGE + 4:
                raise ParseError(f"transcript line {lineno}: expected 10 options")
            chosen = None
            options = []
            for i, entry in enumerate(entries):
                if entry.startswith("[") and entry.endswith("]"):
                    chosen = i
                    entry = entry[1:-1]
                options.append(entry)
            page = 1 if options[KEYWORDS_PER_PAGE + 1] == "Previous" else 0
            turn["kw_lines"].append({"options": options, "chosen": chosen, "page": page})
        elif line.startswith("A: "):
            if turn is None:
                raise ParseError(f"transcript line {lineno}: answer before any question")
            turn["answer"] = line[3:]
            close_turn()
        else:
            raise ParseError(f"transcript line {lineno}: unrecognized {line!r}")
    close_turn()
    return scenarios
