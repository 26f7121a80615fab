"""Prompt templates, chat backends, and operator-source extraction.

Four prompt kinds drive the operator-evolution dialogue: initialization
(ask for a fresh `next_generation` function), crossover (synthesize from
several scored parents), mutation (refine one operator), and repair (fix a
failing operator given its captured error). Rendering is pure; completion
goes through either a networked chat-completions backend or a scripted
mock that replays fixture files deterministically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .problems import BITSTRING, CMOP, MOKP, MOTSP, PERMUTATION, REAL

OPEN_TAG = "<next_generation>"
CLOSE_TAG = "</next_generation>"

KIND_INITIALIZATION = "initialization"
KIND_CROSSOVER = "crossover"
KIND_MUTATION = "mutation"
KIND_REPAIR = "repair"
PROMPT_KINDS = (KIND_INITIALIZATION, KIND_CROSSOVER, KIND_MUTATION, KIND_REPAIR)

DEFAULT_CHAR_BUDGET = 60000
ERROR_TAIL_CHARS = 2000


class RenderError(ValueError):
    """A template precondition was violated (missing/inconsistent context)."""


class PromptBudgetError(RenderError):
    """Prompt cannot fit the character budget even after parent dropping."""


class ExtractionError(ValueError):
    """Operator source could not be recovered from a model response."""


class MissingTagError(ExtractionError):
    pass


class NestedTagError(ExtractionError):
    pass


class EmptyBlockError(ExtractionError):
    pass


class MissingFunctionError(ExtractionError):
    pass


class BackendError(RuntimeError):
    """Completion failed (transport failure or exhausted fixtures)."""


class TransportError(BackendError):
    pass


class MockExhaustedError(BackendError):
    pass


# ---------------------------------------------------------------------------
# Transcript types
# ---------------------------------------------------------------------------


_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be nonempty")


@dataclass
class ChatTranscript:
    """Append-only message list tagged with the template kind that built it."""

    kind: str
    messages: list[ChatMessage] = field(default_factory=list)
    temperature: float = 0.5
    backend_id: str | None = None

    def append(self, role: str, content: str) -> None:
        msg = ChatMessage(role, content)
        if msg.role == "system" and self.messages:
            raise ValueError("system message allowed only at the start")
        self.messages.append(msg)

    def char_count(self) -> int:
        return sum(len(m.content) for m in self.messages)


# ---------------------------------------------------------------------------
# Template texts
# ---------------------------------------------------------------------------


INITIALIZATION_SYSTEM = (
    "You are an expert in designing intelligent evolutionary search strategies "
    "that can solve #PROBLEM# efficiently and effectively. #PROBLEM_DESC#"
)

INITIALIZATION_TASK = """Description of Task:
Your task is to evolve a superior evolutionary operator with Python for tackling #PROBLEM#, with the goal of achieving top search performance across #PROBLEM#. You have to provide me the Python code with a single function namely 'next_generation' following the format and the requirements given below, which are matched with their functionalities:
#FORMAT#
Requirements:
You have to return me a single function namely 'next_generation', keep the format of input and the format of output unchanged, and provide concise descriptions in the annotation.
Please return me an XML text using the following format:
<next_generation>
...
</next_generation>
where '...' gives only the entire code without any additional information. To enable direct compilation for the code given in '...', please don't provide any other text except the single Python function namely 'next_generation' with its annotation.
No Explanation Needed!!"""

CROSSOVER_TASK = """Description of Task:
I will showcase several evaluated 'next_generation' functions in XML format, with their scores obtained on the #PROBLEM#. Your task is to conceive an advanced function with the same input/output formats, termed 'next_generation', that is inspired by the evaluated cases.
#FORMAT#
Below, you will find the #N_s# evaluated 'next_generation' functions in XML texts, each accompanied by its corresponding score.
#SELECTED_OPERATORS#
Requirements:
Kindly devise an innovative 'next_generation' method with XML that retains the identical input/output structure. This method should be crafted through a meticulous analysis of the shared characteristics among high-performing algorithms.
No Explanation Needed!!"""

MUTATION_TASK = """Description of Task:
I will introduce an evolutionary search function titled 'next_generation' in XML format. Your task is to meticulously refine this function and propose a novel one that may obtain superior search performance on #PROBLEM#, ensuring the input/output formats, function name, and core functionality remain unaltered.
#FORMAT#
The original function is given by:
<next_generation>#OPERATOR#</next_generation>
Requirements:
Please return me an innovative 'next_generation' operator with the same XML format. No Explanation Needed!!"""

REPAIR_TASK = """Description of Task:
The code you provided for me cannot pass my demo test on #PROBLEM#. The error is given by: #ERROR#. Can you correct the code according to the errors?
Requirements:
Please return me a refined 'next_generation' with the same XML format, i.e.,
<next_generation>...</next_generation>
, where the '...' represents the code snippet.
No Explanation Needed!!"""


_PROBLEM_NAMES = {
    CMOP: "continuous multi-objective benchmark problems (CMOP)",
    MOKP: "the multi-objective 0/1 knapsack problem (MOKP)",
    MOTSP: "the multi-objective traveling salesman problem (MOTSP)",
}

_PROBLEM_DESCS = {
    CMOP: (
        "The problems are continuous multi-objective benchmarks. Each candidate "
        "solution is a vector of real-valued decision variables lying within "
        "per-dimension lower and upper bounds. All k objectives are minimized "
        "simultaneously and conflict with one another, so quality is judged by how "
        "closely and how evenly the nondominated set of a population approximates "
        "the true Pareto front. There are no feasibility constraints beyond the "
        "variable bounds."
    ),
    MOKP: (
        "The problem is a multi-objective 0/1 knapsack problem. Each candidate "
        "solution is a binary vector whose j-th entry indicates whether item j is "
        "packed. Objective i is the sum of the profits p[i][j] over the packed "
        "items, and every objective is maximized simultaneously. A solution is "
        "feasible only if the total weight of the packed items does not exceed the "
        "capacity C; infeasible offspring are repaired afterwards by randomly "
        "removing packed items, so aim for high-profit selections that respect the "
        "capacity."
    ),
    MOTSP: (
        "The problem is a multi-objective traveling salesman problem. Each "
        "candidate solution is a permutation of the city indices 0..n-1 giving the "
        "visiting order of an open path. Objective i sums the i-th symmetric "
        "distance matrix over consecutive cities along the path, and all objectives "
        "are minimized simultaneously. The distance matrices conflict with each "
        "other, so no single tour is best for every objective. Every offspring must "
        "remain a valid permutation that visits each city exactly once."
    ),
}

_ENCODING_LINES = {
    REAL: (
        '            "real": a list of n_var floats, each within\n'
        '                problem_meta["lower"][j] .. problem_meta["upper"][j]'
    ),
    BITSTRING: '            "bitstring": a list of n_var integers, each 0 or 1',
    PERMUTATION: (
        '            "permutation": a list of n_var integers forming a\n'
        "                permutation of range(n_var), each index exactly once"
    ),
}

FORMAT_SPEC_TEMPLATE = '''def next_generation(parents, parent_objectives, problem_meta, seed):
    """Produce the offspring population for one generation.

    Args:
        parents: list of N parent genomes. Genome encoding is
            problem_meta["encoding"]:
{encoding_line}
        parent_objectives: list of N lists, the k objective values of each
            parent, aligned with `parents`.
        problem_meta: dict describing the problem. Always contains
            "category", "encoding", "n_var" and "k"; encoding-specific extras
            such as "lower"/"upper" (real), "weights"/"capacity" (knapsack)
            are included when they exist.
        seed: int. The hosting runtime has already seeded `random` and
            `numpy.random` with it before calling this function.

    Returns:
        A list of exactly N offspring genomes in the same encoding as the
        parents. The caller evaluates objectives and performs survival
        selection; this function only creates candidate solutions.
    """
'''


def default_problem_name(category: str) -> str:
    return _PROBLEM_NAMES[category]


def default_problem_desc(category: str) -> str:
    return _PROBLEM_DESCS[category]


def default_format_spec(encoding: str) -> str:
    return FORMAT_SPEC_TEMPLATE.format(encoding_line=_ENCODING_LINES[encoding])


@dataclass
class PromptContext:
    """Values substituted into the template placeholders."""

    problem_name: str = ""
    problem_desc: str = ""
    format_spec: str = ""
    selected_operators: list[tuple[str, float]] = field(default_factory=list)
    n_selected: int = 0
    operator_source: str = ""
    error_text: str = ""
    char_budget: int = DEFAULT_CHAR_BUDGET
    temperature: float = 0.5

    @classmethod
    def for_category(cls, category: str, encoding: str, **kw) -> "PromptContext":
        return cls(
            problem_name=default_problem_name(category),
            problem_desc=default_problem_desc(category),
            format_spec=default_format_spec(encoding),
            **kw,
        )


# ---------------------------------------------------------------------------
# Renderers
# ---------------------------------------------------------------------------


def _require(ctx: PromptContext, *fields_: str) -> None:
    for name in fields_:
        if not getattr(ctx, name):
            raise RenderError(f"prompt context missing {name}")


def format_score(value: float) -> str:
    return format(value, ".6g")


def render_initialization(ctx: PromptContext) -> ChatTranscript:
    """System + task messages asking for a brand-new operator."""
    _require(ctx, "problem_name", "problem_desc", "format_spec")
    system = INITIALIZATION_SYSTEM.replace("#PROBLEM#", ctx.problem_name).replace(
        "#PROBLEM_DESC#", ctx.problem_desc
    )
    user = INITIALIZATION_TASK.replace("#PROBLEM#", ctx.problem_name).replace(
        "#FORMAT#", ctx.format_spec
    )
    t = ChatTranscript(kind=KIND_INITIALIZATION, temperature=ctx.temperature)
    t.append("system", system)
    t.append("user", user)
    if t.char_count() > ctx.char_budget:
        raise PromptBudgetError(f"initialization prompt exceeds {ctx.char_budget} chars")
    return t


def _selected_operators_block(parents: list[tuple[str, float]]) -> str:
    blocks = []
    for source, score in parents:
        blocks.append(f"{OPEN_TAG}\n{source}\n{CLOSE_TAG}\nscore: {format_score(score)}")
    return "\n".join(blocks)


def render_crossover(ctx: PromptContext) -> ChatTranscript:
    """Task message showcasing the scored parents; drops the weakest parent
    (down to two) whenever the rendered prompt exceeds the character budget."""
    _require(ctx, "problem_name", "format_spec")
    if ctx.n_selected < 2:
        raise RenderError("crossover needs at least two selected operators")
    if len(ctx.selected_operators) != ctx.n_selected:
        raise RenderError(
            f"n_selected={ctx.n_selected} but {len(ctx.selected_operators)} operators given"
        )
    parents = list(ctx.selected_operators)
    while True:
        user = (
            CROSSOVER_TASK.replace("#PROBLEM#", ctx.problem_name)
            .replace("#FORMAT#", ctx.format_spec)
            .replace("#N_s#", str(len(parents)))
            .replace("#SELECTED_OPERATORS#", _selected_operators_block(parents))
        )
        if len(user) <= ctx.char_budget:
            break
        if len(parents) <= 2:
            raise PromptBudgetError(f"crossover prompt exceeds {ctx.char_budget} chars")
        parents.remove(min(parents, key=lambda p: p[1]))
    t = ChatTranscript(kind=KIND_CROSSOVER, temperature=ctx.temperature)
    t.append("user", user)
    return t


def render_mutation(ctx: PromptContext) -> ChatTranscript:
    _require(ctx, "problem_name", "format_spec", "operator_source")
    user = (
        MUTATION_TASK.replace("#PROBLEM#", ctx.problem_name)
        .replace("#FORMAT#", ctx.format_spec)
        .replace("#OPERATOR#", ctx.operator_source)
    )
    t = ChatTranscript(kind=KIND_MUTATION, temperature=ctx.temperature)
    t.append("user", user)
    if t.char_count() > ctx.char_budget:
        raise PromptBudgetError(f"mutation prompt exceeds {ctx.char_budget} chars")
    return t


def render_repair(ctx: PromptContext, transcript: ChatTranscript | None = None) -> ChatTranscript:
    """Repair request; appended to the originating dialogue when given."""
    _require(ctx, "problem_name", "error_text")
    error = ctx.error_text
    if len(error) > ERROR_TAIL_CHARS:
        error = error[-ERROR_TAIL_CHARS:]
    user = REPAIR_TASK.replace("#PROBLEM#", ctx.problem_name).replace("#ERROR#", error)
    t = transcript if transcript is not None else ChatTranscript(kind=KIND_REPAIR, temperature=ctx.temperature)
    t.kind = KIND_REPAIR
    t.append("user", user)
    if t.char_count() > ctx.char_budget:
        raise PromptBudgetError(f"repair prompt exceeds {ctx.char_budget} chars")
    return t


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


def _strip_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines).strip()
    return text


def extract_operator(response_text: str) -> str:
    """Recover operator source from the first <next_generation> block."""
    start = response_text.find(OPEN_TAG)
    if start < 0:
        raise MissingTagError(f"response contains no {OPEN_TAG} tag")
    start += len(OPEN_TAG)
    end = response_text.find(CLOSE_TAG, start)
    if end < 0:
        raise MissingTagError(f"response contains no matching {CLOSE_TAG} tag")
    block = response_text[start:end]
    if OPEN_TAG in block:
        raise NestedTagError("nested operator tags are not supported")
    source = _strip_fences(block)
    if not source:
        raise EmptyBlockError("operator block is empty")
    if "next_generation" not in source:
        raise MissingFunctionError("source does not define next_generation")
    return source


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


def complete(transcript: ChatTranscript, backend) -> str:
    """Run one completion and stamp the transcript with the backend id."""
    text = backend.complete(transcript)
    transcript.backend_id = backend.id
    return text


class HttpChatBackend:
    """Chat-completions client over HTTP JSON (messages in, choice text out)."""

    def __init__(
        self,
        endpoint_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 2,
        session: requests.Session | None = None,
    ):
        self.endpoint_url = endpoint_url
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = session or requests.Session()
        self.id = f"http:{model}"

    def complete(self, transcript: ChatTranscript) -> str:
        payload = {
            "model": self.model,
            "temperature": transcript.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in transcript.messages],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_exc: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                resp = self._session.post(
                    self.endpoint_url, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"backend rejected request: {resp.status_code} {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"malformed completion payload: {exc}") from exc
        raise TransportError(f"transport failure after {self.max_retries} retries: {last_exc}")


class MockBackend:
    """Replays fixture files per prompt kind in lexicographic order.

    Layout: <fixture_dir>/{initialization,crossover,mutation,repair}/*, one
    complete scripted response per file. The cursor never wraps; running out
    of fixtures for a kind raises MockExhaustedError.
    """

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.id = "mock"
        self._lock = threading.Lock()
        self._cursors = {kind: 0 for kind in PROMPT_KINDS}
        self._fixtures = {
            kind: sorted(p for p in (self.fixture_dir / kind).glob("*") if p.is_file())
            if (self.fixture_dir / kind).is_dir()
            else []
            for kind in PROMPT_KINDS
        }
        self.calls = {kind: 0 for kind in PROMPT_KINDS}

    def complete(self, transcript: ChatTranscript) -> str:
        kind = transcript.kind
        if kind not in PROMPT_KINDS:
            raise BackendError(f"unknown prompt kind {kind!r}")
        with self._lock:
            self.calls[kind] += 1
            files = self._fixtures[kind]
            cursor = self._cursors[kind]
            if cursor >= len(files):
                raise MockExhaustedError(
                    f"mock fixtures exhausted for kind {kind!r} after {cursor} responses"
                )
            self._cursors[kind] = cursor + 1
        return files[cursor].read_text(encoding="utf-8")
