"""QA-pair generation plumbing: prompt templates, a pluggable HTTP text
generation client, a deterministic mock, and fenced-JSON response parsing.

Generation runs at temperature 1.0 with the model's reasoning trace enabled
by default; the machine-readable contract is the first fenced JSON object in
the response, which survives any reasoning preamble.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import requests

from .categories import ALL_CATEGORIES, CATEGORY_SET
from .errors import (
    MissingCategory,
    NonOkStatus,
    ParseFailure,
    TransportError,
    UnexpectedCategory,
    UnknownMode,
)

__all__ = [
    "MODES",
    "PromptRequest",
    "GenerationConfig",
    "GeneratedQA",
    "build_prompt",
    "parse_response",
    "generate",
    "generate_batch",
    "HttpClient",
    "MockClient",
    "OovSink",
]

logger = logging.getLogger(__name__)

MODES = ("single_target", "multi_target", "category_assignment")

_REASONING_CLAUSES = {
    "explicit": "The question must name the target category explicitly.",
    "implicit": ("The question must NOT name the category; it must require the reader "
                 "to infer the target from function, context, or common knowledge."),
}
_LENGTH_CLAUSES = {
    "short": "Keep the question concise: under 20 words.",
    "long": "Write a detailed, descriptive question of at least 20 words.",
}

_FENCE_RE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)


@dataclass(frozen=True)
class PromptRequest:
    mode: str
    image: str  # path or identifier of the image
    region: str  # bbox or mask reference, already rendered as text
    category: str | None = None
    reasoning: str = "explicit"
    linguistic: str = "short"


@dataclass(frozen=True)
class GenerationConfig:
    endpoint: str = ""
    model: str = ""
    temperature: float = 1.0
    reasoning_trace: bool = True
    image_mode: str = "reference"  # "reference" | "base64" | "none"
    api_key_env: str = "SEGCURATE_API_KEY"
    max_retries: int = 1
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class GeneratedQA:
    question: str
    answer: str
    category: str | None
    raw: str


def _template(name: str) -> str:
    return resources.files("segcurate.templates").joinpath(f"{name}.txt").read_text()


def build_prompt(req: PromptRequest) -> str:
    """Deterministic template instantiation; identical requests give
    identical prompts."""
    if req.mode not in MODES:
        raise UnknownMode(f"mode {req.mode!r} not in {MODES}")
    if req.mode == "category_assignment":
        if req.category is not None:
            raise UnexpectedCategory("category_assignment requests carry no category")
        return _template("category_assignment").format(
            image=req.image,
            region=req.region,
            vocabulary=", ".join(ALL_CATEGORIES),
        )
    if not req.category:
        raise MissingCategory(f"mode {req.mode!r} requires a category")
    return _template(req.mode).format(
        image=req.image,
        region=req.region,
        category=req.category,
        reasoning_clause=_REASONING_CLAUSES[req.reasoning],
        length_clause=_LENGTH_CLAUSES[req.linguistic],
    )


def parse_response(text: str, mode: str = "single_target"):
    """Extract the first fenced JSON object.

    QA modes return (question, answer); assignment mode returns the category
    string. Extra fenced objects are ignored with a warning. ParseFailure
    always carries the raw text.
    """
    matches = _FENCE_RE.findall(text)
    if not matches:
        raise ParseFailure("no fenced JSON object in response", raw=text)
    if len(matches) > 1:
        logger.warning("response contains %d fenced objects; using the first", len(matches))
    try:
        obj = json.loads(matches[0])
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"fenced block is not valid JSON: {exc}", raw=text) from exc
    if mode == "category_assignment":
        category = obj.get("category")
        if not isinstance(category, str) or not category.strip():
            raise ParseFailure("missing or empty 'category' key", raw=text)
        return category.strip()
    question, answer = obj.get("question"), obj.get("answer")
    if not isinstance(question, str) or not question.strip():
        raise ParseFailure("missing or empty 'question' key", raw=text)
    if not isinstance(answer, str) or not answer.strip():
        raise ParseFailure("missing or empty 'answer' key", raw=text)
    return question.strip(), answer.strip()


class HttpClient:
    """POSTs generation requests as JSON; returns the response body text."""

    def __init__(self, cfg: GenerationConfig, api_key: str | None = None):
        self.cfg = cfg
        self.api_key = api_key

    def send(self, payload: dict) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(self.cfg.endpoint, json=payload, headers=headers,
                                 timeout=self.cfg.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.cfg.endpoint} failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise NonOkStatus(resp.status_code, resp.text)
        return resp.text


class MockClient:
    """Deterministic offline client.

    With ``scripted`` responses it replays them in order (cycling); otherwise
    it fabricates a well-formed response derived from the prompt hash, so
    desk-scale runs need no external service.
    """

    def __init__(self, scripted: list[str] | None = None):
        self.scripted = scripted
        self._i = 0
        self.requests: list[dict] = []

    def send(self, payload: dict) -> str:
        self.requests.append(payload)
        if self.scripted is not None:
            text = self.scripted[self._i % len(self.scripted)]
            self._i += 1
            return text
        prompt = payload.get("prompt", "")
        digest = hashlib.sha256(prompt.encode()).hexdigest()[:8]
        if '"category"' in prompt:
            pick = ALL_CATEGORIES[int(digest, 16) % len(ALL_CATEGORIES)]
            body = {"category": pick}
        else:
            body = {
                "question": f"Which region matches the described target? [{digest}]",
                "answer": f"The highlighted region is the target. [{digest}]",
            }
        return "Reasoning: looking at the region.\n```json\n" + json.dumps(body) + "\n```"


def _payload(req: PromptRequest, cfg: GenerationConfig) -> dict:
    payload = {
        "model": cfg.model,
        "prompt": build_prompt(req),
        "temperature": cfg.temperature,
        "reasoning_trace": cfg.reasoning_trace,
    }
    if cfg.image_mode == "reference":
        payload["image"] = req.image
    elif cfg.image_mode == "base64":
        with open(req.image, "rb") as fh:
            payload["image"] = base64.b64encode(fh.read()).decode()
    return payload


def generate(req: PromptRequest, cfg: GenerationConfig, client) -> GeneratedQA:
    """One request/parse round trip; retries transport failures once by
    default. Never fabricates fields the response did not contain."""
    payload = _payload(req, cfg)
    attempts = cfg.max_retries + 1
    for attempt in range(attempts):
        try:
            raw = client.send(payload)
            break
        except TransportError:
            if attempt + 1 == attempts:
                raise
    parsed = parse_response(raw, req.mode)
    if req.mode == "category_assignment":
        return GeneratedQA(question="", answer="", category=parsed, raw=raw)
    question, answer = parsed
    return GeneratedQA(question=question, answer=answer, category=req.category, raw=raw)


class OovSink:
    """Append-only, thread-safe sink for out-of-vocabulary assignments."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: list[dict] = []

    def put(self, item: dict) -> None:
        with self._lock:
            self._items.append(item)

    def items(self) -> list[dict]:
        with self._lock:
            return list(self._items)


def generate_batch(
    requests_: list[PromptRequest],
    cfg: GenerationConfig,
    client,
    max_in_flight: int = 4,
    oov_sink: OovSink | None = None,
) -> list[dict]:
    """Concurrent generation with an in-flight cap.

    Each row reports either the generated fields or the failure kind; raw
    text is preserved on parse failures, and assignment results outside the
    category vocabulary are flagged and routed to ``oov_sink``.
    """
    sink = oov_sink if oov_sink is not None else OovSink()

    def run(idx_req: tuple[int, PromptRequest]) -> dict:
        idx, req = idx_req
        row: dict = {"index": idx, "mode": req.mode}
        try:
            qa = generate(req, cfg, client)
        except ParseFailure as exc:
            row.update({"error": "ParseFailure", "message": str(exc), "raw": exc.raw})
            return row
        except NonOkStatus as exc:
            row.update({"error": "NonOkStatus", "status": exc.status})
            return row
        except TransportError as exc:
            row.update({"error": "Transport", "message": str(exc)})
            return row
        row.update({"question": qa.question, "answer": qa.answer,
                    "category": qa.category, "oov": False})
        if req.mode == "category_assignment" and qa.category not in CATEGORY_SET:
            row["oov"] = True
            sink.put(row)
        return row

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        return list(pool.map(run, enumerate(requests_)))
