"""Prompt assembly, LLM backends, and response parsing.

Backends come in three kinds: scripted (pattern table, for deterministic
closed-loop tests), replay (recorded transcripts keyed by prompt hash), and
remote (a chat-completion endpoint). Scripted and replay report a fixed zero
latency so whole suite runs stay byte-reproducible.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field

import httpx

from . import templates
from .control import ActionMatrix
from .memory import MemoryRecord
from .sensing import ContextSnapshot, describe_scene

PROMPT_BUDGET = 8000  # characters


class BackendError(RuntimeError):
    pass


class BackendTimeout(BackendError):
    pass


class ReplayMiss(BackendError):
    def __init__(self, prompt_hash: str):
        super().__init__(f"no recorded completion for prompt hash {prompt_hash}")
        self.prompt_hash = prompt_hash


class ResponseFormatError(ValueError):
    """Completion has no usable program or action matrix (gate stage one)."""


class ResponseAmbiguous(ResponseFormatError):
    """Completion contains both a program and an action matrix."""


@dataclass(frozen=True)
class PromptBundle:
    system_message: str
    exemplars_text: str
    history_text: str
    context: str
    instruction: str
    directness: str = ""
    trimmed: bool = False

    @property
    def text(self) -> str:
        """Deterministic rendering in the fixed order S, exemplars, H, C, I."""
        parts = [self.system_message]
        if self.exemplars_text:
            parts.append(self.exemplars_text)
        if self.history_text:
            parts.append(self.history_text)
        parts.append(f"{templates.CONTEXT_HEADER}\n{self.context}")
        parts.append(f"{templates.COMMAND_HEADER} {self.instruction}")
        return "\n\n".join(parts)

    @property
    def user_text(self) -> str:
        """Everything after the system message, for chat-format transports."""
        parts = []
        if self.exemplars_text:
            parts.append(self.exemplars_text)
        if self.history_text:
            parts.append(self.history_text)
        parts.append(f"{templates.CONTEXT_HEADER}\n{self.context}")
        parts.append(f"{templates.COMMAND_HEADER} {self.instruction}")
        return "\n\n".join(parts)


def prompt_hash(bundle: PromptBundle) -> str:
    return hashlib.sha256(bundle.text.encode("utf-8")).hexdigest()


def build_prompt(
    system_message: str,
    snapshot: ContextSnapshot,
    instruction: str,
    history: list[MemoryRecord] | None = None,
    directness: str = "",
    shots: int = 0,
    budget: int = PROMPT_BUDGET,
) -> PromptBundle:
    """Assemble the full prompt; oldest history entries are trimmed to budget."""
    if shots not in (0, 3):
        raise ValueError(f"shots must be 0 or 3, got {shots}")
    exemplars_text = templates.render_exemplars(templates.EXEMPLARS[:shots]) if shots else ""
    context = describe_scene(snapshot)
    records = list(history or [])
    trimmed = False
    while True:
        if records:
            entries = "\n".join(
                templates.render_history_entry(r.instruction, r.policy, r.feedback)
                for r in records
            )
            history_text = f"{templates.HISTORY_PREAMBLE}\n{templates.HISTORY_HEADER}\n{entries}"
        else:
            history_text = ""
        bundle = PromptBundle(
            system_message=system_message,
            exemplars_text=exemplars_text,
            history_text=history_text,
            context=context,
            instruction=instruction,
            directness=directness,
            trimmed=trimmed,
        )
        if len(bundle.text) <= budget or not records:
            return bundle
        records.pop(0)  # drop the oldest entry first
        trimmed = True


# --- response parsing --------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)
_THOUGHT_RE = re.compile(r"Thought:\s*(.*?)(?=\n\s*(?:Action:|```|K_p)|\Z)", re.DOTALL)
_MATRIX_RES = {
    name: re.compile(rf"{label}\s*[=:]\s*(-?\d+(?:\.\d+)?)")
    for name, label in [
        ("kp", "K_p"), ("ki", "K_i"), ("kd", "K_d"),
        ("wl", "W_l"), ("wh", "W_h"), ("ws", "W_s"),
    ]
}


@dataclass(frozen=True)
class ParsedResponse:
    thought: str
    program: str | None = None
    matrix: ActionMatrix | None = None


def parse_response(raw: str) -> ParsedResponse:
    """Extract (thought, program | action matrix) from a completion."""
    thought_match = _THOUGHT_RE.search(raw)
    thought = thought_match.group(1).strip() if thought_match else ""
    fence = _FENCE_RE.search(raw)
    program = fence.group(1) if fence else None
    outside = _FENCE_RE.sub("", raw)
    matrix_values = {name: rx.search(outside) for name, rx in _MATRIX_RES.items()}
    has_matrix = all(m is not None for m in matrix_values.values())
    if program is not None and has_matrix:
        raise ResponseAmbiguous("completion contains both a code block and an action matrix")
    if program is not None:
        return ParsedResponse(thought=thought, program=program)
    if has_matrix:
        matrix = ActionMatrix(**{k: float(m.group(1)) for k, m in matrix_values.items()})
        return ParsedResponse(thought=thought, matrix=matrix)
    raise ResponseFormatError("completion has neither a fenced code block nor an action matrix")


def render_response(thought: str, program: str | None = None, matrix: ActionMatrix | None = None) -> str:
    """Canonical completion text; parse_response inverts this rendering."""
    if (program is None) == (matrix is None):
        raise ValueError("exactly one of program/matrix must be given")
    if program is not None:
        body = program if program.endswith("\n") else program + "\n"
        return f"Thought: {thought}\n```\n{body}```\n"
    return (
        f"Thought: {thought}\n"
        f"K_p={matrix.kp:g} K_i={matrix.ki:g} K_d={matrix.kd:g}\n"
        f"W_l={matrix.wl:g} W_h={matrix.wh:g} W_s={matrix.ws:g}\n"
    )


@dataclass(frozen=True)
class AgentExchange:
    """One round trip through a backend."""

    bundle: PromptBundle
    raw: str
    thought: str = ""
    program: str | None = None
    matrix: ActionMatrix | None = None
    latency: float = 0.0
    backend_id: str = ""
    error: str = ""

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


# --- backends ----------------------------------------------------------------


@dataclass
class ScriptedBackend:
    """Ordered (glob pattern, completion) rules; first match wins.

    ``scope`` selects what patterns match against: the bare instruction
    (default) or the full rendered prompt (useful to react to history or
    feedback text).
    """

    rules: list[tuple[str, str]]
    default: str | None = None
    scope: str = "instruction"  # "instruction" | "full"
    backend_id: str = "scripted"

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        haystack = (bundle.text if self.scope == "full" else bundle.instruction).lower()
        for pattern, response in self.rules:
            if fnmatch.fnmatch(haystack, pattern.lower()):
                return response, 0.0
        if self.default is not None:
            return self.default, 0.0
        raise BackendError(f"no scripted rule matches instruction {bundle.instruction!r}")


@dataclass
class ReplayBackend:
    """Recorded transcripts keyed by prompt hash (JSONL: {hash, response})."""

    transcripts: dict[str, str] = field(default_factory=dict)
    backend_id: str = "replay"

    @classmethod
    def from_file(cls, path: str) -> "ReplayBackend":
        transcripts: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entry = json.loads(line)
                    transcripts[entry["hash"]] = entry["response"]
        return cls(transcripts=transcripts)

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        key = prompt_hash(bundle)
        if key not in self.transcripts:
            raise ReplayMiss(key)
        return self.transcripts[key], 0.0


@dataclass
class RecordingBackend:
    """Wraps another backend and captures transcripts for later replay."""

    inner: object
    path: str
    backend_id: str = "recording"

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        raw, latency = self.inner.complete(bundle)  # type: ignore[attr-defined]
        entry = {"hash": prompt_hash(bundle), "response": raw}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return raw, latency


@dataclass
class RemoteBackend:
    """Chat-completion endpoint speaking the common hosted-API convention.

    The request body is ``{"model", "messages": [{role, content}...]}`` and
    the reply is read from ``choices[0].message.content``. The auth token
    comes from the environment, never from configuration files.
    """

    url: str
    model: str
    api_key_env: str = "RIG_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    backend_id: str = "remote"

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": bundle.system_message},
                {"role": "user", "content": bundle.user_text},
            ],
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(0.5 * (2 ** (attempt - 1)))
            start = time.monotonic()
            try:
                response = httpx.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout
                )
                latency = time.monotonic() - start
                response.raise_for_status()
                content = response.json()["choices"][0]["message"]["content"]
                return content, latency
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"backend timed out after {self.timeout}s: {exc}")
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = BackendError(f"backend transport error: {exc}")
        assert last_error is not None
        raise last_error


Backend = ScriptedBackend | ReplayBackend | RecordingBackend | RemoteBackend


def complete(backend: Backend, bundle: PromptBundle) -> tuple[str, float]:
    """Run one completion; latency covers the transport call only."""
    return backend.complete(bundle)


def run_exchange(backend: Backend, bundle: PromptBundle) -> AgentExchange:
    """Complete and parse; parse failures are captured, not raised."""
    raw, latency = complete(backend, bundle)
    backend_id = getattr(backend, "backend_id", "backend")
    try:
        parsed = parse_response(raw)
    except ResponseFormatError as exc:
        return AgentExchange(
            bundle=bundle, raw=raw, latency=latency, backend_id=backend_id, error=str(exc)
        )
    return AgentExchange(
        bundle=bundle,
        raw=raw,
        thought=parsed.thought,
        program=parsed.program,
        matrix=parsed.matrix,
        latency=latency,
        backend_id=backend_id,
    )
