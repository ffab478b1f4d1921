"""NL <-> PL translation stages.

Two interchangeable back ends share one interface:

* :class:`HttpTranslator` talks to a chat-completion endpoint at temperature 0.
* :class:`OfflineTranslator` needs no network. Stage 1 echoes a reference
  formula when the record has one, and stage 2 verbalizes the formula from
  its variable aliases.
"""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import string
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Dict, List, Optional, Protocol, Tuple

import httpx

from .errors import (AuthError, EmptyInputError, MissingAliasError, SchemaError,
                     TransportError, VeriTransError)
from .formula import (And, Ast, Iff, Implies, Not, Or, Var, VarMap,
                      canonicalize_indexed_vars, parse, variables)

log = logging.getLogger(__name__)

PROMPT_VERSION = "v1"
RECONSTRUCTION_ANCHOR = "Reconstructed Conditions:"

RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


# --------------------------------------------------------------------------
# Variable maps
# --------------------------------------------------------------------------

_MAP_LINE_RE = re.compile(
    r"^\s*(?:[-*]\s+)?`?(x\(\s*\d+\s*,\s*\d+\s*\)|[A-Za-z_][A-Za-z0-9_]*)`?\s*(?::|↦|=)\s*(.+?)\s*$"
)


def parse_varmap(text: str) -> VarMap:
    """Read a mapping from JSON (object) or ``name: description`` lines.

    Returns an empty map for blank input. Keys are canonicalized
    (``x(0,1)`` -> ``x_0_1``); lines that do not look like entries are skipped.
    """
    text = (text or "").strip()
    if not text:
        return {}
    if text.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"variable mapping is not valid JSON: {exc}") from None
        return {canonicalize_indexed_vars(str(k)).strip(): str(v) for k, v in data.items()}
    out: VarMap = {}
    for line in re.split(r"[\n;]", text):
        m = _MAP_LINE_RE.match(line)
        if m:
            out[canonicalize_indexed_vars(m.group(1))] = m.group(2).strip().strip('"')
    return out


def serialize_varmap(mapping: VarMap) -> str:
    return json.dumps(mapping, ensure_ascii=False) if mapping else ""


def mapping_lines(mapping: VarMap, sep: str = ": ") -> str:
    return "\n".join(f"{name}{sep}{desc}" for name, desc in mapping.items())


# --------------------------------------------------------------------------
# Prompts
# --------------------------------------------------------------------------

class Stage(str, enum.Enum):
    NL2PL = "NL2PL"
    PL2NL = "PL2NL"


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    stage: Stage

    def messages(self) -> List[Dict[str, str]]:
        return [{"role": "system", "content": self.system_text},
                {"role": "user", "content": self.user_text}]

    @property
    def sha256(self) -> str:
        payload = json.dumps([self.stage.value, self.system_text, self.user_text], ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _template(name: str) -> str:
    return resources.files("veritrans.prompts").joinpath(f"{name}_{PROMPT_VERSION}.txt").read_text("utf-8")


def build_nl2pl_prompt(scenario: str, seed_mapping: VarMap, conditions: str) -> PromptBundle:
    if not conditions or not conditions.strip():
        raise EmptyInputError("conditions text is empty")
    user = string.Template(_template("nl2pl.user")).substitute(
        scenario=(scenario or "").strip() or "(none)",
        mapping=mapping_lines(seed_mapping) or "(none declared)",
        conditions=conditions.strip(),
    )
    return PromptBundle(_template("nl2pl.system").strip(), user.strip(), Stage.NL2PL)


def build_pl2nl_prompt(mapping: VarMap, formula: str) -> PromptBundle:
    parse(formula)  # raises ParseError on bad input
    user = string.Template(_template("pl2nl.user")).substitute(
        mapping=mapping_lines(mapping, " ↦ ") or "(none)",
        formula=formula.strip(),
    )
    return PromptBundle(_template("pl2nl.system").strip(), user.strip(), Stage.PL2NL)


# --------------------------------------------------------------------------
# Extraction from model output
# --------------------------------------------------------------------------

_MAPPING_HEADING_RE = re.compile(r"^\s*(?:#+\s*)?(?:\*\*)?[A-Za-z ]*mapping(?:\*\*)?\s*:?\s*(?:\*\*)?\s*$", re.I)
_FORMULA_LABEL_RE = re.compile(
    r"^\s*(?:[-*>#]+\s*)?(?:\*\*)?(?:final\s+)?(?:propositional\s+(?:logic\s+)?)?"
    r"(?:formula|pl|φ|phi|answer)(?:\*\*)?\s*[:=]\s*(?:\*\*)?\s*(.*)$",
    re.I,
)
_OPERATOR_CHARS = set("!&|()-<>~¬∧∨→↔")


def _clean_formula_line(line: str) -> str:
    line = line.strip().strip("`$").strip()
    if line.endswith("."):
        line = line[:-1].rstrip()
    return line


def _parses(candidate: str) -> bool:
    try:
        parse(candidate)
    except VeriTransError:
        return False
    return True


def extract_mapping_and_formula(raw: str) -> Tuple[Optional[VarMap], Optional[str]]:
    """Pull a variable mapping and a formula out of free-form model output.

    The mapping is the run of ``name: description`` lines under a heading
    containing "Mapping". The formula is the first line labelled
    ``Formula:`` (or similar) that parses; failing that, the first unlabelled
    line that parses and contains an operator. Missing pieces come back as
    None. Never raises.
    """
    lines = (raw or "").splitlines()
    mapping: Optional[VarMap] = None
    mapping_rows = set()
    for i, line in enumerate(lines):
        if not _MAPPING_HEADING_RE.match(line):
            continue
        entries: VarMap = {}
        for j in range(i + 1, len(lines)):
            if not lines[j].strip():
                if entries:
                    break
                continue
            m = _MAP_LINE_RE.match(lines[j])
            if not m or _FORMULA_LABEL_RE.match(lines[j]):
                break
            entries[canonicalize_indexed_vars(m.group(1))] = m.group(2).strip()
            mapping_rows.add(j)
        if entries:
            mapping = entries
            break

    formula = None
    for line in lines:
        m = _FORMULA_LABEL_RE.match(line)
        if m:
            candidate = _clean_formula_line(m.group(1))
            if candidate and _parses(candidate):
                formula = candidate
                break
    if formula is None:
        for j, line in enumerate(lines):
            if j in mapping_rows:
                continue
            candidate = _clean_formula_line(line)
            if candidate and _OPERATOR_CHARS & set(candidate) and _parses(candidate):
                formula = candidate
                break
    return mapping, formula


def extract_reconstruction(raw: str) -> str:
    """Text under the ``Reconstructed Conditions:`` heading, or ''."""
    lines = (raw or "").splitlines()
    anchor = RECONSTRUCTION_ANCHOR.lower()
    for i, line in enumerate(lines):
        pos = line.lower().find(anchor)
        if pos < 0:
            continue
        body = [line[pos + len(anchor):].strip()] + [l.strip() for l in lines[i + 1:]]
        return " ".join(b.lstrip("-* ").strip() for b in body if b.strip())
    return ""


# --------------------------------------------------------------------------
# HTTP client
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str
    model_name: str
    timeout: float = 60.0
    max_retries: int = 3
    api_key_env_var: str = "OPENAI_API_KEY"
    backoff_base: float = 1.0

    @property
    def temperature(self) -> float:
        # fixed; deliberately not a constructor argument
        return 0.0


@dataclass
class TranslatorOutput:
    raw_text: str
    extracted_formula: Optional[str] = None
    extracted_mapping: Optional[VarMap] = None
    latency: float = 0.0
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None
    total_tokens: Optional[int] = None
    prompt: Optional[PromptBundle] = None
    request_body: Optional[Dict[str, Any]] = None
    response_body: Optional[Dict[str, Any]] = None


def _usage_int(usage: Dict[str, Any], key: str) -> Optional[int]:
    value = usage.get(key)
    return value if isinstance(value, int) and not isinstance(value, bool) else None


def call_llm(config: LlmConfig, prompt: PromptBundle, client: Optional[httpx.Client] = None,
             sleep=time.sleep) -> TranslatorOutput:
    """POST one chat-completion request.

    Retries transport failures and 408/429/5xx responses with exponential
    backoff: the k-th retry waits ``backoff_base * 2**(k-1)`` seconds, no jitter. Auth and
    schema failures are raised immediately.
    """
    api_key = os.environ.get(config.api_key_env_var)
    if not api_key:
        raise AuthError(f"environment variable {config.api_key_env_var} is not set")
    body = {
        "model": config.model_name,
        "temperature": config.temperature,
        "messages": prompt.messages(),
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=config.timeout)
    try:
        last_error = "no attempt made"
        for attempt in range(config.max_retries + 1):
            if attempt:
                sleep(config.backoff_base * 2 ** (attempt - 1))
            started = time.perf_counter()
            try:
                resp = client.post(config.endpoint_url, json=body, headers=headers,
                                   timeout=config.timeout)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("attempt %d/%d failed: %s", attempt + 1, config.max_retries + 1, last_error)
                continue
            latency = time.perf_counter() - started
            if resp.status_code in (401, 403):
                raise AuthError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("attempt %d/%d failed: %s", attempt + 1, config.max_retries + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _read_completion(resp, body, prompt, latency)
        raise TransportError(f"giving up after {config.max_retries + 1} attempts: {last_error}")
    finally:
        if own_client:
            client.close()


def _read_completion(resp: httpx.Response, body, prompt, latency) -> TranslatorOutput:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise SchemaError(f"unexpected response shape: {exc!r}") from None
    if not isinstance(content, str):
        raise SchemaError("choices[0].message.content is not a string")
    usage = data.get("usage") or {}
    return TranslatorOutput(
        raw_text=content,
        latency=latency,
        prompt_tokens=_usage_int(usage, "prompt_tokens"),
        completion_tokens=_usage_int(usage, "completion_tokens"),
        total_tokens=_usage_int(usage, "total_tokens"),
        prompt=prompt,
        request_body=body,
        response_body=data,
    )


# --------------------------------------------------------------------------
# Offline verbalizer
# --------------------------------------------------------------------------

def _describe(desc: str) -> str:
    return desc.strip().rstrip(".;,").strip()


def verbalize_offline(formula: Ast, mapping: VarMap) -> str:
    """Template rendering of a formula through its variable aliases.

    A binary operand that is itself a binary node of a different kind is
    set off with a comma, which keeps nesting readable without parentheses.
    """
    missing = [v for v in variables(formula) if v not in mapping]
    if missing:
        raise MissingAliasError(missing)

    def joined(node, word: str) -> str:
        left, right = walk(node.left), walk(node.right)
        nested = any(isinstance(c, (And, Or, Implies, Iff)) and type(c) is not type(node)
                     for c in (node.left, node.right))
        sep = f", {word} " if nested else f" {word} "
        return left + sep + right

    def walk(node: Ast) -> str:
        if isinstance(node, Var):
            return _describe(mapping[node.name])
        if isinstance(node, Not):
            return "it is not the case that " + walk(node.child)
        if isinstance(node, And):
            return joined(node, "and")
        if isinstance(node, Or):
            return joined(node, "or")
        if isinstance(node, Implies):
            return f"if {walk(node.left)}, then {walk(node.right)}"
        if isinstance(node, Iff):
            return joined(node, "if and only if")
        raise TypeError(f"not an AST node: {node!r}")

    return walk(formula)


# --------------------------------------------------------------------------
# Translator back ends
# --------------------------------------------------------------------------

class Translator(Protocol):
    name: str

    def translate(self, scenario: str, mapping: VarMap, conditions: str,
                  reference_formula: Optional[str] = None) -> TranslatorOutput: ...

    def reconstruct(self, formula: str, mapping: VarMap) -> TranslatorOutput: ...


class HttpTranslator:
    name = "http"

    def __init__(self, config: LlmConfig, client: Optional[httpx.Client] = None):
        self.config = config
        self.client = client

    def translate(self, scenario, mapping, conditions, reference_formula=None):
        prompt = build_nl2pl_prompt(scenario, mapping, conditions)
        out = call_llm(self.config, prompt, self.client)
        out.extracted_mapping, out.extracted_formula = extract_mapping_and_formula(out.raw_text)
        return out

    def reconstruct(self, formula, mapping):
        prompt = build_pl2nl_prompt(mapping, formula)
        return call_llm(self.config, prompt, self.client)


class OfflineTranslator:
    """Hermetic stand-in: echoes reference formulas, verbalizes from aliases."""

    name = "offline"

    def translate(self, scenario, mapping, conditions, reference_formula=None):
        prompt = build_nl2pl_prompt(scenario, mapping, conditions)
        started = time.perf_counter()
        lines = []
        if mapping:
            lines += ["Mapping:", mapping_lines(mapping), ""]
        if reference_formula and reference_formula.strip():
            lines.append(f"Formula: {reference_formula.strip()}")
        raw = "\n".join(lines)
        out = TranslatorOutput(raw_text=raw, prompt=prompt, latency=time.perf_counter() - started)
        out.extracted_mapping, out.extracted_formula = extract_mapping_and_formula(raw)
        return out

    def reconstruct(self, formula, mapping):
        prompt = build_pl2nl_prompt(mapping, formula)
        started = time.perf_counter()
        text = verbalize_offline(parse(formula)[0], mapping)
        return TranslatorOutput(raw_text=f"{RECONSTRUCTION_ANCHOR}\n{text}", prompt=prompt,
                                latency=time.perf_counter() - started)
