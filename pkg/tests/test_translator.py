import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest

from veritrans.errors import (AuthError, EmptyInputError, MissingAliasError, ParseError,
                              SchemaError, TransportError)
from veritrans.formula import parse
from veritrans.translator import (HttpTranslator, LlmConfig, OfflineTranslator, Stage,
                                  build_nl2pl_prompt, build_pl2nl_prompt, call_llm,
                                  extract_mapping_and_formula, extract_reconstruction,
                                  parse_varmap, serialize_varmap, verbalize_offline)

KEY = "VT_TEST_KEY"


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv(KEY, "secret")


def cfg(url="http://stub/v1/chat", **kw):
    kw.setdefault("api_key_env_var", KEY)
    kw.setdefault("backoff_base", 0.0)
    return LlmConfig(url, "test-model", **kw)


def completion(content="Formula: (a -> b)", usage=None):
    body = {"choices": [{"message": {"role": "assistant", "content": content}}]}
    if usage is not None:
        body["usage"] = usage
    return body


# ---- variable maps -------------------------------------------------------

def test_parse_varmap_forms():
    assert parse_varmap('{"x(0,1)": "speed", "a": "alarm"}') == {"x_0_1": "speed", "a": "alarm"}
    assert parse_varmap("x(2,0): speed at city\n- b: the brake\nnoise") == \
        {"x_2_0": "speed at city", "b": "the brake"}
    assert parse_varmap("") == {}
    with pytest.raises(ValueError):
        parse_varmap("{not json")


def test_serialize_varmap_roundtrip():
    m = {"x_0_1": "speed ↦ high", "a": 'say "hi"'}
    assert parse_varmap(serialize_varmap(m)) == m
    assert serialize_varmap({}) == ""


# ---- prompts -------------------------------------------------------------

def test_nl2pl_prompt_structure():
    p = build_nl2pl_prompt("Cooling", {"T": "temp high"}, "If T then S.")
    assert p.stage is Stage.NL2PL
    assert [m["role"] for m in p.messages()] == ["system", "user"]
    u = p.user_text
    assert u.index("Scenario:") < u.index("Variable Mapping:") < u.index("Conditions:")
    assert "T: temp high" in u and "If T then S." in u
    s = p.system_text
    assert "Formula:" in s and "declared symbols" in s and "parenthesize" in s and "!" in s


def test_prompts_are_deterministic():
    a = build_nl2pl_prompt("s", {"a": "x"}, "c")
    b = build_nl2pl_prompt("s", {"a": "x"}, "c")
    assert a == b and a.sha256 == b.sha256
    assert a.sha256 != build_nl2pl_prompt("s", {"a": "x"}, "c2").sha256


def test_nl2pl_empty_conditions():
    with pytest.raises(EmptyInputError):
        build_nl2pl_prompt("s", {}, "   ")


def test_pl2nl_prompt():
    p = build_pl2nl_prompt({"x_2_0": "speed at city"}, "(x_2_0 | !x_2_0)")
    assert "x_2_0 ↦ speed at city" in p.user_text
    assert "(x_2_0 | !x_2_0)" in p.user_text
    assert "Reconstructed Conditions:" in p.system_text
    with pytest.raises(ParseError):
        build_pl2nl_prompt({}, "(a &")


# ---- extraction ----------------------------------------------------------

@pytest.mark.parametrize("raw, formula", [
    ("Mapping:\na: valve open\nb: low pressure\n\nFormula: (a -> b)", "(a -> b)"),
    ("Here you go.\n**Formula:** `(~x(0,0) V x(0,1))`", "(~x(0,0) V x(0,1))"),
    ("Reasoning first.\n(a & !b)\nDone.", "(a & !b)"),
    ("Final formula: ((p | q) & r).", "((p | q) & r)"),
    ("Formula: (a &\nformula: (a & b)", "(a & b)"),
    ("I cannot answer this.", None),
    ("", None),
    ("Mapping:\nvalve: open\n", None),
])
def test_extract_formula(raw, formula):
    assert extract_mapping_and_formula(raw)[1] == formula


def test_extract_mapping():
    raw = "### Variable Mapping\n- x(0,1): speed high\n- b: brake\n\nFormula: (x_0_1 -> b)"
    mapping, formula = extract_mapping_and_formula(raw)
    assert mapping == {"x_0_1": "speed high", "b": "brake"}
    assert formula == "(x_0_1 -> b)"
    assert extract_mapping_and_formula("Formula: a")[0] is None


def test_extract_never_raises_on_garbage():
    for raw in ["Formula: $$$", "Mapping:\n:::\n", "(((", None]:
        extract_mapping_and_formula(raw)


def test_extract_reconstruction():
    assert extract_reconstruction("Sure.\nReconstructed Conditions:\nIf a, then b.\n- and c") == \
        "If a, then b. and c"
    assert extract_reconstruction("reconstructed conditions: inline text") == "inline text"
    assert extract_reconstruction("nothing here") == ""


# ---- offline verbalizer --------------------------------------------------

def test_verbalize_cases():
    m = {"T": "the temperature is high.", "C": "cooling is offline", "S": "shutdown", "A": "alarm"}
    f = parse("((T & C) -> (S | A))")[0]
    assert verbalize_offline(f, m) == "if the temperature is high and cooling is offline, then shutdown or alarm"
    assert verbalize_offline(parse("!T")[0], m) == "it is not the case that the temperature is high"
    assert verbalize_offline(parse("T <-> C")[0], m) == "the temperature is high if and only if cooling is offline"
    assert verbalize_offline(parse("(T | C) & S")[0], m) == "the temperature is high or cooling is offline, and shutdown"


def test_verbalize_indexed_mapping():
    m = {"x_0_0": "guest one at table one", "x_0_1": "guest one at table two"}
    out = verbalize_offline(parse("(~x(0,0) V x(0,1))")[0], m)
    assert out == "it is not the case that guest one at table one or guest one at table two"


def test_verbalize_missing_alias():
    with pytest.raises(MissingAliasError) as info:
        verbalize_offline(parse("a & zz")[0], {"a": "x"})
    assert info.value.missing == ["zz"]


def test_offline_translator():
    t = OfflineTranslator()
    out = t.translate("s", {"a": "valve"}, "cond", reference_formula="(a | !a)")
    assert out.extracted_formula == "(a | !a)" and out.extracted_mapping == {"a": "valve"}
    assert t.translate("s", {}, "cond").extracted_formula is None
    rec = t.reconstruct("(a -> b)", {"a": "it rains", "b": "it pours"})
    assert extract_reconstruction(rec.raw_text) == "if it rains, then it pours"


# ---- HTTP client (mock transport) ----------------------------------------

def mock_client(responses, seen=None):
    queue = list(responses)

    def handler(request):
        if seen is not None:
            seen.append(request)
        item = queue.pop(0)
        if isinstance(item, Exception):
            raise item
        status, body = item
        if isinstance(body, (dict, list)):
            return httpx.Response(status, json=body)
        return httpx.Response(status, text=body)
    return httpx.Client(transport=httpx.MockTransport(handler))


def prompt():
    return build_nl2pl_prompt("s", {"a": "x", "b": "y"}, "if a then b")


def test_call_llm_success(api_key):
    seen = []
    usage = {"prompt_tokens": 11, "completion_tokens": 4, "total_tokens": 15}
    out = call_llm(cfg(), prompt(), mock_client([(200, completion(usage=usage))], seen))
    assert out.raw_text == "Formula: (a -> b)"
    assert (out.prompt_tokens, out.completion_tokens, out.total_tokens) == (11, 4, 15)
    sent = json.loads(seen[0].content)
    assert sent["temperature"] == 0.0 and sent["model"] == "test-model"
    assert [m["role"] for m in sent["messages"]] == ["system", "user"]
    assert seen[0].headers["authorization"] == "Bearer secret"


def test_missing_usage_is_none(api_key):
    out = call_llm(cfg(), prompt(), mock_client([(200, completion())]))
    assert out.total_tokens is None


def test_missing_key_fails_before_network(monkeypatch):
    monkeypatch.delenv(KEY, raising=False)
    seen = []
    with pytest.raises(AuthError):
        call_llm(cfg(), prompt(), mock_client([], seen))
    assert seen == []


def test_retry_then_success_with_backoff(api_key):
    sleeps = []
    client = mock_client([(503, "busy"), httpx.ConnectError("refused"), (200, completion())])
    out = call_llm(cfg(backoff_base=0.5), prompt(), client, sleep=sleeps.append)
    assert out.raw_text.startswith("Formula")
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted(api_key):
    seen = []
    client = mock_client([(500, "x")] * 4, seen)
    with pytest.raises(TransportError):
        call_llm(cfg(max_retries=3), prompt(), client, sleep=lambda s: None)
    assert len(seen) == 4


@pytest.mark.parametrize("status", [401, 403])
def test_auth_failure_not_retried(api_key, status):
    seen = []
    with pytest.raises(AuthError):
        call_llm(cfg(), prompt(), mock_client([(status, "no")], seen), sleep=lambda s: None)
    assert len(seen) == 1


def test_other_client_error_not_retried(api_key):
    seen = []
    with pytest.raises(TransportError):
        call_llm(cfg(), prompt(), mock_client([(400, "bad")], seen), sleep=lambda s: None)
    assert len(seen) == 1


@pytest.mark.parametrize("body", [{"choices": []}, {"foo": 1}, "not json",
                                  {"choices": [{"message": {"content": 3}}]}])
def test_schema_errors(api_key, body):
    with pytest.raises(SchemaError):
        call_llm(cfg(), prompt(), mock_client([(200, body)]))


def test_http_translator_extracts(api_key):
    raw = "Mapping:\na: x\nb: y\n\nFormula: (a -> b)"
    t = HttpTranslator(cfg(), mock_client([(200, completion(raw))]))
    out = t.translate("s", {"a": "x"}, "if a then b")
    assert out.extracted_formula == "(a -> b)" and out.extracted_mapping == {"a": "x", "b": "y"}


# ---- HTTP client (real local server) -------------------------------------

class _Handler(BaseHTTPRequestHandler):
    delay = 0.0

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        time.sleep(self.delay)
        payload = json.dumps(completion("Formula: (p & q)", {"total_tokens": 9})).encode()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    servers = []

    def start(delay=0.0):
        handler = type("H", (_Handler,), {"delay": delay})
        srv = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return f"http://127.0.0.1:{srv.server_address[1]}/v1/chat/completions"
    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def test_local_server_roundtrip(api_key, stub_server):
    out = call_llm(cfg(stub_server()), prompt())
    assert out.raw_text == "Formula: (p & q)" and out.total_tokens == 9
    assert out.latency > 0


def test_local_server_timeout(api_key, stub_server):
    url = stub_server(delay=0.5)
    with pytest.raises(TransportError):
        call_llm(cfg(url, timeout=0.1, max_retries=1), prompt(), sleep=lambda s: None)
