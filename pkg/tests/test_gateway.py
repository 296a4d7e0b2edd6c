import json
import threading
import time
from pathlib import Path

import httpx
import pytest

from lmpcheck.corpus import load_corpus
from lmpcheck.gateway import (
    load_config,
    API_KEY_ENV,
    DEFAULT_PREFIX,
    ConfigError,
    CorpusGenerator,
    GenerationConfig,
    GenerationUnavailable,
    HttpGenerator,
    PromptPrefix,
    PromptRef,
    ProtocolError,
    ScriptedGenerator,
    SyntheticGenerator,
    build_prompt,
    config_from_dict,
    generate,
    load_config,
    make_generator,
)

GOLDEN = Path(__file__).parent / "data" / "golden"
HTTP = GenerationConfig(backend="http", endpoint="http://llm.test/v1/completions", retries=2, backoff=0.0)


def test_build_prompt_golden():
    text = build_prompt("Say good day in every office", DEFAULT_PREFIX)
    assert text == (GOLDEN / "prompt_good_day.txt").read_text()
    assert text.endswith("# Task: Say good day in every office\ndef task():\n")


def test_prefix_needs_examples_and_all_skills():
    with pytest.raises(ValueError):
        PromptPrefix("x", DEFAULT_PREFIX.skills, ())
    with pytest.raises(ValueError):
        PromptPrefix("x", DEFAULT_PREFIX.skills[:7], DEFAULT_PREFIX.examples)


def test_prefix_hash_is_stable_and_sensitive():
    assert DEFAULT_PREFIX.sha256 == PromptPrefix("v1", DEFAULT_PREFIX.skills, DEFAULT_PREFIX.examples).sha256
    assert DEFAULT_PREFIX.sha256 != PromptPrefix("v2", DEFAULT_PREFIX.skills, DEFAULT_PREFIX.examples).sha256
    assert len(DEFAULT_PREFIX.sha256) == 64


@pytest.mark.parametrize("kw", [
    {"temperature": -0.1}, {"top_p": 0.0}, {"top_p": 1.5}, {"samples_per_prompt": 0},
    {"backend": "magic"}, {"backend": "http"}, {"backend": "corpus"}, {"backend": "scripted"},
    {"api_style": "smoke-signals"},
])
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        GenerationConfig(**kw)


def test_config_defaults():
    cfg = GenerationConfig()
    assert (cfg.temperature, cfg.top_p, cfg.samples_per_prompt) == (0.2, 0.95, 50)


@pytest.mark.parametrize("doc", [{"api_key": "sk-123"}, {"headers": {"Authorization": "Bearer x"}},
                                 {"access_token": "t"}, {"client_secret": "s"}])
def test_secrets_rejected_in_config(doc):
    with pytest.raises(ConfigError, match=API_KEY_ENV):
        config_from_dict({"backend": "synthetic", **doc})


def test_max_tokens_is_not_a_secret():
    assert config_from_dict({"backend": "synthetic", "max_tokens": 64}).max_tokens == 64


def test_unknown_config_key():
    with pytest.raises(ConfigError, match="temprature"):
        config_from_dict({"temprature": 0.1})


def test_load_config_resolves_paths(tmp_path):
    (tmp_path / "c.yaml").write_text("backend: corpus\ncorpus_path: comps\nsamples_per_prompt: 3\n")
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.corpus_path == str(tmp_path / "comps") and cfg.samples_per_prompt == 3
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def cassette(request):
    return httpx.Response(200, json=json.loads((GOLDEN / "cassette_completions.json").read_text()))


def test_cassette_extraction_golden():
    progs = generate("prompt", HTTP, 2, "t/p0", transport=httpx.MockTransport(cassette))
    assert progs[0].text + "\n" == (GOLDEN / "cassette_program_0.lmp").read_text()
    assert progs[0].origin == "t/p0#0@http"
    assert progs[1].text == "def task():"


def test_request_shape_and_api_key(monkeypatch):
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return cassette(request)

    monkeypatch.setenv(API_KEY_ENV, "secret-from-env")
    generate("the prompt", HTTP, 2, transport=httpx.MockTransport(handler))
    body = seen["body"]
    assert body["prompt"] == "the prompt"
    assert (body["temperature"], body["top_p"], body["n"]) == (0.2, 0.95, 2)
    assert body["stop"] == list(HTTP.stop_sequences)
    assert seen["auth"] == "Bearer secret-from-env"


def test_server_errors_exhaust_retries():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    with pytest.raises(GenerationUnavailable) as e:
        generate("p", HTTP, 1, transport=httpx.MockTransport(handler))
    assert len(calls) == HTTP.retries + 1 == e.value.attempts


def test_transport_errors_retry_then_succeed():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            raise httpx.ConnectError("refused")
        return cassette(request)

    progs = generate("p", HTTP, 2, transport=httpx.MockTransport(handler))
    assert len(progs) == 2 and len(calls) == 3


@pytest.mark.parametrize("response", [
    httpx.Response(400, json={"error": "bad"}),
    httpx.Response(200, content=b"not json"),
    httpx.Response(200, json={"nothing": []}),
    httpx.Response(200, json={"choices": [{"text": 3}]}),
    httpx.Response(200, json={"choices": []}),
])
def test_protocol_errors(response):
    with pytest.raises(ProtocolError) as e:
        generate("p", HTTP, 1, transport=httpx.MockTransport(lambda r: response))
    assert e.value.attempts == 1


def test_chat_adapter():
    cfg = GenerationConfig(backend="http", endpoint="http://llm.test/chat", api_style="chat")

    def handler(request):
        body = json.loads(request.content)
        assert body["messages"][0]["content"] == "p"
        text = "Here you go:\n```python\ndef task():\n    say('hi')\n```"
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})

    [prog] = generate("p", cfg, 1, transport=httpx.MockTransport(handler))
    assert prog.text == "def task():\n    say('hi')"


def test_in_flight_limit():
    cfg = GenerationConfig(backend="http", endpoint="http://llm.test/v1", max_in_flight=2)
    active, peak = [0], [0]
    lock = threading.Lock()

    def handler(request):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return httpx.Response(200, json={"choices": [{"text": "    pass\n"}]})

    gen = HttpGenerator(cfg, transport=httpx.MockTransport(handler))
    threads = [threading.Thread(target=gen.next_candidate, args=(PromptRef("t", i, "x"), 1)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2


def test_http_generator_batches_samples():
    calls = []

    def handler(request):
        calls.append(json.loads(request.content)["n"])
        return cassette(request)

    gen = HttpGenerator(HTTP, transport=httpx.MockTransport(handler))
    a = gen.next_candidate(PromptRef("t", 0, "x", 0, 2), 1)
    b = gen.next_candidate(PromptRef("t", 0, "x", 1, 2), 1)
    assert calls == [2] and a.origin == "t/p0#0@http" and b.origin == "t/p0#1@http"


def test_corpus_backend_order_and_wraparound(tmp_path):
    d = tmp_path / "t" / "p0"
    d.mkdir(parents=True)
    for i in (0, 2, 10):
        (d / f"{i}.lmp").write_text(f"say('{i}')\n")
    gen = CorpusGenerator(tmp_path)
    assert [p.text for p in gen.programs("t/p0")] == ["say('0')", "say('2')", "say('10')"]
    got = [gen.next_candidate(PromptRef("t", 0, "x", s, 2), a).text for a in (1, 2) for s in (0, 1)]
    assert got == ["say('0')", "say('2')", "say('10')", "say('0')"]
    assert gen.next_candidate(PromptRef("t", 0, "x", 1, 2), 1).origin == "t/p0#2@corpus"
    with pytest.raises(GenerationUnavailable):
        gen.next_candidate(PromptRef("t", 1, "x"), 1)


def test_corpus_backend_prose_only_file_is_empty_program(tmp_path):
    d = tmp_path / "t" / "p0"
    d.mkdir(parents=True)
    (d / "0.lmp").write_text("I cannot help with that.\n")
    assert CorpusGenerator(tmp_path).next_candidate(PromptRef("t", 0, "x"), 1).text == ""


def test_synthetic_backend_is_seeded():
    tasks = load_corpus()
    gen = SyntheticGenerator(tasks)
    ref = PromptRef("count_markers", 1, "x", 3, 5, seed=9)
    assert gen.next_candidate(ref, 1) == gen.next_candidate(ref, 1)
    texts = {gen.next_candidate(PromptRef("count_markers", 1, "x", s, 50, seed=9), 1).text for s in range(50)}
    assert len(texts) > 1


def test_scripted_backend():
    gen = ScriptedGenerator({"t": ["a", "b"]})
    assert [gen.next_candidate(PromptRef("t", 0, "x"), a).text for a in (1, 2, 3)] == ["a", "b", "b"]
    with pytest.raises(GenerationUnavailable):
        gen.next_candidate(PromptRef("u", 0, "x"), 1)


def test_make_generator(tmp_path):
    (tmp_path / "a.lmp").write_text("say('a')")
    gen = make_generator(GenerationConfig(backend="scripted", script=(str(tmp_path / "a.lmp"),)))
    assert gen.next_candidate(PromptRef("t", 0, "x"), 1).text == "say('a')"
    assert make_generator(GenerationConfig()).backend_id == "synthetic"


@pytest.mark.parametrize("name", ["synthetic", "http_completions", "http_chat"])
def test_shipped_configs_load(name):
    root = Path(__file__).resolve().parent.parent / "configs"
    assert load_config(root / f"{name}.yaml").backend in ("synthetic", "http")
