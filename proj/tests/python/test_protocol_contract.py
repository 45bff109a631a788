"""Wire-protocol contract tests.

Offline part: a stdlib mock backend validates every request the harness
sends against the shipped request schemas and answers from the recorded e2e
cache, validating each answer against the response schemas. A full pipeline
run through it must equal the replay run byte for byte.

Live part: set T2IEVAL_SHIM_URL to a backend running in mock mode to check
it against the same schemas, plus determinism and the 404 miss contract.
"""

import base64
import hashlib
import http.server
import json
import os
import shutil
import struct
import threading
import urllib.error
import urllib.request
from pathlib import Path

import jsonschema
import pytest

import t2ieval

FIXTURES = Path(os.environ.get("T2IEVAL_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))
E2E = FIXTURES / "e2e"
ENDPOINTS = {"/caption": "caption", "/dense": "dense", "/embed": "embed", "/chat": "chat"}
OUTPUTS = ["descriptions.jsonl", "scores.jsonl", "baseline_scores.jsonl", "report.csv", "report.md", "showcase.html"]


def validator(name):
    schema = t2ieval.load_schema(name)
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema, format_checker=jsonschema.FormatChecker())


def png_size(data):
    if data[:8] != b"\x89PNG\r\n\x1a\n" or len(data) < 24:
        return 0, 0
    return struct.unpack(">II", data[16:24])


def canonical(path, body):
    """(cache role, canonical request) for a wire request, as the harness keys its cache."""
    if "image_b64" in body:
        data = base64.b64decode(body["image_b64"])
        width, height = png_size(data)
        role = {"/caption": "caption", "/dense": "dense_caption", "/embed": "embed_image"}[path]
        return role, {
            "model": body["model"],
            "image_sha256": hashlib.sha256(data).hexdigest(),
            "width": width,
            "height": height,
        }
    if path == "/embed":
        return "embed_text", body
    return "chat", dict(body, decode_mode=body.get("decode_mode", "greedy"))


def recorded_entries(cache_dir):
    entries = {}
    for f in sorted(Path(cache_dir).glob("*/*.json")):
        entry = json.loads(f.read_text())
        role = f.parent.name
        key = t2ieval.cache_key(role, entry["request"]["model"], json.dumps(entry["request"]))
        assert key == f.stem, f"cache file name does not match its request: {f}"
        entries[key] = entry["response"]
    return entries


class MockBackend:
    def __init__(self, cache_dir):
        self.entries = recorded_entries(cache_dir)
        self.requests = {p: validator(f"{n}.request") for p, n in ENDPOINTS.items()}
        self.responses = {p: validator(f"{n}.response") for p, n in ENDPOINTS.items()}
        self.miss = validator("miss.response")
        self.errors = []
        self.count = 0
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                outer.count += 1
                raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                status, reply = outer.answer(self.path, raw)
                data = json.dumps(reply, sort_keys=True).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def answer(self, path, raw):
        if path not in ENDPOINTS:
            return 404, {"error": f"unknown endpoint {path}", "key": "0" * 64}
        try:
            body = json.loads(raw)
            self.requests[path].validate(body)
        except (ValueError, jsonschema.ValidationError) as e:
            self.errors.append(f"{path}: {e}")
            return 400, {"error": str(e)}
        role, canon = canonical(path, body)
        key = t2ieval.cache_key(role, body["model"], json.dumps(canon))
        if key not in self.entries:
            miss = {"error": "no fixture for request", "key": key}
            self.miss.validate(miss)
            return 404, miss
        reply = self.entries[key]
        try:
            self.responses[path].validate(reply)
        except jsonschema.ValidationError as e:
            self.errors.append(f"{path} response: {e.message}")
        return 200, reply

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.mark.parametrize("name", [f"{n}.{k}" for n in ENDPOINTS.values() for k in ("request", "response")])
def test_schemas_are_valid(name):
    validator(name)


def test_recorded_responses_conform():
    per_role = {
        "caption": "caption",
        "dense_caption": "dense",
        "embed_text": "embed",
        "embed_image": "embed",
        "chat": "chat",
    }
    seen = set()
    for f in sorted((E2E / "cache").glob("*/*.json")):
        entry = json.loads(f.read_text())
        validator(f"{per_role[f.parent.name]}.response").validate(entry["response"])
        seen.add(f.parent.name)
    assert seen == set(per_role)


def test_schemas_reject_malformed_bodies():
    with pytest.raises(jsonschema.ValidationError):
        validator("dense.response").validate({"regions": [{"label": "car", "caption": "c", "bbox": [1, 2, 3]}]})
    with pytest.raises(jsonschema.ValidationError):
        validator("embed.request").validate({"model": "m", "text": "t", "image_b64": "AAAA"})
    with pytest.raises(jsonschema.ValidationError):
        validator("chat.response").validate({"choices": []})
    with pytest.raises(jsonschema.ValidationError):
        validator("chat.request").validate({"model": "m", "messages": [], "temperature": 0.7, "max_tokens": 8})


def write_config(work, base_url, mode):
    cfg = json.loads((work / "config.json").read_text())
    for ep in cfg["endpoints"].values():
        ep["base_url"] = base_url
        ep["max_retries"] = 0
    cfg["cache"] = {"mode": mode, "dir": "cache"}
    path = work / f"config-{mode}.json"
    path.write_text(json.dumps(cfg))
    return path


def run(work, config, out):
    summaries = t2ieval.run_pipeline(
        config, work / "prompts.jsonl", work / "manifest.jsonl", work / "ratings.jsonl", out=out
    )
    for stage, s in summaries.items():
        assert not s["failures"], (stage, s["failures"])
    return {name: (out / name).read_bytes() for name in OUTPUTS}


def test_pipeline_through_mock_backend_matches_replay(tmp_path):
    work = tmp_path / "e2e"
    shutil.copytree(E2E, work)
    replay = run(work, work / "config.json", tmp_path / "replay")
    with MockBackend(E2E / "cache") as backend:
        live = run(work, write_config(work, backend.url, "off"), tmp_path / "live")
    assert backend.errors == []
    assert backend.count > 0
    for name in OUTPUTS:
        assert live[name] == replay[name], name


def test_mock_backend_miss_is_404_with_key():
    with MockBackend(E2E / "cache") as backend:
        body = json.dumps({"model": "fixture-embed", "text": "nothing recorded for this"}).encode()
        req = urllib.request.Request(backend.url + "/embed", data=body, headers={"Content-Type": "application/json"})
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req, timeout=5)
        assert err.value.code == 404
        reply = json.loads(err.value.read())
        assert reply["key"] == t2ieval.cache_key("embed_text", "fixture-embed", body.decode())


# ---- live backend -----------------------------------------------------------------

SHIM = os.environ.get("T2IEVAL_SHIM_URL")
live = pytest.mark.skipif(not SHIM, reason="T2IEVAL_SHIM_URL not set")


def post(path, body):
    req = urllib.request.Request(
        SHIM.rstrip("/") + path, data=json.dumps(body).encode(), headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()


def sample_requests():
    image = base64.b64encode((E2E / "images" / "p1_sd2.png").read_bytes()).decode()
    return {
        "/caption": {"model": "fixture-captioner", "image_b64": image},
        "/dense": {"model": "fixture-dense", "image_b64": image},
        "/embed": {"model": "fixture-embed", "text": "A red book and a yellow vase"},
        "/chat": {
            "model": "fixture-chat",
            "messages": [{"role": "user", "content": "Text prompt: A red book"}],
            "temperature": 0.7,
            "max_tokens": 16,
            "decode_mode": "greedy",
        },
    }


@live
@pytest.mark.parametrize("path", list(ENDPOINTS))
def test_live_backend_conforms(path):
    body = sample_requests()[path]
    validator(f"{ENDPOINTS[path]}.request").validate(body)
    status, first = post(path, body)
    if status == 404:
        validator("miss.response").validate(json.loads(first))
        return
    assert status == 200
    validator(f"{ENDPOINTS[path]}.response").validate(json.loads(first))
    status2, second = post(path, body)
    assert status2 == 200 and second == first


@live
def test_live_backend_miss_echoes_key():
    status, raw = post("/dense", {"model": "no-such-model", "image_b64": base64.b64encode(b"\x89PNG").decode()})
    assert status == 404
    validator("miss.response").validate(json.loads(raw))
