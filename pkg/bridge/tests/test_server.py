import io
import json
import subprocess
import sys

import pytest

from lm_bridge.backends import DemoBackend, TableBackend, load_backend
from lm_bridge.server import handle, serve


def spawn(*extra):
    return subprocess.Popen(
        [sys.executable, "-m", "lm_bridge", *extra],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
    )


def roundtrip(proc, payload):
    proc.stdin.write(json.dumps(payload) + "\n")
    proc.stdin.flush()
    return json.loads(proc.stdout.readline())


class TestHandle:
    def test_handshake(self):
        backend = DemoBackend()
        response, keep = handle(backend, {"op": "handshake"})
        assert keep
        assert response["ok"] and response["version"] == "1"
        assert len(response["vocab"]) == len(backend.vocab)

    def test_next_validates_context(self):
        backend = DemoBackend()
        for bad in (None, "x", [0.5], [-1], [10**6]):
            response, keep = handle(backend, {"op": "next", "context": bad})
            assert keep and not response["ok"]

    def test_unknown_op_echoes_request(self):
        response, keep = handle(DemoBackend(), {"op": "evaluate"})
        assert keep and not response["ok"]
        assert response["request"] == {"op": "evaluate"}

    def test_shutdown_stops(self):
        response, keep = handle(DemoBackend(), {"op": "shutdown"})
        assert response["ok"] and not keep


class TestServeLoop:
    def test_malformed_json_keeps_serving(self):
        stdin = io.StringIO("this is not json\n{\"op\": \"handshake\"}\n")
        stdout = io.StringIO()
        assert serve(DemoBackend(), stdin, stdout) == 0
        lines = stdout.getvalue().splitlines()
        assert len(lines) == 2
        first, second = (json.loads(x) for x in lines)
        assert not first["ok"] and "malformed" in first["error"]
        assert second["ok"]

    def test_fifo_ordering(self):
        requests = "".join(
            json.dumps({"op": "next", "context": [i]}) + "\n" for i in range(20)
        )
        stdout = io.StringIO()
        backend = DemoBackend()
        serve(backend, io.StringIO(requests), stdout)
        lines = stdout.getvalue().splitlines()
        assert len(lines) == 20
        for i, line in enumerate(lines):
            response = json.loads(line)
            assert response["probs"] == backend.next_probs([i])


class TestSubprocess:
    def test_session(self):
        proc = spawn("--backend", "demo")
        try:
            hello = roundtrip(proc, {"op": "handshake"})
            assert hello["ok"] and hello["version"] == "1"
            dist = roundtrip(proc, {"op": "next", "context": []})
            assert dist["ok"]
            assert abs(sum(dist["probs"]) - 1.0) <= 1e-6
            bye = roundtrip(proc, {"op": "shutdown"})
            assert bye["ok"]
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_bad_model_file_exits_nonzero(self):
        proc = spawn("--backend", "table", "--model-file", "/no/such/file.json")
        assert proc.wait(timeout=10) == 3

    def test_missing_required_flag_exits_nonzero(self):
        proc = spawn("--backend", "table")
        assert proc.wait(timeout=10) == 3


class TestTableBackend:
    def test_lookup_and_default(self, tmp_path):
        spec = {
            "vocab": ["a", "b", "c"],
            "eos_id": 2,
            "default": [1, 1, 2],
            "contexts": {"0 1": [0, 0, 1]},
        }
        path = tmp_path / "table.json"
        path.write_text(json.dumps(spec))
        backend = TableBackend(str(path))
        assert backend.next_probs([0, 1]) == [0.0, 0.0, 1.0]
        assert backend.next_probs([2]) == [0.25, 0.25, 0.5]

    def test_row_length_validated(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"vocab": ["a"], "default": [0.5, 0.5]}))
        with pytest.raises(ValueError):
            TableBackend(str(path))


class TestLoadBackend:
    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            load_backend("quantum")

    def test_table_requires_file(self):
        with pytest.raises(ValueError):
            load_backend("table")
