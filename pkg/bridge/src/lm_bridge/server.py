"""The request loop: one JSON object in, one JSON object out, in order."""

from __future__ import annotations

import json
import sys

PROTOCOL_VERSION = "1"

__all__ = ["PROTOCOL_VERSION", "serve"]


def _error(request, message: str) -> dict:
    return {"ok": False, "error": message, "request": request}


def handle(backend, request) -> tuple[dict, bool]:
    """Map one request to (response, keep_serving)."""
    if not isinstance(request, dict) or "op" not in request:
        return _error(request, "request must be an object with an 'op' field"), True
    op = request["op"]
    if op == "handshake":
        return {
            "ok": True,
            "version": PROTOCOL_VERSION,
            "vocab": backend.vocab,
            "eos_id": backend.eos_id,
        }, True
    if op == "next":
        context = request.get("context")
        if not isinstance(context, list) or not all(isinstance(t, int) for t in context):
            return _error(request, "'context' must be a list of integer token ids"), True
        if any(t < 0 or t >= len(backend.vocab) for t in context):
            return _error(request, "context token id out of vocabulary range"), True
        return {"ok": True, "probs": backend.next_probs(context)}, True
    if op == "shutdown":
        return {"ok": True}, False
    return _error(request, f"unknown op {op!r}"), True


def serve(backend, stdin=None, stdout=None) -> int:
    """Serve until shutdown or EOF; returns the process exit status."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response, keep = _error(line, f"malformed JSON: {exc}"), True
        else:
            response, keep = handle(backend, request)
        stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        stdout.flush()
        if not keep:
            return 0
    return 0
