"""Client for out-of-process language models speaking the bridge protocol.

The bridge is any executable that reads newline-delimited JSON requests on
stdin and answers one JSON object per line on stdout, strictly in order:

    {"op": "handshake"}                  -> {"ok": true, "version": "1",
                                             "vocab": [...], "eos_id": null}
    {"op": "next", "context": [ids...]}  -> {"ok": true, "probs": [...]}
    {"op": "shutdown"}                   -> {"ok": true}

Failures come back as {"ok": false, "error": "...", "request": {...}} and
the process stays alive. The client exposes the bridge as a SequentialLm:
token ids are the bridge's own space and the vocabulary comes from the
handshake. Responses are clamp-normalized on this side, so anything that
reaches generation satisfies the distribution invariants.
"""

from __future__ import annotations

import json
import subprocess
import threading

import numpy as np

from .effects import TokenDistribution, clamp_normalize
from .vocab import Vocab

__all__ = ["BridgeLm", "BridgeProtocolError", "PROTOCOL_VERSION"]

PROTOCOL_VERSION = "1"


class BridgeProtocolError(RuntimeError):
    """Transport or protocol failure, annotated with the context position."""

    def __init__(self, message: str, context_length: int | None = None):
        self.context_length = context_length
        if context_length is not None:
            message = f"{message} (context position {context_length})"
        super().__init__(message)


class BridgeLm:
    """SequentialLm implementation backed by a spawned bridge process.

    Requests are serialized under a lock (the protocol is strictly one
    in-flight request), so one client may be shared across threads.
    """

    def __init__(self, command: list[str]):
        self._command = list(command)
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            self._command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        reply = self._request({"op": "handshake"})
        if reply.get("version") != PROTOCOL_VERSION:
            self.close()
            raise BridgeProtocolError(
                f"unsupported bridge protocol version {reply.get('version')!r}"
            )
        tokens = reply.get("vocab")
        if not tokens:
            self.close()
            raise BridgeProtocolError("bridge handshake returned an empty vocabulary")
        self._vocab = Vocab(tuple(tokens), eos_id=reply.get("eos_id"))

    @property
    def vocab(self) -> Vocab:
        return self._vocab

    def _request(self, payload: dict, context_length: int | None = None) -> dict:
        with self._lock:
            if self._proc.poll() is not None:
                raise BridgeProtocolError(
                    f"bridge process exited with status {self._proc.returncode}",
                    context_length,
                )
            try:
                self._proc.stdin.write(json.dumps(payload, separators=(",", ":")) + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BridgeProtocolError(f"bridge transport failed: {exc}", context_length)
            if not line:
                raise BridgeProtocolError("bridge closed its output stream", context_length)
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeProtocolError(f"bridge sent malformed JSON: {exc}", context_length)
            if not reply.get("ok", False):
                raise BridgeProtocolError(
                    f"bridge error: {reply.get('error', 'unspecified')}", context_length
                )
            return reply

    def next_distribution(self, context) -> TokenDistribution:
        context = self._vocab.validate_sequence(np.asarray(context, dtype=np.int64))
        reply = self._request(
            {"op": "next", "context": [int(t) for t in context]},
            context_length=int(context.size),
        )
        probs = reply.get("probs")
        if probs is None or len(probs) != len(self._vocab):
            raise BridgeProtocolError(
                "bridge returned a probability array of the wrong length",
                context_length=int(context.size),
            )
        arr = np.asarray(probs, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-6:
            raise BridgeProtocolError(
                "bridge probabilities violate distribution invariants",
                context_length=int(context.size),
            )
        return clamp_normalize(arr)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._request({"op": "shutdown"})
            except BridgeProtocolError:
                pass
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=10)

    def __enter__(self) -> "BridgeLm":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
