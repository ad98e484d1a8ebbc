"""Language-model bridge: serve next-token distributions over stdio.

The server reads one JSON request per line on stdin and writes exactly one
JSON response per request on stdout, in order:

    {"op": "handshake"}                 -> {"ok": true, "version": "1",
                                            "vocab": [...], "eos_id": null}
    {"op": "next", "context": [ids]}    -> {"ok": true, "probs": [...]}
    {"op": "shutdown"}                  -> {"ok": true}

Malformed requests get {"ok": false, "error": ..., "request": ...} and the
process stays alive. Identical contexts always produce identical
probability arrays (within 1e-6 for floating-point backends).
"""

from .server import PROTOCOL_VERSION, serve
from .backends import DemoBackend, TableBackend, load_backend

__all__ = ["PROTOCOL_VERSION", "serve", "DemoBackend", "TableBackend", "load_backend"]

__version__ = "0.1.0"
