"""CLI: `python -m lm_bridge --backend demo|table|hf [...]`."""

from __future__ import annotations

import argparse
import sys

from .backends import load_backend
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lm-bridge",
        description="Serve next-token distributions over stdin/stdout.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--backend", choices=("demo", "table", "hf"), default="demo")
    parser.add_argument("--model-file", default=None, help="table backend spec JSON")
    parser.add_argument("--model-id", default=None,
                        help="hf backend model id, e.g. distilgpt2")
    args = parser.parse_args(argv)
    try:
        backend = load_backend(args.backend, model_file=args.model_file,
                               model_id=args.model_id)
    except Exception as exc:
        print(f"lm-bridge: failed to load backend: {exc}", file=sys.stderr)
        return 3
    return serve(backend)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
