"""Mock adapter: serve a saved reference n-gram model over the bridge.

Usage: python -m emofocus_bridge.mock --model MODEL.pcm [--name NAME]

With this child command the host-visible behavior must be identical to
loading the same model in process, which makes it the conformance oracle
for the protocol.
"""

from __future__ import annotations

import argparse
import sys

from emofocus.backend import load_model

from .serve import ModelAdapter, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="emofocus-bridge-mock")
    parser.add_argument("--model", required=True)
    parser.add_argument("--name", default="ngram-mock")
    args = parser.parse_args(argv)
    model = load_model(args.model)
    return serve(ModelAdapter(model, model_name=args.name))


if __name__ == "__main__":
    sys.exit(main())
