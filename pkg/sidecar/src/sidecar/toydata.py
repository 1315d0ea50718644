"""Generate the two-class synthetic corpus for CPU-scale runs.

Usage:

    python -m sidecar.toydata --out toy_data [--seed 42] [--per-class 40]

Writes images/, manifest.csv, and split.json under --out; feed the last
two straight into sidecar.train.
"""

import argparse
import sys

from sidecar.data import make_toy_corpus
from sidecar.errors import SidecarError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sidecar.toydata", description=__doc__.splitlines()[0]
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--per-class", type=int, default=40)
    parser.add_argument("--image-size", type=int, default=32)
    args = parser.parse_args(argv)
    try:
        manifest_path, split_path = make_toy_corpus(
            args.out, seed=args.seed, per_class=args.per_class,
            image_size=args.image_size,
        )
    except (SidecarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"manifest: {manifest_path}")
    print(f"split: {split_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
