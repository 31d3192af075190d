"""Command-line entry point for the feature extractor.

Exit codes: 0 success, 2 configuration error, 3 extraction error.
"""

import argparse
import sys

from .extract import BACKBONES, ConfigError, ExtractConfig, ExtractionError, extract


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrpf-extract",
        description="Run a vision backbone over an image folder and write LRPF features.",
    )
    parser.add_argument("--model", required=True, choices=sorted(BACKBONES))
    parser.add_argument("--data", required=True, help="dataset root (class-per-folder)")
    parser.add_argument("--split", default="", help="optional split subfolder")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True)
    parser.add_argument(
        "--no-pretrained",
        action="store_true",
        help="use seeded random weights instead of downloading pretrained ones",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=0, help="expected embedding dim (0 = native)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = ExtractConfig(
            model=args.model,
            data_dir=args.data,
            out=args.out,
            split=args.split,
            batch_size=args.batch_size,
            device=args.device,
            pretrained=not args.no_pretrained,
            seed=args.seed,
            expected_dim=args.dim,
        )
        n, dim, classes = extract(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {n} records of dimension {dim} ({len(classes)} classes) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
