"""Command-line entry point.

Exit codes match the consumer CLI: 0 success, 2 usage, 3 data problems.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .datasets import DATASET_TITLES
from .errors import ExportError
from .export import ExportJob, run_export

DATA_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsol-export",
        description="Export frozen-encoder embeddings and point annotations "
        "as a zsol manifest.",
    )
    parser.add_argument("--dataset", choices=sorted(DATASET_TITLES), required=True)
    parser.add_argument("--split", choices=("train", "val", "test"), required=True)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--data-root", required=True, help="dataset root directory")
    parser.add_argument(
        "--encoder",
        choices=("clip", "stub"),
        default="clip",
        help="stub runs without model weights",
    )
    parser.add_argument("--dim", type=int, default=32, help="stub embedding width")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--limit", type=int, help="export at most N images")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        dataset=args.dataset,
        split=args.split,
        out_dir=Path(args.out),
        data_root=Path(args.data_root),
        encoder_name=args.encoder,
        dim=args.dim,
        seed=args.seed,
        workers=max(1, args.workers),
        limit=args.limit,
    )
    try:
        manifest = run_export(job)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    print(f"wrote {manifest}")
    return 0


def run() -> None:
    sys.exit(main())
