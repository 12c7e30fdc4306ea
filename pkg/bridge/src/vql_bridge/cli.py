"""vql-bridge command line: export token stores and tracks offline.

Exit codes: 0 success, 2 bad input or arguments, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import sys

from vql_bridge.models import ModelLoadError, get_extractor, get_segmenter, get_tracker
from vql_bridge.prepare import bridge_prepare
from vql_bridge.track import bridge_track


def _parse_box(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"box must be x,y,w,h — got {text!r}")
    x, y, w, h = (float(p) for p in parts)
    if w <= 0 or h <= 0:
        raise ValueError(f"box needs positive size, got {text!r}")
    return x, y, w, h


def cmd_prepare(args: argparse.Namespace) -> int:
    summary = bridge_prepare(
        args.frames_dir,
        args.out,
        segmenter=get_segmenter(args.segmenter, **_weights(args)),
        extractor=get_extractor(args.extractor, **_weights(args)),
        video_id=args.video_id,
        fps=args.fps,
        batch_size=args.batch_size,
        export_features=args.export_features,
        force=args.force,
    )
    print(f"frames={summary['frames']} tokens={summary['tokens']} d={summary['dim']}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    record = bridge_track(
        args.frames_dir,
        args.seed_frame,
        _parse_box(args.box),
        args.direction,
        args.out,
        tracker=get_tracker(args.tracker, **_weights(args)),
        append=args.append,
    )
    frames = [b["frame"] for b in record["boxes"]]
    print(f"track [{min(frames)}, {max(frames)}] boxes={len(frames)}")
    return 0


def _weights(args: argparse.Namespace) -> dict:
    # classical models take no weights; only pass the kwarg when given
    return {"weights": args.weights} if args.weights else {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vql-bridge",
        description="export token stores and track files from pretrained or classical models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="segment + embed frames into a token store")
    p.add_argument("frames_dir", help="directory of 00000.png-style frames")
    p.add_argument("out", help="token store directory to write")
    p.add_argument("--segmenter", default="contour-v1")
    p.add_argument("--extractor", default="dense-desc-v1")
    p.add_argument("--video-id", default=None)
    p.add_argument("--fps", type=float, default=5.0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--export-features", default=None, metavar="DIR",
                   help="also dump each frame's raw feature map as .npy")
    p.add_argument("--weights", default=None, help="checkpoint path for learned models")
    p.add_argument("--force", action="store_true", help="replace an existing store")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("track", help="propagate one seed box into tracks.jsonl")
    p.add_argument("frames_dir", help="directory of 00000.png-style frames")
    p.add_argument("--seed-frame", type=int, required=True)
    p.add_argument("--box", required=True, help="seed box as x,y,w,h")
    p.add_argument("--direction", default="both", choices=("forward", "backward", "both"))
    p.add_argument("--out", default=None, help="tracks.jsonl path (default: next to frames)")
    p.add_argument("--tracker", default="ncc-v1")
    p.add_argument("--weights", default=None, help="checkpoint path for learned models")
    p.add_argument("--append", action="store_true", help="add to an existing tracks file")
    p.set_defaults(func=cmd_track)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelLoadError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
