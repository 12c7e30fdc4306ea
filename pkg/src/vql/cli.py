"""Command-line interface: prepare, localize, evaluate, synth.

Every flag that mirrors an EngineConfig field overrides the value loaded
from --config one-to-one. Output files are written atomically; exit codes
are 0 on success, 2 on usage or input errors, 1 on internal failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from vql.backends import BackendBundle
from vql.backends.bridge import bridge_bundle, resolve_frames_dir
from vql.backends.synthetic import (
    SyntheticExtractor,
    SyntheticFrameSource,
    SyntheticSegmenter,
    annotations_for,
    generate_scenario,
    render_frame,
    scenario_from_json,
    scenario_to_json,
    ScenarioParams,
)
from vql.core import BBox, EngineConfig, EngineError, LocalizationRequest
from vql.images import draw_box, write_png
from vql.metrics import evaluate, format_report, load_annotations, load_results
from vql.pipeline import localize, result_record
from vql.store import MANIFEST_NAME, _atomic_write, load_store, save_token_set
from vql.tokens import build_token_set
from vql.track import TokenTracker


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per EngineConfig field, applied on top of --config."""
    parser.add_argument("--config", help="EngineConfig JSON file")
    for field in dataclasses.fields(EngineConfig):
        flag = "--" + field.name.replace("_", "-")
        if field.type in ("bool", bool):
            parser.add_argument(flag, default=None, choices=("true", "false"))
        elif field.type in ("int", int):
            parser.add_argument(flag, type=int, default=None)
        else:
            parser.add_argument(flag, type=float, default=None)


def _config_from_args(args: argparse.Namespace) -> EngineConfig:
    config = EngineConfig.load(args.config) if args.config else EngineConfig()
    overrides = {}
    for field in dataclasses.fields(EngineConfig):
        value = getattr(args, field.name, None)
        if value is None:
            continue
        if field.type in ("bool", bool):
            value = value == "true"
        overrides[field.name] = value
    return config.with_overrides(**overrides) if overrides else config


def _write_json(path: Path, payload) -> None:
    _atomic_write(path, (json.dumps(payload, indent=2) + "\n").encode())


def _synthetic_bundle(store_dir: Path, config: EngineConfig):
    """Rebuild the generating backend if the store's fixture sidecar exists."""
    store = load_store(store_dir)
    frames_dir = resolve_frames_dir(store_dir, store)
    places = [store_dir] + ([frames_dir.parent] if frames_dir is not None else [])
    for base in places:
        sidecar = Path(base) / "scenario.json"
        if sidecar.exists():
            scn = scenario_from_json(sidecar.read_text())
            bundle = BackendBundle(
                frames=SyntheticFrameSource(scn),
                segmenter=SyntheticSegmenter(scn),
                extractor=SyntheticExtractor(scn),
                tracker=TokenTracker(store.token_set, config),
            )
            return bundle, store.token_set
    return None


def _bundle_for_store(store_dir: Path, config: EngineConfig):
    store = load_store(store_dir)
    if store.backend.startswith("synthetic"):
        rebuilt = _synthetic_bundle(store_dir, config)
        if rebuilt is not None:
            return rebuilt
    return bridge_bundle(store_dir, config)


def cmd_prepare(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    if (out / MANIFEST_NAME).exists() and not args.force:
        print(f"error: {out} already holds a store (use --force to overwrite)", file=sys.stderr)
        return 2
    if args.backend == "synthetic":
        video_dir = Path(args.video_dir)
        sidecar = video_dir / "scenario.json"
        if not video_dir.is_dir():
            print(f"error: video directory not found: {video_dir}", file=sys.stderr)
            return 2
        if not sidecar.exists():
            print(f"error: {video_dir} has no scenario.json", file=sys.stderr)
            return 2
        scn = scenario_from_json(sidecar.read_text())
        src = SyntheticFrameSource(scn)
        ts = build_token_set(
            src, SyntheticSegmenter(scn), SyntheticExtractor(scn), threads=args.threads
        )
        out.mkdir(parents=True, exist_ok=True)
        frames_dir = video_dir / "frames"
        rel = os.path.relpath(frames_dir, out) if frames_dir.is_dir() else None
        save_token_set(out, ts, backend="synthetic", frames_dir=rel)
    elif args.backend.startswith("bridge:"):
        src_dir = Path(args.backend.split(":", 1)[1])
        if not src_dir.is_dir():
            print(f"error: bridge store not found: {src_dir}", file=sys.stderr)
            return 2
        store = load_store(src_dir)
        ts = store.token_set
        frames = resolve_frames_dir(src_dir, store)
        out.mkdir(parents=True, exist_ok=True)
        rel = os.path.relpath(frames, out) if frames is not None else None
        save_token_set(out, ts, backend=store.backend, frames_dir=rel)
    else:
        print(f"error: unknown backend {args.backend!r}", file=sys.stderr)
        return 2
    print(f"frames={ts.frame_count} tokens={len(ts.tokens)} d={ts.dim}")
    return 0


def cmd_localize(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store_dir = Path(args.store)
    if not (store_dir / MANIFEST_NAME).exists():
        print(f"error: no token store at {store_dir}", file=sys.stderr)
        return 2
    bundle, ts = _bundle_for_store(store_dir, config)
    annotations = load_annotations(args.annotations)
    mine = [a for a in annotations if a["video_id"] == ts.video_id]
    if not mine:
        print(f"error: no annotations for video {ts.video_id!r}", file=sys.stderr)
        return 2

    def run(ann: dict):
        request = LocalizationRequest(
            video_id=ann["video_id"],
            query_id=ann["query_id"],
            query_frame=int(ann["query_frame"]),
            query_box=BBox(**{k: float(v) for k, v in ann["query_box"].items()}),
            query_time=int(ann["query_time"]),
        )
        result = localize(
            bundle,
            ts,
            request,
            config,
            refine=not args.no_refine,
            reiterate=not args.no_reiterate,
        )
        return request, result

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            outcomes = list(pool.map(run, mine))
    else:
        outcomes = [run(a) for a in mine]

    records = [result_record(result, request) for request, result in outcomes]
    _write_json(Path(args.out), records)
    for request, result in outcomes:
        track = result.track
        print(
            f"{request.query_id}: track [{track.start}, {track.end}] "
            f"score {track.score:.3f}"
        )
    if args.dump_overlays:
        _dump_overlays(Path(args.dump_overlays), bundle, outcomes)
    return 0


def _dump_overlays(root: Path, bundle, outcomes) -> None:
    for request, result in outcomes:
        qdir = root / request.query_id.replace(":", "_").replace("/", "_")
        qdir.mkdir(parents=True, exist_ok=True)
        for frame_index, box in result.track.boxes:
            img = draw_box(
                bundle.frames.pixels(frame_index),
                box.clamp(bundle.frames.width, bundle.frames.height),
                color=(255, 64, 64),
            )
            write_png(qdir / f"{frame_index:05d}.png", img)


def cmd_evaluate(args: argparse.Namespace) -> int:
    results = load_results(args.results)
    annotations = load_annotations(args.annotations)
    report = evaluate(
        results,
        annotations,
        threshold=args.threshold,
        temporal_success=args.temporal_success,
    )
    print(format_report(report, threshold=args.threshold))
    if args.out:
        _write_json(Path(args.out), report)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    params = ScenarioParams()
    if args.params:
        params = ScenarioParams.from_json(json.loads(Path(args.params).read_text()))
    scn = generate_scenario(args.seed, params)
    out = Path(args.out)
    if (out / "scenario.json").exists() and not args.force:
        print(f"error: {out} already holds a fixture (use --force to overwrite)", file=sys.stderr)
        return 2
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for t in range(scn.params.frame_count):
        write_png(frames_dir / f"{t:05d}.png", render_frame(scn, t))
    _atomic_write(out / "scenario.json", scenario_to_json(scn).encode())
    _write_json(out / "annotations.json", annotations_for(scn))
    src = SyntheticFrameSource(scn)
    ts = build_token_set(
        src, SyntheticSegmenter(scn), SyntheticExtractor(scn), threads=args.threads
    )
    store_dir = out / "store"
    store_dir.mkdir(exist_ok=True)
    save_token_set(store_dir, ts, backend="synthetic", frames_dir="../frames")
    print(f"seed={args.seed} frames={ts.frame_count} tokens={len(ts.tokens)} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vql", description="Visual query localization over video token sets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="tokenize a video into a store")
    p.add_argument("--video-dir", required=True)
    p.add_argument("--backend", required=True, help="synthetic or bridge:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("localize", help="answer annotated queries against a store")
    p.add_argument("--store", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--no-reiterate", action="store_true")
    p.add_argument("--dump-overlays", default=None)
    p.add_argument("--threads", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="score results against annotations")
    p.add_argument("--results", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--temporal-success", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write a synthetic fixture directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--params", default=None, help="ScenarioParams JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EngineError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
