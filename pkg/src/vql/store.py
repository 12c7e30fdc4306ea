"""TokenStore: the on-disk exchange format for region tokens.

A store is a directory holding

    manifest.json    video metadata and ids, schema_version 1
    regions.jsonl    one record per region, fields in a fixed order,
                     sorted by (frame_index, region_id)
    embeddings.bin   contiguous little-endian float32, row i = record i

The layout is append-only and bit-exact: saving a loaded store reproduces the
original bytes. Producers other than this package (offline model bridges)
write the same format and are checked with validate_store.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vql.core import (
    BBox,
    BinaryMask,
    FrameRef,
    MalformedMaskError,
    RegionToken,
    SchemaError,
    decode_mask,
    tight_bbox,
)
from vql.tokens import VideoTokenSet, _assemble

MANIFEST_NAME = "manifest.json"
REGIONS_NAME = "regions.jsonl"
EMBEDDINGS_NAME = "embeddings.bin"
SCHEMA_VERSION = 1

_MANIFEST_FIELDS = (
    "schema_version",
    "video_id",
    "fps",
    "frame_width",
    "frame_height",
    "embedding_dim",
    "segmenter_id",
    "extractor_id",
    "frame_count",
    "token_count",
    "backend",
    "frames_dir",
)
_REGION_FIELDS = ("frame_index", "region_id", "bbox", "rle", "area_fraction", "embedding_offset")


@dataclass(frozen=True)
class TokenStore:
    """A loaded store: the token set plus producer metadata."""

    token_set: VideoTokenSet
    backend: str
    frames_dir: str | None


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _region_record(tok: RegionToken, offset: int) -> str:
    b = tok.bbox
    obj = {
        "frame_index": tok.frame.frame_index,
        "region_id": tok.region_id,
        "bbox": [b.x, b.y, b.w, b.h],
        "rle": list(tok.mask.runs),
        "area_fraction": tok.area_fraction,
        "embedding_offset": offset,
    }
    return json.dumps(obj, separators=(",", ":"))


def save_token_set(
    directory: str | Path,
    ts: VideoTokenSet,
    backend: str,
    frames_dir: str | None,
) -> None:
    """Write a store directory (created if needed)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "video_id": ts.video_id,
        "fps": ts.fps,
        "frame_width": ts.width,
        "frame_height": ts.height,
        "embedding_dim": ts.dim,
        "segmenter_id": ts.segmenter_id,
        "extractor_id": ts.extractor_id,
        "frame_count": ts.frame_count,
        "token_count": len(ts),
        "backend": backend,
        "frames_dir": frames_dir,
    }
    _atomic_write(d / MANIFEST_NAME, (json.dumps(manifest, indent=2) + "\n").encode())
    lines = [_region_record(tok, i) for i, tok in enumerate(ts.tokens)]
    _atomic_write(d / REGIONS_NAME, ("".join(line + "\n" for line in lines)).encode())
    matrix = np.ascontiguousarray(ts.embeddings, dtype="<f4")
    _atomic_write(d / EMBEDDINGS_NAME, matrix.tobytes())


def _read_manifest(d: Path) -> dict:
    path = d / MANIFEST_NAME
    if not path.is_file():
        raise SchemaError(f"not a token store: missing {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise SchemaError("manifest must hold a JSON object")
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported store schema_version {version!r}, expected {SCHEMA_VERSION}")
    missing = [k for k in _MANIFEST_FIELDS if k not in manifest]
    if missing:
        raise SchemaError(f"manifest missing fields: {missing}")
    return manifest


def load_store(directory: str | Path) -> TokenStore:
    """Read and verify a store directory into memory."""
    d = Path(directory)
    manifest = _read_manifest(d)
    width = int(manifest["frame_width"])
    height = int(manifest["frame_height"])
    dim = int(manifest["embedding_dim"])
    frame_count = int(manifest["frame_count"])
    video_id = str(manifest["video_id"])

    raw = (d / EMBEDDINGS_NAME).read_bytes() if (d / EMBEDDINGS_NAME).is_file() else b""
    if len(raw) % (4 * dim) != 0:
        raise SchemaError(
            f"embeddings.bin holds {len(raw)} bytes, not a multiple of {4 * dim}"
        )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(-1, dim)

    tokens: list[RegionToken] = []
    regions_path = d / REGIONS_NAME
    lines = regions_path.read_text().splitlines() if regions_path.is_file() else []
    last_key = (-1, -1)
    for lineno, line in enumerate(lines):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"regions.jsonl line {lineno + 1}: invalid JSON: {exc}") from exc
        missing = [k for k in _REGION_FIELDS if k not in obj]
        if missing:
            raise SchemaError(f"regions.jsonl line {lineno + 1}: missing fields {missing}")
        fi = int(obj["frame_index"])
        rid = int(obj["region_id"])
        if not (0 <= fi < frame_count):
            raise SchemaError(
                f"regions.jsonl line {lineno + 1}: frame_index {fi} outside [0, {frame_count})"
            )
        key = (fi, rid)
        if key <= last_key:
            raise SchemaError(
                f"regions.jsonl line {lineno + 1}: records not sorted by (frame_index, region_id)"
            )
        last_key = key
        offset = int(obj["embedding_offset"])
        if offset != lineno:
            raise SchemaError(
                f"regions.jsonl line {lineno + 1}: embedding_offset {offset} != record index {lineno}"
            )
        if offset >= matrix.shape[0]:
            raise SchemaError(f"regions.jsonl line {lineno + 1}: embedding row {offset} missing")
        bbox_vals = obj["bbox"]
        if not (isinstance(bbox_vals, list) and len(bbox_vals) == 4):
            raise SchemaError(f"regions.jsonl line {lineno + 1}: bbox must be [x, y, w, h]")
        try:
            mask = BinaryMask(width=width, height=height, runs=tuple(int(r) for r in obj["rle"]))
        except (MalformedMaskError, TypeError, ValueError) as exc:
            raise SchemaError(f"regions.jsonl line {lineno + 1}: bad rle: {exc}") from exc
        tokens.append(
            RegionToken(
                frame=FrameRef(video_id, fi, width, height),
                region_id=rid,
                bbox=BBox(*(float(v) for v in bbox_vals)),
                mask=mask,
                area_fraction=float(obj["area_fraction"]),
                embedding=matrix[offset],
            )
        )
    if matrix.shape[0] != len(tokens):
        raise SchemaError(
            f"embeddings.bin holds {matrix.shape[0]} rows for {len(tokens)} region records"
        )
    if int(manifest["token_count"]) != len(tokens):
        raise SchemaError(
            f"manifest token_count {manifest['token_count']} != {len(tokens)} records"
        )
    ts = _assemble(
        video_id,
        float(manifest["fps"]),
        width,
        height,
        dim,
        str(manifest["segmenter_id"]),
        str(manifest["extractor_id"]),
        frame_count,
        tokens,
    )
    frames_dir = manifest["frames_dir"]
    return TokenStore(
        token_set=ts,
        backend=str(manifest["backend"]),
        frames_dir=str(frames_dir) if frames_dir is not None else None,
    )


def validate_store(directory: str | Path) -> list[str]:
    """Deep-check a store directory; returns a list of problems (empty = ok)."""
    problems: list[str] = []
    try:
        store = load_store(directory)
    except (SchemaError, OSError) as exc:
        return [str(exc)]
    ts = store.token_set
    for i, tok in enumerate(ts.tokens):
        if tok.mask.width != ts.width or tok.mask.height != ts.height:
            problems.append(f"record {i}: mask dims differ from frame dims")
            continue
        tight = tight_bbox(tok.mask)
        if tight != tok.bbox:
            problems.append(
                f"record {i}: bbox {tok.bbox} is not the mask tight box {tight}"
            )
        expect_area = tok.mask.foreground / (ts.width * ts.height)
        if abs(expect_area - tok.area_fraction) > 1e-12:
            problems.append(
                f"record {i}: area_fraction {tok.area_fraction} != mask fraction {expect_area}"
            )
        emb = np.asarray(tok.embedding, dtype=np.float64)
        if not np.all(np.isfinite(emb)) or float(np.dot(emb, emb)) == 0.0:
            problems.append(f"record {i}: embedding must be finite with nonzero norm")
    return problems


def store_bytes(directory: str | Path) -> bytes:
    """Concatenated raw bytes of the three store files (for equality tests)."""
    d = Path(directory)
    return b"\x00".join(
        (d / name).read_bytes() for name in (MANIFEST_NAME, REGIONS_NAME, EMBEDDINGS_NAME)
    )
