"""Manifest construction, frame pairing, source mixing, and dataset stats.

A manifest is a JSON-lines file: one header line (seed, timestamp, tool
version) followed by one record per line, sorted by sample_id so re-runs are
byte-identical and diffs stay readable. Synthetic records are namespaced
"synth/", real ones "real/<sequence>/", which keeps ids and visual contexts
disjoint when the two sources are merged.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from . import __version__
from .errors import ConsistencyError, FormatError, InputError
from .model import SampleRecord, SynthParams
from .raster_io import read_depth_auto, write_flo, write_png_rgb
from .render import render_pipeline
from .synthesis import RngStream, draw_params

IMAGE_SUFFIXES = (".png",)
DEPTH_SUFFIXES = (".pfm", ".png")
MASK_SUFFIXES = (".png",)
FLOW_SUFFIXES = (".flo", ".png")

FLOW_DIR = "flows"
RENDER_DIR = "renders"


def default_created_at() -> str:
    """Deterministic manifest timestamp.

    Honors SOURCE_DATE_EPOCH (the reproducible-build convention); without it
    the epoch itself is used so that identical inputs always produce
    byte-identical manifests.
    """
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(epoch))


@dataclass(frozen=True)
class Manifest:
    """Ordered, id-unique collection of sample records."""

    records: tuple[SampleRecord, ...]
    global_seed: int = 0
    created_at: str = ""
    tool_version: str = __version__

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda r: r.sample_id))
        object.__setattr__(self, "records", records)
        if not self.created_at:
            object.__setattr__(self, "created_at", default_created_at())
        seen = set()
        for rec in records:
            if rec.sample_id in seen:
                raise ConsistencyError(f"duplicate sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)

    def __len__(self) -> int:
        return len(self.records)

    def save(self, path) -> None:
        path = Path(path)
        lines = [
            json.dumps(
                {
                    "global_seed": self.global_seed,
                    "created_at": self.created_at,
                    "tool_version": self.tool_version,
                },
                separators=(",", ":"),
            )
        ]
        lines.extend(record_to_json(rec) for rec in self.records)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "Manifest":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from exc
        records = []
        header = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "sample_id" not in obj:
                if lineno == 1:
                    header = obj
                    continue
                raise FormatError(f"{path}:{lineno}: record missing sample_id")
            records.append(record_from_json(obj, f"{path}:{lineno}"))
        return Manifest(
            records=tuple(records),
            global_seed=int(header.get("global_seed", 0)),
            created_at=str(header.get("created_at", "")) or default_created_at(),
            tool_version=str(header.get("tool_version", __version__)),
        )


def record_to_json(rec: SampleRecord) -> str:
    """Serialize one record with a fixed key order (stable bytes)."""
    params = None
    sample_seed = None
    if rec.params is not None:
        p = rec.params
        params = {
            "r_x": p.r_x,
            "s_x": p.s_x,
            "alpha_x": p.alpha_x,
            "r_y": p.r_y,
            "s_y": p.s_y,
            "alpha_y": p.alpha_y,
        }
        sample_seed = p.sample_seed
    obj = {
        "sample_id": rec.sample_id,
        "image": rec.image,
        "depth": rec.depth,
        "flow_flo": rec.flow_flo,
        "flow_png": rec.flow_png,
        "mask": rec.mask,
        "source": rec.source,
        "context_id": rec.context_id,
        "params": params,
        "sample_seed": sample_seed,
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def record_from_json(obj: dict, where: str = "") -> SampleRecord:
    try:
        params = None
        if obj.get("params") is not None:
            p = obj["params"]
            params = SynthParams(
                r_x=p["r_x"],
                s_x=p["s_x"],
                alpha_x=p["alpha_x"],
                r_y=p["r_y"],
                s_y=p["s_y"],
                alpha_y=p["alpha_y"],
                sample_seed=obj["sample_seed"],
            )
        return SampleRecord(
            sample_id=obj["sample_id"],
            image=obj["image"],
            mask=obj["mask"],
            source=obj["source"],
            context_id=obj["context_id"],
            depth=obj.get("depth"),
            flow_flo=obj.get("flow_flo"),
            flow_png=obj.get("flow_png"),
            params=params,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: bad record: {exc}") from exc


@dataclass(frozen=True)
class DatasetStats:
    """Triplet and visual-context counts, overall and per source."""

    n_triplets: int
    n_contexts: int
    per_source: dict[str, tuple[int, int]]

    def __post_init__(self):
        if self.n_contexts > self.n_triplets:
            raise ValueError(f"contexts ({self.n_contexts}) cannot exceed triplets ({self.n_triplets})")


def compute_stats(manifest: Manifest) -> DatasetStats:
    """Count triplets and distinct visual contexts (context_id cardinality)."""
    contexts: set[str] = set()
    per_source: dict[str, tuple[set, int]] = {}
    for rec in manifest.records:
        contexts.add(rec.context_id)
        ctx, n = per_source.setdefault(rec.source, (set(), 0))
        ctx.add(rec.context_id)
        per_source[rec.source] = (ctx, n + 1)
    return DatasetStats(
        n_triplets=len(manifest.records),
        n_contexts=len(contexts),
        per_source={src: (n, len(ctx)) for src, (ctx, n) in sorted(per_source.items())},
    )


def pair_frames(n_frames: int) -> list[tuple[int, int]]:
    """Source/target index pairs for flow extraction over one sequence.

    Each frame pairs with its successor; the final frame, having none, pairs
    with its predecessor instead so every frame gets a flow map.
    """
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames to pair, got {n_frames}")
    pairs = [(i, i + 1) for i in range(n_frames - 1)]
    pairs.append((n_frames - 1, n_frames - 2))
    return pairs


# --------------------------------------------------------------------------
# Synthetic manifest construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SkippedInput:
    basename: str
    reason: str


@dataclass(frozen=True)
class SynthesisRun:
    """Outcome of one synthesis pass over an image/depth/mask tree."""

    manifest: Manifest
    skipped: tuple[SkippedInput, ...]
    degenerate_depths: int
    degenerate_flows: int
    seconds: float

    @property
    def samples_per_sec(self) -> float:
        if self.seconds <= 0:
            return float(len(self.manifest))
        return len(self.manifest) / self.seconds


@dataclass(frozen=True)
class _SynthTask:
    basename: str
    depth_path: str
    out_dir: str
    global_seed: int
    alpha_min: float
    formats: tuple[str, ...]


@dataclass(frozen=True)
class _SynthOutcome:
    basename: str
    params: SynthParams
    flow_flo: str | None
    flow_png: str | None
    depth_degenerate: bool
    flow_degenerate: bool


def _run_synth_task(task: _SynthTask) -> _SynthOutcome:
    depth = read_depth_auto(task.depth_path)
    stream = RngStream(task.global_seed, task.basename)
    params = draw_params(stream, task.alpha_min)
    result = render_pipeline(depth, params)
    out_dir = Path(task.out_dir)
    flow_flo = flow_png = None
    if "flo" in task.formats:
        rel = f"{FLOW_DIR}/{task.basename}.flo"
        write_flo(result.field, out_dir / rel)
        flow_flo = rel
    if "png" in task.formats:
        rel = f"{RENDER_DIR}/{task.basename}.png"
        write_png_rgb(result.rgb, out_dir / rel)
        flow_png = rel
    return _SynthOutcome(
        basename=task.basename,
        params=params,
        flow_flo=flow_flo,
        flow_png=flow_png,
        depth_degenerate=result.depth_degenerate,
        flow_degenerate=result.flow_degenerate,
    )


def _index_tree(directory: Path, suffixes: tuple[str, ...]) -> dict[str, Path]:
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    out: dict[str, Path] = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in suffixes:
            out[p.stem] = p
    return out


def _relpath(target: Path, base: Path) -> str:
    return Path(os.path.relpath(target, base)).as_posix()


def build_synthetic_manifest(
    image_dir,
    depth_dir,
    mask_dir,
    out_dir,
    *,
    global_seed: int = 0,
    alpha_min: float = 0.0,
    workers: int | None = None,
    formats: tuple[str, ...] = ("flo", "png"),
    progress=None,
) -> SynthesisRun:
    """Synthesize flows for every basename present in all three trees.

    One record is produced per matched basename; each image is its own
    visual context. Basenames missing from any tree are reported in the skip
    list, never silently dropped. Flow files land under out_dir, and all
    recorded paths are relative to out_dir (where the manifest belongs).
    """
    image_dir, depth_dir, mask_dir = Path(image_dir), Path(depth_dir), Path(mask_dir)
    out_dir = Path(out_dir)
    if not formats or any(f not in ("flo", "png") for f in formats):
        raise InputError(f"formats must be a non-empty subset of ('flo', 'png'), got {formats!r}")
    started = time.monotonic()
    images = _index_tree(image_dir, IMAGE_SUFFIXES)
    depths = _index_tree(depth_dir, DEPTH_SUFFIXES)
    masks = _index_tree(mask_dir, MASK_SUFFIXES)

    matched = sorted(set(images) & set(depths) & set(masks))
    skipped = []
    for stem in sorted(set(images) | set(depths) | set(masks)):
        missing = [
            name
            for name, tree in (("image", images), ("depth", depths), ("mask", masks))
            if stem not in tree
        ]
        if missing:
            skipped.append(SkippedInput(stem, "missing " + ", ".join(missing)))
    if not matched:
        raise InputError(
            f"no basenames shared by {image_dir}, {depth_dir} and {mask_dir}"
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    if "flo" in formats:
        (out_dir / FLOW_DIR).mkdir(exist_ok=True)
    if "png" in formats:
        (out_dir / RENDER_DIR).mkdir(exist_ok=True)

    tasks = [
        _SynthTask(
            basename=stem,
            depth_path=str(depths[stem]),
            out_dir=str(out_dir),
            global_seed=global_seed,
            alpha_min=alpha_min,
            formats=tuple(formats),
        )
        for stem in matched
    ]

    if workers is None:
        workers = os.cpu_count() or 1
    outcomes: list[_SynthOutcome] = []
    if workers <= 1 or len(tasks) <= 1:
        for i, task in enumerate(tasks, start=1):
            outcomes.append(_run_synth_task(task))
            if progress:
                progress(i, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, outcome in enumerate(pool.map(_run_synth_task, tasks, chunksize=8), start=1):
                outcomes.append(outcome)
                if progress:
                    progress(i, len(tasks))

    records = []
    degenerate_depths = degenerate_flows = 0
    for outcome in outcomes:
        stem = outcome.basename
        degenerate_depths += outcome.depth_degenerate
        degenerate_flows += outcome.flow_degenerate
        records.append(
            SampleRecord(
                sample_id=f"synth/{stem}",
                image=_relpath(images[stem], out_dir),
                depth=_relpath(depths[stem], out_dir),
                flow_flo=outcome.flow_flo,
                flow_png=outcome.flow_png,
                mask=_relpath(masks[stem], out_dir),
                source="synthetic",
                context_id=f"synth/{stem}",
                params=outcome.params,
            )
        )
    manifest = Manifest(records=tuple(records), global_seed=global_seed)
    return SynthesisRun(
        manifest=manifest,
        skipped=tuple(skipped),
        degenerate_depths=degenerate_depths,
        degenerate_flows=degenerate_flows,
        seconds=time.monotonic() - started,
    )


# --------------------------------------------------------------------------
# Real-video manifest construction
# --------------------------------------------------------------------------

def list_sequences(video_root) -> list[Path]:
    video_root = Path(video_root)
    if not video_root.is_dir():
        raise InputError(f"not a directory: {video_root}")
    seqs = sorted(p for p in video_root.iterdir() if p.is_dir())
    if not seqs:
        raise InputError(f"no sequence directories under {video_root}")
    return seqs


def _sequence_files(seq_dir: Path, part: str, suffixes: tuple[str, ...]) -> list[Path]:
    sub = seq_dir / part
    if not sub.is_dir():
        raise ConsistencyError(f"sequence {seq_dir.name!r}: missing {part}/ directory")
    return sorted(p for p in sub.iterdir() if p.is_file() and p.suffix.lower() in suffixes)


def build_real_manifest(video_root, manifest_root=None) -> Manifest:
    """Turn a per-sequence video tree into one record per frame.

    Layout: <video_root>/<sequence>/{frames,flows,masks}/ with files aligned
    by sorted order. Every frame becomes an independent triplet whose visual
    context is its sequence. A count mismatch among the three parts is a
    consistency error naming the sequence.
    """
    video_root = Path(video_root)
    root = Path(manifest_root) if manifest_root is not None else video_root
    records = []
    for seq_dir in list_sequences(video_root):
        frames = _sequence_files(seq_dir, "frames", IMAGE_SUFFIXES)
        flows = _sequence_files(seq_dir, "flows", FLOW_SUFFIXES)
        masks = _sequence_files(seq_dir, "masks", MASK_SUFFIXES)
        if not (len(frames) == len(flows) == len(masks)):
            raise ConsistencyError(
                f"sequence {seq_dir.name!r}: {len(frames)} frames, "
                f"{len(flows)} flows, {len(masks)} masks"
            )
        if not frames:
            raise ConsistencyError(f"sequence {seq_dir.name!r}: empty")
        for frame, flow, mask in zip(frames, flows, masks):
            is_flo = flow.suffix.lower() == ".flo"
            records.append(
                SampleRecord(
                    sample_id=f"real/{seq_dir.name}/{frame.stem}",
                    image=_relpath(frame, root),
                    flow_flo=_relpath(flow, root) if is_flo else None,
                    flow_png=None if is_flo else _relpath(flow, root),
                    mask=_relpath(mask, root),
                    source="real",
                    context_id=f"real/{seq_dir.name}",
                )
            )
    return Manifest(records=tuple(records))


# --------------------------------------------------------------------------
# Merging and mixing
# --------------------------------------------------------------------------

def rebase_manifest(manifest: Manifest, old_root, new_root) -> Manifest:
    """Re-express every record path relative to a different manifest root."""
    old_root, new_root = Path(old_root), Path(new_root)

    def move(rel):
        return None if rel is None else _relpath(old_root / rel, new_root)

    records = tuple(
        replace(
            rec,
            image=move(rec.image),
            depth=move(rec.depth),
            flow_flo=move(rec.flow_flo),
            flow_png=move(rec.flow_png),
            mask=move(rec.mask),
        )
        for rec in manifest.records
    )
    return Manifest(
        records=records,
        global_seed=manifest.global_seed,
        created_at=manifest.created_at,
        tool_version=manifest.tool_version,
    )


def merge_manifests(real: Manifest, synthetic: Manifest) -> Manifest:
    """Concatenate two manifests; ids must be disjoint (namespacing does this)."""
    collisions = {r.sample_id for r in real.records} & {r.sample_id for r in synthetic.records}
    if collisions:
        sample = ", ".join(sorted(collisions)[:5])
        raise ConsistencyError(f"{len(collisions)} colliding sample ids, e.g. {sample}")
    return Manifest(
        records=real.records + synthetic.records,
        global_seed=synthetic.global_seed,
    )


def _endless_shuffle(records: tuple[SampleRecord, ...], rng: np.random.Generator) -> Iterator[SampleRecord]:
    while True:
        for i in rng.permutation(len(records)):
            yield records[i]


def mixed_sampler(
    real: Manifest,
    synthetic: Manifest,
    ratio: tuple[int, int] = (1, 3),
    epoch_seed: int = 0,
) -> Iterator[SampleRecord]:
    """Yield an endless deterministic stream mixing the two sources a:b.

    The source pattern is one seeded shuffle of a reals and b synthetics,
    repeated verbatim; that periodicity is what makes EVERY consecutive
    window of a+b items contain exactly a real and b synthetic samples, not
    just the aligned ones. Within each source, records are drawn without
    replacement and reshuffled when exhausted, so the smaller source cycles.
    """
    a, b = ratio
    if a < 1 or b < 1:
        raise ValueError(f"ratio components must be positive integers, got {ratio!r}")
    if not real.records or not synthetic.records:
        raise InputError("both manifests must be non-empty for mixing")
    rng = np.random.Generator(np.random.PCG64(int(epoch_seed)))
    pattern = [int(i) < a for i in rng.permutation(a + b)]
    real_stream = _endless_shuffle(real.records, rng)
    synth_stream = _endless_shuffle(synthetic.records, rng)
    while True:
        for is_real in pattern:
            yield next(real_stream) if is_real else next(synth_stream)
