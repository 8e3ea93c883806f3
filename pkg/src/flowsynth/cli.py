"""Command-line front end wiring the library into reproducible batch runs.

Subcommands: synthesize, pair-frames, build, merge, stats, sample, evaluate,
visualize. Exit codes are stable: 0 success, 2 input error, 3 data
consistency error. Option precedence is flags > config file > environment
default > built-in default; `--dump-config` prints the effective
configuration without running.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from itertools import islice
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    Manifest,
    build_real_manifest,
    build_synthetic_manifest,
    compute_stats,
    list_sequences,
    merge_manifests,
    mixed_sampler,
    pair_frames,
    rebase_manifest,
)
from .errors import ConsistencyError, DataError, FormatError, InputError
from .metrics import evaluate_dataset, report_to_csv, report_to_json, report_to_text
from .model import SampleRecord
from .raster_io import read_depth_auto, read_flo, read_png_rgb, write_png_rgb
from .render import normalize_flow, uv_to_rgb

SEED_ENV_VAR = "FLOWSYNTH_SEED"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONSISTENCY = 3

_DEFAULTS = {
    "seed": 0,
    "alpha_min": 0.0,
    "workers": None,
    "ratio": "1:3",
    "format": "both",
}


@dataclass
class RunConfig:
    """Effective options of one invocation; round-trips through JSON."""

    command: str
    seed: int = 0
    alpha_min: float = 0.0
    workers: int | None = None
    ratio: str = "1:3"
    format: str = "both"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        return RunConfig(**json.loads(text))

    def ratio_pair(self) -> tuple[int, int]:
        return parse_ratio(self.ratio)

    def formats(self) -> tuple[str, ...]:
        return ("flo", "png") if self.format == "both" else (self.format,)


def parse_ratio(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise InputError(f"ratio must look like 'a:b', got {text!r}")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise InputError(f"ratio must hold integers, got {text!r}") from exc
    if a < 1 or b < 1:
        raise InputError(f"ratio components must be positive, got {text!r}")
    return a, b


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON config: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flag, config-file, environment, and built-in values."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    env_seed = os.environ.get(SEED_ENV_VAR)
    defaults = dict(_DEFAULTS)
    if env_seed is not None:
        try:
            defaults["seed"] = int(env_seed)
        except ValueError as exc:
            raise InputError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc

    def pick(name):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in file_cfg and file_cfg[name] is not None:
            return file_cfg[name]
        return defaults[name]

    cfg = RunConfig(
        command=args.command,
        seed=int(pick("seed")),
        alpha_min=float(pick("alpha_min")),
        workers=pick("workers"),
        ratio=str(pick("ratio")),
        format=str(pick("format")),
    )
    if cfg.workers is not None:
        cfg.workers = int(cfg.workers)
    parse_ratio(cfg.ratio)
    if cfg.format not in ("flo", "png", "both"):
        raise InputError(f"format must be flo, png or both, got {cfg.format!r}")
    if not (0.0 <= cfg.alpha_min <= 1.0):
        raise InputError(f"alpha-min must lie in [0, 1], got {cfg.alpha_min}")
    return cfg


def _error_report(exc: Exception) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def _progress_printer(every: int = 50):
    def report(done, total):
        if done == total or done % every == 0:
            print(f"[{done}/{total}]", file=sys.stderr, flush=True)

    return report


# --------------------------------------------------------------------------
# Subcommand bodies
# --------------------------------------------------------------------------

def cmd_synthesize(args, cfg: RunConfig) -> int:
    for name in ("images", "depths", "masks"):
        p = Path(getattr(args, name))
        if not p.is_dir():
            raise InputError(f"--{name}: not a directory: {p}")
    out_dir = Path(args.out)
    started = time.monotonic()
    run = build_synthetic_manifest(
        args.images,
        args.depths,
        args.masks,
        out_dir,
        global_seed=cfg.seed,
        alpha_min=cfg.alpha_min,
        workers=cfg.workers,
        formats=cfg.formats(),
        progress=_progress_printer() if not args.quiet else None,
    )
    manifest_path = out_dir / "manifest.jsonl"
    run.manifest.save(manifest_path)
    summary = {
        "records": len(run.manifest),
        "skipped": [{"basename": s.basename, "reason": s.reason} for s in run.skipped],
        "degenerate_depths": run.degenerate_depths,
        "degenerate_flows": run.degenerate_flows,
        "seconds": round(time.monotonic() - started, 3),
        "samples_per_sec": round(run.samples_per_sec, 2),
        "seed": cfg.seed,
        "manifest": str(manifest_path),
    }
    (out_dir / "run_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_pair_frames(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    skipped = []
    written = 0
    for seq_dir in list_sequences(args.video_root):
        # frames may live under <seq>/frames/ or directly in <seq>/ (raw dumps
        # that have no flows or masks yet)
        scan = seq_dir / "frames" if (seq_dir / "frames").is_dir() else seq_dir
        frames = sorted(p.name for p in scan.iterdir() if p.is_file())
        if len(frames) < 2:
            skipped.append(seq_dir.name)
            continue
        pairs = pair_frames(len(frames))
        lines = [f"{frames[i]} {frames[j]}" for i, j in pairs]
        (out_dir / f"{seq_dir.name}.txt").write_text("\n".join(lines) + "\n")
        written += 1
    for name in skipped:
        print(f"skipped {name}: fewer than 2 frames")
    print(f"wrote pairings for {written} sequences to {out_dir}")
    return EXIT_OK


def cmd_build(args, cfg: RunConfig) -> int:
    out_path = Path(args.out)
    manifest = build_real_manifest(args.video_root, manifest_root=out_path.parent)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    manifest.save(out_path)
    stats = compute_stats(manifest)
    print(f"{stats.n_triplets} triplets over {stats.n_contexts} contexts -> {out_path}")
    return EXIT_OK


def cmd_merge(args, cfg: RunConfig) -> int:
    out_path = Path(args.out)
    out_root = out_path.parent
    # records keep resolving after the merge regardless of where it lands
    real = rebase_manifest(Manifest.load(args.real), Path(args.real).parent, out_root)
    synthetic = rebase_manifest(Manifest.load(args.synthetic), Path(args.synthetic).parent, out_root)
    merged = merge_manifests(real, synthetic)
    out_root.mkdir(parents=True, exist_ok=True)
    merged.save(out_path)
    stats = compute_stats(merged)
    print(f"{stats.n_triplets} triplets over {stats.n_contexts} contexts -> {args.out}")
    return EXIT_OK


def _stats_rows(manifest: Manifest) -> list[tuple[str, int, int]]:
    stats = compute_stats(manifest)
    rows = [(src, n, ctx) for src, (n, ctx) in stats.per_source.items()]
    if len(rows) != 1:
        rows.append(("mixed", stats.n_triplets, stats.n_contexts))
    return rows


def cmd_stats(args, cfg: RunConfig) -> int:
    manifest = Manifest.load(args.manifest)
    rows = _stats_rows(manifest)
    if args.json:
        print(json.dumps({src: {"triplets": n, "contexts": c} for src, n, c in rows}))
        return EXIT_OK
    header = ("dataset", "triplets", "contexts")
    cells = [header] + [(src, f"{n:,}", f"{c:,}") for src, n, c in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(3)]
    for row in cells:
        print(row[0].ljust(widths[0]) + "  " + row[1].rjust(widths[1]) + "  " + row[2].rjust(widths[2]))
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    real = Manifest.load(args.real)
    synthetic = Manifest.load(args.synthetic)
    a, b = cfg.ratio_pair()
    length = args.length if args.length is not None else len(real) + len(synthetic)
    stream = mixed_sampler(real, synthetic, ratio=(a, b), epoch_seed=args.epoch_seed)
    lines = [f"{rec.source}\t{rec.sample_id}" for rec in islice(stream, length)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    manifest_path = Path(args.manifest)
    manifest = Manifest.load(manifest_path)
    report = evaluate_dataset(manifest, manifest_path.parent, args.predictions)
    payload = report_to_json(report)
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    if args.csv:
        Path(args.csv).write_text(report_to_csv(report))
    print(report_to_text(report))
    if report.missing:
        print(f"warning: {len(report.missing)} missing predictions", file=sys.stderr)
    return EXIT_OK


def _depth_panel(depth_values: np.ndarray) -> np.ndarray:
    lo = float(depth_values.min())
    hi = float(depth_values.max())
    if hi - lo < 1e-12:
        gray = np.full(depth_values.shape, 128, dtype=np.uint8)
    else:
        gray = np.floor((depth_values - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)
    return np.repeat(gray[..., None], 3, axis=2)


def _flow_panel(rec: SampleRecord, root: Path) -> np.ndarray:
    if rec.flow_png is not None:
        return read_png_rgb(root / rec.flow_png)
    field = read_flo(root / rec.flow_flo)
    normalized, _ = normalize_flow(field)
    return uv_to_rgb(normalized).rgb


def cmd_visualize(args, cfg: RunConfig) -> int:
    manifest_path = Path(args.manifest)
    manifest = Manifest.load(manifest_path)
    root = manifest_path.parent
    by_id = {rec.sample_id: rec for rec in manifest.records}
    if args.ids:
        wanted = args.ids.split(",")
        unknown = [i for i in wanted if i not in by_id]
        if unknown:
            raise InputError(f"unknown sample ids: {', '.join(unknown)}")
        records = [by_id[i] for i in wanted]
    else:
        records = list(manifest.records[: args.count])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gutter = 4
    for rec in records:
        image = read_png_rgb(root / rec.image)
        if rec.depth is not None:
            depth = _depth_panel(read_depth_auto(root / rec.depth).values)
        else:
            depth = np.full(image.shape, 128, dtype=np.uint8)
        flow = _flow_panel(rec, root)
        h = image.shape[0]
        if depth.shape[0] != h or flow.shape[0] != h:
            raise InputError(f"{rec.sample_id}: panel heights differ, cannot compose")
        spacer = np.full((h, gutter, 3), 255, dtype=np.uint8)
        panel = np.concatenate([image, spacer, depth, spacer, flow], axis=1)
        out_path = out_dir / (rec.sample_id.replace("/", "_") + ".png")
        write_png_rgb(panel, out_path)
    print(f"wrote {len(records)} panels to {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser assembly
# --------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags take precedence)")
    parser.add_argument("--dump-config", action="store_true", help="print effective config and exit")
    parser.add_argument("--seed", type=int, default=None, help=f"global seed (env {SEED_ENV_VAR})")
    parser.add_argument("--alpha-min", dest="alpha_min", type=float, default=None,
                        help="lower bound for the drawn magnitude scale (default 0)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: available parallelism)")
    parser.add_argument("--ratio", default=None, help="real:synthetic mixing ratio, e.g. 1:3")
    parser.add_argument("--format", choices=("flo", "png", "both"), default=None,
                        help="flow outputs to write (default both)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowsynth",
        description="Synthesize training flow from depth, build manifests, evaluate masks.",
    )
    parser.add_argument("--version", action="version", version=f"flowsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="generate flow files and a manifest from image/depth/mask trees")
    p.add_argument("--images", required=True)
    p.add_argument("--depths", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True, help="output root for flows, renders and manifest.jsonl")
    p.add_argument("--quiet", action="store_true", help="suppress the progress counter")
    _add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("pair-frames", help="emit source/target frame pairings for external flow tools")
    p.add_argument("--video-root", dest="video_root", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_pair_frames)

    p = sub.add_parser("build", help="build a manifest from a per-sequence video tree")
    p.add_argument("--video-root", dest="video_root", required=True)
    p.add_argument("--out", required=True, help="manifest path (paths recorded relative to its directory)")
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("merge", help="merge real and synthetic manifests")
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("stats", help="print triplet/context counts for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--json", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sample", help="dump a deterministic mixed sample stream")
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--epoch-seed", dest="epoch_seed", type=int, default=0)
    p.add_argument("--length", type=int, default=None, help="stream length (default: one full pass)")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score predictions against a manifest's ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument("--csv", default=None, help="CSV report path")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("visualize", help="write image|depth|flow panels for sampled records")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ids", default=None, help="comma-separated sample ids")
    p.add_argument("--count", type=int, default=4, help="number of records when --ids is absent")
    _add_common(p)
    p.set_defaults(func=cmd_visualize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if getattr(args, "dump_config", False):
            print(cfg.to_json())
            return EXIT_OK
        return args.func(args, cfg)
    except ConsistencyError as exc:
        print(_error_report(exc), file=sys.stderr)
        return EXIT_CONSISTENCY
    except (InputError, FormatError, DataError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(_error_report(exc), file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
