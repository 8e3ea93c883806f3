"""Shared fixture builders for the test suite."""

from pathlib import Path

import numpy as np

from flowsynth import BinaryMask, MotionField
from flowsynth.raster_io import write_flo, write_mask, write_pfm, write_png_gray16, write_png_rgb


def random_mask_bits(rng, h, w, max_rects=3):
    """Union of a few random rectangles; may legitimately come out empty or full."""
    bits = np.zeros((h, w), dtype=np.uint8)
    for _ in range(int(rng.integers(0, max_rects + 1))):
        y0 = int(rng.integers(0, h))
        x0 = int(rng.integers(0, w))
        y1 = int(rng.integers(y0, h)) + 1
        x1 = int(rng.integers(x0, w)) + 1
        bits[y0:y1, x0:x1] = 1
    return bits


def random_field(rng, h, w, scale=1.0, stage="raw"):
    u = ((rng.random((h, w)) * 2 - 1) * scale).astype(np.float32)
    v = ((rng.random((h, w)) * 2 - 1) * scale).astype(np.float32)
    return MotionField(u=u, v=v, stage=stage)


def make_synthetic_tree(root: Path, n, size=(18, 24), seed=0, depth_fmt="pfm"):
    """Create matching images/, depths/, masks/ trees with n samples each."""
    h, w = size
    rng = np.random.default_rng(seed)
    images = root / "images"
    depths = root / "depths"
    masks = root / "masks"
    for d in (images, depths, masks):
        d.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(n):
        name = f"img{i:04d}"
        names.append(name)
        write_png_rgb(rng.integers(0, 256, (h, w, 3)).astype(np.uint8), images / f"{name}.png")
        depth = (rng.random((h, w)) * 10).astype(np.float32)
        if depth_fmt == "pfm":
            write_pfm(depth, depths / f"{name}.pfm")
        else:
            write_png_gray16((depth * 1000).astype(np.uint16), depths / f"{name}.png")
        write_mask(BinaryMask(random_mask_bits(rng, h, w)), masks / f"{name}.png")
    return images, depths, masks, names


def make_video_tree(root: Path, sequences: dict, size=(10, 12), seed=0, flow_ext=".flo"):
    """Create <root>/<seq>/{frames,flows,masks} trees aligned by index."""
    h, w = size
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for seq, n in sequences.items():
        for part in ("frames", "flows", "masks"):
            (root / seq / part).mkdir(parents=True, exist_ok=True)
        for i in range(n):
            write_png_rgb(
                rng.integers(0, 256, (h, w, 3)).astype(np.uint8),
                root / seq / "frames" / f"{i:05d}.png",
            )
            if flow_ext == ".flo":
                write_flo(random_field(rng, h, w), root / seq / "flows" / f"{i:05d}.flo")
            else:
                write_png_rgb(
                    rng.integers(0, 256, (h, w, 3)).astype(np.uint8),
                    root / seq / "flows" / f"{i:05d}.png",
                )
            write_mask(BinaryMask(random_mask_bits(rng, h, w)), root / seq / "masks" / f"{i:05d}.png")
    return root
