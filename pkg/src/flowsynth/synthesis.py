"""Depth-to-motion synthesis: normalization plus the seeded random transforms.

A normalized depth map is turned into a two-channel motion field through
three per-axis steps: random polarity reversal into [-1, 1], a uniform
offset, and a magnitude scale. Axes are processed independently, so one
sample consumes six draws. Every draw is keyed by (global_seed, sample_id),
which makes whole-dataset synthesis reproducible and order-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .model import RANGE_TOL, DepthMap, MotionField, SynthParams

# Spread below this is treated as a constant (degenerate) input.
DEGENERATE_EPS = 1e-12


class RngStream:
    """Deterministic random stream for one sample.

    The 64-bit stream seed is derived by hashing (global_seed, sample_id), so
    identical keys always replay the same draw sequence regardless of worker
    scheduling or how many other samples were processed first.
    """

    def __init__(self, global_seed: int, sample_id: str):
        if not (0 <= int(global_seed) < 2**64):
            raise ValueError(f"global_seed must be an unsigned 64-bit value, got {global_seed!r}")
        if not sample_id:
            raise ValueError("sample_id must be non-empty")
        self.global_seed = int(global_seed)
        self.sample_id = sample_id
        digest = hashlib.sha256(f"{self.global_seed}:{sample_id}".encode("utf-8")).digest()
        self.sample_seed = int.from_bytes(digest[:8], "little")
        self._rng = np.random.Generator(np.random.PCG64(self.sample_seed))

    def coin(self) -> int:
        return int(self._rng.integers(0, 2))

    def uniform(self, lo: float, hi: float) -> float:
        return float(self._rng.uniform(lo, hi))


def draw_params(stream: RngStream, alpha_min: float = 0.0) -> SynthParams:
    """Draw one sample's parameters from its stream.

    The draw order is frozen as r_x, s_x, alpha_x, r_y, s_y, alpha_y and is
    part of the reproducibility contract: changing it would silently change
    every regenerated dataset. `alpha_min` lifts the scale floor so callers
    can exclude near-zero flows that cannot be peak-normalized.
    """
    if not (0.0 <= alpha_min <= 1.0):
        raise ValueError(f"alpha_min must lie in [0, 1], got {alpha_min!r}")
    r_x = stream.coin()
    s_x = stream.uniform(-1.0, 1.0)
    alpha_x = stream.uniform(alpha_min, 1.0)
    r_y = stream.coin()
    s_y = stream.uniform(-1.0, 1.0)
    alpha_y = stream.uniform(alpha_min, 1.0)
    return SynthParams(
        r_x=r_x,
        s_x=s_x,
        alpha_x=alpha_x,
        r_y=r_y,
        s_y=s_y,
        alpha_y=alpha_y,
        sample_seed=stream.sample_seed,
    )


def normalize_depth(depth: DepthMap) -> tuple[DepthMap, bool]:
    """Min-max normalize a raw depth map to [0, 1] over all pixels.

    Returns the normalized map and a degenerate flag: constant inputs cannot
    be spread, so they come back as a uniform 0.5 map with the flag set.
    """
    if depth.state != "raw":
        raise ValueError(f"expected a raw depth map, got state {depth.state!r}")
    lo = float(depth.values.min())
    hi = float(depth.values.max())
    if hi - lo < DEGENERATE_EPS:
        flat = np.full_like(depth.values, np.float32(0.5))
        return DepthMap(flat, state="normalized"), True
    out = (depth.values - np.float32(lo)) / np.float32(hi - lo)
    return DepthMap(out, state="normalized"), False


def reverse_depth(depth: DepthMap, r: int) -> np.ndarray:
    """Map normalized depth to a signed motion plane in [-1, 1].

    The binary draw picks the polarity: r=0 keeps near-means-fast ordering
    (2D - 1), r=1 flips it (1 - 2D).
    """
    if depth.state != "normalized":
        raise ValueError(f"expected a normalized depth map, got state {depth.state!r}")
    if r not in (0, 1):
        raise ValueError(f"reversal bit must be 0 or 1, got {r!r}")
    two = np.float32(2.0)
    one = np.float32(1.0)
    if r == 1:
        return one - two * depth.values
    return two * depth.values - one


def shift_motion(plane: np.ndarray, s: float) -> np.ndarray:
    """Add a uniform offset s in [-1, 1] to a motion plane."""
    if not (-1.0 - RANGE_TOL <= s <= 1.0 + RANGE_TOL):
        raise ValueError(f"shift must lie in [-1, 1], got {s!r}")
    return np.asarray(plane, dtype=np.float32) + np.float32(s)


def scale_motion(plane: np.ndarray, alpha: float) -> np.ndarray:
    """Scale a motion plane by alpha in [0, 1]; magnitudes never grow."""
    if not (-RANGE_TOL <= alpha <= 1.0 + RANGE_TOL):
        raise ValueError(f"scale must lie in [0, 1], got {alpha!r}")
    return np.asarray(plane, dtype=np.float32) * np.float32(alpha)


def synthesize_motion(depth: DepthMap, params: SynthParams) -> MotionField:
    """Run reverse -> shift -> scale independently per axis.

    The composition order is fixed; each axis uses its own (r, s, alpha)
    triple, so the horizontal and vertical channels decorrelate even though
    they share the underlying depth structure.
    """
    u = scale_motion(shift_motion(reverse_depth(depth, params.r_x), params.s_x), params.alpha_x)
    v = scale_motion(shift_motion(reverse_depth(depth, params.r_y), params.s_y), params.alpha_y)
    return MotionField(u=u, v=v, stage="scaled")
