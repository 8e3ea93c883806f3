"""Flow peak-normalization and color-wheel rendering to RGB.

The rendering follows the standard optical-flow visualization convention
(Baker et al.'s 55-anchor hue wheel): direction selects a hue via
atan2(-v, -u), magnitude selects saturation, zero motion renders white.
Channel rounding is half-away-from-zero so renders are bit-reproducible
across implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DepthMap, FlowRgb, MotionField, SynthParams
from .synthesis import DEGENERATE_EPS, normalize_depth, synthesize_motion

# Anchor counts per hue segment: red-yellow, yellow-green, green-cyan,
# cyan-blue, blue-magenta, magenta-red.
WHEEL_SEGMENTS = (15, 6, 4, 11, 13, 6)
WHEEL_SIZE = sum(WHEEL_SEGMENTS)

# Components may exceed unit magnitude by at most this much before rendering
# refuses the field as un-normalized.
RENDER_SLACK = 1e-3


def make_color_wheel() -> np.ndarray:
    """Build the 55-anchor RGB hue wheel as a (55, 3) uint8 table.

    Anchor 0 is pure red; within each segment one channel ramps as
    floor(255*i/n) while the others stay saturated, matching the classic
    integer-valued wheel so renders are comparable across tools.
    """
    ry, yg, gc, cb, bm, mr = WHEEL_SEGMENTS
    wheel = np.zeros((WHEEL_SIZE, 3), dtype=np.uint8)
    col = 0
    wheel[col : col + ry, 0] = 255
    wheel[col : col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    wheel[col : col + bm, 2] = 255
    col += bm
    wheel[col : col + mr, 0] = 255
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    return wheel


COLOR_WHEEL = make_color_wheel()


def normalize_flow(field: MotionField) -> tuple[MotionField, bool]:
    """Divide both components by the peak absolute component value.

    Returns the normalized field plus a degenerate flag; an (almost) all-zero
    field has no usable peak and comes back as an exact zero field with the
    flag set. The operation is idempotent and scale-invariant, and accepts
    fields of any stage (externally computed flows included).
    """
    peak = field.peak
    if peak < DEGENERATE_EPS:
        zero = np.zeros_like(field.u)
        return MotionField(u=zero, v=zero.copy(), stage="normalized"), True
    div = np.float32(peak)
    return MotionField(u=field.u / div, v=field.v / div, stage="normalized"), False


def uv_to_rgb(field: MotionField) -> FlowRgb:
    """Render a peak-normalized flow field through the color wheel.

    Per pixel: radius sqrt(u^2 + v^2) clamped to 1 sets saturation (0 gives
    white), the angle atan2(-v, -u)/pi picks a wheel position interpolated
    linearly between neighboring anchors, and each channel is
    round(255 * (1 - radius * (1 - anchor/255))) with ties away from zero.
    """
    if field.peak > 1.0 + RENDER_SLACK:
        raise ValueError(
            f"flow peak {field.peak} exceeds unit magnitude; normalize the field before rendering"
        )
    u = field.u.astype(np.float64)
    v = field.v.astype(np.float64)
    rad = np.sqrt(u * u + v * v)
    np.minimum(rad, 1.0, out=rad)
    a = np.arctan2(-v, -u) / np.pi
    fk = (a + 1.0) / 2.0 * (WHEEL_SIZE - 1)
    k0 = np.clip(np.floor(fk).astype(np.int64), 0, WHEEL_SIZE - 1)
    f = fk - k0
    k1 = (k0 + 1) % WHEEL_SIZE
    wheel = COLOR_WHEEL.astype(np.float64) / 255.0
    col = (1.0 - f)[..., None] * wheel[k0] + f[..., None] * wheel[k1]
    value = 255.0 * (1.0 - rad[..., None] * (1.0 - col))
    return FlowRgb(np.floor(value + 0.5).astype(np.uint8))


@dataclass(frozen=True)
class RenderResult:
    """Rendered sample: the persistable normalized field plus its RGB view."""

    field: MotionField
    rgb: FlowRgb
    depth_degenerate: bool
    flow_degenerate: bool


def render_pipeline(depth: DepthMap, params: SynthParams) -> RenderResult:
    """Full chain from a raw depth map to (normalized field, RGB render)."""
    normalized_depth, depth_flat = normalize_depth(depth)
    motion = synthesize_motion(normalized_depth, params)
    field, flow_flat = normalize_flow(motion)
    rgb = uv_to_rgb(field)
    return RenderResult(field=field, rgb=rgb, depth_degenerate=depth_flat, flow_degenerate=flow_flat)
