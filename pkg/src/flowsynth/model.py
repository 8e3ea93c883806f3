"""Shared raster and manifest record types with their validity checks.

Everything here is a passive container: construction validates, instances are
immutable (arrays are marked read-only), and all math lives in the processing
modules. Rasters are row-major with the origin at the top-left pixel and hold
32-bit floats, matching the PNG and .flo conventions used on disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Inclusive range checks absorb float32 rounding up to this slack.
RANGE_TOL = 1e-6

DEPTH_STATES = ("raw", "normalized")
FIELD_STAGES = ("reversed", "shifted", "scaled", "normalized", "raw")
SOURCES = ("real", "synthetic")

# Symmetric component bounds per motion stage. "normalized" is handled
# separately (unit peak or identically zero) and "raw" is unbounded.
_STAGE_BOUND = {"reversed": 1.0, "shifted": 2.0, "scaled": 2.0}


def _checked_plane(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D raster, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name}: raster dimensions must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Single-channel depth raster, either raw file values or min-max normalized."""

    values: np.ndarray
    state: str = "raw"

    def __post_init__(self):
        if self.state not in DEPTH_STATES:
            raise ValueError(f"unknown depth state {self.state!r}")
        arr = _checked_plane(self.values, "depth")
        object.__setattr__(self, "values", arr)
        if self.state == "normalized":
            lo = float(arr.min())
            hi = float(arr.max())
            if lo < -RANGE_TOL or hi > 1.0 + RANGE_TOL:
                raise ValueError(f"normalized depth outside [0, 1]: min={lo}, max={hi}")
            if hi - lo > RANGE_TOL and (abs(lo) > RANGE_TOL or abs(hi - 1.0) > RANGE_TOL):
                raise ValueError(
                    f"non-constant normalized depth must span [0, 1]: min={lo}, max={hi}"
                )

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class MotionField:
    """Two-channel per-pixel displacement raster tagged with its pipeline stage.

    Stages and their component ranges:
      reversed    signed depth plane, within [-1, 1]
      shifted     after a uniform offset, within [-2, 2]
      scaled      after magnitude scaling, within [-2, 2]
      normalized  peak absolute component equals 1, or the field is all zero
      raw         unconstrained (externally computed flow)
    """

    u: np.ndarray
    v: np.ndarray
    stage: str

    def __post_init__(self):
        if self.stage not in FIELD_STAGES:
            raise ValueError(f"unknown motion stage {self.stage!r}")
        u = _checked_plane(self.u, "motion u")
        v = _checked_plane(self.v, "motion v")
        if u.shape != v.shape:
            raise ValueError(f"u/v shape mismatch: {u.shape} vs {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        bound = _STAGE_BOUND.get(self.stage)
        peak = self.peak
        if bound is not None and peak > bound + RANGE_TOL:
            raise ValueError(f"stage {self.stage!r} components exceed [-{bound}, {bound}]: peak {peak}")
        if self.stage == "normalized" and peak > RANGE_TOL and abs(peak - 1.0) > RANGE_TOL:
            raise ValueError(f"normalized field must have unit peak or be zero, got {peak}")

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def peak(self) -> float:
        """Largest absolute value over both components."""
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))


@dataclass(frozen=True, eq=False)
class FlowRgb:
    """8-bit RGB rendering of a flow field."""

    rgb: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rgb)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"flow render must be (h, w, 3), got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"raster dimensions must be positive, got {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"flow render must hold 8-bit integers, got dtype {arr.dtype}")
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("flow render channels must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "rgb", arr)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Strictly {0, 1} single-channel mask."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"raster dimensions must be positive, got {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        elif np.issubdtype(arr.dtype, np.integer):
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask values must be exactly 0 or 1")
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"mask must hold booleans or integers, got dtype {arr.dtype}")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class SynthParams:
    """Drawn parameters of one synthetic flow sample.

    Field order mirrors the frozen draw order: r_x, s_x, alpha_x, then the
    y-axis triple. `sample_seed` is the derived 64-bit seed the draws came
    from, recorded so a sample can be regenerated in isolation.
    """

    r_x: int
    s_x: float
    alpha_x: float
    r_y: int
    s_y: float
    alpha_y: float
    sample_seed: int

    def __post_init__(self):
        for name in ("r_x", "r_y"):
            r = getattr(self, name)
            if r not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1, got {r!r}")
        for name in ("s_x", "s_y"):
            s = getattr(self, name)
            if not (-1.0 - RANGE_TOL <= s <= 1.0 + RANGE_TOL):
                raise ValueError(f"{name} must lie in [-1, 1], got {s!r}")
        for name in ("alpha_x", "alpha_y"):
            a = getattr(self, name)
            if not (-RANGE_TOL <= a <= 1.0 + RANGE_TOL):
                raise ValueError(f"{name} must lie in [0, 1], got {a!r}")
        if not (0 <= self.sample_seed < 2**64):
            raise ValueError(f"sample_seed must be an unsigned 64-bit value, got {self.sample_seed!r}")


@dataclass(frozen=True)
class SampleRecord:
    """One manifest entry binding a training triplet to its provenance.

    Paths are stored relative to the manifest root. Real samples carry no
    depth or draw parameters; synthetic ones must have both plus at least one
    persisted flow file.
    """

    sample_id: str
    image: str
    mask: str
    source: str
    context_id: str
    depth: str | None = None
    flow_flo: str | None = None
    flow_png: str | None = None
    params: SynthParams | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        for name in ("sample_id", "image", "mask", "context_id"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for name in ("depth", "flow_flo", "flow_png"):
            value = getattr(self, name)
            if value is not None and not value:
                raise ValueError(f"{name} must be non-empty when present")
        if self.flow_flo is None and self.flow_png is None:
            raise ValueError("record needs at least one flow path")
        if self.source == "synthetic":
            if self.params is None:
                raise ValueError("synthetic record requires draw params")
            if self.depth is None:
                raise ValueError("synthetic record requires a depth path")
        elif self.params is not None:
            raise ValueError("real record must not carry draw params")


def dims_match(a, b) -> bool:
    """True iff two rasters have identical width and height."""
    return a.width == b.width and a.height == b.height
