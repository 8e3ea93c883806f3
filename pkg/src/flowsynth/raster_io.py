"""Bit-exact file codecs for the formats the pipeline touches.

Depth comes in as PFM or 8/16-bit grayscale PNG, images and flow renders as
8-bit RGB PNG, masks as grayscale or paletted PNG, and raw flow fields as
Middlebury-style .flo containers. All writers are deterministic: identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, FormatError, InputError
from .model import BinaryMask, DepthMap, FlowRgb, MotionField

# Float32 sanity tag at the head of every .flo file; its bytes read "PIEH".
FLO_MAGIC = 202021.25

# Grayscale pixel values strictly above this threshold count as foreground.
MASK_THRESHOLD = 127

DEPTH_FORMATS = ("pfm", "png8", "png16")


# --------------------------------------------------------------------------
# .flo flow fields
# --------------------------------------------------------------------------

def write_flo(field: MotionField, path) -> None:
    """Persist a flow field as little-endian .flo (magic, dims, interleaved u/v)."""
    path = Path(path)
    h, w = field.u.shape
    payload = np.empty((h, w, 2), dtype="<f4")
    payload[..., 0] = field.u
    payload[..., 1] = field.v
    try:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
            fh.write(payload.tobytes())
    except OSError as exc:
        raise InputError(f"cannot write flow file {path}: {exc}") from exc


def read_flo(path, stage: str = "raw") -> MotionField:
    """Read a .flo file; the stage tag defaults to "raw" (the file stores none)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read flow file {path}: {exc}") from exc
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header, {len(blob)} bytes before offset 12")
    magic, w, h = struct.unpack("<fii", blob[:12])
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0, expected {FLO_MAGIC}")
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: non-positive dimensions {w}x{h} at byte 4")
    expected = w * h * 8
    if len(blob) - 12 != expected:
        raise FormatError(
            f"{path}: payload at offset 12 holds {len(blob) - 12} bytes, header implies {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=12).reshape(h, w, 2)
    if not np.isfinite(data).all():
        raise DataError(f"{path}: flow payload contains non-finite values")
    return MotionField(u=data[..., 0], v=data[..., 1], stage=stage)


# --------------------------------------------------------------------------
# PFM depth
# --------------------------------------------------------------------------

def _next_token(blob: bytes, pos: int, path) -> tuple[bytes, int]:
    while pos < len(blob) and blob[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(blob) and not blob[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError(f"{path}: truncated header at byte {start}")
    return blob[start:pos], pos


def read_pfm(path) -> np.ndarray:
    """Parse a grayscale PFM into a top-down float32 plane.

    PFM scanlines are stored bottom-up; the returned array is flipped to the
    package's top-left origin. The scale factor's sign selects endianness.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read depth file {path}: {exc}") from exc
    kind, pos = _next_token(blob, 0, path)
    if kind == b"PF":
        raise FormatError(f"{path}: color PFM is not supported, expected grayscale 'Pf'")
    if kind != b"Pf":
        raise FormatError(f"{path}: bad PFM tag {kind!r} at byte 0")
    try:
        w_tok, pos = _next_token(blob, pos, path)
        h_tok, pos = _next_token(blob, pos, path)
        scale_tok, pos = _next_token(blob, pos, path)
        w, h = int(w_tok), int(h_tok)
        scale = float(scale_tok)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PFM header near byte {pos}: {exc}") from exc
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: non-positive dimensions {w}x{h}")
    if scale == 0:
        raise FormatError(f"{path}: zero scale factor")
    payload = blob[pos + 1 :]  # single whitespace byte separates header and payload
    expected = w * h * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload at offset {pos + 1} holds {len(payload)} bytes, header implies {expected}"
        )
    endian = "<" if scale < 0 else ">"
    values = np.frombuffer(payload, dtype=endian + "f4").reshape(h, w)
    if not np.isfinite(values).all():
        raise DataError(f"{path}: depth payload contains non-finite values")
    return values[::-1].astype(np.float32)


def write_pfm(values: np.ndarray, path) -> None:
    """Write a top-down float32 plane as little-endian grayscale PFM."""
    arr = np.asarray(values, dtype=np.float32)
    h, w = arr.shape
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
            fh.write(arr[::-1].astype("<f4").tobytes())
    except OSError as exc:
        raise InputError(f"cannot write depth file {path}: {exc}") from exc


# --------------------------------------------------------------------------
# PNG images, grayscale depth, masks
# --------------------------------------------------------------------------

def _open_png(path) -> Image.Image:
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: not a decodable image: {exc}") from exc
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    return img


def read_depth(path, fmt: str) -> DepthMap:
    """Load a raw depth map from disk; PNG integers are kept as-is, unscaled."""
    if fmt not in DEPTH_FORMATS:
        raise InputError(f"unknown depth format {fmt!r}, expected one of {DEPTH_FORMATS}")
    if fmt == "pfm":
        return DepthMap(read_pfm(path), state="raw")
    img = _open_png(path)
    if fmt == "png8":
        if img.mode != "L":
            raise FormatError(f"{path}: expected 8-bit grayscale PNG, got mode {img.mode}")
    else:
        if img.mode not in ("I;16", "I"):
            raise FormatError(f"{path}: expected 16-bit grayscale PNG, got mode {img.mode}")
    values = np.asarray(img).astype(np.float32)
    return DepthMap(values, state="raw")


def read_depth_auto(path) -> DepthMap:
    """Load depth picking the format from the file itself (.pfm suffix or PNG mode)."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return read_depth(path, "pfm")
    img = _open_png(path)
    if img.mode == "L":
        return read_depth(path, "png8")
    if img.mode in ("I;16", "I"):
        return read_depth(path, "png16")
    raise FormatError(f"{path}: unsupported depth PNG mode {img.mode}")


def write_png_gray8(values: np.ndarray, path) -> None:
    arr = np.asarray(values, dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def write_png_gray16(values: np.ndarray, path) -> None:
    arr = np.asarray(values, dtype=np.uint16)
    Image.fromarray(arr).save(Path(path), format="PNG")


def write_png_rgb(image, path) -> None:
    """Write an 8-bit RGB raster (FlowRgb or (h, w, 3) uint8 array) losslessly."""
    arr = image.rgb if isinstance(image, FlowRgb) else np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise InputError(f"expected (h, w, 3) uint8 image, got shape {arr.shape} dtype {arr.dtype}")
    try:
        Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")
    except OSError as exc:
        raise InputError(f"cannot write image {path}: {exc}") from exc


def read_png_rgb(path) -> np.ndarray:
    """Read an RGB PNG as (h, w, 3) uint8; other PNG modes are converted."""
    img = _open_png(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img)


def read_mask(path, merge_labels: bool = True) -> BinaryMask:
    """Binarize a grayscale or paletted PNG mask.

    Grayscale values above 127 map to 1. Paletted masks carry object labels
    as indices; with merge_labels every non-zero label becomes foreground
    (multi-object annotations collapse to one binary mask), without it any
    label beyond {0, 1} is rejected. True-color masks are rejected.
    """
    img = _open_png(path)
    if img.mode == "1":
        return BinaryMask(np.asarray(img).astype(np.uint8))
    if img.mode == "L":
        return BinaryMask((np.asarray(img) > MASK_THRESHOLD).astype(np.uint8))
    if img.mode == "P":
        indices = np.asarray(img)
        if merge_labels:
            return BinaryMask((indices != 0).astype(np.uint8))
        if indices.max() > 1:
            raise FormatError(f"{path}: paletted mask holds labels beyond binary; enable label merging")
        return BinaryMask(indices.astype(np.uint8))
    raise FormatError(f"{path}: masks must be grayscale or paletted PNG, got mode {img.mode}")


def write_mask(mask: BinaryMask, path) -> None:
    """Write a binary mask as an 8-bit grayscale PNG with values {0, 255}."""
    write_png_gray8(mask.bits * np.uint8(255), path)


def read_saliency(path) -> np.ndarray:
    """Read an 8-bit grayscale prediction as a float32 map in [0, 1]."""
    img = _open_png(path)
    if img.mode == "1":
        return np.asarray(img).astype(np.float32)
    if img.mode != "L":
        raise FormatError(f"{path}: saliency predictions must be 8-bit grayscale PNG, got mode {img.mode}")
    return np.asarray(img).astype(np.float32) / np.float32(255.0)
