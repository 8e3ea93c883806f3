"""Segmentation and saliency evaluation: J, boundary F, G, MAE, max-Fbeta.

Conventions follow the de-facto video-object-segmentation protocol: boundary
matching tolerance is ceil(0.008 * image diagonal), empty-vs-empty scores 1
for both J and F, per-sequence means are unweighted frame means, and the
dataset mean is an unweighted mean over sequences (visual contexts).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InputError
from .model import BinaryMask, MotionField, dims_match
from .raster_io import read_mask, read_saliency

BOUNDARY_DIAGONAL_FRACTION = 0.008
FBETA_SQUARED = 0.3
FBETA_THRESHOLDS = 255

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _require_same_dims(pred, gt):
    if not dims_match(pred, gt):
        raise ValueError(
            f"dimension mismatch: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )


def region_j(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; two empty masks agree perfectly (1.0)."""
    _require_same_dims(pred, gt)
    p = pred.bits.astype(bool)
    g = gt.bits.astype(bool)
    union = int(np.count_nonzero(p | g))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(p & g)) / union


def boundary_tolerance(width: int, height: int) -> int:
    """Matching radius in pixels, proportional to the image diagonal."""
    return int(np.ceil(BOUNDARY_DIAGONAL_FRACTION * np.sqrt(width**2 + height**2)))


def mask_boundary(bits: np.ndarray) -> np.ndarray:
    """1-px boundary: foreground pixels with a background (or off-image) 4-neighbor."""
    fg = bits.astype(bool)
    interior = ndimage.binary_erosion(fg, structure=_CROSS, border_value=0)
    return fg & ~interior


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy**2 + xx**2) <= radius**2


def boundary_f(pred: BinaryMask, gt: BinaryMask) -> float:
    """Boundary precision/recall F-score with diagonal-proportional tolerance.

    Boundaries are matched by dilating each with a Euclidean disk of the
    tolerance radius: a boundary pixel counts as matched iff some pixel of
    the other boundary lies within that radius.
    """
    _require_same_dims(pred, gt)
    pb = mask_boundary(pred.bits)
    gb = mask_boundary(gt.bits)
    n_p = int(pb.sum())
    n_g = int(gb.sum())
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    disk = _disk(boundary_tolerance(pred.width, pred.height))
    pb_dilated = ndimage.binary_dilation(pb, structure=disk)
    gb_dilated = ndimage.binary_dilation(gb, structure=disk)
    precision = int((pb & gb_dilated).sum()) / n_p
    recall = int((gb & pb_dilated).sum()) / n_g
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def g_mean(j: float, f: float) -> float:
    """Arithmetic mean of region and boundary scores."""
    if not (0.0 <= j <= 1.0 and 0.0 <= f <= 1.0):
        raise ValueError(f"scores must lie in [0, 1], got j={j}, f={f}")
    return (j + f) / 2


def mae(pred: np.ndarray, gt: BinaryMask) -> float:
    """Mean absolute error between a [0, 1] saliency map and a binary mask."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != gt.bits.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.bits.shape}")
    return float(np.abs(pred - gt.bits).mean())


def f_beta(pred: np.ndarray, gt: BinaryMask, beta_sq: float = FBETA_SQUARED) -> float:
    """Max F-measure over 255 uniform thresholds k/255, k = 0..254.

    At each threshold the map is binarized with a strict greater-than
    comparison; F = (1 + b^2) P R / (b^2 P + R), scored 0 whenever the
    denominator vanishes, and the maximum over thresholds is returned.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != gt.bits.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.bits.shape}")
    gt_bool = gt.bits.astype(bool)
    n_gt = int(gt_bool.sum())
    thresholds = np.arange(FBETA_THRESHOLDS) / FBETA_THRESHOLDS

    fg_sorted = np.sort(pred[gt_bool])
    all_sorted = np.sort(pred.ravel())
    # count of values strictly above each threshold
    tp = len(fg_sorted) - np.searchsorted(fg_sorted, thresholds, side="right")
    positives = len(all_sorted) - np.searchsorted(all_sorted, thresholds, side="right")

    best = 0.0
    for k in range(FBETA_THRESHOLDS):
        pos = int(positives[k])
        t_p = int(tp[k])
        precision = t_p / pos if pos else 0.0
        recall = t_p / n_gt if n_gt else 0.0
        denom = beta_sq * precision + recall
        score = (1 + beta_sq) * precision * recall / denom if denom else 0.0
        if score > best:
            best = score
    return best


def baseline_segment(flow: MotionField) -> BinaryMask:
    """Threshold flow magnitude at its Otsu split; high-magnitude side wins.

    A dumb-but-honest segmenter used for end-to-end smoke checks: on a
    near-uniform magnitude field there is nothing to split and the mask
    comes back empty.
    """
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    radius = np.sqrt(u * u + v * v)
    lo = float(radius.min())
    hi = float(radius.max())
    if hi - lo < 1e-12:
        return BinaryMask(np.zeros(radius.shape, dtype=np.uint8))
    counts, edges = np.histogram(radius, bins=256, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(counts)
    w1 = w0[-1] - w0
    mass = np.cumsum(counts * centers)
    mu0 = np.divide(mass, w0, out=np.zeros_like(mass), where=w0 > 0)
    mu1 = np.divide(mass[-1] - mass, w1, out=np.zeros_like(mass), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    cut = centers[int(np.argmax(between))]
    return BinaryMask((radius > cut).astype(np.uint8))


# --------------------------------------------------------------------------
# Dataset-level evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceScore:
    """Binary-protocol scores for one visual context, per-frame values kept."""

    sequence_id: str
    j_mean: float
    f_mean: float
    g_mean: float
    j_frames: tuple[float, ...]
    f_frames: tuple[float, ...]

    def __post_init__(self):
        for name in ("j_mean", "f_mean", "g_mean"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.g_mean - (self.j_mean + self.f_mean) / 2) > 1e-9:
            raise ValueError("g_mean must equal (j_mean + f_mean) / 2")


@dataclass(frozen=True)
class SaliencyScore:
    """Saliency-protocol scores for one visual context."""

    mae: float
    f_beta: float

    def __post_init__(self):
        for name in ("mae", "f_beta"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class EvalReport:
    """Per-context and aggregate scores plus prediction-coverage bookkeeping."""

    sequences: tuple[SequenceScore, ...]
    saliency: dict[str, SaliencyScore]
    j_mean: float
    f_mean: float
    g_mean: float
    mae_mean: float
    f_beta_mean: float
    missing: tuple[str, ...]
    n_scored: int


def evaluate_dataset(manifest, root, predictions_dir) -> EvalReport:
    """Score every record's prediction against its ground-truth mask.

    Predictions live at <predictions_dir>/<sample_id>.png as grayscale maps;
    they are binarized (>127) for the J/F/G protocol and read as [0, 1]
    saliency for MAE/max-F. A missing prediction is flagged and scored as an
    all-zero map, which zeroes J/F/max-F and pushes MAE to the foreground
    fraction rather than rewarding absent output.
    """
    root = Path(root)
    predictions_dir = Path(predictions_dir)
    per_context: dict[str, dict[str, list[float]]] = {}
    missing: list[str] = []
    n_scored = 0
    for rec in manifest.records:
        gt = read_mask(root / rec.mask)
        pred_path = predictions_dir / f"{rec.sample_id}.png"
        if pred_path.is_file():
            saliency_map = read_saliency(pred_path)
            if saliency_map.shape != gt.bits.shape:
                raise InputError(
                    f"{pred_path}: prediction shape {saliency_map.shape} does not match mask {gt.bits.shape}"
                )
            n_scored += 1
        else:
            saliency_map = np.zeros(gt.bits.shape, dtype=np.float32)
            missing.append(rec.sample_id)
        pred_mask = BinaryMask((saliency_map > 0.5).astype(np.uint8))
        j = region_j(pred_mask, gt)
        f = boundary_f(pred_mask, gt)
        scores = per_context.setdefault(
            rec.context_id, {"j": [], "f": [], "mae": [], "fb": []}
        )
        scores["j"].append(j)
        scores["f"].append(f)
        scores["mae"].append(mae(saliency_map, gt))
        scores["fb"].append(f_beta(saliency_map, gt))

    sequences = []
    saliency: dict[str, SaliencyScore] = {}
    for ctx in sorted(per_context):
        scores = per_context[ctx]
        jm = float(np.mean(scores["j"]))
        fm = float(np.mean(scores["f"]))
        sequences.append(
            SequenceScore(
                sequence_id=ctx,
                j_mean=jm,
                f_mean=fm,
                g_mean=(jm + fm) / 2,
                j_frames=tuple(scores["j"]),
                f_frames=tuple(scores["f"]),
            )
        )
        saliency[ctx] = SaliencyScore(
            mae=float(np.mean(scores["mae"])),
            f_beta=float(np.mean(scores["fb"])),
        )

    j_mean = float(np.mean([s.j_mean for s in sequences])) if sequences else 0.0
    f_mean = float(np.mean([s.f_mean for s in sequences])) if sequences else 0.0
    mae_mean = float(np.mean([s.mae for s in saliency.values()])) if saliency else 0.0
    fb_mean = float(np.mean([s.f_beta for s in saliency.values()])) if saliency else 0.0
    return EvalReport(
        sequences=tuple(sequences),
        saliency=saliency,
        j_mean=j_mean,
        f_mean=f_mean,
        g_mean=(j_mean + f_mean) / 2,
        mae_mean=mae_mean,
        f_beta_mean=fb_mean,
        missing=tuple(missing),
        n_scored=n_scored,
    )


def report_to_json(report: EvalReport) -> dict:
    return {
        "aggregate": {
            "j_mean": report.j_mean,
            "f_mean": report.f_mean,
            "g_mean": report.g_mean,
            "mae_mean": report.mae_mean,
            "f_beta_mean": report.f_beta_mean,
        },
        "contexts": {
            s.sequence_id: {
                "j": s.j_mean,
                "f": s.f_mean,
                "g": s.g_mean,
                "mae": report.saliency[s.sequence_id].mae,
                "f_beta": report.saliency[s.sequence_id].f_beta,
                "n_frames": len(s.j_frames),
            }
            for s in report.sequences
        },
        "missing_predictions": list(report.missing),
        "n_scored": report.n_scored,
    }


def report_to_text(report: EvalReport) -> str:
    """Aligned-column table, one row per context plus an aggregate row."""
    rows = [("context", "J", "F", "G", "MAE", "Fb", "frames")]
    for s in report.sequences:
        sal = report.saliency[s.sequence_id]
        rows.append(
            (
                s.sequence_id,
                f"{s.j_mean:.4f}",
                f"{s.f_mean:.4f}",
                f"{s.g_mean:.4f}",
                f"{sal.mae:.4f}",
                f"{sal.f_beta:.4f}",
                str(len(s.j_frames)),
            )
        )
    rows.append(
        (
            "ALL",
            f"{report.j_mean:.4f}",
            f"{report.f_mean:.4f}",
            f"{report.g_mean:.4f}",
            f"{report.mae_mean:.4f}",
            f"{report.f_beta_mean:.4f}",
            str(sum(len(s.j_frames) for s in report.sequences)),
        )
    )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    if report.missing:
        lines.append(f"missing predictions: {len(report.missing)}")
    return "\n".join(lines)


def report_to_csv(report: EvalReport) -> str:
    lines = ["context,j,f,g,mae,f_beta,n_frames"]
    for s in report.sequences:
        sal = report.saliency[s.sequence_id]
        lines.append(
            f"{s.sequence_id},{s.j_mean},{s.f_mean},{s.g_mean},{sal.mae},{sal.f_beta},{len(s.j_frames)}"
        )
    return "\n".join(lines) + "\n"
