"""Detection evaluation (greedy IoU matching, AP/mAP, AR@100) and the RPN
training-loss formulas.

AP uses all-points interpolation and is computed in exact rational
arithmetic, so it always agrees with a brute-force enumeration of score
cuts. The matching protocol is greedy by descending score, one ground truth
per detection, class-gated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .detections import Box, UiClass, UiDetection, iou

EPSILON = 1e-12  # probability clamp for the cross-entropy loss

GroundTruth = tuple[UiClass, Box]
ImageSample = tuple[list[UiDetection], list[GroundTruth]]

AR_IOU_THRESHOLDS = [round(0.5 + 0.05 * i, 2) for i in range(10)]


@dataclass
class PrCurve:
    points: list[tuple[float, float]]  # (recall, precision), recall non-decreasing
    ap: float


@dataclass
class MatchResult:
    order: list[int]  # detection indices sorted by descending score
    tp: list[bool]  # aligned with order
    gt_matched: list[bool]


@dataclass(frozen=True)
class RpnLossParams:
    balance: float  # the loss-balancing weight (lambda)
    n_cls: float
    n_reg: float
    sigma: float = 1.0

    def __post_init__(self):
        if self.n_cls <= 0 or self.n_reg <= 0:
            raise ValueError("normalizers must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class AnchorSample:
    p: float  # predicted objectness
    p_star: int  # ground-truth label, 0 or 1
    t: tuple[float, float, float, float]
    t_star: tuple[float, float, float, float]

    def __post_init__(self):
        if self.p_star not in (0, 1):
            raise ValueError(f"p_star must be 0 or 1, got {self.p_star}")


# ---------------------------------------------------------------------------
# Matching and average precision


def match_detections(
    dets: list[UiDetection], gts: list[GroundTruth], iou_thresh: float
) -> MatchResult:
    """Greedy matching: in descending-score order, each detection takes the
    unmatched same-class ground truth of highest IoU when that IoU reaches
    the threshold (TP), else it is an FP. Each ground truth matches once."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    gt_matched = [False] * len(gts)
    tp = []
    for i in order:
        det = dets[i]
        best_j, best_iou = None, 0.0
        for j, (gt_cls, gt_box) in enumerate(gts):
            if gt_matched[j] or gt_cls is not det.cls:
                continue
            value = iou(det.box, gt_box)
            if value > best_iou:
                best_j, best_iou = j, value
        if best_j is not None and best_iou >= iou_thresh:
            gt_matched[best_j] = True
            tp.append(True)
        else:
            tp.append(False)
    return MatchResult(order=order, tp=tp, gt_matched=gt_matched)


def average_precision(tp_flags: Sequence[bool], total_gt: int) -> PrCurve:
    """Precision-recall curve and all-points-interpolated AP.

    tp_flags must be in descending-score order. AP is the area under the
    precision envelope (precision at recall r = max precision at recall
    >= r), computed exactly.
    """
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    points: list[tuple[float, float]] = []
    precisions: list[Fraction] = []
    recalls: list[Fraction] = []
    tp_cum = 0
    for k, flag in enumerate(tp_flags, start=1):
        tp_cum += bool(flag)
        precision = Fraction(tp_cum, k)
        recall = Fraction(tp_cum, total_gt) if total_gt else Fraction(0)
        precisions.append(precision)
        recalls.append(recall)
        points.append((float(recall), float(precision)))
    if total_gt == 0:
        return PrCurve(points=points, ap=0.0)
    # precision envelope from the right, then sum recall steps
    ap = Fraction(0)
    best = Fraction(0)
    prev_recall = dict()  # noqa: F841  (kept: name documents the walk below)
    envelope = [Fraction(0)] * len(precisions)
    for k in range(len(precisions) - 1, -1, -1):
        best = max(best, precisions[k])
        envelope[k] = best
    last_recall = Fraction(0)
    for k in range(len(precisions)):
        if recalls[k] > last_recall:
            ap += (recalls[k] - last_recall) * envelope[k]
            last_recall = recalls[k]
    return PrCurve(points=points, ap=float(ap))


def _class_flags(
    samples: Sequence[ImageSample], cls: UiClass, iou_thresh: float
) -> tuple[list[bool], int]:
    """Pooled descending-score TP/FP flags for one class, matched per image."""
    pool = []  # (score, image index, det index, det)
    total_gt = 0
    unmatched: list[list[tuple[UiClass, Box]]] = []
    matched_flags: list[list[bool]] = []
    for img_i, (dets, gts) in enumerate(samples):
        class_gts = [g for g in gts if g[0] is cls]
        total_gt += len(class_gts)
        unmatched.append(class_gts)
        matched_flags.append([False] * len(class_gts))
        for det_i, det in enumerate(dets):
            if det.cls is cls:
                pool.append((det.score, img_i, det_i, det))
    pool.sort(key=lambda entry: (-entry[0], entry[1], entry[2]))
    flags = []
    for _, img_i, _, det in pool:
        gts = unmatched[img_i]
        taken = matched_flags[img_i]
        best_j, best_iou = None, 0.0
        for j, (_, gt_box) in enumerate(gts):
            if taken[j]:
                continue
            value = iou(det.box, gt_box)
            if value > best_iou:
                best_j, best_iou = j, value
        if best_j is not None and best_iou >= iou_thresh:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, total_gt


def mean_ap(
    samples: Sequence[ImageSample], iou_thresh: float
) -> tuple[float, dict[UiClass, float]]:
    """Unweighted mean of per-class AP over classes with at least one ground
    truth. Returns (mAP, per-class AP)."""
    classes = sorted(
        {g[0] for _, gts in samples for g in gts}, key=lambda c: c.value
    )
    per_class: dict[UiClass, float] = {}
    for cls in classes:
        flags, total_gt = _class_flags(samples, cls, iou_thresh)
        per_class[cls] = average_precision(flags, total_gt).ap
    if not per_class:
        return 0.0, {}
    return sum(per_class.values()) / len(per_class), per_class


def average_recall_100(samples: Sequence[ImageSample], max_dets: int = 100) -> float:
    """Mean over images of the matched-gt fraction with detections capped at
    the top `max_dets` by score, averaged over IoU thresholds 0.5:0.05:0.95."""
    per_threshold = []
    for thresh in AR_IOU_THRESHOLDS:
        ratios = []
        for dets, gts in samples:
            if not gts:
                continue
            capped_idx = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))[:max_dets]
            capped = [dets[i] for i in sorted(capped_idx)]
            result = match_detections(capped, gts, thresh)
            ratios.append(sum(result.gt_matched) / len(gts))
        per_threshold.append(sum(ratios) / len(ratios) if ratios else 0.0)
    return sum(per_threshold) / len(per_threshold)


def evaluation_report(samples: Sequence[ImageSample]) -> dict:
    """The metrics JSON payload: mAP at 0.5 and 0.75 IoU plus AR@100."""
    map_50, per_class_50 = mean_ap(samples, 0.5)
    map_75, per_class_75 = mean_ap(samples, 0.75)
    per_class = {
        cls.value: {"ap_50": per_class_50[cls], "ap_75": per_class_75[cls]}
        for cls in per_class_50
    }
    return {
        "map_50": map_50,
        "map_75": map_75,
        "ar_100": average_recall_100(samples),
        "per_class": per_class,
    }


# ---------------------------------------------------------------------------
# RPN loss formulas


def smooth_l1(x: float, sigma: float = 1.0) -> float:
    """Smooth L1 as printed in the source model's loss: quadratic below
    1/sigma^2, linear above."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    inv_sq = 1.0 / (sigma * sigma)
    if abs(x) < inv_sq:
        return 0.5 * x * x * inv_sq
    return abs(x) - 0.5


def cls_loss(p: float, p_star: int) -> float:
    """Objectness cross entropy, with p clamped away from {0,1}."""
    p = min(max(p, EPSILON), 1.0 - EPSILON)
    return -math.log(p_star * p + (1 - p_star) * (1.0 - p))


def reg_loss(
    t: Sequence[float], t_star: Sequence[float], sigma: float = 1.0
) -> float:
    """Sum of smooth-L1 over the 4 box coordinates."""
    if len(t) != 4 or len(t_star) != 4:
        raise ValueError("box regression targets must have 4 coordinates")
    return sum(smooth_l1(a - b, sigma) for a, b in zip(t, t_star))


def rpn_loss(samples: Sequence[AnchorSample], params: RpnLossParams) -> float:
    """Combined RPN loss: normalized cross entropy plus the balance-weighted,
    normalized regression term; negative anchors contribute no regression."""
    cls_total = sum(cls_loss(s.p, s.p_star) for s in samples)
    reg_total = sum(
        reg_loss(s.t, s.t_star, params.sigma) for s in samples if s.p_star == 1
    )
    return cls_total / params.n_cls + params.balance * reg_total / params.n_reg
