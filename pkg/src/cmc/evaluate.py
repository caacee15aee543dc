"""Segmentation quality measures.

All three measures are computed from one joint label-count table:
variation of information (split/merge conditional entropies, in bits),
Rand index (pairwise agreement in closed form), and a detection score
(greedy one-to-one object matching at IoU > 0.5).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, EmptyOverlap


@dataclass
class ContingencyTable:
    counts: dict  # (gt_label, pred_label) -> pixel count
    gt_marginals: dict
    pred_marginals: dict
    total: int


def contingency_table(pred, gt, ignore_background=False):
    """Joint label counts; optionally restricted to gt-foreground pixels."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(gt.shape, pred.shape)
    g = gt.ravel().astype(np.int64)
    p = pred.ravel().astype(np.int64)
    if ignore_background:
        keep = g != 0
        g = g[keep]
        p = p[keep]
    if g.size == 0:
        raise EmptyOverlap()
    pairs, counts = np.unique(np.stack([g, p], axis=1), axis=0, return_counts=True)
    table = {}
    gt_marginals = {}
    pred_marginals = {}
    for (gl, pl), n in zip(pairs, counts):
        gl, pl, n = int(gl), int(pl), int(n)
        table[(gl, pl)] = n
        gt_marginals[gl] = gt_marginals.get(gl, 0) + n
        pred_marginals[pl] = pred_marginals.get(pl, 0) + n
    return ContingencyTable(table, gt_marginals, pred_marginals, int(g.size))


def voi(pred, gt, ignore_background=False):
    """(split, merge, total) in bits.

    split = H(pred | gt) counts over-segmentation of gt regions, merge =
    H(gt | pred) under-segmentation.  Sums use fsum, so the split of one
    orientation equals the merge of the swapped orientation exactly.
    """
    t = contingency_table(pred, gt, ignore_background)
    n = t.total
    split_terms = []
    merge_terms = []
    for (gl, pl), c in t.counts.items():
        pij = c / n
        split_terms.append(pij * math.log2(t.gt_marginals[gl] / c))
        merge_terms.append(pij * math.log2(t.pred_marginals[pl] / c))
    split = math.fsum(split_terms)
    merge = math.fsum(merge_terms)
    return split, merge, split + merge


def rand_index(pred, gt, ignore_background=False):
    """Fraction of unordered pixel pairs classified the same way by both."""
    t = contingency_table(pred, gt, ignore_background)
    n = t.total
    if n < 2:
        raise DegenerateInput("need at least 2 pixels to form a pair")
    total_pairs = n * (n - 1) // 2
    same_gt = sum(v * (v - 1) // 2 for v in t.gt_marginals.values())
    same_pred = sum(v * (v - 1) // 2 for v in t.pred_marginals.values())
    same_both = sum(v * (v - 1) // 2 for v in t.counts.values())
    return (total_pairs - same_gt - same_pred + 2 * same_both) / total_pairs


def detection_score(pred, gt):
    """(precision, recall, f_score) under greedy IoU > 0.5 matching.

    Label 0 is background on both sides and never an object.  When one
    side has objects and the other has none, the empty side's ratio is
    0; when both are empty, all three scores are 1.
    """
    t = contingency_table(pred, gt, ignore_background=False)
    n_gt = sum(1 for l in t.gt_marginals if l != 0)
    n_pred = sum(1 for l in t.pred_marginals if l != 0)

    candidates = []
    for (gl, pl), inter in t.counts.items():
        if gl == 0 or pl == 0:
            continue
        union = t.gt_marginals[gl] + t.pred_marginals[pl] - inter
        iou = inter / union
        if iou > 0.5:
            candidates.append((-iou, gl, pl))
    candidates.sort()

    matched_gt = set()
    matched_pred = set()
    for _, gl, pl in candidates:
        if gl in matched_gt or pl in matched_pred:
            continue
        matched_gt.add(gl)
        matched_pred.add(pl)
    tp = len(matched_gt)

    if n_pred:
        precision = tp / n_pred
    else:
        precision = 1.0 if n_gt == 0 else 0.0
    if n_gt:
        recall = tp / n_gt
    else:
        recall = 1.0 if n_pred == 0 else 0.0
    if precision + recall > 0:
        f_score = 2 * precision * recall / (precision + recall)
    else:
        f_score = 0.0
    return precision, recall, f_score


def segmentation_metrics(pred, gt, ignore_background=False):
    """All measures in one flat dict (the shape written by the CLI)."""
    split, merge, total = voi(pred, gt, ignore_background)
    rand = rand_index(pred, gt, ignore_background)
    precision, recall, f_score = detection_score(pred, gt)
    return {
        "voi_split": split,
        "voi_merge": merge,
        "voi": total,
        "rand": rand,
        "precision": precision,
        "recall": recall,
        "f_score": f_score,
    }
