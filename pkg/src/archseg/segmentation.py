"""Patch-based tooth instance segmentation.

A 2048-point patch is cropped around each detected centroid and scored by a
geodesic region-growing stand-in: a k-NN graph with long (gap-crossing)
edges pruned, geodesic distances from the seed nearest the patch center, and
an exponentially decaying probability in geodesic distance.  Patch masks are
fused into a full-model instance labeling by per-point argmax.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .assignment import hungarian_assign
from .synthetic import DentalModel


@dataclass(frozen=True)
class SegParams:
    patch_size: int = 2048
    knn_graph_k: int = 8
    max_geodesic_radius: float = 0.2
    prob_decay: float = 10.0
    accept_prob: float = 0.5

    def __post_init__(self):
        if min(self.patch_size, self.knn_graph_k) < 1:
            raise ValueError("patch_size and knn_graph_k must be positive")
        if min(self.max_geodesic_radius, self.prob_decay, self.accept_prob) <= 0:
            raise ValueError("geodesic radius, decay and accept_prob must be positive")


@dataclass(frozen=True)
class Patch:
    """The patch_size cloud points nearest a detected centroid."""

    center: np.ndarray
    point_indices: np.ndarray
    relative_coords: np.ndarray


@dataclass(frozen=True)
class PatchMask:
    """Per-patch-point tooth probability, aligned with Patch.point_indices."""

    probabilities: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class InstanceSegmentation:
    labels: np.ndarray  # 0 = background, k >= 1 = k-th patch's instance
    winning_prob: np.ndarray


def crop_patch(model: DentalModel, center, params: SegParams = SegParams()) -> Patch:
    """Crop the patch_size nearest points to `center`, ties broken by index."""
    pts = model.cloud.points
    if len(pts) < params.patch_size:
        raise ValueError(
            f"cloud of {len(pts)} points is smaller than patch_size {params.patch_size}"
        )
    c = np.asarray(center, dtype=np.float64).reshape(3)
    d = np.linalg.norm(pts - c, axis=1)
    idx = np.lexsort((np.arange(len(pts)), d))[: params.patch_size]
    return Patch(center=c, point_indices=idx, relative_coords=pts[idx] - c)


def segment_patch(patch: Patch, params: SegParams = SegParams()) -> PatchMask:
    """Geodesic region growing from the point nearest the patch center.

    k-NN graph edges longer than twice the median edge length are removed,
    which cuts the graph across the tooth/gingiva and tooth/tooth gaps;
    probability decays exponentially in geodesic distance beyond the local
    seed neighborhood radius, and is 0 outside max_geodesic_radius.
    """
    pts = patch.relative_coords
    n = len(pts)
    k = min(params.knn_graph_k, n - 1)
    tree = cKDTree(pts)
    dist, nn = tree.query(pts, k=k + 1)
    dist, nn = dist[:, 1:], nn[:, 1:]  # drop the self-match
    rows = np.repeat(np.arange(n), k)
    cols = nn.ravel()
    lengths = dist.ravel()
    cutoff = 2.0 * np.median(lengths)
    keep = lengths <= cutoff
    graph = csr_matrix(
        (lengths[keep], (rows[keep], cols[keep])), shape=(n, n)
    )
    graph = graph.maximum(graph.T)  # symmetric: either endpoint's k-NN suffices

    seed = int(np.argmin(np.linalg.norm(pts, axis=1)))
    g = dijkstra(graph, directed=False, indices=seed, limit=params.max_geodesic_radius)

    reachable = np.isfinite(g)
    if reachable.sum() <= 1:
        warnings.warn("patch seed is isolated; emitting a degenerate mask")
        probs = np.zeros(n)
        probs[seed] = 1.0
        return PatchMask(probabilities=probs, degenerate=True)

    n_core = max(1, int(round(0.05 * n)))
    r0 = float(np.median(np.sort(g[reachable])[:n_core]))
    probs = np.zeros(n)
    probs[reachable] = np.exp(
        -params.prob_decay * np.maximum(0.0, g[reachable] - r0)
    )
    return PatchMask(probabilities=probs)


def fuse_patches(
    model: DentalModel, patches, masks, params: SegParams = SegParams()
) -> InstanceSegmentation:
    """Per-point argmax fusion of patch masks into an instance labeling.

    A point takes the instance id of the patch giving it the highest
    probability if that probability reaches accept_prob, else stays 0.
    Exact ties go to the nearer patch center, then the lower patch index.
    """
    if len(patches) != len(masks):
        raise ValueError("patches and masks must be aligned")
    n = model.cloud.size
    best_prob = np.zeros(n)
    best_dist = np.full(n, np.inf)
    best_patch = np.full(n, -1, dtype=np.int64)
    for j, (patch, mask) in enumerate(zip(patches, masks)):
        idx = patch.point_indices
        p = mask.probabilities
        dist = np.linalg.norm(patch.relative_coords, axis=1)
        cur_prob = best_prob[idx]
        cur_dist = best_dist[idx]
        win = (p > cur_prob) | ((p == cur_prob) & (p > 0) & (dist < cur_dist))
        upd = idx[win]
        best_prob[upd] = p[win]
        best_dist[upd] = dist[win]
        best_patch[upd] = j
    labels = np.where(best_prob >= params.accept_prob, best_patch + 1, 0)
    return InstanceSegmentation(labels=labels, winning_prob=best_prob)


def iou_dice(pred_labels, gt_labels) -> dict:
    """Instance IoU / Dice with one-to-one Hungarian matching.

    Predicted and ground-truth instances are matched by maximizing total
    IoU; unmatched ground-truth instances contribute 0.  Means are macro
    over ground-truth instances, in percent.
    """
    pred = np.asarray(pred_labels, dtype=np.int64)
    gt = np.asarray(gt_labels, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ValueError("label arrays must have the same length")
    gt_ids = np.unique(gt[gt > 0])
    if len(gt_ids) == 0:
        raise ValueError("no ground-truth instances")
    pred_ids = np.unique(pred[pred > 0])

    iou = np.zeros((len(gt_ids), max(len(pred_ids), 1)))
    dice = np.zeros_like(iou)
    for a, g in enumerate(gt_ids):
        gmask = gt == g
        gsize = int(gmask.sum())
        for b, p in enumerate(pred_ids):
            pmask = pred == p
            inter = int(np.sum(gmask & pmask))
            if inter == 0:
                continue
            psize = int(pmask.sum())
            iou[a, b] = inter / (gsize + psize - inter)
            dice[a, b] = 2.0 * inter / (gsize + psize)

    per_instance = []
    if len(pred_ids) == 0:
        matched = {}
    elif len(gt_ids) <= len(pred_ids):
        assignment, _ = hungarian_assign(-iou)
        matched = {a: int(assignment[a]) for a in range(len(gt_ids))}
    else:
        assignment, _ = hungarian_assign(-iou.T)
        matched = {int(assignment[b]): b for b in range(len(pred_ids))}

    total_iou = 0.0
    total_dice = 0.0
    for a, g in enumerate(gt_ids):
        b = matched.get(a)
        if b is None or iou[a, b] == 0.0:
            per_instance.append(
                {"gt_id": int(g), "pred_id": None, "iou": 0.0, "dice": 0.0}
            )
            continue
        total_iou += iou[a, b]
        total_dice += dice[a, b]
        per_instance.append(
            {
                "gt_id": int(g),
                "pred_id": int(pred_ids[b]),
                "iou": 100.0 * iou[a, b],
                "dice": 100.0 * dice[a, b],
            }
        )
    return {
        "mean_iou": 100.0 * total_iou / len(gt_ids),
        "mean_dice": 100.0 * total_dice / len(gt_ids),
        "per_instance": per_instance,
    }
