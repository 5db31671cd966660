"""Tooth centroid detection: arch-aware sampling, grouping, proposals, NMS.

The proposal-seed selection solves a one-to-one assignment between sample
slots distributed along the 32-point arch and the vote set, with cost
combining vote-to-arch distance and vote displacement magnitude.  FPS and
uniform-random selection are kept as baseline samplers for ablations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .arch import ARCH_POINTS, ArchPolyline
from .assignment import hungarian_assign
from .geometry import PointCloud, chamfer_distance, cross_entropy, farthest_point_sampling, huber_l1
from .synthetic import DentalModel, Vote, ground_truth_offsets


@dataclass(frozen=True)
class SamplingParams:
    alpha: float = 1.0
    beta: float = 5.0
    n_samples: int = 64

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    @property
    def slots_per_arch_point(self) -> int:
        return math.ceil(self.n_samples / ARCH_POINTS)


@dataclass(frozen=True)
class DetectionParams:
    grouping_radius: float = 0.1
    conf_gt_threshold: float = 0.3
    nms_radius: float = 0.12
    max_centroids: int = 20
    match_threshold: float = 0.3

    def __post_init__(self):
        if min(self.grouping_radius, self.nms_radius, self.match_threshold) <= 0:
            raise ValueError("radii and thresholds must be positive")
        if self.max_centroids < 1:
            raise ValueError("max_centroids must be >= 1")


@dataclass(frozen=True)
class DetectionLossParams:
    gamma: float = 0.1
    huber_delta: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class Proposal:
    """Candidate tooth centroid aggregated from a vote cluster."""

    position: np.ndarray
    confidence: float
    member_votes: np.ndarray
    gt_assignment: int | None = None


def vote_positions(votes) -> np.ndarray:
    return np.asarray([v.position for v in votes], dtype=np.float64)


def vote_displacement_norms(votes) -> np.ndarray:
    return np.asarray([v.displacement_norm for v in votes], dtype=np.float64)


def aps_cost_matrix(votes, arch: ArchPolyline, params: SamplingParams) -> np.ndarray:
    """Slot-by-vote assignment cost.

    Rows cycle through the 32 arch points (slots_per_arch_point copies each,
    truncated to n_samples); entry = alpha * ||vote - arch point|| +
    beta * vote displacement norm.
    """
    if len(votes) == 0:
        raise ValueError("no votes")
    if params.n_samples > len(votes):
        raise ValueError(
            f"n_samples={params.n_samples} exceeds vote count {len(votes)}"
        )
    pos = vote_positions(votes)
    disp = vote_displacement_norms(votes)
    slot_arch = np.tile(np.arange(ARCH_POINTS), params.slots_per_arch_point)[
        : params.n_samples
    ]
    d_arch = np.linalg.norm(
        arch.points[slot_arch][:, None, :] - pos[None, :, :], axis=2
    )
    return params.alpha * d_arch + params.beta * disp[None, :]


def arch_aware_sampling(votes, arch: ArchPolyline, params: SamplingParams) -> np.ndarray:
    """Distinct vote indices selected by Hungarian assignment of arch slots."""
    cost = aps_cost_matrix(votes, arch, params)
    assignment, _ = hungarian_assign(cost)
    return assignment


def fps_vote_sampling(votes, n_samples: int) -> np.ndarray:
    """Baseline: farthest point sampling over vote positions."""
    if n_samples > len(votes):
        raise ValueError("n_samples exceeds vote count")
    return farthest_point_sampling(PointCloud(vote_positions(votes)), n_samples)


def random_vote_sampling(votes, n_samples: int, seed: int) -> np.ndarray:
    """Baseline: uniform sampling without replacement over votes."""
    if n_samples > len(votes):
        raise ValueError("n_samples exceeds vote count")
    rng = np.random.default_rng(seed)
    return rng.choice(len(votes), size=n_samples, replace=False).astype(np.intp)


def group_votes(selected, votes, radius: float) -> list[np.ndarray]:
    """Per selected vote, the indices of all votes within `radius` of it.

    Votes may appear in multiple clusters; each cluster contains its own
    selected vote.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pos = vote_positions(votes)
    clusters = []
    for s in np.asarray(selected, dtype=np.intp):
        d = np.linalg.norm(pos - pos[s], axis=1)
        clusters.append(np.flatnonzero(d <= radius))
    return clusters


def make_proposals(clusters, votes, radius_scale: float = 0.1) -> list[Proposal]:
    """Cluster means with a logistic size/spread confidence surrogate.

    confidence = sigmoid(log(size) - 2 * spread / radius_scale), where spread
    is the RMS member distance to the cluster mean: monotone up in evidence
    mass, down in scatter.
    """
    if len(clusters) == 0:
        raise ValueError("no clusters")
    pos = vote_positions(votes)
    proposals = []
    for members in clusters:
        members = np.asarray(members, dtype=np.intp)
        if len(members) == 0:
            raise ValueError("empty cluster")
        p = pos[members]
        mean = p.mean(axis=0)
        spread = float(np.sqrt(np.mean(np.sum((p - mean) ** 2, axis=1))))
        logit = math.log(len(members)) - 2.0 * spread / radius_scale
        conf = 1.0 / (1.0 + math.exp(-logit))
        proposals.append(
            Proposal(position=mean, confidence=conf, member_votes=members)
        )
    return proposals


def assign_gt_confidence(
    proposals, gt_centroids, threshold: float = 0.3
) -> tuple[np.ndarray, list[Proposal]]:
    """Ground-truth confidence labels: 1 iff the nearest centroid is closer
    than `threshold` (strict); positives get that centroid assigned."""
    gt = np.asarray(gt_centroids, dtype=np.float64).reshape(-1, 3)
    labels = np.zeros(len(proposals), dtype=np.int64)
    out = []
    for i, prop in enumerate(proposals):
        if len(gt) == 0:
            out.append(replace(prop, gt_assignment=None))
            continue
        d = np.linalg.norm(gt - prop.position, axis=1)
        j = int(np.argmin(d))
        if d[j] < threshold:
            labels[i] = 1
            out.append(replace(prop, gt_assignment=j))
        else:
            out.append(replace(prop, gt_assignment=None))
    return labels, out


def nms(proposals, radius: float, max_k: int) -> list[Proposal]:
    """Greedy descending-confidence suppression within `radius`, capped at max_k.

    Ties in confidence are broken by original proposal index.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    order = np.lexsort(
        (np.arange(len(proposals)), -np.asarray([p.confidence for p in proposals]))
    )
    retained: list[Proposal] = []
    for i in order:
        if len(retained) >= max_k:
            break
        p = proposals[i]
        if all(np.linalg.norm(p.position - q.position) >= radius for q in retained):
            retained.append(p)
    return retained


def detection_metrics(pred_centroids, gt_centroids, match_threshold: float = 0.3) -> dict:
    """Accuracy / recall / chamfer for predicted vs ground-truth centroids.

    One-to-one matching by minimum-total-distance assignment; matched pairs
    closer than `match_threshold` count as true positives.  Accuracy and
    recall are percentages.
    """
    pred = np.asarray(pred_centroids, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(gt_centroids, dtype=np.float64).reshape(-1, 3)
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("empty centroid set")
    d = np.linalg.norm(pred[:, None, :] - gt[None, :, :], axis=2)
    if len(pred) <= len(gt):
        assignment, _ = hungarian_assign(d)
        matched = d[np.arange(len(pred)), assignment]
    else:
        assignment, _ = hungarian_assign(d.T)
        matched = d.T[np.arange(len(gt)), assignment]
    tp = int(np.sum(matched < match_threshold))
    return {
        "accuracy": 100.0 * tp / len(pred),
        "recall": 100.0 * tp / len(gt),
        "chamfer": chamfer_distance(PointCloud(pred), PointCloud(gt)),
    }


def detection_loss(
    votes,
    proposals,
    labels,
    model: DentalModel,
    params: DetectionLossParams = DetectionLossParams(),
    centroids=None,
) -> dict:
    """Evaluation-only detection loss terms and their combination.

    `centroids` optionally restricts the ground-truth centroid set (weak
    annotation: only the visible instances enter the loss terms).
    """
    gt_centroids = model.centroids if centroids is None else np.asarray(centroids)
    seed_indices = [v.seed_index for v in votes]
    gt_off = ground_truth_offsets(model, seed_indices, gt_centroids)
    disp = np.asarray([v.displacement for v in votes], dtype=np.float64)
    l_offset = huber_l1(disp, gt_off, params.huber_delta)

    confidences = np.asarray([p.confidence for p in proposals], dtype=np.float64)
    l_conf = cross_entropy(confidences, np.asarray(labels, dtype=np.float64))

    positives = [p for p in proposals if p.gt_assignment is not None]
    if positives:
        pred_pos = np.asarray([p.position for p in positives])
        target_pos = np.asarray([gt_centroids[p.gt_assignment] for p in positives])
        l_centers = huber_l1(pred_pos, target_pos, params.huber_delta)
    else:
        warnings.warn("no positive proposals; l_centers set to 0")
        l_centers = 0.0

    return {
        "l_offset": l_offset,
        "l_conf": l_conf,
        "l_centers": l_centers,
        "l_det": l_offset + l_conf + params.gamma * l_centers,
    }


def pregroup_votes(votes, radius: float, min_size_frac: float = 0.25) -> np.ndarray:
    """Radius-based vote clustering for the coarse arch fit.

    Greedy leader selection in index order, members assigned to the nearest
    leader; clusters smaller than min_size_frac of the largest are dropped
    (sparse clutter clusters do not survive).  Returns cluster mean positions.
    """
    pos = vote_positions(votes)
    leaders: list[int] = []
    for i, p in enumerate(pos):
        if not leaders or np.min(np.linalg.norm(pos[leaders] - p, axis=1)) > radius:
            leaders.append(i)
    d = np.linalg.norm(pos[:, None, :] - pos[leaders][None, :, :], axis=2)
    member_of = np.argmin(d, axis=1)
    centers = []
    sizes = []
    for k in range(len(leaders)):
        members = member_of == k
        centers.append(pos[members].mean(axis=0))
        sizes.append(int(members.sum()))
    centers = np.asarray(centers)
    sizes = np.asarray(sizes)
    keep = sizes >= min_size_frac * sizes.max()
    return centers[keep]
