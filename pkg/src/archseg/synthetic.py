"""Deterministic generator of labeled synthetic dental scans and simulated votes.

Teeth are superellipsoid surface samples placed along a configurable cubic
Bézier arch in the z=0 jaw plane, with a gingiva band of unlabeled points
below.  The vote simulator stands in for a trained voting network: tooth
seeds vote toward their centroid with optional Gaussian noise, gingiva seeds
are either suppressed or emit near-gum clutter votes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .arch import ArchPolyline, build_target_arch, order_centroids
from .bezier import (
    BezierCurve,
    arc_length_params,
    bezier_derivative,
    bezier_eval,
    fit_bezier,
)
from .geometry import PointCloud, farthest_point_sampling, normalize_model

# Canonical jaw-plane arch: U shape spanning x in [-0.85, 0.85].
DEFAULT_ARCH_CONTROL = np.array(
    [
        [-0.85, -0.05, 0.0],
        [-0.55, 0.85, 0.0],
        [0.55, 0.85, 0.0],
        [0.85, -0.05, 0.0],
    ]
)

# Vertical band occupied by the gingiva, in canonical (pre-normalization)
# units; leaves a clear gap below the tooth undersides so teeth and gum are
# geometrically separable.
GINGIVA_Z_RANGE = (-0.30, -0.14)
GINGIVA_FRACTION = 0.25
MIN_SURVIVING_TEETH = 4


@dataclass(frozen=True)
class ScanConfig:
    n_points: int = 16000
    n_teeth: int = 14
    arch_control: np.ndarray = field(default_factory=lambda: DEFAULT_ARCH_CONTROL.copy())
    tooth_radius_range: tuple[float, float] = (0.042, 0.058)
    gingiva_band_width: float = 0.10
    missing_tooth_prob: float = 0.0
    crowding_jitter: float = 0.0
    misalignment_angle_max: float = 0.0
    seed: int = 0

    def __post_init__(self):
        ctrl = np.asarray(self.arch_control, dtype=np.float64)
        if ctrl.shape != (4, 3):
            raise ValueError("arch_control must be a (4, 3) array")
        ctrl.setflags(write=False)
        object.__setattr__(self, "arch_control", ctrl)
        if not 8 <= self.n_teeth <= 16:
            raise ValueError("n_teeth must be in [8, 16]")
        if self.n_points < self.n_teeth * 64:
            raise ValueError("n_points must be at least 64 per tooth")
        lo, hi = self.tooth_radius_range
        if not 0 < lo <= hi:
            raise ValueError("tooth radii must be positive and ordered")
        if not 0.0 <= self.missing_tooth_prob <= 1.0:
            raise ValueError("missing_tooth_prob must be a probability")
        if self.crowding_jitter < 0 or self.misalignment_angle_max < 0:
            raise ValueError("jitter and misalignment must be non-negative")
        if self.gingiva_band_width <= 0:
            raise ValueError("gingiva_band_width must be positive")


@dataclass(frozen=True)
class DentalModel:
    """A labeled synthetic scan in normalized model units."""

    cloud: PointCloud
    labels: np.ndarray  # per-point instance id, 0 = gingiva, 1..T = teeth
    centroids: np.ndarray  # (T, 3) label-mask means
    gt_arch: ArchPolyline
    gt_bezier: BezierCurve
    config_echo: ScanConfig

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        cen = np.asarray(self.centroids, dtype=np.float64)
        cen.setflags(write=False)
        object.__setattr__(self, "centroids", cen)

    @property
    def n_teeth(self) -> int:
        return len(self.centroids)


@dataclass(frozen=True)
class Vote:
    """A seed point's predicted displacement toward its tooth centroid."""

    seed_index: int
    position: np.ndarray
    displacement: np.ndarray
    displacement_norm: float


@dataclass(frozen=True)
class VoteNoiseModel:
    tooth_vote_sigma: float = 0.0
    gingiva_vote_mode: str = "suppressed"  # or "clutter"
    clutter_fraction: float = 0.0
    clutter_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.gingiva_vote_mode not in ("suppressed", "clutter"):
            raise ValueError("gingiva_vote_mode must be 'suppressed' or 'clutter'")
        if self.tooth_vote_sigma < 0 or self.clutter_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if not 0.0 <= self.clutter_fraction <= 1.0:
            raise ValueError("clutter_fraction must be in [0, 1]")


def _superellipsoid_surface(rng, n: int, semi_axes, exponent: float) -> np.ndarray:
    """Random surface sample of a superellipsoid blob (convex for exponent<=1)."""
    eta = rng.uniform(-np.pi / 2, np.pi / 2, n)
    omega = rng.uniform(-np.pi, np.pi, n)

    def spow(v, e):
        return np.sign(v) * np.abs(v) ** e

    a, b, c = semi_axes
    x = a * spow(np.cos(eta), exponent) * spow(np.cos(omega), exponent)
    y = b * spow(np.cos(eta), exponent) * spow(np.sin(omega), exponent)
    z = c * spow(np.sin(eta), exponent)
    return np.stack([x, y, z], axis=1)


def _rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def generate_model(config: ScanConfig) -> DentalModel:
    """Build one labeled scan: teeth blobs along the arch plus a gingiva band.

    Fully deterministic per config (including its seed).
    """
    rng = np.random.default_rng(config.seed)
    curve = BezierCurve(config.arch_control)
    n_teeth = config.n_teeth

    fractions = (np.arange(n_teeth) + 0.5) / n_teeth
    fractions = fractions + config.crowding_jitter * rng.normal(0.0, 1.0, n_teeth)
    fractions = np.clip(fractions, 0.01, 0.99)
    t_params = arc_length_params(curve, fractions)
    centers = bezier_eval(curve, t_params)

    drop_draw = rng.random(n_teeth)
    keep = drop_draw >= config.missing_tooth_prob
    if keep.sum() < MIN_SURVIVING_TEETH:
        # resurrect the teeth with the largest draws until enough survive
        order = np.argsort(-drop_draw)
        for idx in order:
            if keep.sum() >= MIN_SURVIVING_TEETH:
                break
            keep[idx] = True
    surviving = np.flatnonzero(keep)

    n_gingiva = int(round(config.n_points * GINGIVA_FRACTION))
    per_tooth = (config.n_points - n_gingiva) // len(surviving)
    n_gingiva = config.n_points - per_tooth * len(surviving)

    lo, hi = config.tooth_radius_range
    all_points = []
    all_labels = []
    for new_id, tooth_idx in enumerate(surviving, start=1):
        semi = rng.uniform(lo, hi, 3)
        semi[2] *= 1.2  # teeth are slightly taller than wide
        exponent = rng.uniform(0.6, 0.9)
        pts = _superellipsoid_surface(rng, per_tooth, semi, exponent)
        if config.misalignment_angle_max > 0:
            axis = rng.normal(size=3)
            angle = rng.uniform(0.0, config.misalignment_angle_max)
            pts = pts @ _rotation_matrix(axis, angle).T
        all_points.append(pts + centers[tooth_idx])
        all_labels.append(np.full(per_tooth, new_id, dtype=np.int64))

    # gingiva: a band following the arch, offset below the teeth
    g_t = rng.uniform(0.0, 1.0, n_gingiva)
    g_lateral = rng.uniform(-config.gingiva_band_width, config.gingiva_band_width, n_gingiva)
    g_z = rng.uniform(GINGIVA_Z_RANGE[0], GINGIVA_Z_RANGE[1], n_gingiva)
    base = bezier_eval(curve, g_t)
    tangent = bezier_derivative(curve, g_t)
    normal = np.stack([-tangent[:, 1], tangent[:, 0], np.zeros(n_gingiva)], axis=1)
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    g_pts = base + normal * g_lateral[:, None]
    g_pts[:, 2] = g_z
    all_points.append(g_pts)
    all_labels.append(np.zeros(n_gingiva, dtype=np.int64))

    points = np.concatenate(all_points)
    labels = np.concatenate(all_labels)

    cloud, _ = normalize_model(PointCloud(points))
    n_instances = len(surviving)
    centroids = np.stack(
        [cloud.points[labels == k].mean(axis=0) for k in range(1, n_instances + 1)]
    )
    gt_arch = build_target_arch(centroids)
    ordered = centroids[order_centroids(centroids)]
    gt_bezier, _ = fit_bezier(ordered)
    return DentalModel(
        cloud=cloud,
        labels=labels,
        centroids=centroids,
        gt_arch=gt_arch,
        gt_bezier=gt_bezier,
        config_echo=config,
    )


def make_vote(cloud: PointCloud, seed_index: int, displacement: np.ndarray) -> Vote:
    disp = np.asarray(displacement, dtype=np.float64)
    return Vote(
        seed_index=int(seed_index),
        position=cloud.points[seed_index] + disp,
        displacement=disp,
        displacement_norm=float(np.linalg.norm(disp)),
    )


def simulate_votes(model: DentalModel, subsample: int, noise: VoteNoiseModel) -> list[Vote]:
    """Simulated Hough votes for FPS-selected seed points.

    Tooth seeds vote toward their instance centroid (plus Gaussian noise);
    gingiva seeds are dropped in 'suppressed' mode, or in 'clutter' mode a
    fraction of them emit near-seed votes, the distractors arch-aware
    sampling is designed to reject.
    """
    if subsample > model.cloud.size:
        raise ValueError("subsample exceeds cloud size")
    seeds = farthest_point_sampling(model.cloud, subsample)
    rng = np.random.default_rng(noise.seed)
    tooth_noise = rng.normal(0.0, 1.0, (subsample, 3))
    keep_draw = rng.random(subsample)
    clutter_noise = rng.normal(0.0, 1.0, (subsample, 3))

    votes: list[Vote] = []
    for i, s in enumerate(seeds):
        label = model.labels[s]
        if label > 0:
            disp = model.centroids[label - 1] - model.cloud.points[s]
            disp = disp + noise.tooth_vote_sigma * tooth_noise[i]
            votes.append(make_vote(model.cloud, s, disp))
        elif noise.gingiva_vote_mode == "clutter" and keep_draw[i] < noise.clutter_fraction:
            votes.append(make_vote(model.cloud, s, noise.clutter_sigma * clutter_noise[i]))
    return votes


def ground_truth_offsets(model: DentalModel, seed_indices, centroids=None) -> np.ndarray:
    """Vector from each seed point to its nearest ground-truth centroid.

    `centroids` overrides the model's centroid set, e.g. to restrict loss
    evaluation to the visible instances of a weakly annotated model.
    """
    cen = model.centroids if centroids is None else np.asarray(centroids, dtype=np.float64)
    if len(cen) == 0:
        raise ValueError("model has no teeth")
    idx = np.asarray(seed_indices, dtype=np.intp)
    pts = model.cloud.points[idx]
    d = np.linalg.norm(pts[:, None, :] - cen[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    return cen[nearest] - pts


def with_seed(config: ScanConfig, seed: int) -> ScanConfig:
    return replace(config, seed=seed)
