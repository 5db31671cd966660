"""File formats: ASCII PLY point clouds, JSON sidecars, dataset manifests.

PLY files carry vertex x/y/z as doubles (lossless round trip) plus an
optional integer `instance` property for per-point labels.  Each generated
model is a PLY + JSON sidecar pair listed in a manifest.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .arch import ArchPolyline
from .bezier import BezierCurve
from .geometry import PointCloud
from .synthetic import DentalModel, ScanConfig


def write_ply(path, points: np.ndarray, labels=None) -> None:
    points = np.asarray(points, dtype=np.float64)
    lines = ["ply", "format ascii 1.0", f"element vertex {len(points)}"]
    lines += [f"property double {axis}" for axis in "xyz"]
    if labels is not None:
        lines.append("property int instance")
    lines.append("end_header")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for i, p in enumerate(points):
            row = f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}"
            if labels is not None:
                row += f" {int(labels[i])}"
            fh.write(row + "\n")


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path) as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n_vertices = None
        properties = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            line = line.strip()
            if line.startswith("element vertex"):
                n_vertices = int(line.split()[-1])
            elif line.startswith("property"):
                properties.append(line.split()[-1])
            elif line == "end_header":
                break
        if n_vertices is None:
            raise ValueError(f"{path}: missing vertex element")
        data = np.loadtxt(fh, max_rows=n_vertices, ndmin=2)
    cols = {name: i for i, name in enumerate(properties)}
    points = data[:, [cols["x"], cols["y"], cols["z"]]]
    labels = data[:, cols["instance"]].astype(np.int64) if "instance" in cols else None
    return points, labels


def write_cloud_json(path, points: np.ndarray, labels=None) -> None:
    payload = {"points": np.asarray(points, dtype=np.float64).tolist()}
    if labels is not None:
        payload["labels"] = np.asarray(labels, dtype=np.int64).tolist()
    with open(path, "w") as fh:
        json.dump(payload, fh)


def read_cloud_json(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path) as fh:
        payload = json.load(fh)
    points = np.asarray(payload["points"], dtype=np.float64)
    labels = (
        np.asarray(payload["labels"], dtype=np.int64) if "labels" in payload else None
    )
    return points, labels


def scan_config_to_dict(config: ScanConfig) -> dict:
    d = asdict(config)
    d["arch_control"] = np.asarray(config.arch_control).tolist()
    d["tooth_radius_range"] = list(config.tooth_radius_range)
    return d


def scan_config_from_dict(d: dict) -> ScanConfig:
    d = dict(d)
    if "arch_control" in d:
        d["arch_control"] = np.asarray(d["arch_control"], dtype=np.float64)
    if "tooth_radius_range" in d:
        d["tooth_radius_range"] = tuple(d["tooth_radius_range"])
    return ScanConfig(**d)


def save_model(model: DentalModel, ply_path, json_path) -> None:
    write_ply(ply_path, model.cloud.points, model.labels)
    sidecar = {
        "centroids": model.centroids.tolist(),
        "arch": model.gt_arch.points.tolist(),
        "bezier_control": model.gt_bezier.control.tolist(),
        "config": scan_config_to_dict(model.config_echo),
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)


def load_model(ply_path, json_path) -> DentalModel:
    points, labels = read_ply(ply_path)
    if labels is None:
        raise ValueError(f"{ply_path}: missing instance labels")
    with open(json_path) as fh:
        sidecar = json.load(fh)
    return DentalModel(
        cloud=PointCloud(points),
        labels=labels,
        centroids=np.asarray(sidecar["centroids"], dtype=np.float64),
        gt_arch=ArchPolyline(np.asarray(sidecar["arch"], dtype=np.float64)),
        gt_bezier=BezierCurve(np.asarray(sidecar["bezier_control"], dtype=np.float64)),
        config_echo=scan_config_from_dict(sidecar["config"]),
    )


def write_manifest(path, entries: list[dict]) -> None:
    with open(path, "w") as fh:
        json.dump({"models": entries}, fh, indent=1, sort_keys=True)


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        return json.load(fh)["models"]


def load_manifest_models(manifest_path) -> list[DentalModel]:
    base = Path(manifest_path).parent
    models = []
    for entry in read_manifest(manifest_path):
        models.append(load_model(base / entry["ply"], base / entry["json"]))
    return models


def write_arch_json(path, curve: BezierCurve, polyline: ArchPolyline) -> None:
    payload = {
        "bezier_control": curve.control.tolist(),
        "polyline": polyline.points.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def write_detection_json(path, centroids, confidences, sampling: str, params: dict) -> None:
    payload = {
        "centroids": np.asarray(centroids, dtype=np.float64).tolist(),
        "confidences": np.asarray(confidences, dtype=np.float64).tolist(),
        "sampling": sampling,
        "params": params,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def read_detection_json(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    payload["centroids"] = np.asarray(payload["centroids"], dtype=np.float64)
    payload["confidences"] = np.asarray(payload["confidences"], dtype=np.float64)
    return payload
