import json

import numpy as np
import pytest

from archseg import io as aio
from archseg.synthetic import ScanConfig, generate_model


@pytest.fixture(scope="module")
def model():
    return generate_model(ScanConfig(n_points=2000, n_teeth=8, seed=13))


class TestPly:
    def test_lossless_round_trip(self, tmp_path, model):
        path = tmp_path / "m.ply"
        aio.write_ply(path, model.cloud.points, model.labels)
        pts, labels = aio.read_ply(path)
        assert np.array_equal(pts, model.cloud.points)  # bit-exact via %.17g
        assert np.array_equal(labels, model.labels)

    def test_without_labels(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(20, 3))
        path = tmp_path / "p.ply"
        aio.write_ply(path, pts)
        got, labels = aio.read_ply(path)
        assert labels is None
        assert np.array_equal(got, pts)

    def test_rejects_non_ply(self, tmp_path):
        path = tmp_path / "x.ply"
        path.write_text("not a ply\n")
        with pytest.raises(ValueError):
            aio.read_ply(path)

    def test_header_structure(self, tmp_path):
        path = tmp_path / "h.ply"
        aio.write_ply(path, np.zeros((1, 3)), np.zeros(1, dtype=int))
        header = path.read_text().split("end_header")[0]
        assert "format ascii 1.0" in header
        assert "property double x" in header
        assert "property int instance" in header


class TestCloudJson:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(15, 3))
        labels = rng.integers(0, 5, 15)
        path = tmp_path / "c.json"
        aio.write_cloud_json(path, pts, labels)
        got_pts, got_labels = aio.read_cloud_json(path)
        assert np.array_equal(got_pts, pts)
        assert np.array_equal(got_labels, labels)
        with open(path) as fh:
            payload = json.load(fh)
        assert set(payload) == {"points", "labels"}


class TestModelRoundTrip:
    def test_save_load_exact(self, tmp_path, model):
        aio.save_model(model, tmp_path / "m.ply", tmp_path / "m.json")
        loaded = aio.load_model(tmp_path / "m.ply", tmp_path / "m.json")
        assert np.array_equal(loaded.cloud.points, model.cloud.points)
        assert np.array_equal(loaded.labels, model.labels)
        assert np.array_equal(loaded.centroids, model.centroids)
        assert np.array_equal(loaded.gt_arch.points, model.gt_arch.points)
        assert np.array_equal(loaded.gt_bezier.control, model.gt_bezier.control)
        assert aio.scan_config_to_dict(loaded.config_echo) == aio.scan_config_to_dict(
            model.config_echo
        )

    def test_sidecar_keys(self, tmp_path, model):
        aio.save_model(model, tmp_path / "m.ply", tmp_path / "m.json")
        with open(tmp_path / "m.json") as fh:
            sidecar = json.load(fh)
        assert set(sidecar) == {"centroids", "arch", "bezier_control", "config"}
        assert len(sidecar["arch"]) == 32
        assert len(sidecar["bezier_control"]) == 4

    def test_missing_labels_rejected(self, tmp_path, model):
        aio.write_ply(tmp_path / "nolab.ply", model.cloud.points)
        aio.save_model(model, tmp_path / "m.ply", tmp_path / "m.json")
        with pytest.raises(ValueError):
            aio.load_model(tmp_path / "nolab.ply", tmp_path / "m.json")


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [
            {"index": 0, "ply": "a.ply", "json": "a.json", "split": "full"},
            {
                "index": 1,
                "ply": "b.ply",
                "json": "b.json",
                "split": "weak",
                "visible_instances": [1, 3],
            },
        ]
        aio.write_manifest(tmp_path / "manifest.json", entries)
        assert aio.read_manifest(tmp_path / "manifest.json") == entries


class TestDetectionJson:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        centroids = rng.normal(size=(6, 3))
        conf = rng.random(6)
        path = tmp_path / "d.json"
        aio.write_detection_json(path, centroids, conf, "aps", {"alpha": 1.0})
        got = aio.read_detection_json(path)
        assert np.array_equal(got["centroids"], centroids)
        assert np.array_equal(got["confidences"], conf)
        assert got["sampling"] == "aps"
        assert got["params"] == {"alpha": 1.0}
