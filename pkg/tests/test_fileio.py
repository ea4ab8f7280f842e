import struct

import numpy as np
import pytest

from refinery3d.config import (
    ConfigError,
    config_to_dict,
    load_config_file,
    selftrain_config_from_dict,
    write_manifest,
)
from refinery3d.fileio import (
    DataError,
    FormatError,
    LabelRecord,
    load_labels,
    load_point_cloud,
    store_labels,
    store_point_cloud,
)
from refinery3d.geometry import Box3D, PointCloud


class TestPointCloudIO:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        assert load_point_cloud(path).count == 0

    def test_single_record_layout(self, tmp_path):
        path = tmp_path / "one.bin"
        path.write_bytes(struct.pack("<4f", 1.0, 2.0, 3.0, 0.5))
        cloud = load_point_cloud(path)
        assert cloud.count == 1
        assert cloud.points[0].tolist() == [1.0, 2.0, 3.0, 0.5]

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-80, 80, (10_000, 4)).astype(np.float32).astype(np.float64)
        cloud = PointCloud(pts)
        path = tmp_path / "cloud.bin"
        store_point_cloud(path, cloud)
        loaded = load_point_cloud(path)
        assert loaded.points.tobytes() == cloud.points.tobytes()

    def test_bad_size_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x00" * 17)
        with pytest.raises(FormatError):
            load_point_cloud(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "nan.bin"
        path.write_bytes(struct.pack("<4f", float("nan"), 0, 0, 0))
        with pytest.raises(DataError):
            load_point_cloud(path)


class TestLabelIO:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("")
        assert load_labels(path) == []

    def test_single_record_round_trip(self, tmp_path):
        rec = LabelRecord(3, Box3D((1.5, -2.25, 0.8), (4.2, 1.9, 1.6), 0.7, "Car"), 0.91)
        path = tmp_path / "labels.txt"
        store_labels(path, [rec])
        assert load_labels(path) == [rec]

    def test_bulk_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        cats = ("Car", "Pedestrian", "Cyclist")
        records = [
            LabelRecord(
                int(rng.integers(0, 50)),
                Box3D(
                    tuple(rng.uniform(-75, 75, 3)),
                    tuple(rng.uniform(0.2, 6, 3)),
                    rng.uniform(-3.14, 3.14),
                    cats[int(rng.integers(3))],
                ),
                float(rng.uniform(0, 1)),
            )
            for _ in range(1000)
        ]
        path = tmp_path / "labels.txt"
        store_labels(path, records)
        loaded = load_labels(path)
        assert loaded == records

    def test_field_count_enforced(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("0 Car 1 2 3\n")
        with pytest.raises(FormatError):
            load_labels(path)

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "nan.txt"
        path.write_text("0 Car a 0 0 1 1 1 0 0.5\n")
        with pytest.raises(DataError):
            load_labels(path)


class TestConfig:
    def test_defaults_from_empty(self):
        cfg = selftrain_config_from_dict({})
        assert cfg.epochs == 30
        assert cfg.label_update_period == 2
        assert cfg.margin.t_neg == 0.25

    def test_nested_overrides(self):
        cfg = selftrain_config_from_dict(
            {
                "epochs": 4,
                "margin": {"t_neg": 0.3, "t_pos": 0.7},
                "toggles": {"ca": False, "ie": True, "alignment": False},
                "target_scene": {"instances_per_frame": {"Car": 2}},
            }
        )
        assert cfg.epochs == 4
        assert cfg.margin.t_pos == 0.7
        assert not cfg.toggles.ca
        assert cfg.target_scene.instances_per_frame == {"Car": 2}

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            selftrain_config_from_dict({"epocsh": 4})
        with pytest.raises(ConfigError):
            selftrain_config_from_dict({"margin": {"t_min": 0.1}})

    def test_invalid_value_reported(self):
        with pytest.raises(ConfigError):
            selftrain_config_from_dict({"margin": {"t_neg": 0.9, "t_pos": 0.2}})

    def test_round_trip_through_dict(self):
        cfg = selftrain_config_from_dict({"epochs": 6, "seed": 5})
        again = selftrain_config_from_dict(config_to_dict(cfg))
        assert again == cfg

    def test_manifest_unwraps_to_config(self, tmp_path):
        cfg = selftrain_config_from_dict({"epochs": 3, "frames": 7})
        manifest = tmp_path / "manifest.yaml"
        write_manifest(manifest, "selftrain", cfg, cfg.seed, ["metrics.csv"])
        loaded = selftrain_config_from_dict(load_config_file(manifest))
        assert loaded == cfg

    def test_plain_config_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("epochs: 2\nframes: 3\n")
        assert load_config_file(path) == {"epochs": 2, "frames": 3}
