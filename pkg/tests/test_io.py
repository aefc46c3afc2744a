import os

import numpy as np
import pytest

from misskit import io as mio
from misskit.attribution import Explanation
from misskit.data import SyntheticDatasetSpec, build_dataset, generate_dataset, load_dataset
from misskit.experiments import ResultRow
from misskit.models import CNNClassifier, CNNConfig, ViTClassifier, ViTConfig


class TestPixmaps:
    def test_ppm_roundtrip(self, tmp_path):
        img = np.random.default_rng(0).integers(0, 256, (3, 7, 5)).astype(np.uint8)
        path = tmp_path / "x.ppm"
        mio.write_ppm(path, img)
        back = mio.read_ppm(path)
        np.testing.assert_array_equal(back, img)

    def test_pgm_roundtrip(self, tmp_path):
        gray = np.random.default_rng(1).integers(0, 256, (6, 9)).astype(np.uint8)
        path = tmp_path / "x.pgm"
        mio.write_pgm(path, gray)
        np.testing.assert_array_equal(mio.read_pgm(path), gray)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P3\n1 1\n255\n aaa")
        with pytest.raises(mio.FormatError):
            mio.read_ppm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n4 4\n255\n12")
        with pytest.raises(mio.TruncatedFileError):
            mio.read_ppm(path)


class TestWeightFiles:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        arrays = {
            "a": rng.standard_normal((3, 4)).astype(np.float32),
            "b.c": rng.standard_normal(7).astype(np.float32),
        }
        path = tmp_path / "w.mlab"
        mio.save_weights(path, arrays, meta={"arch": "test", "n": 2})
        back, meta = mio.load_weights(path)
        assert meta == {"arch": "test", "n": 2}
        assert list(back) == ["a", "b.c"]
        for k in arrays:
            assert back[k].tobytes() == arrays[k].tobytes()

    def test_model_roundtrip_vit(self, tmp_path):
        cfg = ViTConfig(image_size=32, token_size=8, embed_dim=32, num_heads=4, num_layers=2, num_classes=4)
        model = ViTClassifier(cfg, seed=9)
        path = tmp_path / "vit.mlab"
        mio.save_model(path, model)
        loaded = mio.load_model(path)
        assert loaded.config == cfg
        probes = np.random.default_rng(3).random((10, 3, 32, 32)).astype(np.float32)
        assert loaded.logits_batch(probes).tobytes() == model.logits_batch(probes).tobytes()

    def test_model_roundtrip_cnn(self, tmp_path):
        cfg = CNNConfig(image_size=32, widths=(8, 16), strides=(2, 2), num_classes=4)
        model = CNNClassifier(cfg, seed=10)
        path = tmp_path / "cnn.mlab"
        mio.save_model(path, model)
        loaded = mio.load_model(path)
        assert loaded.config == cfg
        probes = np.random.default_rng(4).random((10, 3, 32, 32)).astype(np.float32)
        assert loaded.logits_batch(probes).tobytes() == model.logits_batch(probes).tobytes()

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.mlab"
        mio.save_weights(path, {"a": np.zeros(2, dtype=np.float32)})
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(mio.FormatError):
            mio.load_weights(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.mlab"
        mio.save_weights(path, {"a": np.zeros(2, dtype=np.float32)})
        data = bytearray(path.read_bytes())
        data[4] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(mio.FormatError):
            mio.load_weights(path)

    def test_truncated_names_offender(self, tmp_path):
        path = tmp_path / "trunc.mlab"
        mio.save_weights(path, {"alpha": np.zeros(4, dtype=np.float32), "beta": np.ones(400, dtype=np.float32)})
        data = path.read_bytes()
        path.write_bytes(data[:-20])
        with pytest.raises(mio.TruncatedFileError) as err:
            mio.load_weights(path)
        assert "beta" in str(err.value)


class TestExplanationRecords:
    def test_roundtrip(self, tmp_path):
        explanations = [
            Explanation(np.array([0.5, -0.25, 1.0]), "model-x", 2, "lime:black", 11, "grid:3:abc"),
            Explanation(np.array([0.0, 0.0, 0.0]), "model-x", 0, "random", 3, "grid:3:abc"),
        ]
        path = tmp_path / "e.json"
        mio.save_explanations(path, explanations)
        back = mio.load_explanations(path)
        assert len(back) == 2
        for a, b in zip(explanations, back):
            np.testing.assert_array_equal(a.region_scores, b.region_scores)
            assert (a.model_id, a.target_class, a.method, a.seed, a.partition_desc) == (
                b.model_id,
                b.target_class,
                b.method,
                b.seed,
                b.partition_desc,
            )


class TestCsv:
    def test_single_row(self, tmp_path):
        rows = [ResultRow("exp", "random", 0.5, None, "black", "keep_fraction", 0.75, 100)]
        path = tmp_path / "t.csv"
        mio.emit_csv(rows, path)
        text = path.read_text()
        lines = text.strip().split("\n")
        assert len(lines) == 2
        assert lines[0] == "experiment,order,fraction,k,spec,metric,value,n"
        assert lines[1] == "exp,random,0.5,,black,keep_fraction,0.75,100"

    def test_empty_marker(self, tmp_path):
        rows = [ResultRow("exp", "random", 0.0, None, "black", "mean_wup_on_errors", None, 0)]
        path = tmp_path / "t.csv"
        mio.emit_csv(rows, path)
        assert ",mean_wup_on_errors,,0" in path.read_text()

    def test_deterministic_bytes(self, tmp_path):
        rows = [ResultRow("e", "o", 0.1, 3, "s", "m", 1 / 3, 7)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        mio.emit_csv(rows, p1)
        mio.emit_csv(rows, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            mio.emit_csv([], tmp_path / "no.csv")


class TestSvg:
    def test_polyline_count(self, tmp_path):
        series = {"a": [(0, 0.0), (1, 1.0)], "b": [(0, 1.0), (1, 0.5)]}
        path = tmp_path / "p.svg"
        mio.emit_svg_lineplot(series, path, title="t", xlabel="x", ylabel="y")
        text = path.read_text()
        assert text.count("<polyline") == 2
        assert text.startswith("<svg")

    def test_y_range_preserved(self, tmp_path):
        series = {"keep": [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]}
        path = tmp_path / "p.svg"
        mio.emit_svg_lineplot(series, path)
        text = path.read_text()
        # polyline y coordinates must stay within the plot area
        import re

        pts = re.search(r'<polyline points="([^"]+)"', text).group(1)
        ys = [float(p.split(",")[1]) for p in pts.split()]
        assert min(ys) >= 20 and max(ys) <= 420

    def test_deterministic(self, tmp_path):
        series = {"a": [(0, 0.25), (1, 0.75)]}
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        mio.emit_svg_lineplot(series, p1)
        mio.emit_svg_lineplot(series, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            mio.emit_svg_lineplot({}, tmp_path / "no.svg")


class TestDatasetFiles:
    def test_generate_is_deterministic(self, tmp_path):
        spec = SyntheticDatasetSpec(image_size=32, n_train=6, n_test=4, seed=5)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_dataset(spec, d1)
        generate_dataset(spec, d2)
        for root, _, files in os.walk(d1):
            for f in files:
                rel = os.path.relpath(os.path.join(root, f), d1)
                assert (d1 / rel).read_bytes() == (d2 / rel).read_bytes(), rel

    def test_zero_train_split_valid(self, tmp_path):
        spec = SyntheticDatasetSpec(image_size=32, n_train=0, n_test=3, seed=1)
        generate_dataset(spec, tmp_path / "d")
        ds = load_dataset(tmp_path / "d")
        assert len(ds.train_images) == 0
        assert len(ds.test_images) == 3

    def test_roundtrip_matches_memory(self, tmp_path):
        spec = SyntheticDatasetSpec(image_size=32, n_train=5, n_test=2, seed=7)
        generate_dataset(spec, tmp_path / "d")
        disk = load_dataset(tmp_path / "d")
        mem = build_dataset(spec)
        np.testing.assert_array_equal(disk.train_images, mem.train_images)
        np.testing.assert_array_equal(disk.train_labels, mem.train_labels)
        np.testing.assert_array_equal(disk.test_images, mem.test_images)
        np.testing.assert_allclose(disk.channel_means, mem.channel_means, atol=1e-12)
        assert disk.taxonomy.leaves == mem.taxonomy.leaves
