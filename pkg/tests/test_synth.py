import hashlib
import json

import numpy as np
import pytest

from copyspace.annotations import parse_label_file, write_label_file
from copyspace.dataset import load_ground_truths, read_manifest
from copyspace.errors import ArgumentError, GenerationError, ParseError, StorageError
from copyspace.imaging import build_integral, complexity_map, region_mean, to_luma
from copyspace.synth import SynthConfig, load_config, sample_seed, splitmix64, synth_dataset, synth_sample


def test_splitmix64_reference_vector():
    # first output of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert sample_seed(1, 2, 3) != sample_seed(1, 3, 2)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"canvas_width": 2},
        {"clear_rect_area_range": (0.5, 0.2)},
        {"polygons_per_class": {1: (1, 2), 2: (1, 3), 3: (5, 6), 4: (7, 8)}},
        {"vertex_range": (4, 6)},
        {"gradient_probability": 0.7, "pattern_probability": 0.5},
        {"palette": ((0, 0, 0),)},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ArgumentError):
            SynthConfig(**kw)

    def test_json_round_trip(self):
        cfg = SynthConfig(canvas_width=64, canvas_height=48, clear_rect_area_range=(0.2, 0.3))
        assert load_config(json.dumps(cfg.to_dict())) == cfg
        assert load_config(json.dumps(SynthConfig().to_dict())) == SynthConfig()

    def test_unknown_field(self):
        with pytest.raises(ParseError):
            load_config('{"canvas": 3}')


class TestSample:
    def test_determinism(self):
        a, b = synth_sample(123, 3), synth_sample(123, 3)
        assert a.png_bytes() == b.png_bytes()
        assert a.ground_truth == b.ground_truth

    def test_seeds_differ(self):
        assert synth_sample(1, 2).png_bytes() != synth_sample(2, 2).png_bytes()

    def test_blank_class_one(self):
        cfg = SynthConfig(polygons_per_class={1: (0, 0), 2: (10, 16), 3: (22, 32), 4: (45, 60)})
        s = synth_sample(5, 1, cfg)
        assert (s.image == np.array(s.background, np.uint8)).all()
        cmap = complexity_map(to_luma(s.float_image()))
        np.testing.assert_array_equal(cmap, 0.0)
        assert s.ground_truth.box.within(512, 512)

    @pytest.mark.parametrize("level", [1, 2, 3, 4])
    def test_clear_rect_untouched(self, level):
        for i in range(5):
            s = synth_sample(sample_seed(11, level, i), level)
            x0, y0, x1, y1 = map(int, s.ground_truth.box.as_tuple())
            inside = s.image[y0:y1, x0:x1]
            assert (inside == np.array(s.background, np.uint8)).all()

    def test_label_reparses_to_planted_rect(self):
        for level in (1, 4):
            s = synth_sample(99, level)
            (g,) = parse_label_file(write_label_file([s.ground_truth], 512, 512), 512, 512)
            np.testing.assert_allclose(g.box.as_tuple(), s.ground_truth.box.as_tuple(), atol=1e-6 * 512)

    def test_generation_error_when_too_dense(self):
        cfg = SynthConfig(
            clear_rect_area_range=(1.0, 1.0), clear_rect_aspect_range=(1.0, 1.0),
            polygons_per_class={1: (1, 1), 2: (2, 2), 3: (3, 3), 4: (4, 4)},
            canvas_width=32, canvas_height=32,
        )
        with pytest.raises(GenerationError):
            synth_sample(0, 1, cfg)

    def test_overlap_allowed_skips_rejection(self):
        cfg = SynthConfig(
            clear_rect_area_range=(1.0, 1.0), clear_rect_aspect_range=(1.0, 1.0),
            polygons_per_class={1: (1, 1), 2: (2, 2), 3: (3, 3), 4: (4, 4)},
            canvas_width=32, canvas_height=32, allow_overlap_clear=True,
        )
        assert synth_sample(0, 1, cfg).image.shape == (32, 32, 3)


def test_complexity_rises_with_class():
    """Over 100 seeds per class, mean outside-rect complexity strictly increases,
    and clutter never leaks into the planted rectangle."""
    outside = {}
    for level in (1, 2, 3, 4):
        vals = []
        for i in range(100):
            s = synth_sample(sample_seed(2024, level, i), level)
            cmap = complexity_map(to_luma(s.float_image()))
            x0, y0, x1, y1 = map(int, s.ground_truth.box.as_tuple())
            mask = np.ones(cmap.shape, bool)
            mask[y0:y1, x0:x1] = False
            inside = region_mean(build_integral(cmap), s.ground_truth.box)
            assert inside <= cmap[mask].mean() + 1e-12
            vals.append(cmap[mask].mean())
        outside[level] = float(np.mean(vals))
    assert outside[1] < outside[2] < outside[3] < outside[4]


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


class TestDataset:
    SMALL = SynthConfig(canvas_width=96, canvas_height=96)

    def test_histogram(self, tmp_path):
        m = synth_dataset(1, {1: 2, 2: 1, 3: 0, 4: 0}, self.SMALL, tmp_path)
        assert len(m) == 3
        assert m.histogram() == {1: 2, 2: 1}
        assert sorted(p.name for p in (tmp_path / "images").iterdir()) == ["1_0.png", "1_1.png", "2_0.png"]

    def test_skewed_counts(self, tmp_path):
        counts = {1: 169, 2: 8, 3: 7, 4: 7}
        cfg = SynthConfig(canvas_width=48, canvas_height=48, polygon_radius_range=(0.02, 0.05),
                          polygons_per_class={1: (0, 1), 2: (1, 2), 3: (2, 3), 4: (3, 4)})
        assert synth_dataset(3, counts, cfg, tmp_path).histogram() == counts
        manifest, root = read_manifest(tmp_path / "manifest.json")
        assert manifest.histogram() == counts
        gts = load_ground_truths(manifest, root)
        assert all(len(v) == 1 for v in gts.values())

    def test_regeneration_byte_identical(self, tmp_path):
        synth_dataset(9, {1: 2, 3: 2}, self.SMALL, tmp_path / "a")
        synth_dataset(9, {1: 2, 3: 2}, self.SMALL, tmp_path / "b", workers=3)
        assert _digest(tmp_path / "a") == _digest(tmp_path / "b")

    def test_labels_match_samples(self, tmp_path):
        synth_dataset(4, {2: 2}, self.SMALL, tmp_path)
        s = synth_sample(sample_seed(4, 2, 1), 2, self.SMALL)
        (g,) = parse_label_file((tmp_path / "labels" / "2_1.txt").read_text(), 96, 96)
        np.testing.assert_allclose(g.box.as_tuple(), s.ground_truth.box.as_tuple(), atol=1e-6 * 96)

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(StorageError):
            synth_dataset(1, {1: 1}, self.SMALL, blocker)

    def test_bad_class(self, tmp_path):
        with pytest.raises(ArgumentError):
            synth_dataset(1, {5: 1}, self.SMALL, tmp_path)
