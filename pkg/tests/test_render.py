import numpy as np
import pytest

from copyspace.annotations import BoundingBox, Detection, GroundTruth
from copyspace.detector import DetectParams
from copyspace.errors import ArgumentError, NoCandidatesError
from copyspace.imaging import encode_png
from copyspace.render import (
    DesignSpec,
    OverlayStyle,
    draw_overlay,
    generate_variations,
    outline_mask,
    render_design,
)


def canvas(h=60, w=80, v=0.5):
    return np.full((h, w, 3), v)


class TestStyles:
    def test_defaults(self):
        s = OverlayStyle()
        assert s.gt_color == (0.0, 1.0, 0.0) and s.det_color == (1.0, 0.0, 1.0)

    def test_same_colors(self):
        with pytest.raises(ArgumentError):
            OverlayStyle(gt_color=(1, 0, 0), det_color=(1, 0, 0))

    def test_line_width(self):
        with pytest.raises(ArgumentError):
            OverlayStyle(line_width=0)

    @pytest.mark.parametrize("kw", [{"panel_opacity": 1.5}, {"padding_frac": 0.5}, {"text_color": (2, 0, 0)}])
    def test_bad_design_spec(self, kw):
        with pytest.raises(ArgumentError):
            DesignSpec(**kw)


class TestOverlay:
    def test_empty_is_identity(self):
        img = np.random.default_rng(0).random((20, 30, 3))
        out = draw_overlay(img)
        np.testing.assert_array_equal(out, img)
        assert out is not img

    def test_one_gt_changes_exactly_outline(self):
        img = canvas()
        box = BoundingBox(10, 5, 40, 30)
        out = draw_overlay(img, gts=[GroundTruth("", box)], style=OverlayStyle(line_width=3))
        changed = (out != img).any(axis=2)
        # outer 30x25 minus inner 24x19
        assert changed.sum() == 30 * 25 - 24 * 19
        np.testing.assert_array_equal(changed, outline_mask(changed.shape, box, 3))
        assert (out[changed] == (0.0, 1.0, 0.0)).all()

    def test_detection_on_top(self):
        box = BoundingBox(10, 10, 30, 30)
        out = draw_overlay(canvas(), gts=[GroundTruth("", box)], dets=[Detection("", box, 0.7)])
        assert (out[outline_mask(out.shape[:2], box, 2)] == (1.0, 0.0, 1.0)).all()

    def test_scores_stay_near_box(self):
        img = canvas(80, 120)
        box = BoundingBox(10, 10, 100, 70)
        out = draw_overlay(img, dets=[Detection("", box, 0.42)], style=OverlayStyle(draw_scores=True))
        changed = (out != img).any(axis=2)
        assert changed[12:70, 12:100].any()
        region = np.zeros_like(changed)
        region[10:70, 10:100] = True
        assert not (changed & ~region).any()

    def test_out_of_bounds(self):
        with pytest.raises(ArgumentError):
            draw_overlay(canvas(), gts=[GroundTruth("", BoundingBox(50, 10, 90, 20))])

    def test_deterministic_png(self):
        box = BoundingBox(3, 3, 20, 20)
        a = encode_png(draw_overlay(canvas(), dets=[Detection("", box, 0.5)]))
        b = encode_png(draw_overlay(canvas(), dets=[Detection("", box, 0.5)]))
        assert a == b


class TestDesign:
    BOX = BoundingBox(10, 10, 70, 50)

    def test_noop(self):
        img = np.random.default_rng(1).random((60, 80, 3))
        out = render_design(img, self.BOX, DesignSpec(copy_text="", panel_opacity=0.0))
        np.testing.assert_array_equal(out, img)

    def test_opaque_black_panel(self):
        img = canvas(v=1.0)
        out = render_design(img, self.BOX, DesignSpec(copy_text="", panel_opacity=1.0, panel_color=(0, 0, 0)))
        assert (out[10:50, 10:70] == 0.0).all()

    def test_half_opacity_over_white(self):
        img = canvas(v=1.0)
        spec = DesignSpec(copy_text="Sale", panel_opacity=0.5, panel_color=(0, 0, 0), text_color=(1, 0, 0))
        out = render_design(img, self.BOX, spec)
        inside = out[10:50, 10:70]
        text = (inside == (1.0, 0.0, 0.0)).all(axis=2)
        assert text.any()
        np.testing.assert_allclose(inside[~text], 0.5)

    def test_never_writes_outside(self):
        img = np.random.default_rng(2).random((60, 80, 3))
        box = BoundingBox(10.4, 10.6, 69.5, 49.2)
        out = render_design(img, box, DesignSpec(copy_text="a longer line of copy text", panel_opacity=0.8))
        outside = np.ones((60, 80), bool)
        outside[11:49, 11:69] = False
        np.testing.assert_array_equal(out[outside], img[outside])

    def test_text_lines_wrap(self):
        img = canvas(200, 200, 1.0)
        box = BoundingBox(0, 0, 200, 200)
        # interior 160 px -> 6 characters per line: 'ab cd', 'ef gh', 'ij'
        spec = DesignSpec(copy_text="ab cd ef gh ij", panel_opacity=0.0, text_color=(0, 0, 0))
        out = render_design(img, box, spec)
        rows = (out[20:180, 20:180] == 0).all(axis=2).any(axis=1)
        bars = np.count_nonzero(np.diff(rows.astype(int)) == 1) + int(rows[0])
        assert bars == 3

    def test_degenerate_interior(self):
        with pytest.raises(ArgumentError):
            render_design(canvas(), BoundingBox(10.5, 10, 11.4, 20), DesignSpec())

    def test_outside_image(self):
        with pytest.raises(ArgumentError):
            render_design(canvas(), BoundingBox(10, 10, 90, 20), DesignSpec())


class TestVariations:
    def test_single_entry_uniform(self):
        res = generate_variations(canvas(), DesignSpec(copy_text="hi"), [DetectParams()])
        assert len(res.designs) == 1 and res.empty == []

    def test_three_aspects(self):
        img = canvas(120, 120)
        grid = [DetectParams(aspect_ratios=(a,)) for a in (1.0, 2.0, 0.5)]
        res = generate_variations(img, DesignSpec(copy_text="hello"), grid)
        assert [d.box.aspect for d in res.designs] == pytest.approx([1.0, 2.0, 0.5], rel=0.02)

    def test_empty_entry_reported(self):
        img = np.stack([np.random.default_rng(3).random((64, 64))] * 3, axis=-1)
        img[8:56, 8:56] = 0.5
        grid = [DetectParams(), DetectParams(max_complexity=0.0, min_area_frac=0.9, margin_frac=0.0)]
        res = generate_variations(img, DesignSpec(copy_text="x"), grid)
        assert res.empty == [1]
        assert [d.grid_index for d in res.designs] == [0]

    def test_all_empty(self):
        img = np.random.default_rng(4).random((40, 40, 3))
        with pytest.raises(NoCandidatesError):
            generate_variations(img, DesignSpec(), [DetectParams(max_complexity=0.0)])
