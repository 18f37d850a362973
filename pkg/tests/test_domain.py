import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from tactmap.domain import (
    BeadLayout,
    Raster,
    TrainingSet,
    Workspace,
    bead_height,
    generate_layout,
    ground_truth,
    hole_grid,
    load_layout,
    save_layout,
)


def grid_cells(layout):
    """(row, col) hole indices of every bead."""
    holes = hole_grid(Workspace(), layout.grid_pitch_mm)
    cells = []
    for c in layout.bead_centers:
        r, k = np.argwhere(np.all(np.isclose(holes, c), axis=-1))[0]
        cells.append((r, k))
    return cells


class TestWorkspace:
    def test_defaults(self):
        ws = Workspace()
        assert (ws.width_mm, ws.height_mm) == (300.0, 90.4)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Workspace(0.0, 10.0)

    def test_contains_margin(self):
        ws = Workspace()
        assert ws.contains((3.0, 3.0), margin=3.0)
        assert not ws.contains((2.9, 50.0), margin=3.0)


class TestRaster:
    def test_default_shape(self):
        assert Raster().shape == (181, 600)

    def test_cell_centers(self):
        r = Raster(Workspace(2.0, 1.0), 0.5)
        np.testing.assert_allclose(r.xs, [0.25, 0.75, 1.25, 1.75])
        np.testing.assert_allclose(r.ys, [0.25, 0.75])

    def test_cell_index(self):
        r = Raster()
        row, col = r.cell_index([[0.1, 0.1], [10.26, 5.0], [300.5, 1.0]])
        np.testing.assert_array_equal(row, [0, 10, -1])
        np.testing.assert_array_equal(col, [0, 20, -1])


class TestTrainingSet:
    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            TrainingSet([[0, 0], [1, 1]], [1])

    def test_labels_are_binary(self):
        with pytest.raises(ValueError):
            TrainingSet([[0, 0]], [2])

    def test_duplicates_allowed_and_flip(self):
        t = TrainingSet([[1, 1], [1, 1]], [1, 0])
        np.testing.assert_array_equal(t.flipped().Y, [0, 1])
        assert t.has_both_classes

    def test_extended(self):
        t = TrainingSet.empty().extended([[1.0, 2.0]], [1])
        assert len(t) == 1 and not t.has_both_classes


class TestGenerateLayout:
    def test_reference_counts(self):
        layout = generate_layout(1, 3, 34)
        assert len(layout) == 102
        assert len({tuple(c) for c in layout.bead_centers}) == 102
        cells = grid_cells(layout)
        mask = np.zeros((10, 34), bool)
        for rc in cells:
            mask[rc] = True
        _, n = ndimage.label(mask)  # 4-connectivity
        assert n == 3

    def test_deterministic(self):
        a, b = generate_layout(1), generate_layout(1)
        np.testing.assert_array_equal(a.bead_centers, b.bead_centers)
        assert not np.array_equal(a.bead_centers, generate_layout(2).bead_centers)

    def test_single_bead_clears_edges(self):
        layout = generate_layout(1, 1, 1)
        (x, y), = layout.bead_centers
        assert min(x, y, 300.0 - x, 90.4 - y) >= 3.0
        holes = hole_grid(Workspace()).reshape(-1, 2)
        assert np.any(np.all(np.isclose(holes, (x, y)), axis=1))

    def test_too_many_beads(self):
        with pytest.raises(ValueError):
            generate_layout(0, 2, 300)

    def test_rejects_empty_request(self):
        with pytest.raises(ValueError):
            generate_layout(0, 0, 5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_centers_inside_and_on_grid(self, seed):
        layout = generate_layout(seed)
        c = layout.bead_centers
        assert np.all(c >= 3.0) and np.all(c <= np.array([300.0, 90.4]) - 3.0)
        d = np.hypot(*(c[:, None, :] - c[None, :, :]).transpose(2, 0, 1))
        off_diag = d[~np.eye(len(c), dtype=bool)]
        assert off_diag.min() >= 8.5 - 1e-9


class TestGroundTruth:
    def test_apex_and_edge(self):
        layout = BeadLayout([[10.25, 10.25]])
        truth = ground_truth(layout, Workspace(20.0, 20.0))
        assert truth.height[20, 20] == pytest.approx(3.0)
        assert bead_height([[13.25, 10.25]], layout)[0] == 0.0
        # a cell centred exactly 3 mm away is occupied with zero height
        assert truth.occupancy[20, 26] and truth.height[20, 26] == 0.0

    def test_empty_layout(self):
        truth = ground_truth(BeadLayout(np.zeros((0, 2))))
        assert not truth.occupancy.any()
        assert not truth.height.any()
        assert truth.occupancy.shape == (181, 600)

    def test_matches_pointwise_height(self):
        layout = generate_layout(3)
        truth = ground_truth(layout)
        pts = truth.raster.points()
        np.testing.assert_allclose(truth.height.ravel(), bead_height(pts, layout), atol=1e-12)

    def test_area_close_to_discs(self):
        layout = generate_layout(5)
        truth = ground_truth(layout)
        expected = len(layout) * np.pi * 9.0 / 0.25
        assert abs(truth.occupancy.sum() - expected) <= 0.1 * expected

    def test_height_range_and_support(self):
        truth = ground_truth(generate_layout(7))
        assert truth.height.min() >= 0 and truth.height.max() <= 3.0
        assert np.all(truth.occupancy[truth.height > 0])


class TestLayoutFile:
    def test_round_trip(self, tmp_path):
        layout = generate_layout(4, 2, 10)
        save_layout(layout, tmp_path / "l.txt")
        back = load_layout(tmp_path / "l.txt")
        np.testing.assert_array_equal(back.bead_centers, layout.bead_centers)
        assert back.bead_radius_mm == 3.0

    def test_comments_and_errors(self, tmp_path):
        p = tmp_path / "l.txt"
        p.write_text("# hi\nradius_mm 2.5\n10 20  # bead\n\n")
        layout = load_layout(p)
        assert layout.bead_radius_mm == 2.5 and len(layout) == 1
        p.write_text("10 20\n")
        with pytest.raises(ValueError):
            load_layout(p)
        p.write_text("radius_mm 3\n10 20 30\n")
        with pytest.raises(ValueError):
            load_layout(p)
