import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactmap.domain import BeadLayout, Workspace
from tactmap.sensor import SensorConfig, press, undeformed_reference

QUIET = SensorConfig(noise_sigma_mm=0.0)
LONE = BeadLayout([[100.0, 45.0]])


class TestSensorConfig:
    def test_defaults(self):
        cfg = SensorConfig()
        assert cfg.mm_per_px == pytest.approx(0.2)
        assert cfg.plunge_ratio == pytest.approx(12.0 / 12.7)

    @pytest.mark.parametrize(
        "kwargs",
        [{"resolution_px": 1}, {"footprint_mm": 0.0}, {"attenuation": 0.0}, {"attenuation": 1.2},
         {"noise_sigma_mm": -0.1}],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SensorConfig(**kwargs)


class TestUndeformedReference:
    def test_default(self):
        ref = undeformed_reference(SensorConfig())
        assert ref.pixels.shape == (128, 128) and not ref.pixels.any()
        assert ref.mm_per_px == pytest.approx(0.2)

    def test_full_resolution(self):
        ref = undeformed_reference(SensorConfig.full_resolution())
        assert ref.pixels.shape == (640, 640) and not ref.pixels.any()


class TestPress:
    def test_apex_value_full_plunge(self):
        cfg = SensorConfig(noise_sigma_mm=0.0, plunge_depth_mm=13.0)
        img = press(LONE, cfg, (100.0, 45.0))
        assert img.pixels[64, 64] == pytest.approx(0.8 * 2 * 3.0)

    def test_apex_detectable_with_default_plunge(self):
        img = press(LONE, QUIET, (100.0, 45.0))
        peak = img.pixels.max()
        assert peak == pytest.approx(0.8 * 6.0 * 12.0 / 12.7)
        assert peak > 1.55

    def test_pixels_outside_discs_are_zero(self):
        img = press(LONE, QUIET, (100.0, 45.0))
        xs, ys = img.pixel_axes()
        d = np.hypot(xs[None, :] - 100.0, ys[:, None] - 45.0)
        assert not img.pixels[d > 3.0].any()
        assert np.all(img.pixels[d < 2.9] > 0)

    def test_empty_layout_is_flat(self):
        img = press(BeadLayout(np.zeros((0, 2))), QUIET, (50.0, 50.0))
        assert not img.pixels.any()

    def test_pixel_world_mapping(self):
        img = press(LONE, QUIET, (100.0, 45.0))
        np.testing.assert_allclose(img.pixel_to_world([64, 64]), [100.0, 45.0])
        np.testing.assert_allclose(img.pixel_to_world([0, 0]), [100.0 - 12.8, 45.0 - 12.8])

    def test_overhang_reads_bead_free(self):
        layout = BeadLayout([[1.0, 45.0]])  # disc pokes past x = 0
        img = press(layout, QUIET, (0.0, 45.0))
        xs, _ = img.pixel_axes()
        assert not img.pixels[:, xs < 0].any()
        assert img.pixels[:, xs >= 0].any()

    def test_outside_workspace_is_an_error(self):
        with pytest.raises(ValueError):
            press(LONE, QUIET, (-1.0, 10.0))

    def test_noise_is_keyed_on_seed_and_location(self):
        cfg = SensorConfig(noise_seed=3)
        a = press(LONE, cfg, (100.0, 45.0)).pixels
        np.testing.assert_array_equal(a, press(LONE, cfg, (100.0, 45.0)).pixels)
        b = press(LONE, SensorConfig(noise_seed=4), (100.0, 45.0)).pixels
        assert not np.array_equal(a, b)
        assert a.min() >= 0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-40, 40), st.floats(-20, 20))
    def test_translation_equivariance(self, dx, dy):
        ws = Workspace(400.0, 200.0)
        cfg = SensorConfig(noise_sigma_mm=0.0, workspace=ws)
        centers = np.array([[100.0, 80.0], [108.5, 80.0], [104.0, 90.0]])
        a = press(BeadLayout(centers), cfg, (105.0, 85.0)).pixels
        b = press(BeadLayout(centers + [dx, dy]), cfg, (105.0 + dx, 85.0 + dy)).pixels
        # sqrt amplifies round-off right at a disc rim
        np.testing.assert_allclose(a, b, atol=1e-5)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(80, 120), st.floats(30, 60))
    def test_adding_a_bead_never_lowers_pixels(self, x, y):
        base = press(LONE, QUIET, (100.0, 45.0)).pixels
        more = press(BeadLayout([[100.0, 45.0], [x, y]]), QUIET, (100.0, 45.0)).pixels
        assert np.all(more >= base)
