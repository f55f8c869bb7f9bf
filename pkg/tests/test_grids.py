"""Grid value types and the binning/upsampling/modulation operators."""

import numpy as np
import pytest

import wavesr as w
from wavesr.errors import ShapeError
from wavesr.grids import bin_array, upsample_array

from conftest import random_field, rng


class TestComplexField:
    def test_stores_complex128_and_pitch(self):
        f = w.ComplexField(np.ones((4, 4)), 1.4)
        assert f.data.dtype == np.complex128
        assert f.pitch == 1.4
        assert f.shape == (4, 4)
        assert f.height == 4 and f.width == 4

    def test_rejects_non_2d(self):
        with pytest.raises(ShapeError):
            w.ComplexField(np.ones(4), 1.0)
        with pytest.raises(ShapeError):
            w.ComplexField(np.ones((2, 2, 2)), 1.0)

    def test_rejects_non_finite(self):
        bad = np.ones((3, 3), dtype=complex)
        bad[1, 1] = np.nan + 0j
        with pytest.raises(ValueError):
            w.ComplexField(bad, 1.0)
        bad[1, 1] = 1 + 1j * np.inf
        with pytest.raises(ValueError):
            w.ComplexField(bad, 1.0)

    def test_rejects_bad_pitch(self):
        with pytest.raises(ValueError):
            w.ComplexField(np.ones((2, 2)), 0.0)
        with pytest.raises(ValueError):
            w.ComplexField(np.ones((2, 2)), -1.0)

    def test_data_is_immutable(self):
        f = w.ComplexField(np.ones((2, 2)), 1.0)
        with pytest.raises(ValueError):
            f.data[0, 0] = 5.0

    def test_amplitude_phase_intensity(self):
        data = np.array([[2.0 * np.exp(1j * 0.5), 1.0]], dtype=complex)
        f = w.ComplexField(np.vstack([data, data]), 2.0)
        assert np.allclose(f.amplitude(), [[2.0, 1.0], [2.0, 1.0]])
        assert np.allclose(f.phase()[:, 0], 0.5)
        inten = f.intensity()
        assert isinstance(inten, w.IntensityImage)
        assert np.allclose(inten.data, [[4.0, 1.0], [4.0, 1.0]])
        assert inten.pitch == 2.0


class TestIntensityImage:
    def test_rejects_negative_by_default(self):
        with pytest.raises(ValueError):
            w.IntensityImage(np.array([[1.0, -0.1], [0.0, 2.0]]), 1.0)

    def test_allow_negative_escape_hatch(self):
        img = w.IntensityImage(np.array([[1.0, -0.1], [0.0, 2.0]]), 1.0,
                               allow_negative=True)
        assert img.data.min() == -0.1

    def test_total(self):
        img = w.IntensityImage(np.arange(6, dtype=float).reshape(2, 3), 1.0)
        assert img.total() == 15.0

    def test_immutable(self):
        img = w.IntensityImage(np.ones((2, 2)), 1.0)
        with pytest.raises(ValueError):
            img.data[0, 0] = 3.0


class TestSamplingGeometry:
    def test_lr_pitch_is_exact_product(self):
        geom = w.SamplingGeometry(theta=3, hr_pitch=0.7)
        assert geom.lr_pitch == 3 * 0.7

    def test_from_detector(self):
        geom = w.SamplingGeometry.from_detector(4, 1.4)
        assert geom.theta == 4
        assert geom.hr_pitch == 1.4 / 4
        assert geom.lr_pitch == pytest.approx(1.4)

    def test_rejects_bad_theta(self):
        with pytest.raises(ValueError):
            w.SamplingGeometry(theta=0, hr_pitch=1.0)
        with pytest.raises(ValueError):
            w.SamplingGeometry(theta=-2, hr_pitch=1.0)

    def test_check_hr_shape(self):
        geom = w.SamplingGeometry(theta=3, hr_pitch=1.0)
        geom.check_hr_shape((6, 9))
        with pytest.raises(ShapeError):
            geom.check_hr_shape((6, 8))


class TestHadamardModulate:
    def test_identity_mask(self):
        field = random_field((8, 8), seed=1)
        ones = w.ComplexField(np.ones((8, 8)), field.pitch)
        out = w.hadamard_modulate(field, ones)
        np.testing.assert_array_equal(out.data, field.data)

    def test_phase_flip(self):
        field = w.ComplexField(np.full((2, 2), 2.0 + 0.0j), 1.0)
        mask = w.ComplexField(np.full((2, 2), np.exp(1j * np.pi)), 1.0)
        out = w.hadamard_modulate(field, mask)
        assert np.allclose(out.data, -2.0, atol=1e-15)

    def test_matches_scalar_loop_oracle(self):
        field = random_field((8, 8), seed=2)
        g = rng(3)
        mask = w.ComplexField(np.exp(1j * g.uniform(0, 2 * np.pi, (8, 8))), field.pitch)
        out = w.hadamard_modulate(field, mask)
        expected = np.empty((8, 8), dtype=complex)
        for r in range(8):
            for c in range(8):
                expected[r, c] = field.data[r, c] * mask.data[r, c]
        # vectorized and scalar complex products may differ by one ulp
        np.testing.assert_allclose(out.data, expected, rtol=0, atol=1e-15)

    def test_unit_modulus_mask_preserves_intensity(self):
        field = random_field((8, 8), seed=4)
        g = rng(5)
        mask = w.ComplexField(np.exp(1j * g.uniform(0, 2 * np.pi, (8, 8))), field.pitch)
        out = w.hadamard_modulate(field, mask)
        before = np.abs(field.data) ** 2
        after = np.abs(out.data) ** 2
        assert np.max(np.abs(after - before)) < 1e-12 * before.max()

    def test_shape_mismatch_rejected(self):
        a = w.ComplexField(np.ones((4, 4)), 1.0)
        b = w.ComplexField(np.ones((4, 5)), 1.0)
        with pytest.raises(ShapeError):
            w.hadamard_modulate(a, b)

    def test_pitch_mismatch_rejected(self):
        a = w.ComplexField(np.ones((4, 4)), 1.0)
        b = w.ComplexField(np.ones((4, 4)), 2.0)
        with pytest.raises(ShapeError):
            w.hadamard_modulate(a, b)


class TestBinIntensity:
    def test_2x2_patch_sum(self):
        hr = w.IntensityImage(np.array([[1.0, 2.0], [3.0, 4.0]]), 1.0)
        lr = w.bin_intensity(hr, w.SamplingGeometry(2, 1.0))
        assert lr.data.shape == (1, 1)
        assert lr.data[0, 0] == 10.0
        assert lr.pitch == 2.0

    def test_theta_1_identity(self):
        hr = w.IntensityImage(rng(6).uniform(0, 5, (6, 6)), 1.3)
        lr = w.bin_intensity(hr, w.SamplingGeometry(1, 1.3))
        np.testing.assert_array_equal(lr.data, hr.data)
        assert lr.pitch == 1.3

    def test_matches_nested_loop_oracle(self):
        data = rng(7).uniform(0, 3, (12, 12))
        lr = w.bin_intensity(w.IntensityImage(data, 1.0), w.SamplingGeometry(3, 1.0))
        assert lr.data.shape == (4, 4)
        for R in range(4):
            for C in range(4):
                total = 0.0
                for r in range(3):
                    for c in range(3):
                        total += data[3 * R + r, 3 * C + c]
                assert lr.data[R, C] == pytest.approx(total, rel=1e-14)

    def test_conserves_sum(self):
        data = rng(8).uniform(0, 2, (30, 30))
        lr = w.bin_intensity(w.IntensityImage(data, 1.0), w.SamplingGeometry(5, 1.0))
        assert abs(lr.data.sum() - data.sum()) <= 1e-12 * data.sum()

    def test_rejects_non_divisible(self):
        hr = w.IntensityImage(np.ones((7, 6)), 1.0)
        with pytest.raises(ShapeError):
            w.bin_intensity(hr, w.SamplingGeometry(3, 1.0))


class TestUpsampleReplicate:
    def test_normalized_patch_value(self):
        lr = w.IntensityImage(np.array([[10.0]]), 2.0)
        hr = w.upsample_replicate(lr, w.SamplingGeometry(2, 1.0), normalize=True)
        assert hr.data.shape == (2, 2)
        assert np.all(hr.data == 2.5)
        assert hr.pitch == 1.0

    def test_unnormalized_replicates(self):
        lr = w.IntensityImage(np.array([[3.0, 1.0]]), 2.0)
        hr = w.upsample_replicate(lr, w.SamplingGeometry(2, 1.0))
        np.testing.assert_array_equal(
            hr.data, [[3.0, 3.0, 1.0, 1.0], [3.0, 3.0, 1.0, 1.0]])

    def test_theta_1_identity(self):
        lr = w.IntensityImage(rng(9).uniform(0, 1, (5, 5)), 1.0)
        hr = w.upsample_replicate(lr, w.SamplingGeometry(1, 1.0))
        np.testing.assert_array_equal(hr.data, lr.data)

    def test_roundtrip_with_bin(self):
        data = rng(10).uniform(0, 4, (3, 3))
        geom = w.SamplingGeometry(4, 1.0)
        lr = w.IntensityImage(data, 4.0)
        hr = w.upsample_replicate(lr, geom, normalize=True)
        back = w.bin_intensity(hr, geom)
        np.testing.assert_allclose(back.data, data, rtol=0, atol=1e-15)

    def test_preserves_allow_negative(self):
        lr = w.IntensityImage(np.array([[-1.0, 2.0]]), 2.0, allow_negative=True)
        hr = w.upsample_replicate(lr, w.SamplingGeometry(2, 1.0))
        assert hr.allow_negative
        assert hr.data.min() == -1.0


class TestRawArrayHelpers:
    def test_bin_array_matches_bin_intensity(self):
        data = rng(11).uniform(0, 1, (8, 8))
        np.testing.assert_array_equal(
            bin_array(data, 2),
            w.bin_intensity(w.IntensityImage(data, 1.0),
                            w.SamplingGeometry(2, 1.0)).data)

    def test_upsample_array_matches_replicate(self):
        data = rng(12).uniform(0, 1, (4, 4))
        np.testing.assert_array_equal(
            upsample_array(data, 3, normalize=True),
            w.upsample_replicate(w.IntensityImage(data, 3.0),
                                 w.SamplingGeometry(3, 1.0), normalize=True).data)
