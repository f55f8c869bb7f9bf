"""Watershed cell segmentation and counting."""

import numpy as np
import pytest
from PIL import Image

import wavesr as w
from wavesr.errors import ConfigError
from wavesr.segmentation import (LabelMap, binarize, interior_labels,
                                 save_label_overlay_png, save_label_png)


def disk_image(shape, centers, radius):
    img = np.zeros(shape)
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    for (r, c) in centers:
        img[(yy - r) ** 2 + (xx - c) ** 2 <= radius**2] = 1.0
    return img


class TestBinarize:
    def test_otsu_separates_bimodal(self):
        img = disk_image((40, 40), [(20, 20)], radius=8)
        mask = binarize(img)
        np.testing.assert_array_equal(mask, img > 0.5)

    def test_constant_image_is_background(self):
        assert not binarize(np.full((10, 10), 0.7)).any()

    def test_fixed_threshold(self):
        img = np.array([[0.2, 0.6], [0.4, 0.9]])
        np.testing.assert_array_equal(
            binarize(img, mode="fixed", threshold=0.5),
            np.array([[False, True], [False, True]]))

    def test_fixed_without_threshold_rejected(self):
        with pytest.raises(ConfigError):
            binarize(np.zeros((4, 4)), mode="fixed")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            binarize(np.zeros((4, 4)), mode="adaptive")


class TestWatershed:
    def test_single_disk(self):
        img = disk_image((50, 50), [(25, 25)], radius=10)
        labels = w.watershed_segment(img)
        assert labels.n_labels == 1
        assert w.count_cells(labels) == 1

    def test_blank_image(self):
        labels = w.watershed_segment(np.zeros((30, 30)))
        assert labels.n_labels == 0
        assert w.count_cells(labels) == 0

    def test_touching_disks_are_split(self):
        img = disk_image((60, 60), [(30, 22), (30, 37)], radius=10)
        labels = w.watershed_segment(img)
        assert labels.n_labels == 2
        assert w.count_cells(labels) == 2

    def test_close_peaks_merge_below_min_distance(self):
        img = disk_image((40, 40), [(20, 17), (20, 22)], radius=8)
        merged = w.watershed_segment(img, min_distance=7)
        assert merged.n_labels == 1

    def test_margin_exclusion(self):
        # three interior disks plus two that touch the border
        img = disk_image((64, 64), [(20, 20), (20, 44), (44, 32),
                                    (4, 32), (60, 10)], radius=6)
        labels = w.watershed_segment(img)
        assert labels.n_labels == 5
        assert w.count_cells(labels, exclude_margin=True) == 3
        assert w.count_cells(labels, exclude_margin=False) == 5
        interior = interior_labels(labels)
        assert interior.size == 3
        border_ids = set(np.unique(labels.labels[0, :])) | \
            set(np.unique(labels.labels[-1, :]))
        assert not set(interior.tolist()) & border_ids

    def test_synthetic_seventy_cells(self):
        img = w.synthetic_cells(count=70, seed=0)
        labels = w.watershed_segment(img)
        assert w.count_cells(labels, exclude_margin=False) == 70

    def test_foreground_partition(self):
        img = w.synthetic_cells((128, 128), count=12, seed=3)
        labels = w.watershed_segment(img)
        from scipy import ndimage
        mask = ndimage.binary_fill_holes(
            binarize(img), structure=ndimage.generate_binary_structure(2, 1))
        np.testing.assert_array_equal(labels.labels > 0, mask)

    def test_deterministic(self):
        img = w.synthetic_cells((128, 128), count=10, seed=5)
        a = w.watershed_segment(img)
        b = w.watershed_segment(img)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_accepts_intensity_image(self):
        img = disk_image((40, 40), [(20, 20)], radius=8)
        labels = w.watershed_segment(w.IntensityImage(img, 1.4))
        assert labels.n_labels == 1

    def test_label_values_are_contiguous(self):
        img = w.synthetic_cells((128, 128), count=8, seed=9)
        labels = w.watershed_segment(img)
        present = np.unique(labels.labels)
        np.testing.assert_array_equal(
            present, np.arange(labels.n_labels + 1))


class TestLabelMap:
    def test_labels_read_only(self):
        labels = LabelMap(np.zeros((4, 4), dtype=np.int64), 0)
        assert labels.labels.dtype == np.int32
        with pytest.raises(ValueError):
            labels.labels[0, 0] = 1

    def test_shape_property(self):
        labels = LabelMap(np.zeros((3, 5), dtype=np.int32), 0)
        assert labels.shape == (3, 5)


class TestLabelExport:
    def test_label_png_preserves_ids(self, tmp_path):
        img = disk_image((60, 60), [(20, 20), (40, 40)], radius=8)
        labels = w.watershed_segment(img)
        path = tmp_path / "labels.png"
        save_label_png(labels, path)
        arr = np.asarray(Image.open(path))
        assert arr.dtype == np.uint16
        # ids map linearly onto the 16-bit range; recover and compare
        recovered = np.rint(arr / 65535.0 * labels.n_labels).astype(np.int32)
        np.testing.assert_array_equal(recovered, labels.labels)

    def test_overlay_png_shape_and_background(self, tmp_path):
        img = disk_image((50, 50), [(25, 25)], radius=10)
        labels = w.watershed_segment(img)
        path = tmp_path / "overlay.png"
        save_label_overlay_png(labels, path)
        arr = np.asarray(Image.open(path))
        assert arr.shape == (50, 50, 3)
        assert not arr[labels.labels == 0].any()
        assert arr[labels.labels == 1].any()


class TestSyntheticCells:
    def test_count_and_range(self):
        img = w.synthetic_cells((256, 256), count=70, seed=0)
        assert img.shape == (256, 256)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_seeded_determinism(self):
        a = w.synthetic_cells((128, 128), count=20, seed=4)
        b = w.synthetic_cells((128, 128), count=20, seed=4)
        np.testing.assert_array_equal(a, b)
        c = w.synthetic_cells((128, 128), count=20, seed=5)
        assert not np.array_equal(a, c)

    def test_centers_respect_spacing(self):
        img, centers = w.synthetic_cells((256, 256), count=40, seed=1,
                                         return_centers=True)
        assert len(centers) == 40

    def test_impossible_packing_rejected(self):
        with pytest.raises(ConfigError):
            w.synthetic_cells((32, 32), count=500, seed=0)
