"""Estimator-style front ends for the solver and the cell segmenter.

Both follow scikit-learn conventions: constructors only store hyperparameters,
``fit`` validates and computes, fitted state lives in trailing-underscore
attributes, and ``get_params``/``set_params`` come from ``BaseEstimator`` so
instances clone and grid-search cleanly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .denoisers import make_denoiser
from .grids import ComplexField
from .masks import MaskSet
from .measurements import MeasurementStack
from .propagation import OpticalConfig
from .solver import ReconConfig, reconstruct


class FieldReconstructor(BaseEstimator):
    """Recover a high-resolution complex field from binned intensity frames.

    Parameters mirror the solver configuration; ``denoiser`` picks the prior
    by name ("identity", "tv", "external") with ``denoiser_params`` forwarded
    to it, so the baseline and the regularized variants share one estimator.
    """

    def __init__(self, masks: MaskSet | None = None,
                 optics: OpticalConfig | None = None,
                 denoiser: str = "identity",
                 denoiser_params: dict | None = None,
                 eta: float = 1.0, beta: float = 1.0,
                 outer_iters: int = 100, init: str = "backprop-mean",
                 rng_seed: int = 0, convergence_tol: float = 1e-6,
                 epoch_mode: str = "sequential", patch_update: str = "scale"):
        self.masks = masks
        self.optics = optics
        self.denoiser = denoiser
        self.denoiser_params = denoiser_params
        self.eta = eta
        self.beta = beta
        self.outer_iters = outer_iters
        self.init = init
        self.rng_seed = rng_seed
        self.convergence_tol = convergence_tol
        self.epoch_mode = epoch_mode
        self.patch_update = patch_update

    def _recon_config(self) -> ReconConfig:
        return ReconConfig(
            eta=self.eta, beta=self.beta, outer_iters=self.outer_iters,
            init=self.init, rng_seed=self.rng_seed,
            convergence_tol=self.convergence_tol, epoch_mode=self.epoch_mode,
            patch_update=self.patch_update,
        )

    def fit(self, X: MeasurementStack, y: ComplexField | None = None):
        """Run the reconstruction on a measurement stack.

        ``y`` may carry the ground-truth field purely for per-iteration
        quality logging; it never influences the iterate.
        """
        if self.masks is None or self.optics is None:
            raise ValueError("masks and optics must be set before fit")
        prior = make_denoiser(self.denoiser, **(self.denoiser_params or {}))
        result = reconstruct(X, self.masks, self.optics, self._recon_config(),
                             denoiser=prior, truth=y)
        self.result_ = result
        self.field_ = result.field
        self.n_iter_ = len(result.per_iteration)
        return self

    def transform(self, X: MeasurementStack | None = None) -> np.ndarray:
        """Return the fitted complex field as an array."""
        check_is_fitted(self, "field_")
        return np.array(self.field_.data)

    def fit_transform(self, X: MeasurementStack, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def predict(self, X: MeasurementStack | None = None) -> ComplexField:
        """Return the fitted field object (pitch included)."""
        check_is_fitted(self, "field_")
        return self.field_


class CellSegmenter(BaseEstimator):
    """Watershed cell segmentation with a counting convenience.

    ``predict`` returns the interior cell count (border-touching cells are
    excluded unless ``exclude_margin`` is False).
    """

    def __init__(self, threshold_mode: str = "otsu",
                 threshold: float | None = None, min_distance: int = 7,
                 exclude_margin: bool = True):
        self.threshold_mode = threshold_mode
        self.threshold = threshold
        self.min_distance = min_distance
        self.exclude_margin = exclude_margin

    def fit(self, X, y=None):
        """Segment a 2D intensity or amplitude image."""
        from .segmentation import count_cells, watershed_segment

        labels = watershed_segment(X, threshold_mode=self.threshold_mode,
                                   threshold=self.threshold,
                                   min_distance=self.min_distance)
        self.labels_ = labels
        self.n_cells_ = count_cells(labels, exclude_margin=self.exclude_margin)
        return self

    def transform(self, X=None) -> np.ndarray:
        check_is_fitted(self, "labels_")
        return np.array(self.labels_.labels)

    def predict(self, X=None) -> int:
        check_is_fitted(self, "n_cells_")
        return self.n_cells_
