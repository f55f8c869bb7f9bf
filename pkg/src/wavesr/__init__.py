"""Complex-domain pixel super-resolution toolkit.

Simulate low-resolution intensity measurements of a high-resolution complex
optical field (phase-mask modulation, free-space propagation, detector
binning), reconstruct amplitude and phase with an alternating projection
solver and pluggable denoiser priors, and analyze the results (PSNR/SSIM,
watershed cell counting, benchmark sweeps).
"""

from .bench import run_experiment, sweep_cells
from .config import (ALGO_NAMES, ExperimentConfig, load_config, parse_config,
                     save_config)
from .denoisers import (Denoiser, ExternalDenoiser, IdentityDenoiser,
                        TvDenoiser, external_denoise, make_denoiser,
                        tv_denoise, tv_value)
from .errors import (ConfigError, DenoiserExitError, DenoiserOutputError,
                     DenoiserSpecError, DenoiserTimeoutError,
                     ExternalDenoiserError, ShapeError)
from .estimators import CellSegmenter, FieldReconstructor
from .fileio import (export_amplitude_png, export_phase_png, load_grid,
                     save_grid, wrap_phase)
from .grids import (ComplexField, IntensityImage, SamplingGeometry,
                    bin_intensity, hadamard_modulate, upsample_replicate)
from .masks import MASK_KINDS, MaskSet, generate_mask_set, load_mask_set, \
    raster_offsets, save_mask_set
from .measurements import (NOISE_KINDS, MeasurementStack, add_gaussian_noise,
                           add_poisson_noise, load_stack, realized_snr_db,
                           save_stack, simulate_measurements)
from .metrics import (MetricsReport, align_global_phase, evaluate_field,
                      global_phase_offset, psnr, ssim)
from .propagation import OpticalConfig, propagate, transfer_function
from .segmentation import (LabelMap, count_cells, find_markers,
                           watershed_segment)
from .solver import (ReconConfig, ReconResult, project_detector_intensity,
                     psr_project, reconstruct, reconstruct_conv_psr,
                     reconstruct_do_psr)
from .targets import (load_builtin_image, make_cells_target, make_target,
                      synthetic_cells)

__version__ = "0.1.0"

__all__ = [
    "ALGO_NAMES", "CellSegmenter", "ComplexField", "ConfigError",
    "Denoiser", "DenoiserExitError", "DenoiserOutputError",
    "DenoiserSpecError", "DenoiserTimeoutError", "ExperimentConfig",
    "ExternalDenoiser", "ExternalDenoiserError", "FieldReconstructor",
    "IdentityDenoiser", "IntensityImage", "LabelMap", "MASK_KINDS",
    "MaskSet", "MeasurementStack", "MetricsReport", "NOISE_KINDS",
    "OpticalConfig", "ReconConfig", "ReconResult", "SamplingGeometry",
    "ShapeError", "TvDenoiser", "add_gaussian_noise", "add_poisson_noise",
    "align_global_phase", "bin_intensity", "count_cells", "evaluate_field",
    "export_amplitude_png", "export_phase_png", "external_denoise",
    "find_markers", "generate_mask_set", "global_phase_offset",
    "hadamard_modulate", "load_builtin_image", "load_config", "load_grid",
    "load_mask_set", "load_stack", "make_cells_target", "make_denoiser",
    "make_target", "parse_config", "project_detector_intensity", "propagate",
    "psnr", "psr_project", "raster_offsets", "realized_snr_db",
    "reconstruct", "reconstruct_conv_psr", "reconstruct_do_psr",
    "run_experiment", "save_config", "save_grid", "save_mask_set",
    "save_stack", "simulate_measurements", "ssim", "sweep_cells",
    "synthetic_cells", "transfer_function", "tv_denoise", "tv_value",
    "upsample_replicate", "watershed_segment", "wrap_phase",
]
