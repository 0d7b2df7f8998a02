"""Sectional photoacoustic imaging with variable sound speed.

Simulation of per-section and full-slab boundary data for an absorption
density f = f0 + f1 and a compactly supported sound-speed contrast q, and
exact reconstruction of both from the data.  Hot kernels run in a compiled
extension when available, with a NumPy fallback selected at import time
(see BACKEND).
"""

from ._kernels import BACKEND
from .fields import (DetectorSet, IlluminationSet, Phantom, ScalarField,
                     circle_detectors, eval_field, make_illumination,
                     make_phantom, sphere_detectors)
from .forward import (CostCapError, SeparatedData, SinogramData,
                      default_interior_indices, default_interior_points,
                      default_ladder_offsets, default_time_grid,
                      separate_data, simulate_fourier_full,
                      simulate_separated_2d, simulate_separated_3d)
from .meanops import (MeanData, ellipsoidal_mean, ellipsoidal_mean_batch,
                      invert_mean_2d, invert_mean_3d, spherical_mean,
                      twocenter_batch, twocenter_kernel_2d)
from .recon import (ReconResult, fixed_point_q3d, limit_to_gamma, metrics,
                    recon2d, recon3d)
from .specfun import bessel_j0, complete_elliptic_K, hankel0
from .volterra import (VolterraProblem, differentiate_rhs, kernel_ktilde,
                       kernel_ktilde_dt, solve_second_kind)
from .xforms import (Spectrum, TimeSeries, fourier, radon_forward,
                     radon_invert, radon_invert_points, time_antiderivative)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CostCapError",
    "DetectorSet",
    "IlluminationSet",
    "MeanData",
    "Phantom",
    "ReconResult",
    "ScalarField",
    "SeparatedData",
    "SinogramData",
    "Spectrum",
    "TimeSeries",
    "VolterraProblem",
    "bessel_j0",
    "circle_detectors",
    "complete_elliptic_K",
    "default_interior_indices",
    "default_interior_points",
    "default_ladder_offsets",
    "default_time_grid",
    "differentiate_rhs",
    "ellipsoidal_mean",
    "ellipsoidal_mean_batch",
    "eval_field",
    "fixed_point_q3d",
    "fourier",
    "hankel0",
    "invert_mean_2d",
    "invert_mean_3d",
    "kernel_ktilde",
    "kernel_ktilde_dt",
    "limit_to_gamma",
    "make_illumination",
    "make_phantom",
    "metrics",
    "radon_forward",
    "radon_invert",
    "radon_invert_points",
    "recon2d",
    "recon3d",
    "separate_data",
    "simulate_fourier_full",
    "simulate_separated_2d",
    "simulate_separated_3d",
    "solve_second_kind",
    "spherical_mean",
    "sphere_detectors",
    "time_antiderivative",
    "twocenter_batch",
    "twocenter_kernel_2d",
    "__version__",
]
