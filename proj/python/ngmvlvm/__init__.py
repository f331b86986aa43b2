"""Multi-view spectral mixture latent variable model (C++ core with Python bindings)."""

from ._core import (
    ModelState,
    SpectralMixtureParams,
    error_bound,
    feature_matrix,
    impute,
    knn_cv_accuracy,
    make_s_curve_latents,
    mse,
    ngsm_gram,
    ngsm_kernel,
    ngsm_spectral_density,
    r2_alignment,
    reconstruct,
    sample_two_view_s_curve,
    train,
)

__all__ = [
    "ModelState",
    "SpectralMixtureParams",
    "error_bound",
    "feature_matrix",
    "impute",
    "knn_cv_accuracy",
    "make_s_curve_latents",
    "mse",
    "ngsm_gram",
    "ngsm_kernel",
    "ngsm_spectral_density",
    "r2_alignment",
    "reconstruct",
    "sample_two_view_s_curve",
    "train",
]
