"""Low-rank tensor completion from wedge samples: subspace estimation,
spectral completion, gradient descent and incoherent-norm probes."""

__version__ = "0.1.0"

from .completion import (  # noqa: E402
    CompletionResult,
    SpectralCompletionConfig,
    TuckerEstimate,
    spectral_complete_asymmetric,
    spectral_complete_symmetric,
)
from .delta_norm import DeltaNormEstimate, concentration_probe, delta_norm_estimate, spectral_norm_estimate  # noqa: E402
from .gd import gd_complete, gd_gradient, gd_objective_value, gd_run, retrieve_cp_factors  # noqa: E402
from .sampling import ObservationSet, WedgeSampleSet, build_wedge_matrix, sample_uniform, sample_wedges  # noqa: E402
from .subspace import SubspaceEstimate, procrustes_align, top_r_eigs  # noqa: E402
from .tensor_core import CPModel, cp_to_dense, fold, random_cp_model, unfold  # noqa: E402

__all__ = [
    "CPModel", "random_cp_model", "cp_to_dense", "unfold", "fold",
    "WedgeSampleSet", "ObservationSet", "sample_wedges", "sample_uniform", "build_wedge_matrix",
    "SubspaceEstimate", "top_r_eigs", "procrustes_align",
    "SpectralCompletionConfig", "TuckerEstimate", "CompletionResult",
    "spectral_complete_symmetric", "spectral_complete_asymmetric",
    "retrieve_cp_factors", "gd_objective_value", "gd_gradient", "gd_run", "gd_complete",
    "DeltaNormEstimate", "delta_norm_estimate", "spectral_norm_estimate", "concentration_probe",
]
