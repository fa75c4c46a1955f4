"""Reservoir description: spectral densities, covariances and Gram coefficients."""
from .covariance import Covariance, thermal_covariance, vacuum_covariance, weighted
from .densities import (Reservoir, SpectralDensity, load_density_csv, preset_density,
                        tabulated_density)
from .gram import (GramCoefficients, compute_grams, full_line_gram, gram_identity_residual,
                   half_line_gram)
from .memory import memory_function

__all__ = [
    "Covariance", "thermal_covariance", "vacuum_covariance", "weighted",
    "Reservoir", "SpectralDensity", "load_density_csv", "preset_density", "tabulated_density",
    "GramCoefficients", "compute_grams", "full_line_gram", "gram_identity_residual",
    "half_line_gram", "memory_function",
]
