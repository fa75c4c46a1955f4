"""Weak-coupling limit toolkit for finite open quantum systems.

Builds the limit generator of a system coupled to a gaussian boson
reservoir from its spectral data, propagates master and Heisenberg
equations, checks the weak-coupling limit at finite coupling and realizes
the limit quantum stochastic equation by repeated interactions.
"""
__version__ = "0.1.0"

from .errors import (AssertionFailure, ConfigError, ConvergenceError, EdgeError,
                     ExtrapolationError, FactorizationError, PositivityError, QuadratureError,
                     StoclimError, ValidationError)
from .spectral import (DegeneracyReport, EigenSystem, FrequencyChannel, SystemSpec, build_channels,
                       check_harmonic, classify_brute_force, classify_degeneracies, diagonalize,
                       frequency_decompose, hydrogen_degeneracy_search, hydrogen_search_exact,
                       transition_operators)
from .reservoir import (Covariance, GramCoefficients, Reservoir, SpectralDensity, compute_grams,
                        full_line_gram, gram_identity_residual, half_line_gram, load_density_csv,
                        memory_function, preset_density, tabulated_density, thermal_covariance,
                        vacuum_covariance)
from .lindblad import (DensityMatrix, GksGenerator, Trajectory, assemble_drift, evolve_heisenberg,
                       evolve_master, generator_heisenberg, generator_schrodinger,
                       golden_rule_rates, langevin_coefficients, rate_table, stationary_state,
                       superoperator, survival_decay_rate, theta_map)
from .model import OpenSystem, build_open_system
from .oracles import (w_identity_check, half_line_time_oracle, resolvent_oracle,
                      second_order_oracle, traditional_w_coefficients)
from .wcl import (CollectiveQuery, collective_two_point, convergence_scan, cross_frequency_overlap,
                  limit_two_point)
from .qsde import (SliceSpace, build_slice, build_slice_for, effective_rotation, evolve_reduced,
                   evolve_reduced_heisenberg, ito_table_check, step_reduced, unitarity_defect)
