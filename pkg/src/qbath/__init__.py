"""Reduced equilibrium state of a harmonic oscillator in a harmonic bath.

Submodules:

* :mod:`qbath.spectral` - bath mass densities, damping and frequency shift
* :mod:`qbath.equilibrium` - moments, effective temperature/mass, entropy
* :mod:`qbath.finite_bath` - finite-bath exact diagonalisation oracle
* :mod:`qbath.interferometer` - two-lead fringe contrast and junction scattering
* :mod:`qbath.cli` - the ``qbath`` command
"""
from .errors import (ConvergenceError, DomainError, InconsistencyError, ModelInconsistencyError,
                     OverflowGuardError, QBathError, ResonanceSingularError, TruncationError,
                     UncertaintyViolation)
from .spectral import (BathResponse, Drude, OhmicSharp, ParticleParams, PoleRecord, RCCircuit,
                       SpectralDensity, Tabulated, bath_response, delta, delta_exact, evaluate_mu,
                       find_real_poles, gamma)
from .equilibrium import (EquilibriumState, GaussianDensityMatrix, density_matrix, effective_mass,
                          effective_temperature, entropy_of, equilibrium_state, p2_mean, q2_mean,
                          weighted_integral)
from .finite_bath import FiniteBath, ModeDecomposition, build_matrix, decompose, discretize, exact_moments
from .interferometer import (FringePattern, Junction, ScatteringSolution, channel_wavevectors, chi,
                             chi_all, coherence_length, coherence_length_from_moments, contact_amplitudes,
                             fringe_pattern, sampled_contrast, scattering_solve, tau_high_energy,
                             validity_check)

__version__ = "0.1.0"
