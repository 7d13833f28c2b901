"""Cooling of a mechanical mode with optomechanically induced transparency.

Force-noise spectra for N drive tones, rate equations, exact covariance
dynamics of the linearized three-mode system, a truncated-Fock oracle and
parameter sweeps.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("omit-cool")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .core import (X_ZPF, ConvergenceError, InstabilityError, IntegrationError, OmitCoolError,
                   ParameterError, PhysicalityError, SystemParams, Tone, ToneSet,
                   bose_occupation, cascaded_tone_set, two_photon_detuning)
from .rates import RateReport, cascade_dominance, rates, single_mode_backaction_limit
from .response import SpectrumSeries, chi_mc_tilde, chi_mech, chi_opt, chi_tilde, spectrum

__all__ = ["X_ZPF", "ConvergenceError", "InstabilityError", "IntegrationError", "OmitCoolError",
           "ParameterError", "PhysicalityError", "SystemParams", "Tone", "ToneSet",
           "bose_occupation", "cascaded_tone_set", "two_photon_detuning", "RateReport",
           "cascade_dominance", "rates", "single_mode_backaction_limit", "SpectrumSeries",
           "chi_mc_tilde", "chi_mech", "chi_opt", "chi_tilde", "spectrum", "__version__"]
