"""Multiconfigurational time-dependent Hartree dynamics for bosonic atoms and
molecules with two-atom to one-molecule conversion on a periodic 1-D grid."""

from .eom import ConversionSystem, OrbitalSet
from .fock import ConfigurationBasis, Configuration, enumerate_basis
from .grid import OneBodyOperatorSpec, SpatialGrid
from .operators import InteractionSpec, assemble_hamiltonian, compute_integrals
from .propagation import (IntegratorConfig, PropagationState, default_initial_state, propagate,
                          relax, run_real_time)
from .rdm import compute_rdms

__all__ = [
    "Configuration", "ConfigurationBasis", "ConversionSystem", "IntegratorConfig",
    "InteractionSpec", "OneBodyOperatorSpec", "OrbitalSet", "PropagationState", "SpatialGrid",
    "assemble_hamiltonian", "compute_integrals", "compute_rdms", "default_initial_state",
    "enumerate_basis", "propagate", "relax", "run_real_time",
]
