"""Direct and inverse spectral problem for doubly-infinite Jacobi matrices."""
__version__ = "0.1.0"

from .lattice import LatticeSpec, SpecError, TailModel, free_spec, perturbed_spec
from .weyl import WeylField
from .partition import SpectrumPartition, build_partition, validate_conditions
from .factor import FactorR, build_R, check_factorization
from .spectral import CircleGrid, ReducedSpectralData, build_data, synthetic_data
from .solver import reconstruct_entries, solve_u
from .classical import scattering_data, solve_marchenko, reconstruct_classical
from .toda import evolve_and_reconstruct, ode_oracle
from .pipeline import roundtrip

__all__ = [
    "LatticeSpec", "SpecError", "TailModel", "free_spec", "perturbed_spec", "WeylField",
    "SpectrumPartition", "build_partition", "validate_conditions", "FactorR", "build_R",
    "check_factorization", "CircleGrid", "ReducedSpectralData", "build_data", "synthetic_data",
    "reconstruct_entries", "solve_u", "scattering_data", "solve_marchenko", "reconstruct_classical",
    "evolve_and_reconstruct", "ode_oracle", "roundtrip",
]
