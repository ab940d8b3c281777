"""Exact diagonalization of the non-Hermitian detuned PXP chain.

Biorthogonal spectra, entanglement and quench observables, phase
classification and finite-size scaling of the Ising and Yang-Lee edge
transitions.
"""

__version__ = "0.1.0"

from .basis import enumerate_basis, build_momentum_sectors  # noqa: E402,F401
from .hamiltonian import ModelParams, build_pxp_hamiltonian, build_sector_hamiltonian  # noqa: E402,F401
from .chain import PXPChain  # noqa: E402,F401
