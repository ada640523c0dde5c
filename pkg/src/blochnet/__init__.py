"""Single-particle quantum dynamics on tight-binding networks.

Submodules
----------
net       network declaration and Hamiltonian assembly
dynamics  Gaussian packets and exact time evolution
reduce    virtual-chain reductions and their numerical certificates
observe   reflection, concurrence, interference and flux observables
spinmap   one-magnon mapping of XY spin networks
netfile   plain-text network descriptions
cli       experiment runner (``blochnet`` command)
"""

from .net import (ChainSpec, JointSpec, Network, NetworkError, build_network, hamiltonian,
                  thread_loop_flux)
from .dynamics import eigendecompose, evolve, gaussian_packet

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "JointSpec",
    "Network",
    "NetworkError",
    "build_network",
    "hamiltonian",
    "thread_loop_flux",
    "eigendecompose",
    "evolve",
    "gaussian_packet",
    "__version__",
]
