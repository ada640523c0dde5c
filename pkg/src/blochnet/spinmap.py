"""Single-magnon sector of XY spin networks as a tight-binding network.

An XY spin network is declared like a tight-binding network, but with
exchange couplings ``J`` on each bond:

    H^s = sum_bonds J (S+_u S-_v + S-_u S+_v).

In the sector with one spin flipped up from the all-down state the basis
``|u> = S+_u |down...down>`` turns ``H^s`` into a hopping matrix with
``<u|H^s|v> = J``.  Since bonds enter a :class:`~blochnet.net.Network` as
``-t``, the mapping uses ``t = -J``.  Matching conditions carry over with
``|J|`` in place of ``t``; note that the sign flip inverts the band, so for
``J > 0`` a packet moving towards increasing site index has ``k = -pi/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce as _fold
from typing import Sequence

import numpy as np

from .net import ChainSpec, JointSpec, Network, NetworkError, build_network

__all__ = [
    "SpinNetworkSpec",
    "magnon_to_tbn",
    "spin_hamiltonian",
    "total_sz",
    "one_magnon_block",
    "one_magnon_states",
]

_SP = np.array([[0.0, 0.0], [1.0, 0.0]])  # S+ in the (down, up) basis
_SZ = np.diag([-0.5, 0.5])


@dataclass(frozen=True)
class SpinNetworkSpec:
    """Chains of spins with uniform exchange ``J`` joined by exchange joints.

    ``chains`` holds ``(label, n_spins, J)`` triples and ``joints`` holds
    ``((label, local), (label, local), J)`` triples.
    """

    chains: tuple
    joints: tuple = ()

    def __post_init__(self):
        for label, n, J in self.chains:
            if not np.isfinite(J) or J == 0:
                raise NetworkError(f"spin chain {label}: exchange must be finite and non-zero")
        for a, b, J in self.joints:
            if not np.isfinite(J) or J == 0:
                raise NetworkError(f"spin joint {a}-{b}: exchange must be finite and non-zero")
        magnon_to_tbn(self)  # same topology rules as any network

    @property
    def n_spins(self) -> int:
        return sum(int(n) for _, n, _ in self.chains)


def magnon_to_tbn(spec: SpinNetworkSpec) -> Network:
    chains = [ChainSpec(label, int(n), -float(J)) for label, n, J in spec.chains]
    joints = [JointSpec(tuple(a), tuple(b), -float(J)) for a, b, J in spec.joints]
    return build_network(chains, joints, spin=True)


def _exchange_bonds(spec: SpinNetworkSpec) -> list:
    net = magnon_to_tbn(spec)
    return [(u, v, -amp.real) for u, v, amp in net.bonds]


def _site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """``op`` acting on spin ``site`` of ``n``; spin 0 is the most significant factor."""
    mats = [np.eye(2)] * n
    mats[site] = op
    return _fold(np.kron, mats)


def spin_hamiltonian(spec: SpinNetworkSpec) -> np.ndarray:
    """Full ``2^n x 2^n`` XY Hamiltonian built from Kronecker products."""
    n = spec.n_spins
    if n > 14:
        raise ValueError("full spin Hamiltonian limited to 14 spins")
    H = np.zeros((2 ** n, 2 ** n))
    for u, v, J in _exchange_bonds(spec):
        spu, spv = _site_op(_SP, u, n), _site_op(_SP, v, n)
        H += J * (spu @ spv.T + spu.T @ spv)
    return H


def total_sz(n: int) -> np.ndarray:
    return sum(_site_op(_SZ, j, n) for j in range(n))


def one_magnon_states(n: int) -> np.ndarray:
    """Columns ``S+_j |all down>`` for ``j = 0 .. n-1`` in the full product basis."""
    vac = np.zeros(2 ** n)
    vac[0] = 1.0
    return np.column_stack([_site_op(_SP, j, n) @ vac for j in range(n)])


def one_magnon_block(spec: SpinNetworkSpec) -> np.ndarray:
    """``<j|H^s|k>`` on the one-magnon states, by explicit projection."""
    B = one_magnon_states(spec.n_spins)
    return B.T @ spin_hamiltonian(spec) @ B
