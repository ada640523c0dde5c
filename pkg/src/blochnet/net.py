"""Tight-binding networks built from chains, joints and loop fluxes.

A network is a set of linear chains whose end (or interior) sites are
connected by joint bonds.  Every bond enters the one-particle Hamiltonian
with a leading minus sign,

    H = -sum_bonds (t_uv exp(i Phi_uv) |u><v| + h.c.) + sum_u mu_u |u><u|,

where ``Phi_uv`` is the Peierls link phase on the directed link ``u -> v``.
Local site indices are 1-based, global indices 0-based: chains are laid out
in declaration order, sites in ascending local index.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "ChainSpec",
    "JointSpec",
    "LinkPhase",
    "Network",
    "NetworkError",
    "build_network",
    "thread_loop_flux",
    "hamiltonian",
    "site_index",
    "film_network",
    "star_network",
    "y_network",
    "q_ring_network",
    "q_ring_loop",
    "interferometer_network",
    "interferometer_loop",
    "y_complex_network",
    "chain_network",
    "ring_network",
]

Site = Union[int, tuple]
GAUGES = ("single", "uniform")


class NetworkError(ValueError):
    """Raised for an invalid network declaration or flux loop."""


@dataclass(frozen=True)
class ChainSpec:
    label: str
    n_sites: int
    hopping: float = 1.0

    def __post_init__(self):
        if not self.label or not isinstance(self.label, str):
            raise NetworkError(f"chain label must be a non-empty string, got {self.label!r}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise NetworkError(f"chain {self.label}: n_sites must be a positive integer")
        # Negative hoppings are needed for the spin mapping (t = -J).
        if not np.isfinite(self.hopping) or self.hopping == 0:
            raise NetworkError(f"chain {self.label}: hopping must be finite and non-zero")


@dataclass(frozen=True)
class JointSpec:
    """Bond ``-(amplitude |a><b| + h.c.)`` between two chain sites."""

    a: tuple
    b: tuple
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.amplitude == 0:
            raise NetworkError(f"joint {self.a}-{self.b}: amplitude must be non-zero")


@dataclass(frozen=True)
class LinkPhase:
    """Peierls phase on the directed link ``u -> v`` (global indices).

    The reverse link ``v -> u`` carries ``-phase``.
    """

    u: int
    v: int
    phase: float


@dataclass(frozen=True)
class Network:
    """Immutable tight-binding network.

    Use :func:`build_network` rather than the constructor; it validates the
    declaration.  ``potentials`` holds ``(global site, value)`` on-site terms.
    """

    chains: tuple
    joints: tuple = ()
    link_phases: tuple = ()
    potentials: tuple = ()
    spin: bool = False

    # -- indexing -------------------------------------------------------
    @cached_property
    def offsets(self) -> dict:
        out, pos = {}, 0
        for c in self.chains:
            out[c.label] = pos
            pos += c.n_sites
        return out

    @cached_property
    def chain_map(self) -> dict:
        return {c.label: c for c in self.chains}

    @property
    def n_sites(self) -> int:
        return sum(c.n_sites for c in self.chains)

    def index(self, label: str, local: int) -> int:
        try:
            chain = self.chain_map[label]
        except KeyError:
            raise NetworkError(f"unknown chain label {label!r}") from None
        if int(local) != local or not 1 <= local <= chain.n_sites:
            raise NetworkError(
                f"site {local} out of range for chain {label} (1..{chain.n_sites})"
            )
        return self.offsets[label] + int(local) - 1

    def resolve(self, site: Site) -> int:
        """Global index of ``site`` given as an int or a ``(label, local)`` pair."""
        if isinstance(site, (tuple, list)):
            return self.index(*site)
        site = int(site)
        if not 0 <= site < self.n_sites:
            raise NetworkError(f"global site {site} out of range")
        return site

    def label_of(self, u: int) -> tuple:
        """Inverse of :meth:`index`."""
        if not 0 <= u < self.n_sites:
            raise NetworkError(f"global site {u} out of range")
        for c in self.chains:
            off = self.offsets[c.label]
            if u < off + c.n_sites:
                return (c.label, u - off + 1)
        raise AssertionError("unreachable")

    def chain_sites(self, label: str) -> np.ndarray:
        """Global indices of a chain, ordered by local index."""
        c = self.chain_map.get(label)
        if c is None:
            raise NetworkError(f"unknown chain label {label!r}")
        off = self.offsets[label]
        return np.arange(off, off + c.n_sites)

    # -- bonds ----------------------------------------------------------
    @cached_property
    def _phase_table(self) -> dict:
        table = {}
        for lp in self.link_phases:
            table[(lp.u, lp.v)] = lp.phase
        return table

    def phase(self, u: int, v: int) -> float:
        """Directed Peierls phase on the link ``u -> v``."""
        table = self._phase_table
        if (u, v) in table:
            return table[(u, v)]
        if (v, u) in table:
            return -table[(v, u)]
        return 0.0

    @cached_property
    def bonds(self) -> tuple:
        """``(u, v, amplitude)`` with ``H[u, v] = -amplitude * exp(i phase(u, v))``."""
        out = []
        for c in self.chains:
            off = self.offsets[c.label]
            out.extend((off + j, off + j + 1, complex(c.hopping)) for j in range(c.n_sites - 1))
        for jt in self.joints:
            out.append((self.index(*jt.a), self.index(*jt.b), complex(jt.amplitude)))
        return tuple(out)

    @cached_property
    def adjacency(self) -> dict:
        adj = {u: set() for u in range(self.n_sites)}
        for u, v, _ in self.bonds:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def has_bond(self, u: int, v: int) -> bool:
        return v in self.adjacency.get(u, ())

    def bond_amplitude(self, u: int, v: int) -> complex:
        """Amplitude of the bond as seen from ``u`` (without link phase)."""
        for a, b, amp in self.bonds:
            if (a, b) == (u, v):
                return amp
            if (a, b) == (v, u):
                return np.conj(amp)
        raise NetworkError(f"no bond between {u} and {v}")

    def distance(self, u: int, v: int) -> int:
        """Graph distance (number of bonds) between two sites."""
        seen, frontier, d = {u}, [u], 0
        while frontier:
            if v in seen:
                return d
            nxt = []
            for x in frontier:
                for y in self.adjacency[x]:
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier, d = nxt, d + 1
        if v in seen:
            return d
        raise NetworkError(f"sites {u} and {v} are not connected")

    def loop_flux(self, loop: Sequence) -> float:
        """Sum of directed link phases around ``loop`` (radians, not reduced)."""
        links = _resolve_loop(self, loop)
        return float(sum(self.phase(u, v) for u, v in links))


def build_network(chains: Iterable[ChainSpec], joints: Iterable[JointSpec] = (),
                  potentials: Iterable = (), spin: bool = False) -> Network:
    """Validate a declaration and return the corresponding :class:`Network`.

    ``potentials`` is an iterable of ``((label, local), value)`` pairs.
    """
    chains = tuple(chains)
    if not chains:
        raise NetworkError("a network needs at least one chain")
    labels = [c.label for c in chains]
    dup = {x for x in labels if labels.count(x) > 1}
    if dup:
        raise NetworkError(f"duplicate chain label(s): {sorted(dup)}")
    net = Network(chains=chains, spin=spin)

    seen = set()
    checked = []
    for jt in joints:
        a = (str(jt.a[0]), int(jt.a[1]))
        b = (str(jt.b[0]), int(jt.b[1]))
        ua, ub = net.index(*a), net.index(*b)
        if ua == ub:
            raise NetworkError(f"joint {a}-{b} connects a site to itself")
        key = frozenset((ua, ub))
        if key in seen:
            raise NetworkError(f"duplicate joint between {a} and {b}")
        if abs(ua - ub) == 1 and a[0] == b[0]:
            raise NetworkError(f"joint {a}-{b} duplicates an intra-chain bond")
        seen.add(key)
        checked.append(JointSpec(a, b, complex(jt.amplitude)))

    pots = {}
    for site, value in potentials:
        u = net.resolve(site)
        pots[u] = pots.get(u, 0.0) + float(value)
    return Network(chains=chains, joints=tuple(checked),
                   potentials=tuple(sorted(pots.items())), spin=spin)


def site_index(net: Network, label: str, local: int) -> int:
    return net.index(label, local)


def _resolve_loop(net: Network, loop: Sequence) -> list:
    links = []
    for link in loop:
        if len(link) != 2:
            raise NetworkError(f"loop link must be a (from, to) pair, got {link!r}")
        u, v = net.resolve(link[0]), net.resolve(link[1])
        if not net.has_bond(u, v):
            raise NetworkError(f"loop link {link[0]}->{link[1]} is not a bond of the network")
        links.append((u, v))
    if len(links) < 3:
        raise NetworkError("a loop needs at least three links")
    for (u0, v0), (u1, v1) in zip(links, links[1:] + links[:1]):
        if v0 != u1:
            raise NetworkError(f"loop is not closed: link ending at {v0} is followed by one starting at {u1}")
    visited = [u for u, _ in links]
    if len(set(visited)) != len(visited):
        raise NetworkError("loop visits a site more than once")
    return links


def thread_loop_flux(net: Network, loop: Sequence, phi: float, gauge: str = "single") -> Network:
    """Thread ``phi`` flux quanta through a closed loop of directed links.

    The directed phase sum around ``loop`` becomes ``2 pi phi``.  With
    ``gauge="single"`` the whole phase sits on the lexicographically first
    link (by global index pair) and the other loop links are reset to zero;
    ``gauge="uniform"`` spreads it evenly.  Bond moduli never change.
    """
    if gauge not in GAUGES:
        raise NetworkError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")
    links = _resolve_loop(net, loop)
    total = 2 * np.pi * float(phi)
    if gauge == "single":
        first = min(links)
        new = {lk: (total if lk == first else 0.0) for lk in links}
    else:
        new = {lk: total / len(links) for lk in links}
    keys = {frozenset(lk) for lk in links}
    kept = [lp for lp in net.link_phases if frozenset((lp.u, lp.v)) not in keys]
    added = [LinkPhase(u, v, p) for (u, v), p in new.items()]
    return replace(net, link_phases=tuple(kept + added))


def hamiltonian(net: Network) -> np.ndarray:
    """Dense Hermitian one-particle Hamiltonian of ``net``."""
    n = net.n_sites
    H = np.zeros((n, n), dtype=complex)
    for u, v, amp in net.bonds:
        h = -amp * np.exp(1j * net.phase(u, v))
        H[u, v] += h
        H[v, u] += np.conj(h)
    for u, mu in net.potentials:
        H[u, u] += mu
    return H


# -- topology builders ----------------------------------------------------

def chain_network(n: int, hopping: float = 1.0, label: str = "A") -> Network:
    return build_network([ChainSpec(label, n, hopping)])


def ring_network(n: int, phi: float = 0.0, hopping: float = 1.0, gauge: str = "single") -> Network:
    """Closed ring of ``n`` sites threaded by ``phi`` flux quanta."""
    if n < 3:
        raise NetworkError("a ring needs at least three sites")
    net = build_network([ChainSpec("R", n, hopping)], [JointSpec(("R", n), ("R", 1), hopping)])
    loop = [(("R", j), ("R", j + 1)) for j in range(1, n)] + [(("R", n), ("R", 1))]
    return thread_loop_flux(net, loop, phi, gauge)


def film_network(N: int, Phi: float, t: float = 1.0) -> Network:
    """Two ``N``-site chains joined end to end through a tunable junction.

    The terminal bond is ``t sin(Phi)`` and the terminal sites carry the
    potentials ``-t cos(Phi)`` (chain A) and ``+t cos(Phi)`` (chain B).  At
    ``sin(Phi) = 0`` the junction bond is absent.
    """
    if N < 2:
        raise NetworkError("film_network needs N >= 2")
    s, c = t * np.sin(Phi), t * np.cos(Phi)
    joints = [JointSpec(("A", N), ("B", N), s)] if abs(s) > 1e-15 else []
    pots = [(("A", N), -c), (("B", N), c)] if abs(c) > 1e-15 else []
    return build_network([ChainSpec("A", N, t), ChainSpec("B", N, t)], joints, pots)


def star_network(m: int, M: int, N: int, t_n, t: float = 1.0) -> Network:
    """Input chain ``A`` (M sites) whose last site feeds ``m`` arms ``B1..Bm``.

    ``t_n`` is a scalar (identical joints) or a length-``m`` sequence.
    """
    if m < 1:
        raise NetworkError("a star needs at least one output arm")
    tn = np.broadcast_to(np.asarray(t_n, dtype=complex), (m,))
    chains = [ChainSpec("A", M, t)] + [ChainSpec(f"B{p}", N, t) for p in range(1, m + 1)]
    joints = [JointSpec(("A", M), (f"B{p}", 1), tn[p - 1]) for p in range(1, m + 1) if tn[p - 1] != 0]
    return build_network(chains, joints)


def y_network(M: int, N: int, t_nB: float, t_nC: float, t: float = 1.0,
              N_C: int | None = None) -> Network:
    """Y-beam: chain ``A`` (M sites) split into arms ``B`` and ``C``.

    A zero joint amplitude leaves the corresponding arm disconnected.
    """
    N_C = N if N_C is None else N_C
    chains = [ChainSpec("A", M, t), ChainSpec("B", N, t), ChainSpec("C", N_C, t)]
    joints = [JointSpec(("A", M), (lab, 1), amp)
              for lab, amp in (("B", t_nB), ("C", t_nC)) if amp != 0]
    return build_network(chains, joints)


def y_complex_network(L: int, N: int, Phi: float, t: float = 1.0) -> Network:
    """Y-beam with the complex joints ``t e^{-i Phi/2} cos(Phi/2)`` and
    ``i t e^{-i Phi/2} sin(Phi/2)``."""
    t_ab = t * np.exp(-0.5j * Phi) * np.cos(Phi / 2)
    t_ac = 1j * t * np.exp(-0.5j * Phi) * np.sin(Phi / 2)
    chains = [ChainSpec("A", L, t), ChainSpec("B", N, t), ChainSpec("C", N, t)]
    joints = [JointSpec(("A", L), (lab, 1), amp)
              for lab, amp in (("B", t_ab), ("C", t_ac)) if abs(amp) > 1e-15]
    return build_network(chains, joints)


def q_ring_loop(M: int, N: int) -> list:
    """Directed loop A_M -> B_1 .. B_N -> C_N .. C_1 -> A_M."""
    path = [("A", M)] + [("B", j) for j in range(1, N + 1)] + [("C", j) for j in range(N, 0, -1)]
    return list(zip(path, path[1:] + path[:1]))


def q_ring_network(M: int, N: int, t_nB: float, t_nC: float, phi: float = 0.0,
                   t: float = 1.0, gauge: str = "single") -> Network:
    """Q-shaped network: chain ``A`` feeding a ring made of ``B`` and ``C``.

    The ring closes through the bond ``B_N - C_N`` and carries ``phi`` flux
    quanta along :func:`q_ring_loop`.
    """
    chains = [ChainSpec("A", M, t), ChainSpec("B", N, t), ChainSpec("C", N, t)]
    joints = [JointSpec(("A", M), ("B", 1), t_nB), JointSpec(("A", M), ("C", 1), t_nC),
              JointSpec(("B", N), ("C", N), t)]
    net = build_network(chains, joints)
    return thread_loop_flux(net, q_ring_loop(M, N), phi, gauge)


def interferometer_loop(M: int, N: int, N_C: int | None = None) -> list:
    """Directed loop A_M -> B_1 .. B_N -> D_1 -> C_N .. C_1 -> A_M."""
    N_C = N if N_C is None else N_C
    path = ([("A", M)] + [("B", j) for j in range(1, N + 1)] + [("D", 1)]
            + [("C", j) for j in range(N_C, 0, -1)])
    return list(zip(path, path[1:] + path[:1]))


def interferometer_network(M: int, N: int, L: int, t_nAB: float, t_nAC: float,
                           t_nBD: float, t_nCD: float, phi: float = 0.0,
                           t: float = 1.0, gauge: str = "single",
                           N_C: int | None = None) -> Network:
    """Two Y-beams back to back: ``A`` splits into ``B``/``C`` which recombine into ``D``.

    ``N_C`` defaults to ``N``; a different value gives the path-difference
    geometry ``N_C = N + Delta``.
    """
    N_C = N if N_C is None else N_C
    chains = [ChainSpec("A", M, t), ChainSpec("B", N, t), ChainSpec("C", N_C, t),
              ChainSpec("D", L, t)]
    joints = [JointSpec(("A", M), ("B", 1), t_nAB), JointSpec(("A", M), ("C", 1), t_nAC),
              JointSpec(("B", N), ("D", 1), t_nBD), JointSpec(("C", N_C), ("D", 1), t_nCD)]
    net = build_network(chains, joints)
    return thread_loop_flux(net, interferometer_loop(M, N, N_C), phi, gauge)
