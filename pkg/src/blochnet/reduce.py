"""Virtual-chain reductions of tight-binding networks.

A reduction scheme is a unitary change of the one-particle site basis.  Each
row of a :class:`SiteUnitary` is the bra of one virtual site, so
``U @ psi`` gives virtual amplitudes and ``U H U^dagger`` is the Hamiltonian
in the virtual basis.  At the matching conditions the conjugated matrix
splits into independent homogeneous chains, possibly joined by a few known
couplings and carrying known end potentials.  :func:`reduce_network`
measures how far a concrete network is from that prediction.

Phase-bearing rows use the accumulated link phases of the arms, read from
the network: ``phi_B(j)`` along ``A_M -> B_1 -> ... -> B_j`` and ``phi_C(j)``
along ``C_j -> ... -> C_1 -> A_M``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np

from .dynamics import evolve, eigendecompose
from .net import (Network, NetworkError, film_network, hamiltonian, interferometer_network,
                  q_ring_network, star_network, y_complex_network, y_network)

__all__ = [
    "SiteUnitary",
    "Decomposition",
    "Scheme",
    "Star",
    "Y",
    "QHalfFlux",
    "QQuarterFlux",
    "QFilm",
    "Film",
    "IferomHalf",
    "IferomInt",
    "IferomEqual",
    "YComplex",
    "SchemeMismatch",
    "build_unitary",
    "conjugate",
    "coupling_residual",
    "reduce_network",
    "matching_residual",
    "virtual_evolution_oracle",
    "scheme_from_dict",
]

ZERO = 1e-12


class SchemeMismatch(ValueError):
    """The network does not have the topology a scheme expects."""


@dataclass(frozen=True)
class SiteUnitary:
    matrix: np.ndarray
    labels: tuple

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or len(self.labels) != n:
            raise ValueError("unitary must be square with one label per row")
        if len(set(self.labels)) != n:
            raise ValueError("virtual labels must be unique")

    @property
    def dagger(self) -> np.ndarray:
        return self.matrix.conj().T

    def unitarity_error(self) -> float:
        n = self.matrix.shape[0]
        return float(np.abs(self.dagger @ self.matrix - np.eye(n)).max())

    def to_virtual(self, psi) -> np.ndarray:
        return self.matrix @ np.asarray(psi)

    def to_sites(self, psi_virtual) -> np.ndarray:
        return self.dagger @ np.asarray(psi_virtual)


@dataclass(frozen=True)
class Decomposition:
    """Outcome of reducing a network with a scheme.

    ``residual`` is the largest inter-block entry of ``htilde - target``
    (for fully decoupled schemes simply the largest inter-block entry); ``deviation`` is the largest entry of
    ``htilde - target`` anywhere, so it also catches inhomogeneous bonds
    and wrong end potentials.  ``cross_couplings`` lists every non-zero
    inter-block entry, predicted or not.
    """

    scheme: "Scheme"
    unitary: SiteUnitary
    partition: tuple
    htilde: np.ndarray
    target: np.ndarray
    residual: float
    deviation: float
    end_potentials: tuple
    bonds: tuple
    cross_couplings: tuple

    def block_of(self) -> np.ndarray:
        return _block_ids(self.partition)

    def report(self) -> str:
        lines = [f"scheme: {self.scheme!r}",
                 "partition: " + ", ".join(f"{lab}:{n}" for lab, n in self.partition),
                 f"residual: {self.residual:.3e}",
                 f"deviation: {self.deviation:.3e}",
                 "end potentials:"]
        if not self.end_potentials:
            lines.append("  (none)")
        for lab, val in self.end_potentials:
            lines.append(f"  {lab[0]}{lab[1]}  {val:+.15g}")
        lines.append("cross couplings:")
        if not self.cross_couplings:
            lines.append("  (none)")
        for a, b, val in self.cross_couplings:
            lines.append(f"  {a[0]}{a[1]} - {b[0]}{b[1]}  {_fmt_c(val)}")
        lines.append("virtual bonds:")
        for a, b, val in self.bonds:
            lines.append(f"  {a[0]}{a[1]} - {b[0]}{b[1]}  {_fmt_c(val)}")
        return "\n".join(lines) + "\n"

    def write_htilde_csv(self, path) -> None:
        labels = self.unitary.labels
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "row_label", "col_label", "re", "im"])
            rows, cols = np.nonzero(np.abs(self.htilde) > 1e-15)
            for r, c in zip(rows, cols):
                x = self.htilde[r, c]
                w.writerow([r, c, f"{labels[r][0]}{labels[r][1]}", f"{labels[c][0]}{labels[c][1]}",
                            repr(float(x.real)), repr(float(x.imag))])


def _fmt_c(z: complex) -> str:
    return f"{z.real:+.12g}{z.imag:+.12g}j"


# -- helpers shared by the schemes -----------------------------------------

def _e(net: Network, label: str, j: int) -> np.ndarray:
    v = np.zeros(net.n_sites, dtype=complex)
    v[net.index(label, j)] = 1.0
    return v


def _path_phase(net: Network, path: Sequence) -> float:
    idx = [net.index(*s) for s in path]
    return float(sum(net.phase(u, v) for u, v in zip(idx, idx[1:])))


def _arm_phases(net: Network, M: int, N: int, node: str = "A", B: str = "B", C: str = "C"):
    """``phi_B(j)``, ``phi_C(j)`` for ``j = 1..N`` (index 0 unused)."""
    phi_b = np.zeros(N + 1)
    phi_c = np.zeros(N + 1)
    for j in range(1, N + 1):
        phi_b[j] = _path_phase(net, [(node, M)] + [(B, i) for i in range(1, j + 1)])
        phi_c[j] = _path_phase(net, [(C, i) for i in range(j, 0, -1)] + [(node, M)])
    return phi_b, phi_c


def _homogeneous(blocks: Sequence, t: float) -> np.ndarray:
    n = sum(length for _, length in blocks)
    H = np.zeros((n, n), dtype=complex)
    pos = 0
    for _, length in blocks:
        for j in range(length - 1):
            H[pos + j, pos + j + 1] = H[pos + j + 1, pos + j] = -t
        pos += length
    return H


def _block_ids(partition: Sequence) -> np.ndarray:
    return np.concatenate([np.full(length, i) for i, (_, length) in enumerate(partition)])


def _require(net: Network, lengths: dict, joints: Sequence = ()) -> None:
    for label, n in lengths.items():
        chain = net.chain_map.get(label)
        if chain is None:
            raise SchemeMismatch(f"network has no chain {label!r}")
        if chain.n_sites != n:
            raise SchemeMismatch(f"chain {label} has {chain.n_sites} sites, scheme expects {n}")
    expected = sum(lengths.values())
    if net.n_sites != expected:
        raise SchemeMismatch(f"network has {net.n_sites} sites, scheme expects {expected}")
    for a, b in joints:
        if not net.has_bond(net.index(*a), net.index(*b)):
            raise SchemeMismatch(f"scheme expects a bond {a}-{b}")


def _hop(net: Network, label: str = "A") -> float:
    return abs(net.chain_map[label].hopping)


def _joint(net: Network, a, b) -> complex:
    u, v = net.index(*a), net.index(*b)
    return net.bond_amplitude(u, v) if net.has_bond(u, v) else 0.0


# -- schemes ----------------------------------------------------------------

class Scheme:
    """Base class; subclasses define the rows, partition and predicted form."""

    kind: ClassVar[str] = ""

    def check(self, net: Network) -> None:
        raise NotImplementedError

    def rows(self, net: Network) -> list:
        """``[(virtual label, ket), ...]`` in virtual-basis order."""
        raise NotImplementedError

    def partition(self) -> tuple:
        raise NotImplementedError

    def target(self, t: float = 1.0) -> tuple:
        """Predicted ``U H U^dagger`` and the set of predicted inter-block entries."""
        return _homogeneous(self.partition(), t), set()

    def network(self, t: float = 1.0, gauge: str = "single") -> Network:
        """A network on which the scheme's matching condition holds exactly."""
        raise NotImplementedError

    def matching(self, net: Network) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        d.update({k: v for k, v in self.__dict__.items()})
        return d


def _y_matching(net: Network, node, arms) -> float:
    t = _hop(net, node[0])
    amps = [_joint(net, node, arm) for arm in arms]
    return abs(np.sqrt(sum(abs(a) ** 2 for a in amps)) - t)


@dataclass(frozen=True)
class Star(Scheme):
    m: int
    M: int
    N: int
    kind: ClassVar[str] = "star"

    def check(self, net):
        lengths = {"A": self.M, **{f"B{p}": self.N for p in range(1, self.m + 1)}}
        _require(net, lengths, [(("A", self.M), (f"B{p}", 1)) for p in range(1, self.m + 1)])

    def rows(self, net):
        m, M, N = self.m, self.M, self.N
        out = [(("a", j), _e(net, "A", j)) for j in range(1, M + 1)]
        for l in range(1, N + 1):
            out.append((("a", M + l), sum(_e(net, f"B{p}", l) for p in range(1, m + 1)) / np.sqrt(m)))
        for q in range(1, m):
            for j in range(1, N + 1):
                ket = sum(np.exp(-2j * np.pi * p * q / m) * _e(net, f"B{p}", j)
                          for p in range(1, m + 1)) / np.sqrt(m)
                out.append(((f"b{q}", j), ket))
        return out

    def partition(self):
        return (("a", self.M + self.N),) + tuple((f"b{q}", self.N) for q in range(1, self.m))

    def network(self, t=1.0, gauge="single"):
        return star_network(self.m, self.M, self.N, t / np.sqrt(self.m), t)

    def matching(self, net):
        t = _hop(net)
        amps = [_joint(net, ("A", self.M), (f"B{p}", 1)) for p in range(1, self.m + 1)]
        return float(max(abs(a - t / np.sqrt(self.m)) for a in amps))


@dataclass(frozen=True)
class Y(Scheme):
    theta: float
    M: int
    N: int
    kind: ClassVar[str] = "Y"

    def check(self, net):
        _require(net, {"A": self.M, "B": self.N, "C": self.N})

    def rows(self, net):
        c, s = np.cos(self.theta), np.sin(self.theta)
        M, N = self.M, self.N
        out = [(("a", j), _e(net, "A", j)) for j in range(1, M + 1)]
        out += [(("a", M + l), c * _e(net, "B", l) + s * _e(net, "C", l)) for l in range(1, N + 1)]
        out += [(("b", l), s * _e(net, "B", l) - c * _e(net, "C", l)) for l in range(1, N + 1)]
        return out

    def partition(self):
        return (("a", self.M + self.N), ("b", self.N))

    def network(self, t=1.0, gauge="single"):
        return y_network(self.M, self.N, t * np.cos(self.theta), t * np.sin(self.theta), t)

    def matching(self, net):
        return _y_matching(net, ("A", self.M), [("B", 1), ("C", 1)])


class _QBase(Scheme):
    """Shared rows for the Q-shaped ring (arms B, C closed by B_N - C_N)."""

    def check(self, net):
        _require(net, {"A": self.M, "B": self.N, "C": self.N},
                 [(("A", self.M), ("B", 1)), (("A", self.M), ("C", 1)), (("B", self.N), ("C", self.N))])

    def _arm_rows(self, net, theta):
        c, s = np.cos(theta), np.sin(theta)
        phi_b, phi_c = _arm_phases(net, self.M, self.N)
        a_rows, b_rows = [], []
        for l in range(1, self.N + 1):
            bp = np.exp(-1j * phi_b[l]) * _e(net, "B", l)
            cp = np.exp(1j * phi_c[l]) * _e(net, "C", l)
            a_rows.append(c * bp + s * cp)
            b_rows.append(s * bp - c * cp)
        head = [(("a", j), _e(net, "A", j)) for j in range(1, self.M + 1)]
        return head, a_rows, b_rows

    def matching(self, net):
        return _y_matching(net, ("A", self.M), [("B", 1), ("C", 1)])


@dataclass(frozen=True)
class QHalfFlux(_QBase):
    """Q-ring at ``phi = n/2`` with joints ``t/sqrt 2``: chains ``M+N`` and ``N``."""

    n: int
    M: int
    N: int
    kind: ClassVar[str] = "QHalfFlux"

    def rows(self, net):
        head, a_rows, b_rows = self._arm_rows(net, np.pi / 4)
        return (head + [(("a", self.M + l), r) for l, r in enumerate(a_rows, 1)]
                + [(("b", l), r) for l, r in enumerate(b_rows, 1)])

    def partition(self):
        return (("a", self.M + self.N), ("b", self.N))

    def target(self, t=1.0):
        H = _homogeneous(self.partition(), t)
        sign = (-1) ** self.n
        a_end, b_end = self.M + self.N - 1, self.M + 2 * self.N - 1
        H[a_end, a_end] = -t * sign
        H[b_end, b_end] = t * sign
        return H, set()

    def network(self, t=1.0, gauge="single"):
        return q_ring_network(self.M, self.N, t / np.sqrt(2), t / np.sqrt(2), self.n / 2, t, gauge)


@dataclass(frozen=True)
class QQuarterFlux(_QBase):
    """Q-ring at ``phi = n/2 + 1/4`` with ``t_nB = t cos(theta)``, ``t_nC = t sin(theta)``.

    The whole ring unfolds into one chain of ``M + 2N`` sites; the
    antisymmetric arm combination runs backwards from the far end.
    """

    n: int
    theta: float
    M: int
    N: int
    kind: ClassVar[str] = "QQuarterFlux"

    def rows(self, net):
        head, a_rows, b_rows = self._arm_rows(net, self.theta)
        M, N = self.M, self.N
        factor = 1j * (-1) ** self.n
        out = head + [(("a", M + l), r) for l, r in enumerate(a_rows, 1)]
        # b_l sits at chain position M + 2N + 1 - l
        out += [(("a", M + 2 * N + 1 - l), factor * b_rows[l - 1]) for l in range(N, 0, -1)]
        return out

    def partition(self):
        return (("a", self.M + 2 * self.N),)

    def network(self, t=1.0, gauge="single"):
        return q_ring_network(self.M, self.N, t * np.cos(self.theta), t * np.sin(self.theta),
                              self.n / 2 + 0.25, t, gauge)


@dataclass(frozen=True)
class QFilm(_QBase):
    """Q-ring at arbitrary loop phase ``Phi`` with joints ``t/sqrt 2``.

    Chains ``a`` (M+N) and ``b`` (N) are joined at their ends by
    ``t sin(Phi)`` and carry end potentials ``-/+ t cos(Phi)``.
    """

    Phi: float
    M: int
    N: int
    kind: ClassVar[str] = "QFilm"

    def rows(self, net):
        head, a_rows, b_rows = self._arm_rows(net, np.pi / 4)
        return (head + [(("a", self.M + l), r) for l, r in enumerate(a_rows, 1)]
                + [(("b", l), 1j * r) for l, r in enumerate(b_rows, 1)])

    def partition(self):
        return (("a", self.M + self.N), ("b", self.N))

    def target(self, t=1.0):
        H = _homogeneous(self.partition(), t)
        a_end, b_end = self.M + self.N - 1, self.M + 2 * self.N - 1
        H[a_end, a_end] = -t * np.cos(self.Phi)
        H[b_end, b_end] = t * np.cos(self.Phi)
        H[a_end, b_end] = H[b_end, a_end] = -t * np.sin(self.Phi)
        return H, {(a_end, b_end), (b_end, a_end)}

    def network(self, t=1.0, gauge="single"):
        return q_ring_network(self.M, self.N, t / np.sqrt(2), t / np.sqrt(2),
                              self.Phi / (2 * np.pi), t, gauge)


@dataclass(frozen=True)
class Film(Scheme):
    """Transmission-reflection film: one homogeneous chain of ``2N`` sites for any ``Phi``."""

    Phi: float
    N: int
    kind: ClassVar[str] = "Film"

    def check(self, net):
        _require(net, {"A": self.N, "B": self.N})

    def rows(self, net):
        fp = np.cos(self.Phi / 2) + np.sin(self.Phi / 2)
        fm = np.cos(self.Phi / 2) - np.sin(self.Phi / 2)
        r = np.sqrt(0.5)
        N = self.N
        out = [(("a", j), r * (fp * _e(net, "A", j) - fm * _e(net, "B", j))) for j in range(1, N + 1)]
        out += [(("a", 2 * N + 1 - j), r * (fm * _e(net, "A", j) + fp * _e(net, "B", j)))
                for j in range(N, 0, -1)]
        return out

    def partition(self):
        return (("a", 2 * self.N),)

    def network(self, t=1.0, gauge="single"):
        return film_network(self.N, self.Phi, t)

    def matching(self, net):
        t = _hop(net)
        uA, uB = net.index("A", self.N), net.index("B", self.N)
        mu = dict(net.potentials).get(uA, 0.0)
        tt = abs(net.bond_amplitude(uA, uB)) if net.has_bond(uA, uB) else 0.0
        return abs(np.hypot(mu, tt) - t)


class _IferomBase(Scheme):
    """Interferometer: A -> ring {B, C} -> D, loop through D_1."""

    def check(self, net):
        M, N, L = self.M, self.N, self.L
        _require(net, {"A": M, "B": N, "C": N, "D": L},
                 [(("A", M), ("B", 1)), (("A", M), ("C", 1)), (("B", N), ("D", 1)), (("C", N), ("D", 1))])

    def _parts(self, net, theta):
        c, s = np.cos(theta), np.sin(theta)
        M, N, L = self.M, self.N, self.L
        phi_b, phi_c = _arm_phases(net, M, N)
        phi_c_end = _path_phase(net, [("D", 1)] + [("C", i) for i in range(N, 0, -1)] + [("A", M)])
        head = [_e(net, "A", j) for j in range(1, M + 1)]
        a_rows, b_rows = [], []
        for l in range(1, N + 1):
            bp = np.exp(-1j * phi_b[l]) * _e(net, "B", l)
            cp = np.exp(1j * phi_c[l]) * _e(net, "C", l)
            a_rows.append(c * bp + s * cp)
            b_rows.append(s * bp - c * cp)
        d_rows = [np.exp(1j * phi_c_end) * _e(net, "D", j) for j in range(1, L + 1)]
        return head, a_rows, b_rows, d_rows

    def matching(self, net):
        M, N = self.M, self.N
        return max(_y_matching(net, ("A", M), [("B", 1), ("C", 1)]),
                   _y_matching(net, ("D", 1), [("B", N), ("C", N)]))


@dataclass(frozen=True)
class IferomHalf(_IferomBase):
    """Half-integer flux, ``t_nAB = t_nCD = t cos``, ``t_nAC = t_nBD = t sin``.

    Chains ``a`` (M+N) and ``b`` (N+L), the latter continuing into D.
    """

    theta: float
    M: int
    N: int
    L: int
    kind: ClassVar[str] = "IferomHalf"

    def rows(self, net):
        head, a_rows, b_rows, d_rows = self._parts(net, self.theta)
        M, N = self.M, self.N
        return ([(("a", j), r) for j, r in enumerate(head, 1)]
                + [(("a", M + l), r) for l, r in enumerate(a_rows, 1)]
                + [(("b", l), r) for l, r in enumerate(b_rows, 1)]
                + [(("b", N + s), r) for s, r in enumerate(d_rows, 1)])

    def partition(self):
        return (("a", self.M + self.N), ("b", self.N + self.L))

    def target(self, t=1.0):
        H = _homogeneous(self.partition(), t)
        # the row definitions leave the b_N - D_1 bond with a + sign
        k = self.M + 2 * self.N - 1
        H[k, k + 1] = H[k + 1, k] = t
        return H, set()

    def network(self, t=1.0, gauge="single"):
        c, s = t * np.cos(self.theta), t * np.sin(self.theta)
        return interferometer_network(self.M, self.N, self.L, c, s, s, c, 0.5, t, gauge)


@dataclass(frozen=True)
class IferomInt(_IferomBase):
    """Integer flux, ``t_nAB = t_nBD = t cos``, ``t_nAC = t_nCD = t sin``.

    Chains ``a`` (M+N+L, running on into D) and ``b`` (N).
    """

    theta: float
    M: int
    N: int
    L: int
    kind: ClassVar[str] = "IferomInt"

    def rows(self, net):
        head, a_rows, b_rows, d_rows = self._parts(net, self.theta)
        M, N = self.M, self.N
        return ([(("a", j), r) for j, r in enumerate(head, 1)]
                + [(("a", M + l), r) for l, r in enumerate(a_rows, 1)]
                + [(("a", M + N + s), r) for s, r in enumerate(d_rows, 1)]
                + [(("b", l), r) for l, r in enumerate(b_rows, 1)])

    def partition(self):
        return (("a", self.M + self.N + self.L), ("b", self.N))

    def network(self, t=1.0, gauge="single"):
        c, s = t * np.cos(self.theta), t * np.sin(self.theta)
        return interferometer_network(self.M, self.N, self.L, c, s, c, s, 0.0, t, gauge)


@dataclass(frozen=True)
class IferomEqual(_IferomBase):
    """All four joints ``t/sqrt 2``, arbitrary loop phase ``Phi``.

    Three chains ``a`` (M+N), ``b`` (N), ``c`` (L); ``c_1`` couples to the
    ends of ``a`` and ``b`` with flux-dependent complex amplitudes.
    """

    Phi: float
    M: int
    N: int
    L: int
    kind: ClassVar[str] = "IferomEqual"

    def rows(self, net):
        head, a_rows, b_rows, d_rows = self._parts(net, np.pi / 4)
        M = self.M
        return ([(("a", j), r) for j, r in enumerate(head, 1)]
                + [(("a", M + l), r) for l, r in enumerate(a_rows, 1)]
                + [(("b", l), r) for l, r in enumerate(b_rows, 1)]
                + [(("c", s), r) for s, r in enumerate(d_rows, 1)])

    def partition(self):
        return (("a", self.M + self.N), ("b", self.N), ("c", self.L))

    def target(self, t=1.0):
        H = _homogeneous(self.partition(), t)
        a_end = self.M + self.N - 1
        b_end = self.M + 2 * self.N - 1
        c1 = b_end + 1
        h = 0.5 * self.Phi
        H[a_end, c1] = -t * np.exp(1j * h) * np.cos(h)
        H[b_end, c1] = -1j * t * np.exp(1j * h) * np.sin(h)
        H[c1, a_end] = np.conj(H[a_end, c1])
        H[c1, b_end] = np.conj(H[b_end, c1])
        return H, {(a_end, c1), (c1, a_end), (b_end, c1), (c1, b_end)}

    def network(self, t=1.0, gauge="single"):
        r = t / np.sqrt(2)
        return interferometer_network(self.M, self.N, self.L, r, r, r, r,
                                      self.Phi / (2 * np.pi), t, gauge)


@dataclass(frozen=True)
class YComplex(Scheme):
    """Y-beam with complex joints set by ``Phi``: chains ``L+N`` and ``N``."""

    Phi: float
    L: int
    N: int
    kind: ClassVar[str] = "YComplex"

    def check(self, net):
        _require(net, {"A": self.L, "B": self.N, "C": self.N})

    def rows(self, net):
        h = 0.5 * self.Phi
        c, s = np.cos(h), np.sin(h)
        L, N = self.L, self.N
        out = [(("a", l), _e(net, "A", l)) for l in range(1, L + 1)]
        out += [(("a", L + j), np.exp(1j * h) * (c * _e(net, "B", j) - 1j * s * _e(net, "C", j)))
                for j in range(1, N + 1)]
        # orthogonal complement of the a-combination
        out += [(("b", j), np.exp(-1j * h) * (-1j * s * _e(net, "B", j) + c * _e(net, "C", j)))
                for j in range(1, N + 1)]
        return out

    def partition(self):
        return (("a", self.L + self.N), ("b", self.N))

    def network(self, t=1.0, gauge="single"):
        return y_complex_network(self.L, self.N, self.Phi, t)

    def matching(self, net):
        return _y_matching(net, ("A", self.L), [("B", 1), ("C", 1)])


SCHEMES = {cls.kind: cls for cls in (Star, Y, QHalfFlux, QQuarterFlux, QFilm, Film,
                                     IferomHalf, IferomInt, IferomEqual, YComplex)}


def scheme_from_dict(d: dict) -> Scheme:
    d = dict(d)
    kind = d.pop("kind", None)
    cls = SCHEMES.get(kind)
    if cls is None:
        raise ValueError(f"unknown scheme kind {kind!r}; expected one of {sorted(SCHEMES)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ValueError(f"bad parameters for scheme {kind}: {exc}") from None


# -- operations ---------------------------------------------------------------

def build_unitary(scheme: Scheme, net: Network) -> SiteUnitary:
    scheme.check(net)
    rows = scheme.rows(net)
    labels = tuple(lab for lab, _ in rows)
    kets = np.array([ket for _, ket in rows])
    if kets.shape != (net.n_sites, net.n_sites):
        raise SchemeMismatch("scheme rows do not span the network")
    return SiteUnitary(kets.conj(), labels)


def conjugate(H: np.ndarray, U: SiteUnitary) -> np.ndarray:
    """``U H U^dagger``."""
    Um = U.matrix if isinstance(U, SiteUnitary) else np.asarray(U)
    if Um.shape[1] != H.shape[0]:
        raise ValueError("dimension mismatch between unitary and Hamiltonian")
    return Um @ H @ Um.conj().T


def coupling_residual(Htilde: np.ndarray, partition: Sequence) -> float:
    """Largest absolute entry of ``Htilde`` connecting different blocks.

    ``partition`` is a sequence of ``(label, length)`` blocks in row order.
    """
    lengths = [length for _, length in partition]
    if any(n < 1 for n in lengths) or sum(lengths) != Htilde.shape[0]:
        raise ValueError("partition does not cover the matrix")
    ids = _block_ids(partition)
    mask = ids[:, None] != ids[None, :]
    if not mask.any():
        return 0.0
    return float(np.abs(Htilde[mask]).max())


def reduce_network(net: Network, scheme: Scheme) -> Decomposition:
    U = build_unitary(scheme, net)
    Ht = conjugate(hamiltonian(net), U)
    Ht = 0.5 * (Ht + Ht.conj().T)
    t = _hop(net, net.chains[0].label)
    target, predicted = scheme.target(t)
    part = scheme.partition()

    # inter-block entries the scheme does not predict, or predicts differently
    residual = coupling_residual(Ht - target, part)
    deviation = float(np.abs(Ht - target).max())

    labels = U.labels
    diag = np.real(np.diag(Ht))
    pots = tuple((labels[i], float(diag[i])) for i in np.nonzero(np.abs(diag) > ZERO)[0])
    ids = _block_ids(part)
    bonds, cross = [], []
    rows, cols = np.nonzero(np.triu(np.abs(Ht) > ZERO, k=1))
    for i, j in zip(rows, cols):
        entry = (labels[i], labels[j], complex(Ht[i, j]))
        (cross if ids[i] != ids[j] else bonds).append(entry)
    return Decomposition(scheme, U, part, Ht, target, residual, deviation,
                         pots, tuple(bonds), tuple(cross))


def matching_residual(net: Network, scheme: Scheme) -> float:
    """Distance from the scheme's joint-coupling matching condition (0 when met)."""
    scheme.check(net)
    return float(scheme.matching(net))


def _components(partition, predicted) -> list:
    """Groups of block indices linked through predicted couplings."""
    ids = _block_ids(partition)
    parent = list(range(len(partition)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in predicted:
        parent[find(ids[i])] = find(ids[j])
    groups = {}
    for b in range(len(partition)):
        groups.setdefault(find(b), []).append(b)
    return [np.nonzero(np.isin(ids, g))[0] for g in groups.values()]


def virtual_evolution_oracle(net: Network, scheme: Scheme, psi0, tau: float,
                             tol: float = 1e-12):
    """Evolve ``psi0`` directly and through the virtual blocks; compare.

    Returns ``(full, via_virtual, deviation)``.  The virtual route evolves
    each decoupled component of ``U H U^dagger`` on its own and maps back.
    """
    dec = reduce_network(net, scheme)
    if dec.residual > tol:
        raise SchemeMismatch(f"scheme does not decouple this network (residual {dec.residual:.2e})")
    psi0 = np.asarray(psi0, dtype=complex)
    H = hamiltonian(net)
    full = evolve(eigendecompose(H), psi0, tau)

    _, predicted = scheme.target()
    vt = dec.unitary.to_virtual(psi0)
    out = np.zeros_like(vt)
    for idx in _components(dec.partition, predicted):
        block = dec.htilde[np.ix_(idx, idx)]
        w, V = np.linalg.eigh(block)
        out[idx] = V @ (np.exp(-1j * w * tau) * (V.conj().T @ vt[idx]))
    via = dec.unitary.to_sites(out)
    return full, via, float(np.linalg.norm(full - via))
