"""Gaussian wave packets and exact time evolution.

States are plain complex ``numpy`` vectors indexed by global site.  Time
evolution goes through a full eigendecomposition, so there is no time-step
error and one decomposition serves any number of instants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .net import Network, NetworkError, hamiltonian

__all__ = [
    "Spectrum",
    "PacketTrack",
    "PacketOverflowError",
    "gaussian_packet",
    "half_width",
    "eigendecompose",
    "evolve",
    "track_packet",
    "site_probability",
    "ballistic_time",
    "write_state_csv",
    "read_state_csv",
]

TAIL_TOL = 1e-6


class PacketOverflowError(ValueError):
    """The requested packet does not fit on its chain."""


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def evolve(self, psi, tau: float) -> np.ndarray:
        return evolve(self, psi, tau)

    def evolve_many(self, psi, taus) -> np.ndarray:
        """States at every time in ``taus``; shape ``(len(taus), n)``."""
        psi = _check_state(self, psi)
        c = self.eigenvectors.conj().T @ psi
        phases = np.exp(-1j * np.outer(np.asarray(taus, dtype=float), self.eigenvalues))
        return (phases * c) @ self.eigenvectors.T

    def amplitudes(self, psi, sites, taus) -> np.ndarray:
        """Amplitudes on ``sites`` only, shape ``(len(taus), len(sites))``.

        Cheaper than :meth:`evolve_many` when few sites are watched.
        """
        psi = _check_state(self, psi)
        c = self.eigenvectors.conj().T @ psi
        rows = self.eigenvectors[np.asarray(sites, dtype=int)]
        phases = np.exp(-1j * np.outer(np.asarray(taus, dtype=float), self.eigenvalues))
        return (phases * c) @ rows.T

    def matrix(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


@dataclass(frozen=True)
class PacketTrack:
    times: np.ndarray
    center: np.ndarray
    weight: np.ndarray

    def velocity(self) -> float:
        """Least-squares slope of the centre against time."""
        slope, _ = np.polyfit(self.times, self.center, 1)
        return float(slope)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "center", "weight"])
            for row in zip(self.times, self.center, self.weight):
                w.writerow([repr(float(x)) for x in row])


def half_width(alpha: float) -> float:
    """Full width at half maximum of the packet probability, ``2 sqrt(ln 2) / alpha``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return 2.0 * np.sqrt(np.log(2.0)) / alpha


def gaussian_packet(net: Network, chain: str, N0: float, alpha: float,
                    k: float = np.pi / 2) -> np.ndarray:
    """Normalized Gaussian packet ``exp(-alpha^2 (j - N0)^2 / 2) exp(i k j)`` on ``chain``.

    ``j`` is the 1-based local index.  Raises :class:`PacketOverflowError` if
    more than ``1e-6`` of the infinite-lattice packet's weight would fall
    outside the chain.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    try:
        sites = net.chain_sites(chain)
    except NetworkError as exc:
        raise ValueError(str(exc)) from None
    n = len(sites)
    if not 1 <= N0 <= n:
        raise PacketOverflowError(f"N0={N0} outside chain {chain} (1..{n})")

    # weight outside [1, n] of the same packet on an unbounded lattice
    reach = int(np.ceil(12.0 / alpha)) + 2
    j_all = np.arange(1 - reach, n + reach + 1)
    w_all = np.exp(-(alpha * (j_all - N0)) ** 2)
    inside = (j_all >= 1) & (j_all <= n)
    total = w_all.sum()
    if total == 0 or w_all[~inside].sum() / total > TAIL_TOL:
        raise PacketOverflowError(
            f"packet (N0={N0}, alpha={alpha}) spills out of chain {chain} of {n} sites"
        )

    j = np.arange(1, n + 1)
    env = np.exp(-0.5 * (alpha * (j - N0)) ** 2)
    omega = np.sum(env ** 2)
    psi = np.zeros(net.n_sites, dtype=complex)
    psi[sites] = env * np.exp(1j * k * j) / np.sqrt(omega)
    return psi


def eigendecompose(H: np.ndarray, atol: float = 1e-12) -> Spectrum:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    scale = max(np.abs(H).max(), 1.0)
    if np.abs(H - H.conj().T).max() > atol * scale:
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(H)
    return Spectrum(w, V)


def _check_state(spec: Spectrum, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (spec.dim,):
        raise ValueError(f"state of shape {psi.shape} does not match dimension {spec.dim}")
    return psi


def evolve(spec: Spectrum, psi0, tau: float) -> np.ndarray:
    """``exp(-i H tau) psi0``; negative ``tau`` runs backwards."""
    psi0 = _check_state(spec, psi0)
    if not np.isfinite(tau):
        raise ValueError("tau must be finite")
    V = spec.eigenvectors
    return V @ (np.exp(-1j * spec.eigenvalues * tau) * (V.conj().T @ psi0))


def site_probability(psi, sites: Iterable[int]) -> float:
    psi = np.asarray(psi)
    idx = np.fromiter(sites, dtype=int)
    if idx.size == 0:
        return 0.0
    return float(np.sum(np.abs(psi[idx]) ** 2))


def track_packet(spec: Spectrum, psi0, times: Sequence[float], net: Network,
                 chain: str) -> PacketTrack:
    """Probability-weighted mean local index and total weight on ``chain``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    sites = net.chain_sites(chain)
    amps = spec.amplitudes(psi0, sites, times)
    prob = np.abs(amps) ** 2
    weight = prob.sum(axis=1)
    local = np.arange(1, len(sites) + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        center = np.where(weight > 0, prob @ local / weight, np.nan)
    return PacketTrack(times, center, np.clip(weight, 0.0, 1.0))


def ballistic_time(distance: float, k: float = np.pi / 2, t: float = 1.0) -> float:
    """Arrival time of a packet over ``distance`` sites at group velocity ``2 t sin k``."""
    v = 2.0 * abs(t * np.sin(k))
    if v == 0:
        raise ValueError("packet has zero group velocity")
    return float(distance) / v


def write_state_csv(psi, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "re", "im"])
        for u, a in enumerate(np.asarray(psi, dtype=complex)):
            w.writerow([u, repr(float(a.real)), repr(float(a.imag))])


def read_state_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    psi = np.zeros(len(rows), dtype=complex)
    for r in rows:
        psi[int(r["site"])] = complex(float(r["re"]), float(r["im"]))
    return psi


def spectrum_of(net: Network) -> Spectrum:
    return eigendecompose(hamiltonian(net))
