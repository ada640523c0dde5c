"""Physical observables: reflection, concurrence, interference and AB ratios.

Time-maximised quantities are sampled on a uniform grid of step
:data:`TIME_STEP` (in units of ``1/t``).  Scans over joint couplings build
one network per grid point and may run on a thread pool; results are always
returned in grid order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import ballistic_time, eigendecompose, evolve, gaussian_packet, spectrum_of
from .net import Network, NetworkError, film_network, hamiltonian

__all__ = [
    "TIME_STEP",
    "ScanGrid2D",
    "FluxResponse",
    "WindowTooShort",
    "time_grid",
    "reflection_factor",
    "reflection_scan",
    "concurrence",
    "max_concurrence_scan",
    "interference_intensity",
    "film_coefficients",
    "relative_probability_Q",
    "flux_sweep_Q",
]

TIME_STEP = 0.25


class WindowTooShort(ValueError):
    """The sampled time window ends before a packet can arrive."""


def time_grid(t_end: float, t_start: float = 0.0, step: float = TIME_STEP) -> np.ndarray:
    """Uniform samples ``t_start, t_start + step, ...`` up to and including ``t_end``."""
    if step <= 0 or t_end < t_start:
        raise ValueError("need step > 0 and t_end >= t_start")
    n = int(np.floor((t_end - t_start) / step + 1e-9))
    return t_start + step * np.arange(n + 1)


@dataclass(frozen=True)
class ScanGrid2D:
    """Observable ``z[iy, ix]`` on the grid ``x`` (columns) by ``y`` (rows)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    name: str = "z"

    def __post_init__(self):
        if self.z.shape != (len(self.y), len(self.x)):
            raise ValueError("z must have shape (len(y), len(x))")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("scan contains non-finite values")

    def argmax(self) -> tuple:
        """``(x, y)`` coordinates of the largest value."""
        iy, ix = np.unravel_index(np.argmax(self.z), self.z.shape)
        return float(self.x[ix]), float(self.y[iy])

    def asymmetry(self) -> float:
        """Largest ``|z - z^T|``; only meaningful when ``x == y``."""
        if len(self.x) != len(self.y) or not np.allclose(self.x, self.y):
            raise ValueError("asymmetry needs identical x and y grids")
        return float(np.abs(self.z - self.z.T).max())

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.z).copy()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", self.name])
            for iy, yv in enumerate(self.y):
                for ix, xv in enumerate(self.x):
                    w.writerow([repr(float(xv)), repr(float(yv)), repr(float(self.z[iy, ix]))])

    def to_gnuplot_matrix(self, path) -> None:
        """Nonuniform-matrix layout for gnuplot's ``binary``-free ``matrix nonuniform``."""
        with open(path, "w") as fh:
            fh.write(" ".join([str(len(self.x))] + [repr(float(v)) for v in self.x]) + "\n")
            for iy, yv in enumerate(self.y):
                fh.write(" ".join([repr(float(yv))] + [repr(float(v)) for v in self.z[iy]]) + "\n")


@dataclass(frozen=True)
class FluxResponse:
    phi: np.ndarray
    Q: np.ndarray
    alpha: float
    L: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.phi) != len(self.Q):
            raise ValueError("phi and Q must have equal length")
        if np.any(np.diff(self.phi) <= 0):
            raise ValueError("phi must be strictly increasing")
        if np.any(self.Q < 0) or np.any(self.Q > 1 + 1e-6):
            raise ValueError("Q outside [0, 1]")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "Q"])
            for p, q in zip(self.phi, self.Q):
                w.writerow([repr(float(p)), repr(float(q))])


# -- single observables ---------------------------------------------------

def reflection_factor(net: Network, psi0, tau: float, input_chain: str = "A",
                      spectrum=None) -> float:
    """Probability left on sites ``1 .. M-1`` of the input chain at ``tau``.

    The node site ``M`` itself is excluded.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    spec = spectrum if spectrum is not None else spectrum_of(net)
    sites = net.chain_sites(input_chain)[:-1]
    amp = spec.amplitudes(psi0, sites, [tau])[0]
    return float(np.sum(np.abs(amp) ** 2))


def _pair(net: Network, chainB: str, chainC: str):
    b, c = net.chain_sites(chainB), net.chain_sites(chainC)
    if len(b) != len(c):
        raise ValueError(f"chains {chainB} and {chainC} differ in length")
    return b, c


def concurrence(psi, net: Network, chainB: str = "B", chainC: str = "C") -> float:
    """Mode concurrence ``sum_j |2 Re(conj(psi_B,j) psi_C,j)|`` of a one-particle state."""
    b, c = _pair(net, chainB, chainC)
    psi = np.asarray(psi)
    return float(np.sum(np.abs(2.0 * np.real(np.conj(psi[b]) * psi[c]))))


def max_concurrence(net: Network, psi0, times, chainB: str = "B", chainC: str = "C") -> float:
    b, c = _pair(net, chainB, chainC)
    spec = spectrum_of(net)
    amp = spec.amplitudes(psi0, np.concatenate([b, c]), times)
    ab, ac = amp[:, :len(b)], amp[:, len(b):]
    return float(np.abs(2.0 * np.real(np.conj(ab) * ac)).sum(axis=1).max())


def interference_intensity(net: Network, psi0, r0, tau0: float, output_chain: str = "D",
                           spectrum=None) -> float:
    """``|<r0| exp(-i H tau0) |psi0>|^2`` for a site ``r0 = (label, local)`` on the output chain."""
    label, local = r0
    if label != output_chain:
        raise ValueError(f"detector {r0} is not on output chain {output_chain}")
    try:
        u = net.index(label, local)
    except NetworkError as exc:
        raise ValueError(str(exc)) from None
    spec = spectrum if spectrum is not None else spectrum_of(net)
    return float(np.abs(spec.amplitudes(psi0, [u], [tau0])[0, 0]) ** 2)


def film_coefficients(N: int, Phi: float, alpha: float, N0: int | None = None,
                      t: float = 1.0, k: float = np.pi / 2) -> tuple:
    """Transmission and reflection of a packet through the two-chain film.

    The packet starts at ``N0`` (default ``N/2``) on chain A and is observed
    once its centre has had time to reach the junction and travel back the
    same distance.  ``T`` is the weight on chain B, ``R`` the weight on A.
    """
    N0 = N // 2 if N0 is None else N0
    net = film_network(N, Phi, t)
    psi0 = gaussian_packet(net, "A", N0, alpha, k)
    tau = ballistic_time(2 * (N - N0), k, t)
    psi = evolve(spectrum_of(net), psi0, tau)
    prob = np.abs(psi) ** 2
    return float(prob[net.chain_sites("B")].sum()), float(prob[net.chain_sites("A")].sum())


def relative_probability_Q(net: Network, source, detector, alpha: float, times=None,
                           k: float = np.pi / 2, spectrum=None, psi0=None) -> float:
    """Peak detector probability over peak source probability.

    A packet of width ``alpha`` is centred on ``source = (chain, local)``.
    ``times`` defaults to ``[0, 1.5 x ballistic time]`` sampled at
    :data:`TIME_STEP`; a window shorter than that raises
    :class:`WindowTooShort`.
    """
    src, det = net.resolve(source), net.resolve(detector)
    t = abs(net.chain_map[source[0]].hopping)
    needed = 1.5 * ballistic_time(net.distance(src, det), k, t)
    if times is None:
        times = time_grid(needed)
    times = np.asarray(times, dtype=float)
    if times[-1] < needed - 1e-9:
        raise WindowTooShort(f"window ends at {times[-1]:g}, first arrival needs {needed:g}")
    if psi0 is None:
        psi0 = gaussian_packet(net, source[0], source[1], alpha, k)
    spec = spectrum if spectrum is not None else spectrum_of(net)
    p = np.abs(spec.amplitudes(psi0, [src, det], times)) ** 2
    return float(p[:, 1].max() / p[:, 0].max())


# -- scans ------------------------------------------------------------------

def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _scan(template, xs, ys, fn, threads, name):
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    points = [(x, y) for y in ys for x in xs]
    values = _map(lambda p: fn(template(*p)), points, threads)
    return ScanGrid2D(xs, ys, np.array(values).reshape(len(ys), len(xs)), name)


def reflection_scan(template: Callable[[float, float], Network], xs, ys, psi0, tau0: float,
                    input_chain: str = "A", threads: int = 1) -> ScanGrid2D:
    """Reflection factor over joint couplings ``(x, y) = (t_nB, t_nC)``.

    ``template(t_nB, t_nC)`` builds the network for one grid point; all
    networks must share the site layout of ``psi0``.
    """
    return _scan(template, xs, ys, lambda net: reflection_factor(net, psi0, tau0, input_chain),
                 threads, "R")


def max_concurrence_scan(template: Callable[[float, float], Network], xs, ys, psi0, times,
                         chainB: str = "B", chainC: str = "C", threads: int = 1) -> ScanGrid2D:
    """Maximum over ``times`` of the mode concurrence, per joint-coupling grid point."""
    return _scan(template, xs, ys, lambda net: max_concurrence(net, psi0, times, chainB, chainC),
                 threads, "Cmax")


def flux_sweep_Q(template: Callable[[float], Network], phis, alphas: Sequence[float], source,
                 detectors: Sequence, k: float = np.pi / 2, threads: int = 1,
                 path_lengths: Sequence[int] | None = None) -> list:
    """Relative probability ``Q`` against loop flux.

    One eigendecomposition per flux value serves every ``alpha`` and
    detector.  Returns one :class:`FluxResponse` per ``(alpha, detector)``
    pair, alpha-major.  ``path_lengths`` only labels the responses; by
    default the graph distance source-detector is used.
    """
    phis = np.asarray(phis, dtype=float)

    def one(phi):
        net = template(phi)
        spec = eigendecompose(hamiltonian(net))
        return [relative_probability_Q(net, source, d, a, k=k, spectrum=spec)
                for a in alphas for d in detectors]

    table = np.array(_map(one, phis, threads))
    net0 = template(float(phis[0]))
    out = []
    col = 0
    for a in alphas:
        for i, d in enumerate(detectors):
            L = (path_lengths[i] if path_lengths is not None
                 else net0.distance(net0.resolve(source), net0.resolve(d)))
            out.append(FluxResponse(phis, table[:, col], float(a), int(L),
                                    {"detector": f"{d[0]}:{d[1]}"}))
            col += 1
    return out
