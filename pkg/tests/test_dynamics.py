import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from blochnet.dynamics import (PacketOverflowError, ballistic_time, eigendecompose, evolve,
                               gaussian_packet, half_width, read_state_csv, site_probability,
                               spectrum_of, track_packet, write_state_csv)
from blochnet.net import chain_network, hamiltonian, ring_network
from netgen import random_network, random_state


def test_delta_limit_packet():
    net = chain_network(20)
    psi = gaussian_packet(net, "A", 7, 1e6)
    expected = np.zeros(20)
    expected[6] = 1
    np.testing.assert_allclose(np.abs(psi), expected, atol=1e-15)


def test_standard_probe_shape():
    net = chain_network(50)
    psi = gaussian_packet(net, "A", 25, 0.3)
    j = np.arange(1, 51)
    env = np.exp(-0.5 * (0.3 * (j - 25)) ** 2)
    ref = env * np.exp(0.5j * np.pi * j)
    np.testing.assert_allclose(psi, ref / np.linalg.norm(ref), atol=1e-15)


@given(st.floats(0.05, 3.0), st.floats(-np.pi, np.pi))
def test_packet_norm(alpha, k):
    net = chain_network(400)
    psi = gaussian_packet(net, "A", 200.5, alpha, k)
    assert np.linalg.norm(psi) == pytest.approx(1, abs=1e-12)


def test_packet_overflow_and_bad_chain():
    net = chain_network(50)
    with pytest.raises(PacketOverflowError):
        gaussian_packet(net, "A", 3, 0.1)
    with pytest.raises(PacketOverflowError):
        gaussian_packet(net, "A", 60, 1.0)
    with pytest.raises(ValueError):
        gaussian_packet(net, "Q", 25, 0.3)
    with pytest.raises(ValueError):
        gaussian_packet(net, "A", 25, 0.0)


def test_packet_tail_beyond_four_sigma():
    net = chain_network(60)
    psi = gaussian_packet(net, "A", 30, 0.3)
    sigma = 1 / (np.sqrt(2) * 0.3)  # std of the probability profile
    j = np.arange(1, 61)
    far = np.nonzero(np.abs(j - 30) > 4 * sigma)[0]
    assert site_probability(psi, far) < 1e-3


@pytest.mark.parametrize("alpha,expected", [(0.1, 16.65), (0.3, 5.55)])
def test_half_width_values(alpha, expected):
    assert half_width(alpha) == pytest.approx(expected, abs=0.01)


def test_half_width_inversion():
    assert half_width(2 * np.sqrt(np.log(2))) == pytest.approx(1.0, abs=1e-15)


def test_two_site_eigensystem():
    spec = eigendecompose(hamiltonian(chain_network(2)))
    np.testing.assert_allclose(spec.eigenvalues, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(np.abs(spec.eigenvectors), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-15)


@pytest.mark.parametrize("n,phi", [(7, 0.3), (10, 0.5)])
def test_ring_spectrum(n, phi):
    spec = spectrum_of(ring_network(n, phi))
    m = np.arange(n)
    np.testing.assert_allclose(spec.eigenvalues,
                               np.sort(-2 * np.cos(2 * np.pi * m / n + 2 * np.pi * phi / n)), atol=1e-12)


def test_random_hermitian_reconstruction():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    H = A + A.conj().T
    spec = eigendecompose(H)
    assert np.abs(spec.matrix() - H).max() <= 1e-12
    V = spec.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(8)).max() <= 1e-12


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        eigendecompose(np.array([[0, 1], [0, 0]]))


@given(st.integers(0, 2 ** 31), st.floats(-20, 20))
def test_evolution_matches_matrix_exponential(seed, tau):
    net = random_network(seed, 30)
    H = hamiltonian(net)
    psi = random_state(net.n_sites, seed + 1)
    np.testing.assert_allclose(evolve(eigendecompose(H), psi, tau), expm(-1j * H * tau) @ psi,
                               atol=1e-10)


def test_evolve_identity_and_reversal():
    net = random_network(11, 60)
    spec = spectrum_of(net)
    psi = random_state(net.n_sites, 3)
    np.testing.assert_allclose(evolve(spec, psi, 0.0), psi, atol=1e-14)
    np.testing.assert_allclose(evolve(spec, evolve(spec, psi, 13.0), -13.0), psi, atol=1e-10)
    with pytest.raises(ValueError):
        evolve(spec, psi[:-1], 1.0)


def test_evolve_many_agrees_with_evolve():
    net = random_network(5, 40)
    spec = spectrum_of(net)
    psi = random_state(net.n_sites, 8)
    taus = [0.0, 1.5, 7.25]
    many = spec.evolve_many(psi, taus)
    for row, tau in zip(many, taus):
        np.testing.assert_allclose(row, evolve(spec, psi, tau), atol=1e-13)
    sites = [0, net.n_sites - 1]
    np.testing.assert_allclose(spec.amplitudes(psi, sites, taus), many[:, sites], atol=1e-13)


@given(st.integers(0, 2 ** 31), st.floats(-100, 100), st.floats(-50, 50))
def test_unitarity_energy_composition(seed, t1, t2):
    net = random_network(seed, 120)
    H = hamiltonian(net)
    spec = eigendecompose(H)
    psi = random_state(net.n_sites, seed)
    a = evolve(spec, psi, t1)
    assert np.linalg.norm(a) == pytest.approx(1, abs=1e-12)
    e0 = np.vdot(psi, H @ psi).real
    assert np.vdot(a, H @ a).real == pytest.approx(e0, abs=1e-10)
    np.testing.assert_allclose(evolve(spec, a, t2), evolve(spec, psi, t1 + t2), atol=1e-10)


def test_packet_centre_after_thirty():
    net = chain_network(200)
    spec = spectrum_of(net)
    psi0 = gaussian_packet(net, "A", 60, 0.1)
    track = track_packet(spec, psi0, [0.0, 30.0], net, "A")
    assert track.center[1] == pytest.approx(60 + 60, abs=1.0)
    assert track.weight[1] >= 0.99


@pytest.mark.parametrize("k", [np.pi / 4, np.pi / 2, 3 * np.pi / 4])
def test_group_velocity(k):
    net = chain_network(400)
    spec = spectrum_of(net)
    track = track_packet(spec, gaussian_packet(net, "A", 120, 0.1, k), np.linspace(0, 40, 41), net, "A")
    assert track.velocity() == pytest.approx(2 * np.sin(k), rel=0.02)


def test_opposite_momenta_opposite_velocities():
    net = chain_network(400)
    spec = spectrum_of(net)
    times = np.linspace(0, 30, 31)
    vp = track_packet(spec, gaussian_packet(net, "A", 200, 0.1, np.pi / 2), times, net, "A").velocity()
    vm = track_packet(spec, gaussian_packet(net, "A", 200, 0.1, -np.pi / 2), times, net, "A").velocity()
    assert vp > 0 > vm
    assert abs(vp + vm) <= 0.01 * abs(vp)


def test_stationary_packet_stays_put():
    net = chain_network(200)
    spec = spectrum_of(net)
    times = np.linspace(0, 10, 11)
    still = track_packet(spec, gaussian_packet(net, "A", 100, 0.1, 0.0), times, net, "A")
    moving = track_packet(spec, gaussian_packet(net, "A", 100, 0.1, np.pi / 2), times, net, "A")
    assert abs(still.center[-1] - still.center[0]) < 0.5
    assert abs(still.center[-1] - still.center[0]) < 0.05 * abs(moving.center[-1] - moving.center[0])


def test_bounded_spreading():
    net = chain_network(300)
    spec = spectrum_of(net)
    psi0 = gaussian_packet(net, "A", 80, 0.1)
    j = np.arange(1, 301)

    def variance(psi):
        p = np.abs(psi) ** 2
        m = p @ j
        return p @ (j - m) ** 2

    assert variance(evolve(spec, psi0, 50.0)) < 1.1 * variance(psi0)


def test_track_rejects_unsorted_times():
    net = chain_network(10)
    with pytest.raises(ValueError):
        track_packet(spectrum_of(net), gaussian_packet(net, "A", 5, 2.0), [1.0, 0.5], net, "A")


def test_site_probability_edges():
    psi = random_state(12, 0)
    assert site_probability(psi, range(12)) == pytest.approx(1, abs=1e-14)
    assert site_probability(psi, []) == 0.0


def test_ballistic_time():
    assert ballistic_time(100) == pytest.approx(50.0)
    assert ballistic_time(100, np.pi / 6, 2.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        ballistic_time(10, 0.0)


def test_state_csv_round_trip(tmp_path):
    psi = random_state(9, 2)
    write_state_csv(psi, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "site,re,im"
    np.testing.assert_array_equal(read_state_csv(tmp_path / "s.csv"), psi)


def test_track_csv(tmp_path):
    net = chain_network(30)
    tr = track_packet(spectrum_of(net), gaussian_packet(net, "A", 15, 0.5), [0, 1, 2], net, "A")
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "tau,center,weight" and len(lines) == 4
