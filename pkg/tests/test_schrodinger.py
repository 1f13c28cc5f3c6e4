import numpy as np
import pytest

from conftest import random_graph, random_interior
from swhf.errors import BoundaryDensityError, DensityError
from swhf.flow import FlowConfig, integrate, vector_fields
from swhf.graph import ThetaKind, path_graph
from swhf.noise import WongZakaiPath, sample_wiener
from swhf.schrodinger import (
    NlsPreset,
    chain_rule,
    complex_diffusion,
    complex_drift,
    graph_laplacian,
    madelung_fields,
    madelung_forward,
    madelung_inverse,
    preset_spec,
)

A, L = ThetaKind.ARITHMETIC, ThetaKind.LOGARITHMIC


def random_wave(rng, n):
    return madelung_inverse(random_interior(rng, n), rng.uniform(-np.pi, np.pi, n))


class TestMadelung:
    def test_forward_example(self):
        rho, S = madelung_forward(np.array([1, 1j]) / np.sqrt(2))
        np.testing.assert_allclose(rho, [0.5, 0.5], rtol=1e-15)
        np.testing.assert_allclose(S, [0.0, np.pi / 2], rtol=1e-15)

    def test_real_positive_has_zero_phase(self):
        assert not np.any(madelung_forward(np.array([0.6, 0.8]))[1])

    def test_phase_range(self):
        _, S = madelung_forward(np.array([-1.0 + 0j, -1.0 - 0j]) / np.sqrt(2))
        np.testing.assert_allclose(S, [np.pi, np.pi])

    def test_roundtrip(self, rng):
        u = random_wave(rng, 5)
        np.testing.assert_allclose(madelung_inverse(*madelung_forward(u)), u, rtol=0, atol=1e-12)

    def test_inverse_example_and_mass(self, rng):
        np.testing.assert_allclose(madelung_inverse([0.5, 0.5], [0, 0]), [2**-0.5, 2**-0.5], rtol=1e-15)
        u = madelung_inverse(random_interior(rng, 6), rng.normal(size=6))
        assert np.sum(np.abs(u) ** 2) == pytest.approx(1.0, abs=1e-14)

    def test_phase_periodicity(self, rng):
        rho, S = random_interior(rng, 3), rng.normal(size=3)
        S2 = S.copy()
        S2[1] += 2 * np.pi
        np.testing.assert_allclose(madelung_inverse(rho, S2), madelung_inverse(rho, S), atol=1e-15)

    def test_zero_amplitude_rejected(self):
        with pytest.raises(DensityError):
            madelung_forward(np.array([1.0, 0.0]))
        with pytest.raises(BoundaryDensityError):
            madelung_inverse([1.0, 0.0], [0.0, 0.0])


class TestLaplacian:
    def test_constant_wave(self, rng):
        g = random_graph(rng, 5)
        np.testing.assert_allclose(graph_laplacian(g, np.full(5, (1 + 1j) / np.sqrt(10))), 0.0, atol=1e-15)

    def test_uniform_zero_phase(self, rng):
        g = random_graph(rng, 4)
        np.testing.assert_allclose(graph_laplacian(g, np.full(4, 0.5 + 0j)), 0.0, atol=1e-15)

    def test_zero_amplitude(self):
        with pytest.raises(DensityError):
            graph_laplacian(path_graph(2), np.array([1.0, 0.0]))

    @pytest.mark.parametrize("preset", list(NlsPreset))
    @pytest.mark.parametrize("theta, theta_tilde", [(A, L), (L, L), (A, A)])
    def test_complex_form_matches_hamiltonian_flow(self, rng, preset, theta, theta_tilde):
        for _ in range(50):
            n = int(rng.integers(2, 7))
            g = random_graph(rng, n)
            w = rng.normal(size=(n, n))
            v, w, sigma = rng.normal(size=n), w + w.T, rng.normal(size=n)
            spec = preset_spec(preset, n, v=v, w=w, sigma=sigma, theta=theta, theta_tilde=theta_tilde)
            u = random_wave(rng, n)
            drift, diff = madelung_fields(spec, g, u)
            c_drift = complex_drift(preset, g, u, v=v, w=w, theta=theta, theta_tilde=theta_tilde)
            c_diff = complex_diffusion(preset, g, u, sigma=sigma, theta=theta, theta_tilde=theta_tilde)
            for a, b in ((c_drift, drift), (c_diff, diff)):
                assert np.max(np.abs(a - b)) <= 1e-10 * max(np.max(np.abs(b)), 1e-300)

    def test_chain_rule_against_difference_quotient(self, rng):
        rho, S = random_interior(rng, 4), rng.normal(size=4)
        d_rho = rng.normal(size=4)
        d_rho -= d_rho.mean()
        d_S = rng.normal(size=4)
        e = 1e-6
        fd = (madelung_inverse(rho + e * d_rho, S + e * d_S) - madelung_inverse(rho - e * d_rho, S - e * d_S)) / (2 * e)
        np.testing.assert_allclose(chain_rule(madelung_inverse(rho, S), d_rho, d_S), fd, rtol=1e-7)


class TestPresets:
    def test_parse(self):
        assert NlsPreset.parse("common_noise") is NlsPreset.COMMON_NOISE
        with pytest.raises(ValueError):
            NlsPreset.parse("cubic")

    def test_coefficients(self):
        s = preset_spec("common-noise", 3, sigma=[1.0, 2.0, 3.0])
        assert (s.a_k, s.beta, s.alpha) == (1.0, 0.125, 0.0)
        np.testing.assert_array_equal(s.h1.linear, [1.0, 2.0, 3.0])
        assert preset_spec("logarithmic", 3).alpha == 1.0
        d = preset_spec("dispersion", 3)
        assert (d.a_k, d.beta, d.eta1, d.eta2) == (0.0, 0.0, 1.0, 0.125)

    def test_zero_sigma_is_deterministic(self):
        assert not preset_spec("common-noise", 3, sigma=np.zeros(3)).has_noise

    def test_logarithmic_shift_at_uniform(self):
        g = path_graph(4)
        rho, S = np.full(4, 0.25), np.zeros(4)
        (fr_log, fs_log), _ = vector_fields(preset_spec("logarithmic", 4), g, rho, S)
        (fr, fs), _ = vector_fields(preset_spec("common-noise", 4), g, rho, S)
        np.testing.assert_allclose(fr_log, fr, atol=1e-15)
        # potential -log rho_i = +log N everywhere, so S drifts rigidly at rate -log N
        np.testing.assert_allclose(fs_log - fs, -np.log(4.0), rtol=1e-14)

    def test_dispersion_conserves_modified_energy(self):
        g = path_graph(3)
        spec = preset_spec("dispersion", 3)
        noise = WongZakaiPath(sample_wiener(4, 1.0, 2.0**-10, paths=3), 2.0**-5)
        traj = integrate(FlowConfig(2.0**-10, scheme="wz", store_every=16), spec, g, [0.2, 0.3, 0.5],
                         [0.3, 0.0, -0.2], noise)
        assert not traj.stopped.any()
        assert np.max(np.abs(traj.H1 - traj.H1[0])) <= 1e-6

    def test_wave_mass_along_simulation(self):
        g = path_graph(3)
        spec = preset_spec("common-noise", 3, sigma=np.array([0.5, 0.0, -0.5]))
        traj = integrate(FlowConfig(1e-3, store_every=10), spec, g, [0.2, 0.3, 0.5], np.zeros(3),
                         sample_wiener(1, 1.0, 1e-3, paths=4))
        u = madelung_inverse(traj.rho, traj.S)
        assert np.max(np.abs(np.sum(np.abs(u) ** 2, axis=-1) - 1.0)) <= 1e-10
