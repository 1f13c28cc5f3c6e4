import numpy as np
import pytest

from conftest import random_graph, random_interior
from swhf.energy import HamiltonianSpec, hamiltonian_value
from swhf.errors import BoundaryDensityError
from swhf.flow import FlowConfig, Scheme, energy_audit, integrate, ito_correction, step, vector_fields
from swhf.graph import cycle_graph, path_graph
from swhf.noise import WongZakaiPath, sample_wiener
from swhf.schrodinger import preset_spec

RHO3 = np.array([0.2, 0.3, 0.5])


def nls_spec(sigma=(0.5, 0.0, -0.5)):
    return preset_spec("common-noise", 3, sigma=np.array(sigma))


def test_scheme_parse():
    assert Scheme.parse("wz") is Scheme.WONG_ZAKAI
    assert Scheme.parse("Ito_Euler") is Scheme.ITO_EULER
    with pytest.raises(ValueError):
        Scheme.parse("rk45")


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(h=0.0)
    with pytest.raises(ValueError):
        FlowConfig(h=0.3).n_steps


def test_zero_dynamics_constant():
    spec = HamiltonianSpec(n=3, a_k=0.0)
    traj = integrate(FlowConfig(0.1), spec, path_graph(3), RHO3, [1.0, 2.0, 3.0])
    assert np.all(traj.rho == RHO3)
    assert np.all(traj.S == [1.0, 2.0, 3.0])


@pytest.mark.parametrize("scheme", list(Scheme))
def test_mass_conservation(scheme):
    g = path_graph(3)
    wiener = sample_wiener(4, 1.0, 2.0**-7, paths=8)
    noise = WongZakaiPath(wiener, 2.0**-5) if scheme is Scheme.WONG_ZAKAI else wiener
    traj = integrate(FlowConfig(2.0**-7, scheme=scheme, store_every=1), nls_spec(), g, RHO3, np.zeros(3), noise)
    assert np.max(np.abs(traj.rho.sum(axis=-1) - 1.0)) <= 1e-10


def test_ito_correction_matches_finite_differences(rng):
    # 1/2 (Db) b with b the Stratonovich diffusion field
    for _ in range(10):
        n = int(rng.integers(2, 6))
        g = random_graph(rng, n)
        w = rng.normal(size=(n, n))
        spec = HamiltonianSpec(n=n, eta1=rng.uniform(0.1, 1), eta2=rng.uniform(0, 0.5), eta4=0.3,
                               eta5=rng.normal(), w=w + w.T, sigma=rng.normal(size=n))
        rho, S = random_interior(rng, n), rng.normal(size=n)

        def b(x):
            _, (br, bs) = vector_fields(spec, g, x[:n], x[n:])
            return np.concatenate((br, bs))

        x0 = np.concatenate((rho, S))
        J = np.empty((2 * n, 2 * n))
        e = 1e-6
        for j in range(2 * n):
            d = np.zeros(2 * n)
            d[j] = e
            J[:, j] = (b(x0 + d) - b(x0 - d)) / (2 * e)
        expected = 0.5 * J @ b(x0)
        c_rho, c_S = ito_correction(spec, g, rho, S)
        got = np.concatenate((c_rho, c_S))
        assert np.max(np.abs(got - expected)) <= 1e-6 * max(1.0, np.abs(expected).max())


def test_linear_noise_has_no_correction(rng):
    c_rho, c_S = ito_correction(nls_spec(), path_graph(3), RHO3, rng.normal(size=3))
    assert not np.any(c_rho) and not np.any(c_S)


def test_deterministic_energy_conservation_rk4():
    g = cycle_graph(4)
    spec = HamiltonianSpec(n=4, beta=0.1)
    rho0 = np.array([0.1, 0.2, 0.3, 0.4])
    S0 = np.array([0.0, 0.5, -0.3, 0.2])
    traj = integrate(FlowConfig(1e-3, scheme="wz", store_every=100), spec, g, rho0, S0)
    assert np.max(np.abs(traj.H0 - traj.H0[0])) <= 1e-6


def test_proportional_noise_conserves_energy():
    g = cycle_graph(4)
    c = 0.2
    spec = HamiltonianSpec(n=4, beta=0.1, eta1=c, eta2=0.1 * c)
    rho0 = np.array([0.1, 0.2, 0.3, 0.4])
    S0 = np.array([0.0, 0.5, -0.3, 0.2])
    noise = sample_wiener(2, 1.0, 1e-3, paths=4)
    traj = integrate(FlowConfig(1e-3, store_every=50), spec, g, rho0, S0, noise)
    assert not traj.stopped.any()
    assert np.max(np.abs(traj.H0 - traj.H0[0])) <= 1e-3


def test_constant_sigma_shifts_potential_only():
    g = path_graph(3)
    det = integrate(FlowConfig(1e-3, store_every=1), nls_spec((0.0, 0.0, 0.0)), g, RHO3, np.zeros(3))
    wiener = sample_wiener(9, 1.0, 1e-3)
    sto = integrate(FlowConfig(1e-3, store_every=1), nls_spec((0.7, 0.7, 0.7)), g, RHO3, np.zeros(3), wiener)
    np.testing.assert_allclose(sto.rho[:, 0], det.rho[:, 0], rtol=0, atol=1e-12)
    shift = sto.S[:, 0] - det.S[:, 0]
    np.testing.assert_allclose(shift, -0.7 * wiener.value(sto.times)[:, None] * np.ones(3), atol=1e-10)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_gauge(scheme):
    g = path_graph(3)
    wiener = sample_wiener(1, 1.0, 2.0**-8)
    noise = WongZakaiPath(wiener, 2.0**-4) if scheme is Scheme.WONG_ZAKAI else wiener
    cfg = FlowConfig(2.0**-8, scheme=scheme, audit=False)
    spec = preset_spec("logarithmic", 3, sigma=np.array([0.5, 0.0, -0.5]))
    a = integrate(cfg, spec, g, RHO3, np.zeros(3), noise)
    b = integrate(cfg, spec, g, RHO3, np.full(3, 0.75), noise)
    np.testing.assert_allclose(a.rho, b.rho, rtol=0, atol=1e-12)


def test_stopping_detected_and_monotone():
    g = path_graph(2)
    spec = HamiltonianSpec(n=2, v=[5.0, 0.0])
    taus = []
    for rho_min in (1e-2, 1e-3, 1e-4, 1e-8):
        traj = integrate(FlowConfig(1e-3, T=2.0, rho_min=rho_min), spec, g, [0.5, 0.5], [0.0, 0.0])
        assert traj.stopped[0] and traj.reason[0] == "density_floor"
        assert traj.min_rho[0] > 0
        taus.append(traj.tau[0])
    assert taus == sorted(taus)


def test_potential_blowup_reason():
    spec = HamiltonianSpec(n=2, v=[5.0, 0.0])
    traj = integrate(FlowConfig(1e-3, T=0.5, S_max=1.0), spec, path_graph(2), [0.5, 0.5], [0.0, 0.0])
    assert traj.reason == ["potential_blowup"]
    # |dS_1/dt| >= 5, so the threshold 1 is crossed by t = 0.2
    assert 0.15 < traj.tau[0] <= 0.2 + 1e-3


def test_unstopped_tau_is_inf():
    traj = integrate(FlowConfig(0.01), nls_spec(), path_graph(3), RHO3, np.zeros(3))
    assert traj.tau[0] == np.inf and traj.reason == ["none"]


def test_strong_consistency_ito_vs_heun():
    g = path_graph(3)
    steps = [2.0**-6, 2.0**-7, 2.0**-8]
    W = sample_wiener(7, 1.0, steps[-1], paths=100)
    dist = []
    for h in steps:
        a = integrate(FlowConfig(h, scheme="heun", audit=False), nls_spec(), g, RHO3, np.zeros(3), W)
        b = integrate(FlowConfig(h, scheme="ito", audit=False), nls_spec(), g, RHO3, np.zeros(3), W)
        dist.append(np.abs(a.final_rho - b.final_rho).max(axis=1).mean())
    orders = np.log2(np.array(dist[:-1]) / dist[1:])
    assert np.all(orders >= 0.5)


def test_wong_zakai_approaches_heun():
    g = path_graph(3)
    W = sample_wiener(3, 1.0, 2.0**-11, paths=10)
    ref = integrate(FlowConfig(2.0**-11, audit=False), nls_spec(), g, RHO3, np.zeros(3), W)
    errs = []
    for delta in (2.0**-3, 2.0**-5, 2.0**-7):
        wz = integrate(FlowConfig(delta / 2, scheme="wz", audit=False), nls_spec(), g, RHO3, np.zeros(3),
                       WongZakaiPath(W, delta))
        errs.append(np.abs(wz.final_rho - ref.final_rho).max(axis=1).mean())
    assert errs[0] > errs[1] > errs[2]


def test_energy_audit_tracks_noise_driven_energy():
    g = path_graph(3)
    W = sample_wiener(5, 1.0, 1e-3, paths=3)
    spec = nls_spec()
    traj = integrate(FlowConfig(1e-3, store_every=1), spec, g, RHO3, np.zeros(3), W)
    report = energy_audit(spec, g, traj, W)
    assert report.max_drift > 1e-2
    assert report.max_residual <= 1e-3 * report.max_drift


def test_step_matches_integrate():
    g = path_graph(3)
    W = sample_wiener(8, 1.0, 0.01)
    state = (RHO3, np.zeros(3))
    for k in range(5):
        state = step("heun", nls_spec(), g, state, k * 0.01, 0.01, W)
    traj = integrate(FlowConfig(0.01, store_every=5, audit=False), nls_spec(), g, RHO3, np.zeros(3), W)
    np.testing.assert_allclose(state[0], traj.rho[1, 0], rtol=0, atol=1e-15)


def test_step_refuses_boundary_with_singular_terms():
    with pytest.raises(BoundaryDensityError):
        step("heun", nls_spec(), path_graph(3), ([0.0, 0.5, 0.5], np.zeros(3)), 0.0, 0.01)


def test_alignment_errors():
    g = path_graph(3)
    W = sample_wiener(0, 1.0, 0.01)
    with pytest.raises(ValueError):
        integrate(FlowConfig(0.015), nls_spec(), g, RHO3, np.zeros(3), W)
    with pytest.raises(TypeError):
        integrate(FlowConfig(0.01, scheme="wz"), nls_spec(), g, RHO3, np.zeros(3), W)
    with pytest.raises(ValueError):
        integrate(FlowConfig(0.03, scheme="wz", T=0.99), nls_spec(), g, RHO3, np.zeros(3), WongZakaiPath(W, 0.05))


def test_initial_density_must_be_interior():
    with pytest.raises(BoundaryDensityError):
        integrate(FlowConfig(0.01), nls_spec(), path_graph(3), [0.0, 0.5, 0.5], np.zeros(3))


def test_energies_recorded():
    traj = integrate(FlowConfig(0.01, store_every=10), nls_spec(), path_graph(3), RHO3, np.zeros(3))
    h0, h1 = hamiltonian_value(nls_spec(), path_graph(3), traj.rho[-1, 0], traj.S[-1, 0])
    assert traj.H0[-1, 0] == pytest.approx(h0, rel=1e-14)
    assert traj.H1[-1, 0] == pytest.approx(h1, rel=1e-14)
