import math

import numpy as np
import pytest

from conftest import random_graph, random_interior
from swhf.energy import (
    EnergyPart,
    HamiltonianSpec,
    energy_value,
    entropy,
    fisher,
    grad_rho,
    grad_S,
    hamiltonian_value,
    hessian_blocks,
    kinetic,
    poisson_bracket,
)
from swhf.errors import BoundaryDensityError, ConfigError
from swhf.graph import ThetaKind, path_graph

A, L = ThetaKind.ARITHMETIC, ThetaKind.LOGARITHMIC


def random_part(rng, n, theta=A, theta_tilde=L):
    w = rng.normal(size=(n, n))
    return EnergyPart(
        kinetic=rng.uniform(0.2, 2.0),
        fisher=rng.uniform(0.0, 1.0),
        entropy=rng.normal(),
        linear=rng.normal(size=n),
        interaction=w + w.T,
        theta=theta,
        theta_tilde=theta_tilde,
    )


def fd_gradient(fun, x, step=1e-5):
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return out


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)


def instances(rng, count, thetas=((A, L),)):
    for k in range(count):
        n = int(rng.integers(2, 9))
        theta, theta_tilde = thetas[k % len(thetas)]
        g = random_graph(rng, n)
        yield g, random_part(rng, n, theta, theta_tilde), random_interior(rng, n), rng.normal(size=n)


class TestValues:
    def test_kinetic_example(self):
        assert kinetic(path_graph(2), [0.5, 0.5], [1.0, 0.0]) == 0.25

    def test_kinetic_constant_potential(self, rng):
        g = random_graph(rng, 5)
        assert kinetic(g, random_interior(rng, 5), np.full(5, 1.7)) == 0.0

    def test_kinetic_matches_directed_double_loop(self, rng):
        g = random_graph(rng, 5)
        rho, S = random_interior(rng, 5), rng.normal(size=5)
        w = {}
        for (i, j), om in zip(g.edges, g.omega):
            w[(i, j)] = w[(j, i)] = om
        total = 0.0
        for i in range(5):
            for j in g.neighbors[i]:
                grad = math.sqrt(w[(i, j)]) * (S[i] - S[j])
                total += 0.5 * grad * grad * (rho[i] + rho[j]) / 2
        assert kinetic(g, rho, S) == pytest.approx(0.5 * total, rel=1e-13)

    def test_fisher_examples(self):
        g = path_graph(2)
        assert fisher(g, [0.5, 0.5]) == 0.0
        assert fisher(g, [0.75, 0.25]) == pytest.approx(0.5 * math.log(3), rel=1e-14)
        seq = [fisher(g, [e, 1 - e]) for e in (1e-2, 1e-4, 1e-6)]
        assert seq[0] < seq[1] < seq[2]
        assert fisher(g, [0.0, 1.0]) == math.inf

    def test_fisher_general_mean_matches_simplified(self, rng):
        g = random_graph(rng, 6)
        rho = random_interior(rng, 6)
        logs = np.log(rho)
        direct = np.sum(g.omega_tilde * g.diff(logs) ** 2 * g.edge_theta(rho, L))
        assert fisher(g, rho, L) == pytest.approx(direct, rel=1e-12)

    def test_fisher_zero_only_at_uniform(self, rng):
        g = random_graph(rng, 5)
        assert fisher(g, np.full(5, 0.2)) == pytest.approx(0.0, abs=1e-15)
        for _ in range(10):
            assert fisher(g, random_interior(rng, 5)) > 0

    def test_entropy_examples(self):
        assert entropy([1.0, 0.0]) == -1.0
        assert entropy([0.5, 0.5]) == pytest.approx(-math.log(2) - 1, rel=1e-15)
        assert entropy(np.full(4, 0.25)) == pytest.approx(-math.log(4) - 1, rel=1e-15)

    def test_hamiltonian_examples(self):
        g = path_graph(2)
        assert hamiltonian_value(HamiltonianSpec(n=2, a_k=0.0), g, [0.3, 0.7], [0, 0]) == (0.0, 0.0)
        spec = HamiltonianSpec(n=2, sigma=[1.0, 2.0])
        assert hamiltonian_value(spec, g, [0.3, 0.7], [0.1, 0.0])[1] == pytest.approx(1.7, rel=1e-15)

    @pytest.mark.parametrize("c", [0.5, 4.0, -2.0])
    def test_proportional_pair(self, rng, c):
        n = 5
        g = random_graph(rng, n)
        w = rng.normal(size=(n, n))
        kw = dict(a_k=1.3, beta=0.4, alpha=0.7)
        spec = HamiltonianSpec(
            n=n, v=rng.normal(size=n), w=w + w.T, **kw,
            eta1=c * 1.3, eta2=c * 0.4, eta3=c, eta4=c, eta5=c * 0.7,
        )
        for _ in range(10):
            h0, h1 = hamiltonian_value(spec, g, random_interior(rng, n), rng.normal(size=n))
            assert h1 == c * h0

    def test_singular_terms_refuse_boundary(self):
        spec = HamiltonianSpec(n=2, beta=0.1)
        with pytest.raises(BoundaryDensityError):
            hamiltonian_value(spec, path_graph(2), [0.0, 1.0], [0, 0])


class TestDerivatives:
    def test_grad_S_example(self):
        out = grad_S(EnergyPart(kinetic=1.0), path_graph(2), [0.5, 0.5], [1.0, 0.0])
        np.testing.assert_allclose(out, [0.5, -0.5])

    def test_grad_rho_fisher_example(self):
        out = grad_rho(EnergyPart(fisher=1.0), path_graph(2), [0.75, 0.25], [0.0, 0.0])
        assert out[0] == pytest.approx(math.log(3) + 2 / 3, rel=1e-14)

    def test_symmetric_point(self):
        g = path_graph(4)
        out = grad_rho(EnergyPart(kinetic=1.0, fisher=0.7), g, np.full(4, 0.25), np.full(4, 2.0))
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_entropy_gradient_is_negative_log(self, rng):
        rho = random_interior(rng, 4)
        out = grad_rho(EnergyPart(entropy=0.3), path_graph(4), rho, np.zeros(4))
        np.testing.assert_allclose(out, -0.3 * np.log(rho), rtol=1e-15)

    def test_gradients_match_finite_differences(self, rng):
        thetas = ((A, L), (L, L), (A, A))
        for g, part, rho, S in instances(rng, 60, thetas):
            fS = fd_gradient(lambda s: energy_value(part, g, rho, s), S)
            fR = fd_gradient(lambda r: energy_value(part, g, r, S), rho)
            assert rel_err(grad_S(part, g, rho, S), fS) <= 1e-6
            assert rel_err(grad_rho(part, g, rho, S), fR) <= 1e-6

    def test_hessians_match_finite_differences(self, rng):
        thetas = ((A, L), (L, L), (A, A))
        for g, part, rho, S in instances(rng, 40, thetas):
            hb = hessian_blocks(part, g, rho, S)
            n = g.n
            step = 1e-4
            SS = np.empty((n, n))
            SR = np.empty((n, n))
            RR = np.empty((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = step
                SS[:, j] = (grad_S(part, g, rho, S + e) - grad_S(part, g, rho, S - e)) / (2 * step)
                SR[:, j] = (grad_S(part, g, rho + e, S) - grad_S(part, g, rho - e, S)) / (2 * step)
                RR[:, j] = (grad_rho(part, g, rho + e, S) - grad_rho(part, g, rho - e, S)) / (2 * step)
            assert rel_err(hb.SS, SS) <= 1e-4
            assert rel_err(hb.SR, SR) <= 1e-4
            assert rel_err(hb.RR, RR) <= 1e-4
            np.testing.assert_allclose(hb.SS, hb.SS.T, atol=1e-13)
            np.testing.assert_allclose(hb.RR, hb.RR.T, atol=1e-9 * max(1.0, np.abs(hb.RR).max()))
            np.testing.assert_allclose(hb.SS.sum(axis=1), 0.0, atol=1e-12)

    def test_hessian_entries_on_unit_path(self, rng):
        # arithmetic kinetic mean, logarithmic Fisher mean, unit weights
        n = 4
        g = path_graph(n)
        w = rng.normal(size=(n, n))
        w = w + w.T
        eta1, eta2, eta4, eta5 = 0.7, 0.3, 1.1, 0.4
        part = EnergyPart(kinetic=eta1, fisher=eta2, entropy=eta5, interaction=eta4 * w)
        rho, S = random_interior(rng, n), rng.normal(size=n)
        hb = hessian_blocks(part, g, rho, S)
        for i in range(n):
            nb = g.neighbors[i]
            assert hb.SS[i, i] == pytest.approx(eta1 * sum((rho[i] + rho[j]) / 2 for j in nb), rel=1e-13)
            diag = eta4 * w[i, i] + eta2 * sum(1 / rho[i] + rho[j] / rho[i] ** 2 for j in nb) - eta5 / rho[i]
            assert hb.RR[i, i] == pytest.approx(diag, rel=1e-12)
            for j in nb:
                assert hb.SR[i, j] == pytest.approx(eta1 / 2 * (S[i] - S[j]), rel=1e-13)
                off = eta4 * w[i, j] - eta2 * (1 / rho[j] + 1 / rho[i])
                assert hb.RR[i, j] == pytest.approx(off, rel=1e-12)

    def test_zero_part_gives_zero_blocks(self, rng):
        hb = hessian_blocks(EnergyPart(), path_graph(3), random_interior(rng, 3), rng.normal(size=3))
        assert not any(np.any(b) for b in hb)

    def test_gauge(self, rng):
        for g, part, rho, S in instances(rng, 10):
            assert energy_value(part, g, rho, S + 3.0) == pytest.approx(energy_value(part, g, rho, S), rel=1e-12)
            np.testing.assert_allclose(grad_rho(part, g, rho, S + 3.0), grad_rho(part, g, rho, S), atol=1e-12)
            assert abs(grad_S(part, g, rho, S).sum()) <= 1e-12

    def test_batched_evaluation(self, rng):
        g = random_graph(rng, 5)
        part = random_part(rng, 5)
        rho = np.stack([random_interior(rng, 5) for _ in range(4)])
        S = rng.normal(size=(4, 5))
        vals = energy_value(part, g, rho, S)
        gr = grad_rho(part, g, rho, S)
        hb = hessian_blocks(part, g, rho, S)
        for k in range(4):
            assert vals[k] == pytest.approx(energy_value(part, g, rho[k], S[k]), rel=1e-13)
            np.testing.assert_allclose(gr[k], grad_rho(part, g, rho[k], S[k]), rtol=1e-13)
            np.testing.assert_allclose(hb.RR[k], hessian_blocks(part, g, rho[k], S[k]).RR, rtol=1e-12)


class TestBracket:
    def test_proportional_vanishes(self, rng):
        for g, part, rho, S in instances(rng, 20):
            assert abs(poisson_bracket(part, part.scaled(2.5), g, rho, S)) <= 1e-12 * max(
                1.0, np.abs(grad_rho(part, g, rho, S)).max() ** 2
            )

    def test_antisymmetry(self, rng):
        for g, a, rho, S in instances(rng, 20):
            b = random_part(rng, g.n)
            assert poisson_bracket(a, b, g, rho, S) == pytest.approx(-poisson_bracket(b, a, g, rho, S), rel=1e-12)

    def test_kinetic_linear_hand_expansion(self):
        rho, S, v = np.array([0.3, 0.7]), np.array([0.4, -0.2]), np.array([1.5, -0.5])
        val = poisson_bracket(EnergyPart(kinetic=1.0), EnergyPart(linear=v), path_graph(2), rho, S)
        assert val == pytest.approx(-0.5 * (S[0] - S[1]) * (v[0] - v[1]), rel=1e-14)


class TestSpecMapping:
    def test_roundtrip(self, rng):
        w = rng.normal(size=(3, 3))
        spec = HamiltonianSpec(n=3, beta=0.2, alpha=-0.1, v=[1, 2, 3], w=w + w.T, eta1=0.5, sigma=[0, 1, 0])
        back = HamiltonianSpec.from_mapping(spec.to_mapping(), 3)
        assert back.to_mapping() == spec.to_mapping()

    def test_unknown_field(self):
        with pytest.raises(ConfigError) as err:
            HamiltonianSpec.from_mapping({"h0": {"gamma": 1.0}, "h1": {"eta9": 2}}, 2)
        assert err.value.fields == ["h0.gamma", "h1.eta9"]

    def test_rejects_asymmetric_interaction(self):
        with pytest.raises(ValueError):
            HamiltonianSpec(n=2, w=[[0, 1], [2, 0]])

    def test_sigma_overrides_linear_noise(self):
        spec = HamiltonianSpec(n=2, v=[1.0, 1.0], eta3=3.0, sigma=[0.5, 0.0])
        np.testing.assert_array_equal(spec.h1.linear, [0.5, 0.0])
        spec = HamiltonianSpec(n=2, v=[1.0, 2.0], eta3=3.0)
        np.testing.assert_array_equal(spec.h1.linear, [3.0, 6.0])
