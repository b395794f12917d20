import math

import numpy as np
import pytest

from decolab import fock, generators, integrate, trajectories
from decolab.exceptions import ResolutionError, UnsupportedCombinationError
from decolab.generators import KernelSpec, ModelParams


class TestNoiseSampling:
    def test_white_variance(self):
        kappa, dt = 0.3, 0.01
        path = trajectories.sample_noise("white", kappa, 0.0, dt, 200000, seed=7)
        assert np.var(path.increments) == pytest.approx(kappa * dt, rel=0.02)
        assert np.mean(path.increments) == pytest.approx(0.0, abs=1e-4)

    def test_ou_stationary_variance_and_autocorrelation(self):
        kappa, tau, dt = 0.5, 2.0, 0.1
        path = trajectories.sample_noise("ornstein-uhlenbeck", kappa, tau, dt,
                                         400000, seed=11)
        x = path.increments / dt
        assert np.var(x) == pytest.approx(kappa / (2 * tau), rel=0.02)
        # lag-1 autocorrelation of the AR(1) chain is exp(-dt/tau)
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert r1 == pytest.approx(math.exp(-dt / tau), rel=0.01)

    def test_unresolved_ou_rejected(self):
        with pytest.raises(ResolutionError):
            trajectories.sample_noise("ornstein-uhlenbeck", 0.1, 0.04, 0.01,
                                      100, seed=0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            trajectories.sample_noise("pink", 0.1, 0.0, 0.01, 100, seed=0)

    def test_streams_are_independent_and_reproducible(self):
        a = trajectories.sample_noise("white", 0.1, 0.0, 0.01, 50, seed=3, stream=0)
        b = trajectories.sample_noise("white", 0.1, 0.0, 0.01, 50, seed=3, stream=1)
        a2 = trajectories.sample_noise("white", 0.1, 0.0, 0.01, 50, seed=3, stream=0)
        assert np.array_equal(a.increments, a2.increments)
        assert not np.array_equal(a.increments, b.increments)


class TestSingleTrajectory:
    def test_norm_preserved(self):
        p = ModelParams.from_dimensionless(omega_tau_g=200.0, beta_bar=1.0)
        noise = trajectories.sample_noise("white", p.kappa_dimless, 0.0, 0.05,
                                          400, seed=5)
        psi0 = fock.superposition01(10)
        _, kets = trajectories.evolve_trajectory(psi0, p, noise, sample_every=50)
        norms = np.linalg.norm(kets, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)

    def test_zero_noise_matches_unitary(self):
        p = ModelParams.from_dimensionless(beta_bar=1.0)
        noise = trajectories.sample_noise("white", 0.0, 0.0, 0.05, 200, seed=0)
        psi0 = fock.superposition01(8)
        times, kets = trajectories.evolve_trajectory(psi0, p, noise,
                                                     sample_every=200)
        lv = generators.rwa_levels(8, 1.0, p.ap_hw)
        expected = np.exp(-1j * lv * times[-1]) * psi0
        assert np.max(np.abs(kets[-1] - expected)) < 1e-10

    def test_damping_not_supported(self):
        p = ModelParams.from_dimensionless(gamma_dimless=0.01)
        noise = trajectories.sample_noise("white", 0.0, 0.0, 0.05, 10, seed=0)
        with pytest.raises(UnsupportedCombinationError):
            trajectories.evolve_trajectory(fock.fock_state(0, 4), p, noise)


class TestEnsemble:
    p = ModelParams.from_dimensionless(omega_tau_g=200.0, beta_bar=1.0)

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            trajectories.ensemble_average(fock.fock_state(0, 6), self.p, 50,
                                          seed=1, dt=0.05, n_steps=10)

    def test_gamma_not_supported(self):
        p = ModelParams.from_dimensionless(omega_tau_g=200.0, gamma_dimless=0.01)
        with pytest.raises(UnsupportedCombinationError):
            trajectories.ensemble_average(fock.fock_state(0, 6), p, 100,
                                          seed=1, dt=0.05, n_steps=10)

    def test_chunking_is_bit_identical(self):
        psi0 = fock.superposition01(8)
        a = trajectories.ensemble_average(psi0, self.p, 100, seed=9, dt=0.05,
                                          n_steps=40, sample_every=20,
                                          chunk_size=7)
        b = trajectories.ensemble_average(psi0, self.p, 100, seed=9, dt=0.05,
                                          n_steps=40, sample_every=20,
                                          chunk_size=100)
        assert np.array_equal(a.mean_states, b.mean_states)
        assert np.array_equal(a.stderr, b.stderr)

    def test_mean_tracks_master_equation(self):
        psi0 = fock.superposition01(10)
        ens = trajectories.ensemble_average(psi0, self.p, 400, seed=2, dt=0.05,
                                            n_steps=400, sample_every=100)
        ref = integrate.evolve(
            fock.density(psi0),
            [lambda r, t: generators.gup_markov_rhs(r, self.p)],
            20.0, 0.05, sample_every=100)
        assert np.allclose(ens.times_omega, ref.times_omega)
        dists = [fock.trace_distance(ens.mean_states[i], ref.states[i])
                 for i in range(len(ens.times_omega))]
        assert max(dists) < 3.0 / math.sqrt(400)

    def test_csv_has_stderr_columns(self, tmp_path):
        psi0 = fock.superposition01(6)
        ens = trajectories.ensemble_average(psi0, self.p, 100, seed=4, dt=0.05,
                                            n_steps=20, sample_every=10)
        path = tmp_path / "ens.csv"
        ens.to_csv(path, ["rho_00", "abs_rho_01"])
        header = path.read_text().splitlines()[0]
        assert header == ("t_omega,t_seconds,rho_00,stderr_rho_00,"
                          "abs_rho_01,stderr_abs_rho_01")
