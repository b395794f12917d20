"""Stochastic-Schrödinger Monte-Carlo engine for the fluctuating deformation.

Each trajectory applies per-step unitaries exp(-i [H' dt + 4 ap_hw K² dW])
(Stratonovich-consistent; norm conserved by construction), with dW drawn from
a white or Ornstein-Uhlenbeck deformation noise.  Averaging |psi><psi| over
trajectories reproduces the corresponding master equation, which is exactly
what the ensemble runs are used to validate.

Determinism: every trajectory draws from its own (seed, stream) counter-based
RNG, and the ensemble reduction is an index-ordered sum, so results are
bit-identical regardless of how trajectories are chunked across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import generators
from .exceptions import ResolutionError, UnsupportedCombinationError
from .generators import ModelParams

__all__ = ["NoisePath", "sample_noise", "evolve_trajectory", "ensemble_average",
           "EnsembleResult"]


@dataclass(frozen=True)
class NoisePath:
    """Sampled deformation-noise increments for one trajectory.

    For ``white`` noise the increments are i.i.d. N(0, kappa*dt): the Wiener
    increments of the integrated deformation.  For ``ornstein-uhlenbeck`` they
    are x_k*dt with x_k the stationary OU process (variance kappa/(2 tau),
    autocorrelation kappa * exp(-|dt|/tau)/(2 tau)), matching the exponential
    kernel.
    """

    dt: float
    increments: np.ndarray
    kind: str
    tau: float
    seed: int
    stream: int


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def sample_noise(kind: str, kappa_dimless: float, tau: float, dt: float,
                 n_steps: int, seed: int, stream: int = 0) -> NoisePath:
    """Draw one reproducible noise path (dimensionless time units).

    ``tau`` is the OU correlation time in omega*t units and must be at least
    5*dt to be resolved by the stepping.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if kind not in ("white", "ornstein-uhlenbeck"):
        raise ValueError(f"unknown noise kind {kind!r}")
    rng = _rng(seed, stream)
    if kappa_dimless == 0.0:
        inc = np.zeros(n_steps)
    elif kind == "white":
        inc = rng.normal(0.0, math.sqrt(kappa_dimless * dt), size=n_steps)
    else:
        if tau < 5.0 * dt:
            raise ResolutionError(f"OU tau={tau:.3g} unresolved at dt={dt:.3g} (need tau >= 5 dt)")
        decay = math.exp(-dt / tau)
        stat_sd = math.sqrt(kappa_dimless / (2.0 * tau))
        kick_sd = stat_sd * math.sqrt(1.0 - decay ** 2)
        x = np.empty(n_steps)
        val = rng.normal(0.0, stat_sd)
        kicks = rng.normal(0.0, kick_sd, size=n_steps)
        for k in range(n_steps):
            x[k] = val
            val = val * decay + kicks[k]
        inc = x * dt
    inc.setflags(write=False)
    return NoisePath(dt=dt, increments=inc, kind=kind, tau=tau, seed=seed, stream=stream)


def _step_batch(psis: np.ndarray, h_diag: np.ndarray, k2: np.ndarray,
                eps: float, dws: np.ndarray, dt: float) -> np.ndarray:
    """Apply exp(-i (H' dt + eps K² dW)) to a batch of kets via batched eigh."""
    gen = dt * h_diag[None, :, :] + (eps * dws)[:, None, None] * k2[None, :, :]
    evals, vecs = np.linalg.eigh(gen)
    phases = np.exp(-1j * evals)
    rotated = np.einsum("bij,bj->bi", vecs.conj().transpose(0, 2, 1), psis)
    return np.einsum("bij,bj->bi", vecs, phases * rotated)


def evolve_trajectory(psi0: np.ndarray, params: ModelParams, noise: NoisePath,
                      *, sample_every: int = 1):
    """Propagate one pure state under a frozen noise realization.

    Damping is not supported in trajectory mode (the dissipator being
    validated is gamma-independent).  Returns (times, kets) with kets sampled
    every ``sample_every`` steps (always including t=0 and the endpoint).
    """
    if params.gamma != 0.0:
        raise UnsupportedCombinationError("trajectory mode requires gamma = 0")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    times, kets = _run_batch(psi0[None, :], params, noise.increments[None, :],
                             noise.dt, sample_every)
    return times, kets[:, 0, :]


def _run_batch(psis: np.ndarray, params: ModelParams, increments: np.ndarray,
               dt: float, sample_every: int):
    dim = psis.shape[1]
    h = generators.h_rwa(dim, params.beta_bar, params.ap_hw)
    k2 = np.asarray(generators._k2_op(dim))
    eps = 4.0 * params.ap_hw
    n_steps = increments.shape[1]

    times = [0.0]
    samples = [psis.copy()]
    cur = psis
    for k in range(n_steps):
        cur = _step_batch(cur, h, k2, eps, increments[:, k], dt)
        if (k + 1) % sample_every == 0 or k == n_steps - 1:
            norm = np.linalg.norm(cur, axis=1, keepdims=True)
            cur = cur / norm
            times.append((k + 1) * dt)
            samples.append(cur.copy())
    return np.array(times), np.array(samples)


@dataclass
class EnsembleResult:
    """Noise-averaged state with per-element Monte-Carlo standard errors."""

    times_omega: np.ndarray   # (n_samples,)
    mean_states: np.ndarray   # (n_samples, dim, dim)
    stderr: np.ndarray        # (n_samples, dim, dim) real
    n_traj: int
    omega: float = 1.0

    def to_csv(self, path, observables) -> None:
        from .integrate import observable
        cols = {}
        for name in observables:
            f = observable(name)
            cols[name] = np.array([f(s) for s in self.mean_states])
            # stderr of a matrix-element observable: combined Re/Im error of
            # the underlying element (conservative for re_/im_ projections).
            cols["stderr_" + name] = np.array(
                [self._elem_err(name, i) for i in range(len(self.times_omega))])
        with open(path, "w") as fh:
            names = list(cols)
            fh.write("t_omega,t_seconds," + ",".join(names) + "\n")
            for i, t in enumerate(self.times_omega):
                row = [f"{t:.12g}", f"{t / self.omega:.12g}"]
                row += [f"{cols[n][i]:.12g}" for n in names]
                fh.write(",".join(row) + "\n")

    def _elem_err(self, name: str, i: int) -> float:
        import re as _re
        m = _re.match(r"^(?:re_|im_|abs_)?rho_(\d+)_?(\d+)$", name)
        a, b = int(m.group(1)), int(m.group(2))
        return float(self.stderr[i, a, b])


def ensemble_average(psi0: np.ndarray, params: ModelParams, n_traj: int,
                     seed: int, *, dt: float, n_steps: int,
                     sample_every: int = 1, noise_kind: str = "white",
                     chunk_size: int = 256) -> EnsembleResult:
    """Average |psi><psi| over ``n_traj`` independently seeded trajectories.

    The OU correlation time is taken from the params kernel when
    ``noise_kind`` is "ornstein-uhlenbeck".  Reduction order is fixed by
    trajectory index, so the result does not depend on ``chunk_size``.
    """
    if n_traj < 100:
        raise ValueError("ensemble needs at least 100 trajectories")
    if params.gamma != 0.0:
        raise UnsupportedCombinationError("ensemble mode requires gamma = 0")
    psi0 = np.asarray(psi0, dtype=complex)
    dim = psi0.shape[0]
    tau = params.kernel.tau * params.omega if params.kernel.kind == "exponential" else 0.0

    sum_rho = None
    sum_sq = None   # elementwise |rho_traj|² accumulator split into re/im
    sum_re = None
    sum_im = None
    for start in range(0, n_traj, chunk_size):
        count = min(chunk_size, n_traj - start)
        inc = np.stack([
            sample_noise(noise_kind, params.kappa_dimless, tau, dt, n_steps,
                         seed, stream=start + j).increments
            for j in range(count)])
        times, kets = _run_batch(np.broadcast_to(psi0, (count, dim)).copy(),
                                 params, inc, dt, sample_every)
        rhos = np.einsum("tbi,tbj->tbij", kets, kets.conj())
        if sum_rho is None:
            shape = rhos.shape[0:1] + rhos.shape[2:]
            sum_rho = np.zeros(shape, dtype=complex)
            sum_re = np.zeros(shape)
            sum_im = np.zeros(shape)
            sum_sq = np.zeros(shape)
        # strict index-order accumulation: bit-identical for any chunking
        for j in range(count):
            r = rhos[:, j]
            sum_rho += r
            sum_re += np.real(r)
            sum_im += np.imag(r)
            sum_sq += np.real(r) ** 2 + np.imag(r) ** 2

    mean = sum_rho / n_traj
    var = sum_sq / n_traj - (sum_re / n_traj) ** 2 - (sum_im / n_traj) ** 2
    stderr = np.sqrt(np.maximum(var, 0.0) / n_traj)
    return EnsembleResult(times_omega=times, mean_states=mean, stderr=stderr,
                          n_traj=n_traj, omega=params.omega)
