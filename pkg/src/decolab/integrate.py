"""Fixed-step time evolution of density matrices.

Classical RK4 with per-step re-Hermitization and trace renormalization; the
drift removed by those corrections is recorded so that long runs stay valid
while the error remains observable.  Problems at the parameter scales of
interest are non-stiff, and fixed steps keep runs bit-reproducible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import generators
from .exceptions import PositivityError, StepSizeError
from .generators import ModelParams

__all__ = ["EvolutionResult", "evolve", "evolve_nonmarkov", "observable", "default_dt"]

RhsTerm = Callable[[np.ndarray, float], np.ndarray]

#: 200 steps per oscillator period; resolves the fastest interaction-picture
#: phase (~4 omega) comfortably.
default_dt = 2.0 * np.pi / 200.0


@dataclass
class EvolutionResult:
    """Sampled trajectory of a master-equation run with validity diagnostics."""

    times_omega: np.ndarray          # dimensionless omega*t at samples
    states: np.ndarray               # (n_samples, dim, dim)
    omega: float = 1.0               # rad/s, for the seconds axis
    trace_drift: np.ndarray = field(default=None)   # |tr-1| before renorm, per sample
    herm_drift: np.ndarray = field(default=None)    # max |rho - rho†| before fix
    min_eigenvalue: np.ndarray = field(default=None)
    failed: bool = False

    @property
    def times_seconds(self) -> np.ndarray:
        return self.times_omega / self.omega

    def expect(self, name: str) -> np.ndarray:
        f = observable(name)
        return np.array([f(s) for s in self.states])

    def to_csv(self, path, observables: Sequence[str]) -> None:
        """Write `t_omega,t_seconds,<obs>...` rows for the declared observables."""
        cols = [self.expect(name) for name in observables]
        with open(path, "w") as fh:
            fh.write("t_omega,t_seconds," + ",".join(observables) + "\n")
            for i, t in enumerate(self.times_omega):
                row = [f"{t:.12g}", f"{self.times_seconds[i]:.12g}"]
                row += [f"{c[i]:.12g}" for c in cols]
                fh.write(",".join(row) + "\n")


_OBS_RE = re.compile(r"^(re_|im_|abs_)?rho_(\d+)_?(\d+)$")


def observable(name: str) -> Callable[[np.ndarray], float]:
    """Matrix-element observable from a name like `rho_11` or `re_rho_01`.

    `rho_nn` is the (real) population; off-diagonal elements need an explicit
    re_/im_/abs_ prefix.  Two-digit suffixes split in the middle; longer
    indices use an underscore (`rho_10_10`).
    """
    m = _OBS_RE.match(name)
    if not m:
        raise ValueError(f"cannot parse observable {name!r}")
    prefix, i, j = m.group(1), m.group(2), m.group(3)
    if m.group(3) is None:
        raise ValueError(f"cannot parse observable {name!r}")
    i, j = int(i), int(j)
    if prefix == "re_":
        return lambda rho: float(np.real(rho[i, j]))
    if prefix == "im_":
        return lambda rho: float(np.imag(rho[i, j]))
    if prefix == "abs_":
        return lambda rho: float(np.abs(rho[i, j]))
    if i != j:
        raise ValueError(f"off-diagonal observable {name!r} needs re_/im_/abs_ prefix")
    return lambda rho: float(np.real(rho[i, j]))


def _compose(rhs_terms: Sequence[RhsTerm]) -> RhsTerm:
    terms = list(rhs_terms)

    def rhs(rho: np.ndarray, t: float) -> np.ndarray:
        out = terms[0](rho, t)
        for f in terms[1:]:
            out = out + f(rho, t)
        return out

    return rhs


def evolve(rho0: np.ndarray, rhs_terms: Sequence[RhsTerm] | RhsTerm,
           t_end: float, dt: float = default_dt, *, sample_every: int = 100,
           omega: float = 1.0, positivity_floor: float = -1e-6) -> EvolutionResult:
    """Integrate d rho/d(omega t) = sum(rhs_terms) with classical RK4.

    Each term is called as f(rho, t) with dimensionless t.  After every step
    rho is re-Hermitized ((rho+rho†)/2) and trace-renormalized; the drift is
    recorded before correction.  Raises PositivityError when a sampled state
    dips below ``positivity_floor``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if callable(rhs_terms):
        rhs = rhs_terms
    else:
        rhs = _compose(rhs_terms)

    n_steps = max(1, int(round(t_end / dt)))
    rho = np.array(rho0, dtype=complex)
    times, states, tdrift, hdrift, mineig = [], [], [], [], []

    step_trace_drift = 0.0
    step_herm_drift = 0.0

    def record(idx_t: float):
        times.append(idx_t)
        states.append(rho.copy())
        tdrift.append(step_trace_drift)
        hdrift.append(step_herm_drift)
        lo = float(np.linalg.eigvalsh(rho)[0])
        mineig.append(lo)
        if lo < positivity_floor:
            raise PositivityError(
                f"state lost positivity at omega*t={idx_t:.6g} (min eig {lo:.3e})",
                step=len(times) - 1, min_eigenvalue=lo)

    record(0.0)
    for step in range(n_steps):
        t = step * dt
        k1 = rhs(rho, t)
        k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(rho + dt * k3, t + dt)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        tr = np.trace(rho)
        step_trace_drift = abs(float(np.real(tr)) - 1.0)
        step_herm_drift = float(np.max(np.abs(rho - rho.conj().T)))
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.real(np.trace(rho))

        if (step + 1) % sample_every == 0 or step == n_steps - 1:
            record((step + 1) * dt)

    return EvolutionResult(
        times_omega=np.array(times), states=np.array(states), omega=omega,
        trace_drift=np.array(tdrift), herm_drift=np.array(hdrift),
        min_eigenvalue=np.array(mineig))


def evolve_nonmarkov(rho0: np.ndarray, params: ModelParams, t_end: float,
                     dt: float, *, sample_every: int = 100,
                     n_nodes: int = 64) -> EvolutionResult:
    """Evolve under the exponential-memory-kernel master equation.

    The memory term is re-evaluated at every RK4 stage time.  Requires an
    exponential kernel and dt at most a tenth of the (dimensionless)
    correlation time.
    """
    tau_dimless = params.kernel.tau * params.omega if params.kernel.kind == "exponential" else 0.0
    if params.kernel.kind != "exponential":
        from .exceptions import KernelRoutingError
        raise KernelRoutingError("evolve_nonmarkov requires an exponential kernel")
    if dt > tau_dimless / 10.0:
        raise StepSizeError(
            f"dt={dt:.3g} exceeds tau/10={tau_dimless / 10:.3g}; reduce the step")

    terms = [lambda rho, t: generators.gup_nonmarkov_rhs(rho, t, params, n_nodes=n_nodes)]
    if params.gamma:
        terms.append(lambda rho, t: generators.damping_rhs(rho, params.gamma_dimless))
    return evolve(rho0, terms, t_end, dt, sample_every=sample_every, omega=params.omega)
