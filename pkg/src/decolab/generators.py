"""Right-hand-side builders for the oscillator master equations.

All generators work in dimensionless units (hbar = 1, time measured in
omega*t, energies in hbar*omega).  Physical inputs live in ModelParams and are
folded into dimensionless coefficients here:

* deformed-commutator (double K² commutator) dissipator, Markovian and
  exponential-memory-kernel forms,
* metric-fluctuation (double K commutator) dissipator,
* amplitude damping at rate gamma,
* anharmonic RWA Hamiltonian and its non-RWA variant.

Every dissipator returns a traceless Hermitian derivative for Hermitian input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import fock
from .exceptions import KernelRoutingError

__all__ = [
    "PhysicalConstants",
    "PLANCK",
    "KernelSpec",
    "ModelParams",
    "h_rwa",
    "h_full",
    "gup_markov_rhs",
    "gup_nonmarkov_rhs",
    "breuer_rhs",
    "damping_rhs",
    "heisenberg_k2",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-style constants used for unit conversion only."""

    planck_length: float = 1.616255e-35   # m
    planck_mass: float = 2.176434e-8      # kg
    planck_energy: float = 1.956082e9     # J
    planck_time: float = 5.391247e-44     # s
    hbar: float = 1.054571817e-34         # J s

    def a_p(self, mass: float) -> float:
        """Deformation coupling a_P = m l_P^2 / hbar^2 (1/J)."""
        return mass * self.planck_length ** 2 / self.hbar ** 2

    def ap_hw(self, mass: float, omega: float) -> float:
        """Dimensionless combination a_P * hbar * omega."""
        return self.a_p(mass) * self.hbar * omega


PLANCK = PhysicalConstants()


@dataclass(frozen=True)
class KernelSpec:
    """Noise autocorrelation shape f(t - t'), normalized to unit integral.

    ``delta`` is the white-noise (Markovian) limit; ``exponential`` is
    f(u) = exp(-|u|/tau) / (2 tau) with correlation time ``tau`` in seconds.
    """

    kind: str = "delta"
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in ("delta", "exponential"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "exponential" and not self.tau > 0:
            raise ValueError("exponential kernel requires tau > 0")

    def f_dimless(self, u: np.ndarray, omega: float) -> np.ndarray:
        """Kernel density in dimensionless time (u in omega*t units)."""
        if self.kind == "delta":
            raise KernelRoutingError("delta kernel has no density; use the Markovian form")
        tau = self.tau * omega
        return np.exp(-np.abs(u) / tau) / (2.0 * tau)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the fluctuation models.

    omega     angular frequency (rad/s)
    gamma     energy relaxation rate (1/s)
    beta_bar  mean deformation parameter (dimensionless)
    kappa     deformation-fluctuation amplitude (s)
    tau_c     metric-fluctuation correlation time (s)
    ap_hw     dimensionless a_P * hbar * omega
    kernel    noise correlation shape
    """

    omega: float
    gamma: float = 0.0
    beta_bar: float = 0.0
    kappa: float = 0.0
    tau_c: float = 0.0
    ap_hw: float = 0.0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        for name in ("gamma", "kappa", "tau_c", "ap_hw"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    # -- derived dimensionless coefficients ---------------------------------

    @property
    def gamma_dimless(self) -> float:
        return self.gamma / self.omega

    @property
    def kappa_dimless(self) -> float:
        """kappa * omega; variance of the white deformation noise per omega*t."""
        return self.kappa * self.omega

    @property
    def gup_rate_dimless(self) -> float:
        """Markovian double-K² coefficient 8 (a_P hw)² kappa omega = 1/(omega tau_G)."""
        return 8.0 * self.ap_hw ** 2 * self.kappa * self.omega

    @property
    def omega_tau_g(self) -> float:
        r = self.gup_rate_dimless
        return math.inf if r == 0 else 1.0 / r

    @property
    def breuer_rate_dimless(self) -> float:
        """Double-K coefficient tau_c * omega / 2 = 1/(2 omega tau_D)."""
        return 0.5 * self.tau_c * self.omega

    @property
    def omega_tau_d(self) -> float:
        return math.inf if self.tau_c == 0 else 1.0 / (self.tau_c * self.omega)

    @classmethod
    def from_dimensionless(cls, *, omega_tau_g: float = math.inf,
                           omega_tau_d: float = math.inf,
                           gamma_dimless: float = 0.0, beta_bar: float = 0.0,
                           ap_hw: float = 1.5e-33, omega: float = 1.0,
                           kernel: KernelSpec | None = None) -> "ModelParams":
        """Desk-scale constructor from the dimensionless decay times."""
        kappa = 0.0 if math.isinf(omega_tau_g) else 1.0 / (8.0 * ap_hw ** 2 * omega * omega_tau_g)
        tau_c = 0.0 if math.isinf(omega_tau_d) else 1.0 / (omega * omega_tau_d)
        return cls(omega=omega, gamma=gamma_dimless * omega, beta_bar=beta_bar,
                   kappa=kappa, tau_c=tau_c, ap_hw=ap_hw,
                   kernel=kernel if kernel is not None else KernelSpec())

    def with_kernel(self, kernel: KernelSpec) -> "ModelParams":
        return replace(self, kernel=kernel)


# -- cached operator builders -----------------------------------------------

@lru_cache(maxsize=32)
def _k_op(dim: int) -> np.ndarray:
    return fock.kinetic(dim)


@lru_cache(maxsize=32)
def _k2_op(dim: int) -> np.ndarray:
    k = fock.kinetic(dim)
    k2 = k @ k
    k2.setflags(write=False)
    return k2


@lru_cache(maxsize=32)
def _ladder(dim: int) -> np.ndarray:
    return fock.ladder(dim)


def rwa_levels(dim: int, beta_bar: float, ap_hw: float) -> np.ndarray:
    """Energy ladder E_n = (n + 1/2) + (3/8) ap_hw beta_bar (n² + n + 1/2)."""
    n = np.arange(dim, dtype=float)
    return (n + 0.5) + 0.375 * ap_hw * beta_bar * (n * n + n + 0.5)


def h_rwa(dim: int, beta_bar: float, ap_hw: float) -> np.ndarray:
    """Anharmonic oscillator Hamiltonian after the rotating wave approximation."""
    return np.diag(rwa_levels(dim, beta_bar, ap_hw)).astype(complex)


def h_full(dim: int, beta_bar: float, ap_hw: float) -> np.ndarray:
    """Deformed Hamiltonian without the RWA: N + 1/2 + 4 ap_hw beta_bar K²."""
    return (np.diag(np.arange(dim) + 0.5).astype(complex)
            + 4.0 * ap_hw * beta_bar * _k2_op(dim))


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def damping_rhs(rho: np.ndarray, gamma_dimless: float) -> np.ndarray:
    """Amplitude damping gamma (a rho a† - {N, rho}/2) in dimensionless time."""
    dim = rho.shape[0]
    a = _ladder(dim)
    n = np.arange(dim, dtype=float)
    anti = 0.5 * (n[:, None] + n[None, :]) * rho
    return gamma_dimless * (a @ rho @ a.conj().T - anti)


def gup_markov_rhs(rho: np.ndarray, params: ModelParams, *,
                   use_rwa_hamiltonian: bool = True) -> np.ndarray:
    """Markovian deformed-commutator master equation right-hand side.

    d rho / d(omega t) = -i [H', rho] - (1/(omega tau_G)) [K², [K², rho]],
    H' defaulting to the RWA Hamiltonian (the non-RWA variant is available
    behind the switch for overlay comparisons).
    """
    dim = rho.shape[0]
    build = h_rwa if use_rwa_hamiltonian else h_full
    h = build(dim, params.beta_bar, params.ap_hw)
    k2 = _k2_op(dim)
    out = -1j * _commutator(h, rho)
    c = params.gup_rate_dimless
    if c:
        out -= c * _commutator(k2, _commutator(k2, rho))
    return out


def breuer_rhs(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    """Metric-fluctuation master equation right-hand side.

    d rho / d(omega t) = -i [N, rho] - (tau_c omega / 2) [K, [K, rho]].
    """
    dim = rho.shape[0]
    n = np.arange(dim, dtype=float)
    out = -1j * (n[:, None] - n[None, :]) * rho
    c = params.breuer_rate_dimless
    if c:
        k = _k_op(dim)
        out = out - c * _commutator(k, _commutator(k, rho))
    return out


def heisenberg_k2(h_prime: np.ndarray, s: float) -> np.ndarray:
    """Interaction-picture K²(s) = exp(i H' s) K² exp(-i H' s).

    Computed via eigendecomposition of H'; shares the spectrum of K² for
    every s.
    """
    h_prime = np.asarray(h_prime)
    if np.max(np.abs(h_prime - h_prime.conj().T)) > 1e-10:
        raise ValueError("conjugation Hamiltonian must be Hermitian")
    dim = h_prime.shape[0]
    k2 = _k2_op(dim)
    evals, vecs = np.linalg.eigh(h_prime)
    m = vecs.conj().T @ k2 @ vecs
    phase = np.exp(1j * s * (evals[:, None] - evals[None, :]))
    return vecs @ (m * phase) @ vecs.conj().T


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def memory_operator(t: float, params: ModelParams, dim: int, *,
                    n_nodes: int = 64, window_taus: float = 8.0) -> np.ndarray:
    """Quadrature of the memory integral M(t) = ∫ f(t-t') K²ᴵ(t'-t) dt'.

    Gauss-Legendre over the last ``window_taus`` correlation times (the kernel
    is effectively zero beyond that).  Times are dimensionless.
    """
    if params.kernel.kind != "exponential":
        raise KernelRoutingError(
            "memory integral needs an exponential kernel; delta kernels route to gup_markov_rhs"
        )
    tau = params.kernel.tau * params.omega
    lo = max(0.0, t - window_taus * tau)
    if t <= lo:
        return np.zeros((dim, dim), dtype=complex)
    nodes, weights = _gauss_legendre(n_nodes)
    tp = 0.5 * (t - lo) * nodes + 0.5 * (t + lo)
    w = 0.5 * (t - lo) * weights
    f = params.kernel.f_dimless(t - tp, params.omega)

    levels = rwa_levels(dim, params.beta_bar, params.ap_hw)
    d_e = levels[:, None] - levels[None, :]
    k2 = _k2_op(dim)
    # K²ᴵ(s) for diagonal H_RWA is an elementwise phase twist of K².
    s = tp - t
    phases = np.exp(1j * np.multiply.outer(s, d_e))
    return np.einsum("q,qab->ab", w * f, phases * k2)


def gup_nonmarkov_rhs(rho: np.ndarray, t: float, params: ModelParams, *,
                      n_nodes: int = 64) -> np.ndarray:
    """Memory-kernel deformed-commutator right-hand side (time-convolutionless).

    d rho / d(omega t) = -i [H_RWA, rho]
                         - 2/(omega tau_G) [K², [M(t), rho]],
    with M(t) the kernel-weighted interaction-picture K² integral.  The state
    under the integral is rho(t) itself, so no history of rho enters.
    """
    dim = rho.shape[0]
    h = h_rwa(dim, params.beta_bar, params.ap_hw)
    out = -1j * _commutator(h, rho)
    c = 2.0 * params.gup_rate_dimless
    if c:
        m = memory_operator(t, params, dim, n_nodes=n_nodes)
        k2 = _k2_op(dim)
        out -= c * _commutator(k2, _commutator(m, rho))
    return out
