"""Truncated-Fock-space operator algebra for a single bosonic mode.

Operators and density matrices are plain complex numpy arrays on the number
basis |0>, ..., |dim-1>, in dimensionless units hbar = omega = 1.  Energies
are in units of hbar*omega and the quadratures are scaled so that the vacuum
variance is 1/2 at every angle.

Arrays returned by the builders are marked read-only: operators are immutable
values and safe to share across parallel workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre

from .exceptions import InvalidDimensionError, TruncationWarning

__all__ = [
    "ladder",
    "number_op",
    "kinetic",
    "quadrature",
    "fock_state",
    "superposition01",
    "density",
    "validate_density_matrix",
    "trace_distance",
    "WignerGrid",
    "wigner",
    "position_density",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def ladder(dim: int) -> np.ndarray:
    """Annihilation operator a with <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise InvalidDimensionError(f"ladder operator needs dim >= 2, got {dim}")
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return _frozen(a)


def number_op(dim: int) -> np.ndarray:
    """Number operator N = a†a."""
    if dim < 2:
        raise InvalidDimensionError(f"number operator needs dim >= 2, got {dim}")
    return _frozen(np.diag(np.arange(dim, dtype=float)).astype(complex))


def kinetic(dim: int) -> np.ndarray:
    """Kinetic energy K in units hbar*omega: K = (2N + 1 - a†² - a²)/4.

    The a² term needs at least three levels, hence dim >= 3.
    """
    if dim < 3:
        raise InvalidDimensionError(f"kinetic operator needs dim >= 3, got {dim}")
    a = ladder(dim)
    ad = a.conj().T
    k = 0.25 * (2.0 * number_op(dim) + np.eye(dim) - ad @ ad - a @ a)
    return _frozen(k)


def quadrature(theta: float, dim: int) -> np.ndarray:
    """Rotated quadrature x_theta = (a e^{-i theta} + a† e^{i theta})/sqrt(2).

    theta = 0 is position, theta = pi/2 momentum; vacuum variance is 1/2 for
    every theta.
    """
    a = ladder(dim)
    x = (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2.0)
    return _frozen(x)


def fock_state(n: int, dim: int) -> np.ndarray:
    """Number state |n> as a ket vector."""
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"fock level {n} outside basis of size {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return _frozen(psi)


def superposition01(dim: int) -> np.ndarray:
    """The Ramsey state (|0> + |1>)/sqrt(2)."""
    psi = np.zeros(dim, dtype=complex)
    psi[0] = psi[1] = 1.0 / math.sqrt(2.0)
    return _frozen(psi)


def density(psi: np.ndarray) -> np.ndarray:
    """Pure-state density matrix |psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    return _frozen(np.outer(psi, psi.conj()))


def validate_density_matrix(rho: np.ndarray, *, trace_tol: float = 1e-9,
                            herm_tol: float = 1e-9, eig_tol: float = 1e-7) -> None:
    """Raise ValueError unless rho is unit-trace, Hermitian and positive.

    Positivity is enforced only up to -eig_tol to accommodate integrator noise.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
        raise InvalidDimensionError(f"density matrix must be square with dim >= 2, got {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr} deviates from 1 beyond {trace_tol}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian within tolerance")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -eig_tol:
        raise ValueError(f"smallest eigenvalue {lo} below -{eig_tol}")


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Trace distance (1/2)||rho - sigma||_1 between two Hermitian matrices."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


@dataclass(frozen=True)
class WignerGrid:
    """Sampled Wigner function on a rectangular phase-space grid.

    Quadrature units: vacuum variance 1/2, so the vacuum peak is W(0,0)=1/pi
    and the discrete integral of ``values`` times the cell area is ~1 for
    states well contained in the grid.
    """

    x: np.ndarray          # (nx,) position samples
    p: np.ndarray          # (np,) momentum samples
    values: np.ndarray     # (nx, np) real
    captured_mass: float   # discrete integral of values over the grid

    def to_csv(self, path) -> None:
        """Write `x,p,w` rows, row-major over the grid."""
        with open(path, "w") as fh:
            fh.write("x,p,w\n")
            for i, xi in enumerate(self.x):
                for j, pj in enumerate(self.p):
                    fh.write(f"{xi:.12g},{pj:.12g},{self.values[i, j]:.12g}\n")


def wigner(rho: np.ndarray, x: np.ndarray, p: np.ndarray, *,
           mass_floor: float = 0.98) -> WignerGrid:
    """Wigner function of rho via the displaced-parity Laguerre series.

    Exact (to floating point) for a truncated density matrix; no FFT grid
    artifacts.  Normalization: integral of W over dx dp is 1 and the vacuum
    gives W(0,0) = 1/pi.  Warns with a TruncationWarning when the grid
    captures less than ``mass_floor`` of the state.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    alpha = (x[:, None] + 1j * p[None, :]) / math.sqrt(2.0)
    aa4 = 4.0 * np.abs(alpha) ** 2
    gauss = np.exp(-0.5 * aa4)

    # W_{|j><k|}(x,p) for k <= j; k > j entries follow by conjugation.
    w = np.zeros_like(alpha, dtype=complex)
    lnfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    for k in range(dim):
        for j in range(k, dim):
            r = rho[j, k]
            if j > k:
                r = r + np.conj(rho[k, j])  # conjugate partner |k><j|
            elif abs(rho[j, k]) == 0.0:
                continue
            if abs(r) == 0.0:
                continue
            pref = (-1) ** k * math.exp(0.5 * (lnfact[k] - lnfact[j]))
            poly = eval_genlaguerre(k, j - k, aa4)
            base = pref * (2.0 * alpha) ** (j - k) * gauss * poly / math.pi
            if j > k:
                w += np.real(r * base)  # r*base + conj pair collapse to twice the real part
            else:
                w += np.real(r) * base
    values = np.real(w)

    dx = x[1] - x[0] if len(x) > 1 else 1.0
    dp = p[1] - p[0] if len(p) > 1 else 1.0
    mass = float(np.sum(values) * dx * dp)
    if mass < mass_floor:
        warnings.warn(
            TruncationWarning(
                f"Wigner grid captures only {mass:.4f} of the state", captured_mass=mass
            )
        )
    return WignerGrid(x=_frozen(x.copy()), p=_frozen(p.copy()),
                      values=_frozen(values), captured_mass=mass)


def position_density(rho: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Position distribution <x|rho|x> from Hermite-function wavefunctions.

    Uses the same quadrature units as ``wigner`` (vacuum variance 1/2); serves
    as an independent check of the Wigner marginal.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    x = np.asarray(x, dtype=float)
    psi = np.zeros((dim, len(x)))
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    if dim > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(2, dim):
        psi[n] = (math.sqrt(2.0 / n) * x * psi[n - 1]
                  - math.sqrt((n - 1) / n) * psi[n - 2])
    return np.real(np.einsum("mx,mn,nx->x", psi, rho, psi))
