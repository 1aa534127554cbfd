"""Closed-form eigensystems used to cross-validate the numerical solver.

Two spectra admit analytic solutions of the restricted kernel eigenproblem:

* Lorentzian lines: eigenfunctions are sines and cosines whose wavenumbers
  C_n solve tan(C kappa T) = 2 C / (C^2 - 1); the transmissivities are
  lambda_n = eta_max / (1 + C_n^2).  Each root lies in a known bracket, so
  bisection on the pole-free form sin(C kappa T)(C^2 - 1) - 2 C cos(C kappa T)
  finds all of them reliably.

* Box spectra: eigenfunctions are the zeroth-order prolate spheroidal
  (Slepian) functions of c = Omega T / 2.  They are computed through the
  commuting differential operator d/dx[(1 - x^2) d/dx] - c^2 x^2, which is
  symmetric tridiagonal in the normalized Legendre basis with decoupled even
  and odd blocks; the kernel eigenvalues are then recovered as Rayleigh
  quotients of the sinc kernel, bypassing radial spheroidal functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NumericalError

#: residual tolerance for accepting a transcendental root
ROOT_RESIDUAL_TOL = 1e-12


def _char(C: float, kappa_T: float) -> float:
    """Pole-free form of the transcendental eigenvalue condition."""
    return math.sin(C * kappa_T) * (C * C - 1.0) - 2.0 * C * math.cos(C * kappa_T)


@dataclass(frozen=True)
class LorentzianEigensystem:
    """Roots, transmissivities and parities of the Lorentzian eigenproblem."""

    eta_max: float
    kappa: float
    T: float
    roots: np.ndarray        # C_n, ascending (lambda descending)
    lambdas: np.ndarray
    parities: tuple          # "even" (cosine) or "odd" (sine) per root

    @property
    def kappa_T(self) -> float:
        return self.kappa * self.T

    def residuals(self) -> np.ndarray:
        """|sin(C kT)(C^2-1) - 2C cos(C kT)| for every accepted root."""
        return np.array([abs(_char(c, self.kappa_T)) for c in self.roots])


def lorentzian_eigenvalues(eta_max: float, kappa: float, T: float, n_max: int) -> LorentzianEigensystem:
    """First ``n_max`` transmissivities of a Lorentzian line, analytically.

    Roots are bracketed in the intervals

        C in ((2n-1) pi / (2 kT), n pi / kT)   for 1 <= n < kT/pi + 1/2  (C < 1)
        C in (n pi / kT, (2n+1) pi / (2 kT))   for n > kT/pi - 1/2       (C > 1)

    and solved by bisection to 1e-13.  The boundary root C = 1 appears
    exactly when kT is an odd multiple of pi/2 (a channel opening).
    """
    if not 0.0 < eta_max <= 1.0:
        raise ValueError(f"eta_max must lie in (0, 1], got {eta_max}")
    if kappa <= 0.0 or T <= 0.0:
        raise ValueError("kappa and T must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    kT = kappa * T
    found: list[tuple[float, str]] = []

    def bisect(a: float, b: float) -> float | None:
        fa, fb = _char(a, kT), _char(b, kT)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb > 0.0:
            return None
        return brentq(lambda c: _char(c, kT), a, b, xtol=1e-13, rtol=8.9e-16)

    # C < 1 family: interval index n odd -> cosine, even -> sine
    n = 1
    while n < kT / np.pi + 0.5:
        a = (2 * n - 1) * np.pi / (2.0 * kT)
        b = min(n * np.pi / kT, 1.0)
        if a < b:
            c = bisect(a, b)
            if c is not None:
                found.append((c, "even" if n % 2 == 1 else "odd"))
        n += 1

    # boundary root C = 1 at channel openings, kT = (2m-1) pi / 2
    if abs(_char(1.0, kT)) < ROOT_RESIDUAL_TOL and all(abs(c - 1.0) > 1e-9 for c, _ in found):
        m = int(round(kT / np.pi + 0.5))
        found.append((1.0, "even" if m % 2 == 1 else "odd"))

    # C > 1 family: interval index n even -> cosine, odd -> sine
    n = max(0, math.floor(kT / np.pi - 0.5) + 1)
    guard = 0
    while len(found) < n_max + 1 and guard < 10 * (n_max + 4):
        a = max(n * np.pi / kT, 1.0)
        b = (2 * n + 1) * np.pi / (2.0 * kT)
        if a < b:
            c = bisect(a, b)
            if c is not None:
                found.append((c, "even" if n % 2 == 0 else "odd"))
        n += 1
        guard += 1

    found.sort(key=lambda rc: rc[0])
    found = found[:n_max]
    roots = np.array([c for c, _ in found])
    lambdas = eta_max / (1.0 + roots**2)
    parities = tuple(p for _, p in found)
    return LorentzianEigensystem(eta_max=eta_max, kappa=kappa, T=T,
                                 roots=roots, lambdas=lambdas, parities=parities)


def lorentzian_eigenfunction(system: LorentzianEigensystem, n: int, t):
    """Mode n (1-based, descending transmissivity) at time(s) t.

    Returns cos(C_n kappa t) or sin(C_n kappa t) per the parity of the root,
    normalized to unit norm on [-T/2, T/2].
    """
    if not 1 <= n <= len(system.roots):
        raise ValueError(f"mode index n={n} outside 1..{len(system.roots)}")
    t_arr = np.asarray(t, dtype=float)
    half = 0.5 * system.T
    if np.any(np.abs(t_arr) > half * (1.0 + 1e-12)):
        raise ValueError(f"|t| exceeds T/2 = {half}")
    c = system.roots[n - 1]
    ckt = c * system.kappa
    # integral of cos^2 / sin^2 over [-T/2, T/2]
    if ckt == 0.0:
        cross = system.T
    else:
        cross = math.sin(c * system.kappa_T) / ckt
    if system.parities[n - 1] == "even":
        norm = math.sqrt(0.5 * (system.T + cross))
        out = np.cos(ckt * t_arr) / norm
    else:
        norm = math.sqrt(0.5 * (system.T - cross))
        out = np.sin(ckt * t_arr) / norm
    return out if out.ndim else float(out)


def lorentzian_opening_times(eta_max: float, kappa: float, n_max: int) -> np.ndarray:
    """Durations at which channels 1..n_max reach transmissivity 1/2.

    The n-th eigenvalue crosses 1/2 when its root equals
    C* = sqrt(2 eta_max - 1), i.e. at kappa T = (n pi + atan(2C*/(C*^2-1)));
    for eta_max = 1 this reduces to (2n-1) pi / 2.
    """
    if not 0.5 < eta_max <= 1.0:
        return np.array([])  # no channel can ever open
    cstar = math.sqrt(2.0 * eta_max - 1.0)
    if cstar == 1.0:
        phase = -0.5 * math.pi
    else:
        phase = math.atan(2.0 * cstar / (cstar * cstar - 1.0))
    ns = np.arange(1, n_max + 1)
    return (ns * np.pi + phase) / (cstar * kappa)


@dataclass(frozen=True)
class SlepianEigensystem:
    """Prolate eigenvalues and eigenfunction samples for one bandwidth c."""

    c: float
    lambdas_s: np.ndarray    # kernel eigenvalues in (0, 1), descending
    psi: np.ndarray          # psi[i, n]: eigenfunction n at grid[i] on [-1, 1]
    grid: np.ndarray
    grid_weights: np.ndarray
    mu: np.ndarray           # achieved norms sqrt(int psi_n^2) on [-1, 1]
    residuals: np.ndarray    # weighted residual of the kernel eigenrelation

    @property
    def parities(self) -> np.ndarray:
        """Parity (-1)^n of each eigenfunction."""
        return np.array([1 if n % 2 == 0 else -1 for n in range(len(self.lambdas_s))])


def _prolate_blocks(c: float, basis_size: int):
    """Symmetric tridiagonal blocks of the prolate operator.

    In the orthonormal Legendre basis the operator
    -d/dx[(1 - x^2) d/dx] + c^2 x^2 has entries

        H[n, n]   = n(n+1) + c^2 [ (n+1)^2 / ((2n+1)(2n+3)) + n^2 / ((2n+1)(2n-1)) ]
        H[n, n+2] = c^2 (n+1)(n+2) / ((2n+3) sqrt((2n+1)(2n+5)))

    so even and odd degrees decouple into two tridiagonal problems.
    """
    n = np.arange(basis_size, dtype=float)
    diag = n * (n + 1) + c * c * ((n + 1) ** 2 / ((2 * n + 1) * (2 * n + 3))
                                  + n**2 / ((2 * n + 1) * (2 * n - 1.0)))
    off = c * c * (n + 1) * (n + 2) / ((2 * n + 3) * np.sqrt((2 * n + 1.0) * (2 * n + 5)))
    return diag, off


def slepian_eigensystem(c: float, n_max: int, grid: np.ndarray | None = None) -> SlepianEigensystem:
    """Zeroth-order prolate (Slepian) eigensystem for bandwidth parameter c.

    Returns modes 0..n_max with kernel eigenvalues recovered as Rayleigh
    quotients of sin(c(x - y)) / (pi (x - y)); the sign convention makes the
    largest-magnitude sample of each mode positive.  The Legendre basis is
    doubled until the weighted eigenrelation residual drops below 1e-8.
    """
    if c <= 0.0:
        raise ValueError(f"c must be positive, got {c}")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")

    basis = max(2 * (n_max + 1) + 30, int(math.ceil(2.0 * c)) + 40)
    n_quad = max(256, 4 * (n_max + 1) + 4 * int(math.ceil(c)) + 32)
    for _ in range(6):
        system = _slepian_attempt(c, n_max, basis, n_quad, grid)
        if float(np.max(system.residuals)) <= 1e-8:
            return system
        basis *= 2
        n_quad *= 2
    raise NumericalError(
        f"prolate basis did not converge for c={c}",
        estimate=float(np.max(system.residuals)),
    )


def _slepian_attempt(c, n_max, basis, n_quad, grid):
    modes = []
    for parity in (0, 1):
        diag, off = _prolate_blocks(c, 2 * basis)
        d = diag[parity::2][:basis]
        # H[n, n+2] couples degree n to n+2: within one parity block the
        # off-diagonal at block index k is off[2k + parity]
        e = off[parity::2][: basis - 1]
        vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, min(n_max, basis - 1)))
        for j in range(vals.shape[0]):
            modes.append((vals[j], parity, vecs[:, j]))
    modes.sort(key=lambda m: m[0])
    modes = modes[: n_max + 1]

    x, w = np.polynomial.legendre.leggauss(n_quad)
    psi = np.empty((n_quad, len(modes)))
    for k, (_, parity, coef) in enumerate(modes):
        degrees = parity + 2 * np.arange(len(coef))
        full = np.zeros(degrees[-1] + 1)
        full[degrees] = coef * np.sqrt(degrees + 0.5)  # orthonormal Legendre
        vals = np.polynomial.legendre.legval(x, full)
        i = int(np.argmax(np.abs(vals)))
        if vals[i] < 0:
            vals = -vals
        psi[:, k] = vals

    dx = x[:, None] - x[None, :]
    near = np.abs(dx) < 1e-12
    safe = np.where(near, 1.0, dx)
    kernel = np.where(near, c / np.pi, np.sin(c * safe) / (np.pi * safe))

    lambdas = np.empty(len(modes))
    residuals = np.empty(len(modes))
    mu = np.empty(len(modes))
    for k in range(len(modes)):
        u = w * psi[:, k]
        ku = kernel @ u
        norm2 = float(u @ psi[:, k])
        lam = float(u @ ku) / norm2
        lambdas[k] = lam
        mu[k] = math.sqrt(norm2)
        residuals[k] = math.sqrt(float(w @ (ku - lam * psi[:, k]) ** 2))

    if grid is not None:
        out_psi = np.empty((len(grid), len(modes)))
        for k, (_, parity, coef) in enumerate(modes):
            degrees = parity + 2 * np.arange(len(coef))
            full = np.zeros(degrees[-1] + 1)
            full[degrees] = coef * np.sqrt(degrees + 0.5)
            vals = np.polynomial.legendre.legval(np.asarray(grid, dtype=float), full)
            ref = np.polynomial.legendre.legval(x, full)
            i = int(np.argmax(np.abs(ref)))
            if ref[i] < 0:
                vals = -vals
            out_psi[:, k] = vals
        psi_out, grid_out, w_out = out_psi, np.asarray(grid, dtype=float), None
    else:
        psi_out, grid_out, w_out = psi, x, w

    return SlepianEigensystem(c=c, lambdas_s=lambdas, psi=psi_out, grid=grid_out,
                              grid_weights=w_out if w_out is not None else np.array([]),
                              mu=mu, residuals=residuals)
