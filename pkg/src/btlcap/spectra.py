"""Transmission spectra eta(omega) and their time-domain kernels.

A spectrum assigns every angular frequency a transmissivity in [0, 1].  Four
kinds are supported: Lorentzian cavity lines, flat boxes of finite support,
the three-mode transducer chain, and tabulated data.  Each kind evaluates
both eta(omega) and the kernel

    ker(t) = (1/2pi) * integral eta(omega) exp(i omega t) d omega,

which is real for even spectra.  Lorentzian and box kernels have closed
forms; the others fall back to weighted oscillatory quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import sici

from .errors import ExtrapolationError, NumericalError, SpectrumError

# Tolerated numerical overshoot above eta = 1 before a spec is rejected.
ETA_OVERSHOOT_TOL = 1e-12
# Spectrum value below which the tail is ignored by frequency cutoffs.
EPS_CUT = 1e-10
# Default accuracy target for numerical kernel transforms.
KERNEL_QUAD_TOL = 1e-10


class Spectrum:
    """Common interface of all transmission spectra.

    Instances are immutable after validation; every method is a pure
    function, safe for concurrent use.
    """

    #: natural angular-frequency scale of the spectrum (kappa, Omega, g, ...)
    rate_scale: float = 1.0
    #: True when eta(-omega) == eta(omega); all built-in kinds are even
    is_even: bool = True

    def eta(self, omega):
        """Transmissivity at angular frequency ``omega`` (scalar or array)."""
        raise NotImplementedError

    def kernel(self, t, method: str = "auto"):
        """Time-domain kernel value ker(t).

        ``method`` is "auto" (closed form when available), "closed-form", or
        "quadrature".  Complex only for non-even tabulated spectra.
        """
        if method == "closed-form":
            raise SpectrumError(f"{type(self).__name__} has no closed-form kernel")
        return kernel_by_quadrature(self, t)

    def kernel_antiderivative(self, x):
        """integral_0^x ker(u) du when a closed form exists, else None."""
        return None

    def eta_sup(self) -> float:
        """Supremum of eta over a dense probe grid."""
        return float(np.max(self.eta(self._probe_grid())))

    def omega_cutoff(self, eps: float = EPS_CUT) -> float:
        """Smallest probed frequency beyond which eta stays below ``eps``."""
        return tail_cutoff(self, eps)

    def support_bound(self) -> float | None:
        """Finite support half-width when the spectrum has compact support."""
        return None

    def _probe_grid(self) -> np.ndarray:
        w = 8.0 * self.rate_scale
        return np.linspace(-w, w, 2049)

    def _validate_probe(self) -> None:
        grid = self._probe_grid()
        vals = np.asarray(self.eta(grid), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise SpectrumError("eta(omega) is not finite on the probe grid")
        if np.any(vals < -ETA_OVERSHOOT_TOL) or np.any(vals > 1.0 + ETA_OVERSHOOT_TOL):
            raise SpectrumError(
                f"eta(omega) leaves [0, 1] on the probe grid "
                f"(min {vals.min():.3e}, max {vals.max():.3e})"
            )
        if self.is_even:
            asym = np.max(np.abs(vals - vals[::-1]))
            if asym > 1e-11:
                raise SpectrumError(f"eta(omega) is not even (max asymmetry {asym:.3e})")


@dataclass(frozen=True)
class Lorentzian(Spectrum):
    """eta(omega) = eta_max * kappa^2 / (omega^2 + kappa^2)."""

    eta_max: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_max <= 1.0:
            raise SpectrumError(f"eta_max must lie in [0, 1], got {self.eta_max}")
        if self.kappa <= 0.0:
            raise SpectrumError(f"kappa must be positive, got {self.kappa}")

    @property
    def rate_scale(self) -> float:
        return self.kappa

    def eta(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.eta_max * self.kappa**2 / (omega**2 + self.kappa**2)
        return out if out.ndim else float(out)

    def eta_sup(self) -> float:
        return self.eta_max

    def kernel(self, t, method: str = "auto"):
        if method == "quadrature":
            return kernel_by_quadrature(self, t)
        t = np.asarray(t, dtype=float)
        out = self.eta_max * 0.5 * self.kappa * np.exp(-self.kappa * np.abs(t))
        return out if out.ndim else float(out)

    def kernel_antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.5 * self.eta_max * (1.0 - np.exp(-self.kappa * x))
        return out if out.ndim else float(out)

    def omega_cutoff(self, eps: float = EPS_CUT) -> float:
        if self.eta_max <= eps:
            return self.kappa
        return self.kappa * math.sqrt(self.eta_max / eps)


@dataclass(frozen=True)
class Box(Spectrum):
    """eta(omega) = eta_bar on [-Omega, Omega] and 0 outside."""

    eta_bar: float = 1.0
    omega_half_width: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_bar <= 1.0:
            raise SpectrumError(f"eta_bar must lie in [0, 1], got {self.eta_bar}")
        if self.omega_half_width <= 0.0:
            raise SpectrumError(
                f"omega_half_width must be positive, got {self.omega_half_width}"
            )

    @property
    def rate_scale(self) -> float:
        return self.omega_half_width

    def eta(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.where(np.abs(omega) <= self.omega_half_width, self.eta_bar, 0.0)
        return out if out.ndim else float(out)

    def eta_sup(self) -> float:
        return self.eta_bar

    def kernel(self, t, method: str = "auto"):
        if method == "quadrature":
            return kernel_by_quadrature(self, t)
        t = np.asarray(t, dtype=float)
        om = self.omega_half_width
        small = np.abs(t) < 1e-300
        safe = np.where(small, 1.0, t)
        out = np.where(small, self.eta_bar * om / np.pi,
                       self.eta_bar * np.sin(om * safe) / (np.pi * safe))
        return out if out.ndim else float(out)

    def kernel_antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        out = (self.eta_bar / np.pi) * sici(self.omega_half_width * x)[0]
        return out if out.ndim else float(out)

    def omega_cutoff(self, eps: float = EPS_CUT) -> float:
        return self.omega_half_width

    def support_bound(self) -> float:
        return self.omega_half_width


@dataclass(frozen=True)
class Transducer(Spectrum):
    """Three-mode chain (two cavities bridged by a mechanical mode).

    eta(omega) = |sqrt(kappa_a1 kappa_a2) g^2 / D(omega)|^2 with

        D(omega) = chi_a1 * chi_b * chi_a2 + g^2 (chi_a1 + chi_a2),
        chi_c    = i omega + kappa_c / 2,

    the determinant of the chain's dynamical matrix expanded in closed form.
    """

    g: float = 1.0
    kappa_a1: float = 1.0
    kappa_a2: float = 1.0
    kappa_b: float = 0.1

    def __post_init__(self):
        if self.g <= 0.0:
            raise SpectrumError(f"g must be positive, got {self.g}")
        for name in ("kappa_a1", "kappa_a2", "kappa_b"):
            if getattr(self, name) < 0.0:
                raise SpectrumError(f"{name} must be nonnegative, got {getattr(self, name)}")
        self._validate_probe()

    @property
    def rate_scale(self) -> float:
        return self.g

    def eta(self, omega):
        omega = np.asarray(omega, dtype=float)
        c1 = 1j * omega + 0.5 * self.kappa_a1
        cb = 1j * omega + 0.5 * self.kappa_b
        c2 = 1j * omega + 0.5 * self.kappa_a2
        det = c1 * cb * c2 + self.g**2 * (c1 + c2)
        out = np.abs(math.sqrt(self.kappa_a1 * self.kappa_a2) * self.g**2 / det) ** 2
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class Tabulated(Spectrum):
    """Spectrum interpolated from (omega, eta) samples.

    Interpolation is monotone piecewise cubic, clamped to [0, 1] so that no
    overshoot can create unphysical transmissivities.  Evaluating outside
    the sample range raises ExtrapolationError; kernel integrals treat the
    spectrum as zero outside the range.  Non-even sample sets are accepted
    and produce a complex Hermitian kernel.
    """

    omegas: np.ndarray
    etas: np.ndarray
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)
    _even: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        et = np.asarray(self.etas, dtype=float)
        if om.ndim != 1 or om.shape != et.shape or om.size < 2:
            raise SpectrumError("tabulated spectrum needs matching 1-d arrays, >= 2 samples")
        if not np.all(np.isfinite(om)) or not np.all(np.isfinite(et)):
            raise SpectrumError("tabulated samples must be finite")
        if np.any(np.diff(om) <= 0.0):
            raise SpectrumError("tabulated omegas must be strictly increasing")
        if np.any(et < -ETA_OVERSHOOT_TOL) or np.any(et > 1.0 + ETA_OVERSHOOT_TOL):
            raise SpectrumError("tabulated eta samples leave [0, 1]")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "etas", np.clip(et, 0.0, 1.0))
        object.__setattr__(self, "_interp", PchipInterpolator(om, self.etas, extrapolate=False))
        object.__setattr__(self, "_even", self._check_even())

    def _check_even(self) -> bool:
        lo, hi = self.omegas[0], self.omegas[-1]
        if not (lo < 0.0 < hi):
            return False
        w = min(-lo, hi)
        probe = np.linspace(0.0, w, 513)
        return bool(np.max(np.abs(self._eval(probe) - self._eval(-probe))) <= 1e-11)

    @property
    def is_even(self) -> bool:
        return self._even

    @property
    def rate_scale(self) -> float:
        return 0.5 * float(self.omegas[-1] - self.omegas[0])

    def _eval(self, omega):
        return np.clip(self._interp(omega), 0.0, 1.0)

    def eta(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < self.omegas[0]) or np.any(omega > self.omegas[-1]):
            raise ExtrapolationError(
                f"omega outside tabulated range [{self.omegas[0]}, {self.omegas[-1]}]"
            )
        out = self._eval(omega)
        return out if out.ndim else float(out)

    def eta_sup(self) -> float:
        probe = np.linspace(self.omegas[0], self.omegas[-1], 4097)
        return float(np.max(self._eval(probe)))

    def _probe_grid(self) -> np.ndarray:
        return np.linspace(self.omegas[0], self.omegas[-1], 2049)

    def omega_cutoff(self, eps: float = EPS_CUT) -> float:
        return float(max(abs(self.omegas[0]), abs(self.omegas[-1])))

    def support_bound(self) -> float:
        return self.omega_cutoff()


def load_tabulated(path) -> Tabulated:
    """Load a tabulated spectrum from a two-column text file.

    Columns are whitespace-delimited (omega, eta); '#' starts a comment.
    """
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise SpectrumError(f"{path}: expected two columns (omega, eta), got {data.shape[1]}")
    return Tabulated(omegas=data[:, 0], etas=data[:, 1])


def eval_transmissivity(spec: Spectrum, omega):
    """eta(omega) for a validated spectrum."""
    return spec.eta(omega)


def kernel_value(spec: Spectrum, t, method: str = "auto"):
    """Kernel ker(t) = (1/2pi) integral eta(omega) exp(i omega t) d omega."""
    return spec.kernel(t, method=method)


def tail_cutoff(spec: Spectrum, eps: float = EPS_CUT, start: float | None = None) -> float:
    """Doubling search for a frequency beyond which eta stays below ``eps``.

    The candidate window [W, 16 W] is probed on a log grid; W doubles until
    every probe falls below ``eps``.
    """
    support = spec.support_bound()
    if support is not None:
        return support
    w = start if start is not None else spec.rate_scale
    for _ in range(200):
        probe = np.geomspace(w, 16.0 * w, 64)
        if np.all(spec.eta(probe) < eps):
            return float(w)
        w *= 2.0
    raise NumericalError(f"no frequency cutoff found below eta < {eps}")


def _split_even_odd(spec: Spectrum):
    """Half-line integrands for the even and odd parts of eta."""
    if isinstance(spec, Tabulated):
        lo, hi = spec.omegas[0], spec.omegas[-1]

        def val(w):
            arr = np.atleast_1d(np.asarray(w, dtype=float))
            inside = (arr >= lo) & (arr <= hi)
            out = np.zeros_like(arr)
            if inside.any():
                out[inside] = spec._eval(arr[inside])
            return out if np.asarray(w).ndim else float(out[0])

        even = lambda w: 0.5 * (val(w) + val(-np.asarray(w, dtype=float)))
        odd = lambda w: 0.5 * (val(w) - val(-np.asarray(w, dtype=float)))
        return even, odd, float(max(abs(lo), abs(hi)))
    return spec.eta, None, None


def kernel_by_quadrature(spec: Spectrum, t, tol: float = KERNEL_QUAD_TOL):
    """Kernel via weighted oscillatory quadrature of the spectrum.

    Uses the QUADPACK cosine/sine-weighted rules, which partition the
    integral at the oscillation half-periods and accelerate the panel sums;
    semi-infinite tails are handled by the Fourier-integral variant.
    Raises NumericalError when the reported error estimate exceeds ``tol``.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    even, odd, finite_sup = _split_even_odd(spec)
    if finite_sup is None:
        finite_sup = spec.support_bound()
    complex_out = odd is not None and not spec.is_even

    # eta is real, so ker(-t) = conj(ker(t)); only |t| is ever integrated
    out = np.empty(t_arr.shape, dtype=complex if complex_out else float)
    flat = out.ravel()
    for i, ti in enumerate(t_arr.ravel()):
        re = _cos_transform(even, abs(ti), finite_sup, tol) / np.pi
        if complex_out:
            im = _sin_transform(odd, abs(ti), finite_sup, tol) / np.pi
            flat[i] = re + 1j * im if ti >= 0 else re - 1j * im
        else:
            flat[i] = re
    return out if np.asarray(t).ndim else flat[0]


def _cos_transform(f, t: float, finite_sup, tol: float) -> float:
    """integral_0^inf f(w) cos(w t) dw with error control."""
    if t == 0.0:
        if finite_sup is not None:
            val, err = quad(f, 0.0, finite_sup, epsabs=0.1 * tol, epsrel=1e-12, limit=400)
        else:
            val, err = quad(f, 0.0, np.inf, epsabs=0.1 * tol, epsrel=1e-12, limit=400)
    elif finite_sup is not None:
        cycles = max(50, int(finite_sup * t / np.pi) + 10)
        val, err = quad(f, 0.0, finite_sup, weight="cos", wvar=t,
                        epsabs=0.1 * tol, epsrel=1e-12, limit=cycles)
    else:
        val, err = quad(f, 0.0, np.inf, weight="cos", wvar=t,
                        epsabs=0.1 * tol, limlst=200, limit=400)
    if err > tol:
        raise NumericalError(
            f"kernel quadrature did not converge at t={t} (error {err:.2e})",
            estimate=err,
        )
    return val


def _sin_transform(f, t: float, finite_sup, tol: float) -> float:
    """integral_0^inf f(w) sin(w t) dw with error control."""
    if t == 0.0:
        return 0.0
    if finite_sup is not None:
        cycles = max(50, int(finite_sup * t / np.pi) + 10)
        val, err = quad(f, 0.0, finite_sup, weight="sin", wvar=t,
                        epsabs=0.1 * tol, epsrel=1e-12, limit=cycles)
    else:
        val, err = quad(f, 0.0, np.inf, weight="sin", wvar=t,
                        epsabs=0.1 * tol, limlst=200, limit=400)
    if err > tol:
        raise NumericalError(
            f"kernel quadrature did not converge at t={t} (error {err:.2e})",
            estimate=err,
        )
    return val
