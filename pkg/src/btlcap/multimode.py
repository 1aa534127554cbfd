"""Scattering analysis of explicit finite mode sets.

Given orthonormal input profiles and orthonormal readout profiles, the
channel acts as a finite scattering matrix S with S[l, k] = <g_k, h_l>,
where g_k is the transmitted image of input k.  Singular values of S give
the per-channel transmissivities of that (input, readout) pairing; the Gram
matrix M[i, j] = <g_i, g_j> gives the transmissivities of the best possible
readout, and its eigenbasis realizes them.  Sorted sigma_k^2 can never
exceed sorted lambda_k (Cauchy interlacing), which this module also
exercises as a randomized check.

Inner products are evaluated on a panelled Gauss-Legendre frequency grid
dense enough for the slowly decaying spectral tails of time-limited
profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, qr, svdvals

from .capacity import pure_loss_capacity
from .errors import DimensionError, NumericalError
from .modes import ModeBasis
from .spectra import Spectrum

_ORTHO_TOL = 1e-10
#: transmitted-profile norm below which an optimal readout is undefined
_DROP_TOL = 1e-12


@dataclass(frozen=True)
class ModeSet:
    """Orthonormal profiles sampled on one quadrature grid.

    ``domain`` is "time" for profiles supported on [-T/2, T/2] or
    "frequency" for profiles given directly on a frequency grid (readouts
    need not be time-limited).  profiles[i, k] is mode k at grid[i];
    orthonormality in the weighted inner product is validated on
    construction.
    """

    grid: np.ndarray
    weights: np.ndarray
    profiles: np.ndarray
    domain: str = "time"

    def __post_init__(self):
        if self.domain not in ("time", "frequency"):
            raise ValueError(f"domain must be 'time' or 'frequency', got {self.domain!r}")
        if self.profiles.ndim != 2 or self.profiles.shape[0] != len(self.grid):
            raise DimensionError("profiles must be (n_grid, K)")
        if self.size == 0:
            return
        gram = self.profiles.conj().T @ (self.weights[:, None] * self.profiles)
        dev = np.max(np.abs(gram - np.eye(self.size)))
        if dev > _ORTHO_TOL:
            raise DimensionError(f"mode set is not orthonormal (deviation {dev:.3e})")

    @property
    def size(self) -> int:
        return self.profiles.shape[1]

    @classmethod
    def from_basis(cls, basis: ModeBasis, k: int) -> "ModeSet":
        """First k optimal modes of a solved basis as a time-domain set."""
        if not 1 <= k <= basis.profiles.shape[1]:
            raise ValueError(f"k={k} outside 1..{basis.profiles.shape[1]}")
        return cls(grid=basis.grid, weights=basis.weights,
                   profiles=basis.profiles[:, :k], domain="time")

    @classmethod
    def random_orthonormal(cls, grid, weights, k: int, rng, domain: str = "time") -> "ModeSet":
        """Random orthonormal set from a seeded generator (for property checks)."""
        raw = rng.standard_normal((len(grid), k))
        return cls(grid=np.asarray(grid), weights=np.asarray(weights),
                   profiles=orthonormalize(raw, np.asarray(weights)), domain=domain)


def orthonormalize(vectors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Orthonormalize columns in the weighted inner product (QR based)."""
    sw = np.sqrt(weights)[:, None]
    q, r = qr(sw * vectors, mode="economic")
    if min(abs(np.diag(r))) < 1e-12 * max(abs(np.diag(r))):
        raise DimensionError("vectors are numerically dependent")
    return q / sw


def frequency_grid(spec: Spectrum, t_extent: float, tail_eps: float = 1e-9,
                   max_omega: float | None = None):
    """Full-line panelled Gauss-Legendre rule for profile inner products.

    Panel width resolves both the spectrum (scale/8) and the sinc-like
    oscillations of duration-``t_extent`` profiles (pi / 2 t_extent); the
    range extends until the spectral tail cannot move inner products at the
    ``tail_eps`` level (profile tail mass decays like 1/omega on top of
    eta).  ``max_omega`` additionally caps the range at the band the
    caller's time discretization can transform faithfully.
    """
    support = spec.support_bound()
    if support is not None:
        w_max = support
    else:
        w = spec.rate_scale
        for _ in range(200):
            probe = np.geomspace(w, 16.0 * w, 64)
            if np.all(spec.eta(probe) * np.minimum(1.0, 1.0 / probe) < tail_eps):
                break
            w *= 2.0
        else:
            raise NumericalError("no inner-product cutoff found")
        w_max = w
    if max_omega is not None:
        w_max = min(w_max, max_omega)
    width = min(np.pi / (2.0 * max(t_extent, 1e-12)), spec.rate_scale / 8.0)
    n_panels = max(8, int(math.ceil(w_max / width)))
    if n_panels > 2_000_000:
        raise NumericalError("inner-product grid would need too many panels")
    edges = np.linspace(0.0, w_max, n_panels + 1)
    x, w8 = np.polynomial.legendre.leggauss(8)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    om_half = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wq_half = (half[:, None] * w8[None, :]).ravel()
    om = np.concatenate([-om_half[::-1], om_half])
    wq = np.concatenate([wq_half[::-1], wq_half])
    return om, wq


def to_frequency(modeset: ModeSet, om: np.ndarray, wq: np.ndarray) -> np.ndarray:
    """Transform a time-domain set onto a frequency grid.

    Returns profile samples F[q, k] = (1/sqrt(2 pi)) sum_i w_i f_k(t_i)
    exp(-i om_q t_i); frequency-domain sets must already live on (om, wq).
    The transform is evaluated in row blocks to bound memory on wide grids.
    """
    if modeset.domain == "frequency":
        if len(modeset.grid) != len(om) or not np.allclose(modeset.grid, om):
            raise DimensionError("frequency-domain mode set is on a different grid")
        return modeset.profiles
    wf = modeset.weights[:, None] * modeset.profiles
    out = np.empty((len(om), modeset.size), dtype=complex)
    block = 8192
    for lo in range(0, len(om), block):
        hi = min(lo + block, len(om))
        phase = np.exp(-1j * np.outer(om[lo:hi], modeset.grid))
        out[lo:hi] = phase @ wf
    return out / math.sqrt(2.0 * np.pi)


def _shared_time_extent(*sets: ModeSet) -> float:
    spans = [float(np.max(np.abs(s.grid))) for s in sets if s.domain == "time"]
    return 2.0 * max(spans) if spans else 1.0


def _grid_for(spec: Spectrum, *sets: ModeSet):
    """Frequency rule sized to the sets' duration and transform bandwidth.

    An n-node rule on extent T transforms phases up to omega T ~ pi n
    faithfully; beyond that the discrete transform aliases, so the grid is
    capped at 80% of that band.
    """
    t_extent = _shared_time_extent(*sets)
    caps = [0.8 * np.pi * len(s.grid) / t_extent for s in sets if s.domain == "time"]
    return frequency_grid(spec, t_extent, max_omega=min(caps) if caps else None)


def scattering_matrix(inputs: ModeSet, readouts: ModeSet, spec: Spectrum,
                      grid=None) -> np.ndarray:
    """S[l, k] = <g_k, h_l> with g_k the transmitted image of input k.

    The transmission phase is fixed to the real branch tau = sqrt(eta), so
    g_k(omega) = sqrt(eta(omega)) f_k(omega).  ``grid`` may carry a
    precomputed (om, wq) pair.
    """
    om, wq = grid if grid is not None else _grid_for(spec, inputs, readouts)
    F = to_frequency(inputs, om, wq)
    H = to_frequency(readouts, om, wq)
    eta = _eta_on_grid(spec, om)
    # S[l, k] = sum_q wq sqrt(eta_q) conj(F[q, k]) H[q, l]
    return H.T @ ((wq * np.sqrt(eta))[:, None] * F.conj())


def _eta_on_grid(spec: Spectrum, om: np.ndarray) -> np.ndarray:
    if hasattr(spec, "omegas"):
        lo, hi = float(spec.omegas[0]), float(spec.omegas[-1])
        inside = (om >= lo) & (om <= hi)
        out = np.zeros_like(om)
        if inside.any():
            out[inside] = spec.eta(om[inside])
        return out
    return np.asarray(spec.eta(om), dtype=float)


@dataclass(frozen=True)
class ScatteringAnalysis:
    """Scattering matrix with its singular values, Gram spectrum and capacity."""

    S: np.ndarray
    singular_values: np.ndarray     # descending
    gram_eigenvalues: np.ndarray    # descending
    capacity: float                 # qubits per use, sum_k q(sigma_k^2)
    seed: int | None = None

    def __post_init__(self):
        s = self.singular_values
        lam = self.gram_eigenvalues
        if np.any(s < -1e-12) or np.any(s > 1.0 + 1e-9):
            raise NumericalError(f"singular values leave [0, 1]: {s}")
        if np.any(lam < -1e-12) or np.any(lam > 1.0 + 1e-9):
            raise NumericalError(f"Gram eigenvalues leave [0, 1]: {lam}")
        k = min(len(s), len(lam))
        if np.any(s[:k] ** 2 > lam[:k] + 1e-9):
            raise NumericalError("sigma_k^2 exceeds lambda_k; readout cannot beat the Gram bound")

    def to_json(self, path) -> None:
        payload = {
            "S_real": np.real(self.S).tolist(),
            "S_imag": np.imag(self.S).tolist(),
            "singular_values": self.singular_values.tolist(),
            "gram_eigenvalues": self.gram_eigenvalues.tolist(),
            "capacity": self.capacity,
            "seed": self.seed,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def gram_matrix(inputs: ModeSet, spec: Spectrum, grid=None) -> np.ndarray:
    """M[i, j] = <g_i, g_j> of the transmitted input profiles (Hermitian PSD)."""
    om, wq = grid if grid is not None else _grid_for(spec, inputs)
    F = to_frequency(inputs, om, wq)
    eta = _eta_on_grid(spec, om)
    weighted = (wq * eta)[:, None]
    return F.conj().T @ (weighted * F)


def analyze_scattering(inputs: ModeSet, readouts: ModeSet, spec: Spectrum,
                       seed: int | None = None) -> ScatteringAnalysis:
    """Assemble a ScatteringAnalysis for one (input, readout) pairing."""
    om, wq = _grid_for(spec, inputs, readouts)
    S = scattering_matrix(inputs, readouts, spec, grid=(om, wq))
    sigmas = np.sort(svdvals(S))[::-1]
    M = gram_matrix(inputs, spec, grid=(om, wq))
    lams = np.sort(np.real(eigh(M, eigvals_only=True)))[::-1]
    sigmas = np.clip(sigmas, 0.0, None)
    cap = multimode_capacity_from_singular_values(sigmas)
    return ScatteringAnalysis(S=S, singular_values=sigmas,
                              gram_eigenvalues=np.clip(lams, 0.0, None),
                              capacity=cap, seed=seed)


def multimode_capacity_from_singular_values(sigmas) -> float:
    return float(sum(pure_loss_capacity(min(float(s) ** 2, 1.0)) for s in np.asarray(sigmas)))


def multimode_capacity(analysis: ScatteringAnalysis) -> float:
    """Qubits per use of the analyzed pairing: sum_k q(sigma_k^2)."""
    return multimode_capacity_from_singular_values(analysis.singular_values)


@dataclass(frozen=True)
class OptimalReadout:
    """Gram-diagonalizing rotation with its readout set and transmissivities."""

    rotated_inputs: ModeSet
    readouts: ModeSet               # frequency-domain, one per kept mode
    lambdas: np.ndarray             # descending, all modes
    dropped: tuple                  # 1-based indices with negligible output


def optimal_readout(inputs: ModeSet, spec: Spectrum) -> OptimalReadout:
    """Rotate inputs so transmitted profiles are orthogonal; readouts match.

    Diagonalizes the Gram matrix M = U diag(lambda) U^H, rotates the input
    profiles by U, and normalizes each transmitted profile into a readout.
    Output orthogonality <g'_i, g'_j> = lambda_i delta_ij is verified to
    1e-9; modes with lambda below 1e-12 are reported as dropped.
    """
    om, wq = _grid_for(spec, inputs)
    M = gram_matrix(inputs, spec, grid=(om, wq))
    vals, vecs = eigh(M)
    order = np.argsort(-vals, kind="stable")
    lams = vals[order]
    U = vecs[:, order]

    rotated = ModeSet(grid=inputs.grid, weights=inputs.weights,
                      profiles=inputs.profiles @ U, domain=inputs.domain)

    F_rot = to_frequency(rotated, om, wq)
    eta = _eta_on_grid(spec, om)
    G = np.sqrt(eta)[:, None] * F_rot

    cross = G.conj().T @ (wq[:, None] * G)
    dev = np.max(np.abs(cross - np.diag(np.real(np.diag(cross)))))
    if dev > 1e-9:
        raise NumericalError(f"transmitted profiles failed to decouple (deviation {dev:.3e})")

    norms = np.real(np.diag(cross))
    kept = norms > _DROP_TOL
    dropped = tuple(int(i) + 1 for i in np.nonzero(~kept)[0])
    H = G[:, kept] / np.sqrt(norms[kept])[None, :]
    readouts = ModeSet(grid=om, weights=wq, profiles=H, domain="frequency")
    return OptimalReadout(rotated_inputs=rotated, readouts=readouts,
                          lambdas=np.clip(lams, 0.0, None), dropped=dropped)


@dataclass(frozen=True)
class InterlacingReport:
    """Outcome of randomized readout-optimality checks."""

    trials: int
    seed: int
    max_violation: float            # worst sigma_k^2 - lambda_k over all trials
    max_shrink: float               # worst decrease of any sigma_k on basis growth

    @property
    def violations(self) -> bool:
        return self.max_violation > 1e-9 or self.max_shrink > 1e-9


def interlacing_check(inputs: ModeSet, spec: Spectrum, trials: int, seed: int = 0) -> InterlacingReport:
    """Randomized verification that no readout beats the Gram eigenvalues.

    Draws ``trials`` readout bases (time-limited random sets, rotations of
    the optimal readout, sets deliberately orthogonal to the transmitted
    span, and mixtures), checking sorted sigma_k^2 <= sorted lambda_k and
    that enlarging a readout basis never shrinks any singular value.
    Violations are reported, never raised.
    """
    rng = np.random.default_rng(seed)
    om, wq = _grid_for(spec, inputs)
    F = to_frequency(inputs, om, wq)
    eta = _eta_on_grid(spec, om)
    G = np.sqrt(eta)[:, None] * F
    M = F.conj().T @ ((wq * eta)[:, None] * F)
    lams = np.sort(np.real(eigh(M, eigvals_only=True)))[::-1]
    k = inputs.size

    max_violation = -np.inf
    max_shrink = -np.inf
    for trial in range(trials):
        kind = trial % 4
        if kind == 0:      # random time-limited readouts
            H = to_frequency(
                ModeSet.random_orthonormal(inputs.grid, inputs.weights, k, rng),
                om, wq)
        elif kind == 1:    # random rotation of the optimal readout
            H = _orthonormal_freq(G, wq) @ _haar_unitary(k, rng)
        elif kind == 2:    # orthogonal to the transmitted span: sigma = 0
            H = _complement_basis(G, wq, k, rng)
        else:              # half aligned, half orthogonal
            half = max(1, k // 2)
            H_in = _orthonormal_freq(G[:, :half], wq)
            H_out = _complement_basis(G, wq, k - half, rng)
            H = np.concatenate([H_in, H_out], axis=1)
        S = H.T @ (wq[:, None] * G.conj())
        sig = np.sort(svdvals(S))[::-1]
        max_violation = max(max_violation, float(np.max(sig**2 - lams[: len(sig)])))
        prev = None
        for j in range(1, k + 1):
            sub = np.sort(svdvals(S[:j, :]))[::-1]
            if prev is not None:
                max_shrink = max(max_shrink, float(np.max(prev - sub[: len(prev)])))
            prev = sub
    return InterlacingReport(trials=trials, seed=seed,
                             max_violation=max_violation, max_shrink=max_shrink)


def _haar_unitary(k: int, rng) -> np.ndarray:
    z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    q, r = qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _orthonormal_freq(vectors: np.ndarray, wq: np.ndarray) -> np.ndarray:
    sw = np.sqrt(wq)[:, None]
    q, _ = qr(sw * vectors, mode="economic")
    return q / sw


def _complement_basis(G: np.ndarray, wq: np.ndarray, k: int, rng) -> np.ndarray:
    """k orthonormal frequency profiles orthogonal to every column of G."""
    n = G.shape[0]
    raw = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    basis = _orthonormal_freq(G, wq)
    raw = raw - basis @ (basis.conj().T @ (wq[:, None] * raw))
    return _orthonormal_freq(raw, wq)
