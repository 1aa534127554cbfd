"""Capacity formulas and duration-dependent channel analyses.

A pure-loss channel of transmissivity eta carries
q(eta) = max(0, log2(eta / (1 - eta))) qubits per use; it is "open" only
above the eta = 1/2 threshold.  Summing q over the optimal transmissivities
of a duration-T signal and dividing by T gives the capacity rate Q(T); the
T -> infinity limit is the frequency-multiplexed rate obtained by
integrating q over the spectrum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DivergenceError, NoOpenChannelError, NumericalError
from .modes import DiscretizationConfig, ModeBasis, solve_modes
from .spectra import Spectrum, tail_cutoff

#: transmissivity threshold above which a channel carries qubits
OPEN_THRESHOLD = 0.5


def pure_loss_capacity(eta: float) -> float:
    """Qubits per channel use of a pure-loss channel, max(0, log2(eta/(1-eta))).

    Returns +inf at eta = 1; raises ValueError outside [0, 1].
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if eta >= 1.0:
        return math.inf
    if eta <= OPEN_THRESHOLD:
        return 0.0
    return math.log2(eta / (1.0 - eta))


@dataclass(frozen=True)
class CapacityRate:
    """Q(T) together with its per-channel decomposition."""

    T: float
    total: float                   # Q(T), qubits per unit time
    per_channel: np.ndarray        # q(lambda_k)/T for every open channel
    cumulative: np.ndarray         # Q_k(T) prefix sums over open channels
    open_indices: np.ndarray       # 1-based channel indices with lambda > 1/2

    def rate_for_k(self, k: int) -> float:
        """Q_k(T): contribution of the first k channels (k >= 1)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        n_open = min(k, len(self.cumulative))
        return float(self.cumulative[n_open - 1]) if n_open else 0.0


def capacity_rate(basis: ModeBasis) -> CapacityRate:
    """Capacity rate of one solved mode basis: Q(T) = (1/T) sum_k q(lambda_k)."""
    lams = np.asarray(basis.lambdas, dtype=float)
    open_mask = lams > OPEN_THRESHOLD
    qs = np.array([pure_loss_capacity(min(l, 1.0)) for l in lams[open_mask]])
    per = qs / basis.T
    return CapacityRate(
        T=basis.T,
        total=float(np.sum(per)),
        per_channel=per,
        cumulative=np.cumsum(per),
        open_indices=np.nonzero(open_mask)[0] + 1,
    )


def _open_region_edges(spec: Spectrum) -> list[tuple[float, float]]:
    """Intervals of omega > threshold transmissivity, edges refined by bisection."""
    support = spec.support_bound()
    if support is not None:
        lo_w, hi_w = -support, support
        if hasattr(spec, "omegas"):
            lo_w, hi_w = float(spec.omegas[0]), float(spec.omegas[-1])
    else:
        reach = 2.0 * tail_cutoff(spec, OPEN_THRESHOLD * 0.98, start=spec.rate_scale)
        lo_w, hi_w = -reach, reach
    probe = np.linspace(lo_w, hi_w, 16385)
    vals = np.asarray(spec.eta(probe), dtype=float) - OPEN_THRESHOLD
    above = vals > 0.0
    if not np.any(above):
        return []
    edges = []
    idx = np.nonzero(np.diff(above.astype(int)))[0]
    starts = [probe[0]] if above[0] else []
    span = hi_w - lo_w
    for i in idx:
        a, b = probe[i], probe[i + 1]
        x = brentq(lambda w: float(spec.eta(w)) - OPEN_THRESHOLD, a, b, xtol=1e-13 * max(1.0, span))
        if above[i]:          # falling edge
            edges.append((starts.pop(), x))
        else:                 # rising edge
            starts.append(x)
    if starts:
        edges.append((starts.pop(), probe[-1]))
    return edges


def _saturation_points(spec: Spectrum, lo: float, hi: float) -> list[float]:
    """Frequencies inside (lo, hi) where eta is within 1e-9 of 1."""
    probe = np.linspace(lo, hi, 4097)
    vals = np.asarray(spec.eta(probe), dtype=float)
    near = vals >= 1.0 - 1e-9
    run = 0
    for flag in near:
        run = run + 1 if flag else 0
        if run >= 3:
            raise DivergenceError(
                "eta is pinned at 1 on an interval of positive measure; "
                "the continuous-time capacity diverges"
            )
    return [float(probe[i]) for i in np.nonzero(near)[0]]


def continuous_time_capacity(spec: Spectrum) -> float:
    """Frequency-multiplexed capacity rate (1/2pi) integral q(eta(omega)) d omega.

    Integrates over the region where the spectrum exceeds the 1/2 threshold;
    isolated eta -> 1 points give integrable log singularities handled as
    quadrature breakpoints, while saturation on a whole interval raises
    DivergenceError.
    """
    edges = _open_region_edges(spec)
    if not edges:
        return 0.0

    def integrand(w: float) -> float:
        eta = min(float(spec.eta(w)), 1.0)
        if eta >= 1.0:
            return math.inf
        if eta <= OPEN_THRESHOLD:
            return 0.0
        return math.log2(eta / (1.0 - eta))

    total = 0.0
    for lo, hi in edges:
        points = _saturation_points(spec, lo, hi)
        val, err = quad(integrand, lo, hi, points=points or None,
                        limit=400, epsabs=1e-11, epsrel=1e-10)
        if not math.isfinite(val):
            raise DivergenceError("capacity integral diverged")
        if err > 1e-7 * max(1.0, abs(val)):
            raise NumericalError(
                f"capacity quadrature error {err:.2e} too large", estimate=err
            )
        total += val
    return total / (2.0 * np.pi)


def find_opening_times(
    spec: Spectrum,
    t_range: tuple[float, float],
    k_max: int,
    config: DiscretizationConfig | None = None,
    rel_tol: float = 1e-4,
) -> list[tuple[int, float]]:
    """Durations at which channels 1..k_max first cross the 1/2 threshold.

    For each channel the crossing is located by bisection on T (the
    transmissivities are monotone in T), re-solving the eigenproblem at
    every probe.  Channels that do not cross inside ``t_range`` are omitted.
    """
    t_lo, t_hi = t_range
    if not 0.0 < t_lo < t_hi:
        raise ValueError(f"invalid T range {t_range}")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    config = config or DiscretizationConfig()

    def lam(T: float, k: int) -> float:
        lams = solve_modes(spec, T, config).lambdas
        return float(lams[k - 1]) if k <= len(lams) else 0.0

    lo_vals = solve_modes(spec, t_lo, config).lambdas
    hi_vals = solve_modes(spec, t_hi, config).lambdas
    out: list[tuple[int, float]] = []
    for k in range(1, k_max + 1):
        lam_lo = float(lo_vals[k - 1]) if k <= len(lo_vals) else 0.0
        lam_hi = float(hi_vals[k - 1]) if k <= len(hi_vals) else 0.0
        if lam_lo > OPEN_THRESHOLD or lam_hi <= OPEN_THRESHOLD:
            continue  # opens below the range, or never opens inside it
        a, b = t_lo, t_hi
        while (b - a) > rel_tol * 0.5 * (a + b):
            mid = 0.5 * (a + b)
            if lam(mid, k) > OPEN_THRESHOLD:
                b = mid
            else:
                a = mid
        out.append((k, 0.5 * (a + b)))
    return out


def _rate_for_k(spec: Spectrum, T: float, k: int, config: DiscretizationConfig) -> float:
    return capacity_rate(solve_modes(spec, T, config)).rate_for_k(k)


def optimal_duration(
    spec: Spectrum,
    k: int,
    t_bracket: tuple[float, float],
    config: DiscretizationConfig | None = None,
    coarse_points: int = 64,
    rel_tol: float = 1e-4,
) -> tuple[float, float]:
    """Duration maximizing Q_k(T) inside ``t_bracket``.

    Q_k is continuous but kinked at channel openings, so a coarse scan
    (``coarse_points`` samples) isolates the best basin before a
    golden-section refinement; returns (T_opt, Q_k(T_opt)).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t_lo, t_hi = t_bracket
    if not 0.0 < t_lo < t_hi:
        raise ValueError(f"invalid bracket {t_bracket}")
    config = config or DiscretizationConfig()

    ts = np.linspace(t_lo, t_hi, coarse_points)
    vals = np.array([_rate_for_k(spec, T, k, config) for T in ts])
    if np.all(vals == 0.0):
        raise NoOpenChannelError(
            f"Q_{k}(T) vanishes on the whole bracket {t_bracket}"
        )
    i = int(np.argmax(vals))
    a = ts[max(0, i - 1)]
    b = ts[min(len(ts) - 1, i + 1)]

    inv_phi = 0.5 * (math.sqrt(5.0) - 1.0)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _rate_for_k(spec, c, k, config)
    fd = _rate_for_k(spec, d, k, config)
    while (b - a) > rel_tol * 0.5 * (a + b):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _rate_for_k(spec, c, k, config)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _rate_for_k(spec, d, k, config)
    t_opt = 0.5 * (a + b)
    return t_opt, _rate_for_k(spec, t_opt, k, config)


@dataclass(frozen=True)
class CapacityCurve:
    """Sampled transmissivities and capacity rates over a grid of durations."""

    spec: Spectrum
    ts: np.ndarray                 # sorted durations
    lambdas: np.ndarray            # ts x K_store leading transmissivities
    rates: np.ndarray              # Q(T)
    k_list: tuple                  # channel counts reported in ``k_rates``
    k_rates: np.ndarray            # ts x len(k_list) values of Q_k(T)
    opening_times: tuple           # ((n, T_n), ...) detected crossings

    def to_csv(self, path) -> None:
        """Columns: T, lambda_1..lambda_K, Q, Q_k for each requested k."""
        k_store = self.lambdas.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["T"] + [f"lambda_{j + 1}" for j in range(k_store)]
                            + ["Q"] + [f"Q_{k}" for k in self.k_list])
            for i, T in enumerate(self.ts):
                row = [repr(float(T))]
                row += [repr(float(v)) for v in self.lambdas[i]]
                row.append(repr(float(self.rates[i])))
                row += [repr(float(v)) for v in self.k_rates[i]]
                writer.writerow(row)

    def openings_to_csv(self, path) -> None:
        """Columns: n, T_n."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "T_n"])
            for n, t_n in self.opening_times:
                writer.writerow([n, repr(float(t_n))])


def capacity_curve(
    spec: Spectrum,
    ts,
    k_list=(1, 2, 3, 4),
    config: DiscretizationConfig | None = None,
    detect_openings: bool = True,
    solver=None,
) -> CapacityCurve:
    """Sweep solve_modes over a duration grid and assemble a CapacityCurve.

    ``solver`` may map (T -> ModeBasis) to reuse precomputed solutions; by
    default each duration is solved independently.
    """
    config = config or DiscretizationConfig()
    ts = np.sort(np.asarray(ts, dtype=float))
    k_list = tuple(sorted(set(int(k) for k in k_list)))
    if not k_list or k_list[0] < 1:
        raise ValueError("k_list must contain positive channel counts")
    solve = solver or (lambda T: solve_modes(spec, T, config))

    k_store = max(k_list[-1], 8)
    lambdas = np.zeros((len(ts), k_store))
    rates = np.zeros(len(ts))
    k_rates = np.zeros((len(ts), len(k_list)))
    for i, T in enumerate(ts):
        basis = solve(T)
        m = min(k_store, len(basis.lambdas))
        lambdas[i, :m] = basis.lambdas[:m]
        rate = capacity_rate(basis)
        rates[i] = rate.total
        for j, k in enumerate(k_list):
            k_rates[i, j] = rate.rate_for_k(k)

    openings: tuple = ()
    if detect_openings:
        open_at_end = int(np.sum(lambdas[-1] > OPEN_THRESHOLD))
        k_max = min(max(open_at_end, 1), k_store)
        openings = tuple(find_opening_times(spec, (float(ts[0]), float(ts[-1])), k_max, config))
    return CapacityCurve(spec=spec, ts=ts, lambdas=lambdas, rates=rates,
                         k_list=k_list, k_rates=k_rates, opening_times=openings)
