"""Command-line front end: config-driven sweeps, checks and exports.

A single TOML config describes the spectrum, discretization and requested
outputs; each run writes plain CSV files plus a JSON manifest carrying the
config echo, tool version and per-file checksums.  All times and
frequencies are in units of the spectrum's natural rate, matching the
dimensionless products used throughout the package.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 check
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .analytic import lorentzian_eigenvalues, slepian_eigensystem
from .bounds import lambda1_bound_diagnostic
from .capacity import capacity_curve
from .errors import BtlcapError, ConfigError, NumericalError
from .modes import DiscretizationConfig, solve_modes
from .multimode import ModeSet, analyze_scattering, interlacing_check, optimal_readout
from .spectra import Box, Lorentzian, Spectrum, Transducer, load_tabulated

_DEFAULT_CHECK_TOLERANCES = {
    "lorentzian_oracle": 1e-4,
    "box_oracle": 1e-4,
    "interlacing": 1e-9,
    "optimal_readout_equality": 1e-9,
    "profile_orthonormality": 1e-10,
    "lambda_monotonicity": 1e-6,
    "trace_identity_factor": 10.0,
}
_ALL_SUITES = ("lorentzian", "box", "multimode", "invariants")


@dataclass
class SweepConfig:
    """Validated run description parsed from one TOML file."""

    spec: Spectrum
    discretization: DiscretizationConfig
    t_min: float = 0.5
    t_max: float = 10.0
    t_points: int = 40
    k_list: tuple = (1, 2, 3, 4)
    profile_times: tuple = ()
    detect_openings: bool = True
    output_dir: Path = Path("out")
    seed: int = 0
    workers: int = 0
    unit: str = "rate"
    eta_ceiling: float = 1.0 - 1e-9
    check_suites: tuple = _ALL_SUITES
    check_tolerances: dict = field(default_factory=dict)
    bound_t_values: tuple = ()
    echo: dict = field(default_factory=dict)


def _take(table: dict, key: str, kind, context: str, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing key '{context}.{key}'")
        return default
    value = table.pop(key)
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"key '{context}.{key}' has wrong type {type(value).__name__}")
    return value


def _reject_unknown(table: dict, context: str) -> None:
    if table:
        raise ConfigError(f"unknown key '{context}.{next(iter(table))}'")


def _parse_spectrum(table: dict, base_dir: Path) -> Spectrum:
    kind = _take(table, "kind", str, "spectrum", required=True)
    try:
        if kind == "lorentzian":
            spec = Lorentzian(eta_max=_take(table, "eta_max", float, "spectrum", 1.0),
                              kappa=_take(table, "kappa", float, "spectrum", 1.0))
        elif kind == "box":
            spec = Box(eta_bar=_take(table, "eta_bar", float, "spectrum", 1.0),
                       omega_half_width=_take(table, "omega_half_width", float, "spectrum", 1.0))
        elif kind == "transducer":
            spec = Transducer(g=_take(table, "g", float, "spectrum", 1.0),
                              kappa_a1=_take(table, "kappa_a1", float, "spectrum", required=True),
                              kappa_a2=_take(table, "kappa_a2", float, "spectrum", required=True),
                              kappa_b=_take(table, "kappa_b", float, "spectrum", required=True))
        elif kind == "tabulated":
            path = Path(_take(table, "path", str, "spectrum", required=True))
            if not path.is_absolute():
                path = base_dir / path
            spec = load_tabulated(path)
        else:
            raise ConfigError(f"key 'spectrum.kind' has unknown value {kind!r}")
    except BtlcapError:
        raise
    except (OSError, ValueError) as exc:
        raise ConfigError(f"spectrum definition failed: {exc}") from None
    _reject_unknown(table, "spectrum")
    return spec


def load_config(path) -> SweepConfig:
    """Parse and validate a TOML run config; raises ConfigError on any issue."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    echo = json.loads(json.dumps(raw))  # plain-json copy for the manifest

    spec_table = raw.pop("spectrum", None)
    if spec_table is None:
        raise ConfigError("missing table 'spectrum'")
    spec = _parse_spectrum(dict(spec_table), path.parent)

    disc_table = dict(raw.pop("discretization", {}))
    try:
        disc = DiscretizationConfig(
            n_points=_take(disc_table, "n_points", int, "discretization", 400),
            rule=_take(disc_table, "rule", str, "discretization", "gauss-legendre"),
            eigen_tolerance=_take(disc_table, "eigen_tolerance", float, "discretization", 1e-10),
            diagonal_correction=_take(disc_table, "diagonal_correction", bool,
                                      "discretization", True),
        )
    except ValueError as exc:
        raise ConfigError(f"discretization: {exc}") from None
    _reject_unknown(disc_table, "discretization")

    run_table = dict(raw.pop("run", {}))
    cfg = SweepConfig(spec=spec, discretization=disc, echo=echo)
    cfg.output_dir = Path(_take(run_table, "output_dir", str, "run", "out"))
    cfg.seed = _take(run_table, "seed", int, "run", 0)
    cfg.workers = _take(run_table, "workers", int, "run", 0)
    cfg.unit = _take(run_table, "unit", str, "run", "rate")
    cfg.eta_ceiling = _take(run_table, "eta_ceiling", float, "run", 1.0 - 1e-9)
    if not 0.5 < cfg.eta_ceiling <= 1.0:
        raise ConfigError("key 'run.eta_ceiling' must lie in (0.5, 1]")
    _reject_unknown(run_table, "run")

    sweep_table = dict(raw.pop("sweep", {}))
    cfg.t_min = _take(sweep_table, "t_min", float, "sweep", cfg.t_min)
    cfg.t_max = _take(sweep_table, "t_max", float, "sweep", cfg.t_max)
    cfg.t_points = _take(sweep_table, "t_points", int, "sweep", cfg.t_points)
    k_list = _take(sweep_table, "k_list", list, "sweep", list(cfg.k_list))
    profile_times = _take(sweep_table, "profile_times", list, "sweep", [])
    cfg.detect_openings = _take(sweep_table, "detect_openings", bool, "sweep", True)
    _reject_unknown(sweep_table, "sweep")
    if cfg.t_min <= 0.0:
        raise ConfigError("key 'sweep.t_min' must be positive")
    if cfg.t_max <= cfg.t_min:
        raise ConfigError("key 'sweep.t_max' must exceed t_min")
    if cfg.t_points < 2:
        raise ConfigError("key 'sweep.t_points' must be >= 2")
    if (not k_list or list(k_list) != sorted(set(k_list))
            or any((not isinstance(k, int)) or k < 1 for k in k_list)):
        raise ConfigError("key 'sweep.k_list' must be sorted unique positive integers")
    cfg.k_list = tuple(k_list)
    try:
        cfg.profile_times = tuple(float(t) for t in profile_times)
    except (TypeError, ValueError):
        raise ConfigError("key 'sweep.profile_times' must be numbers") from None

    check_table = dict(raw.pop("check", {}))
    suites = _take(check_table, "suites", list, "check", list(_ALL_SUITES))
    for s in suites:
        if s not in _ALL_SUITES:
            raise ConfigError(f"key 'check.suites' has unknown suite {s!r}")
    cfg.check_suites = tuple(suites)
    tol_table = dict(_take(check_table, "tolerances", dict, "check", {}))
    for key in tol_table:
        if key not in _DEFAULT_CHECK_TOLERANCES:
            raise ConfigError(f"unknown key 'check.tolerances.{key}'")
    cfg.check_tolerances = {**_DEFAULT_CHECK_TOLERANCES,
                            **{k: float(v) for k, v in tol_table.items()}}
    _reject_unknown(check_table, "check")

    bound_table = dict(raw.pop("bound", {}))
    t_values = _take(bound_table, "t_values", list, "bound", [])
    if not t_values:
        b_min = _take(bound_table, "t_min", float, "bound", None)
        b_max = _take(bound_table, "t_max", float, "bound", None)
        b_pts = _take(bound_table, "t_points", int, "bound", 16)
        if b_min is not None and b_max is not None:
            t_values = list(np.geomspace(b_min, b_max, b_pts))
    _reject_unknown(bound_table, "bound")
    cfg.bound_t_values = tuple(float(t) for t in t_values)

    _reject_unknown(raw, "")
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Config echo, tool version, output checksums and wall-clock timings."""

    config: dict
    version: str
    outputs: dict
    timings: dict

    def write(self, path: Path) -> None:
        payload = {"config": self.config, "version": self.version,
                   "outputs": self.outputs, "timings": self.timings}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def verify_manifest(directory) -> bool:
    """True when every file named in a run's manifest exists with a matching
    checksum."""
    directory = Path(directory)
    payload = json.loads((directory / "manifest.json").read_text())
    for name, digest in payload["outputs"].items():
        target = directory / name
        if not target.exists() or _sha256(target) != digest:
            return False
    return True


def _config_comment_lines(cfg: SweepConfig) -> list[str]:
    blob = json.dumps(cfg.echo, sort_keys=True)
    return [f"# btlcap {__version__} (times in units of 1/{cfg.unit})",
            f"# config: {blob}"]


def _write_csv(path: Path, header_comments: list[str], columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_comments:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def run_sweep(cfg: SweepConfig) -> RunManifest:
    """Execute a duration sweep and write curve, spectrum, opening-time and
    profile CSVs plus the manifest."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    t0 = time.perf_counter()

    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.t_points)
    workers = cfg.workers if cfg.workers > 0 else None
    solutions = {}

    def solve_at(T: float):
        try:
            return solve_modes(cfg.spec, T, cfg.discretization)
        except BtlcapError as exc:
            raise NumericalError(f"solve failed at T probe {T!r}: {exc}") from None

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for T, basis in zip(ts, pool.map(solve_at, ts)):
            solutions[float(T)] = basis
    timings["solve_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    clamped: list[float] = []

    def capped_solver(T: float):
        basis = solutions[float(T)]
        if np.any(basis.lambdas > cfg.eta_ceiling):
            clamped.append(float(T))
            basis = replace(basis, lambdas=np.minimum(basis.lambdas, cfg.eta_ceiling))
        return basis

    curve = capacity_curve(cfg.spec, ts, k_list=cfg.k_list, config=cfg.discretization,
                           detect_openings=cfg.detect_openings, solver=capped_solver)
    timings["curve_s"] = time.perf_counter() - t1

    comments = _config_comment_lines(cfg)
    if clamped:
        comments = comments + [
            "# eta_ceiling clamp applied at T = "
            + ",".join(_fmt(t) for t in sorted(set(clamped)))
        ]

    files: dict = {}
    k_store = curve.lambdas.shape[1]
    _write_csv(out / "capacity_curve.csv", comments,
               ["T"] + [f"lambda_{j + 1}" for j in range(k_store)] + ["Q"]
               + [f"Q_{k}" for k in curve.k_list],
               [[_fmt(curve.ts[i])] + [_fmt(v) for v in curve.lambdas[i]]
                + [_fmt(curve.rates[i])] + [_fmt(v) for v in curve.k_rates[i]]
                for i in range(len(curve.ts))])
    files["capacity_curve.csv"] = None

    _write_csv(out / "eigenvalues.csv", comments, ["T", "k", "lambda"],
               [[_fmt(curve.ts[i]), str(j + 1), _fmt(curve.lambdas[i, j])]
                for i in range(len(curve.ts)) for j in range(k_store)])
    files["eigenvalues.csv"] = None

    _write_csv(out / "opening_times.csv", comments, ["n", "T_n"],
               [[str(n), _fmt(t_n)] for n, t_n in curve.opening_times])
    files["opening_times.csv"] = None

    for T in cfg.profile_times:
        basis = solve_at(float(T))
        name = f"modes_T{T:g}.csv"
        basis.to_csv(out / name, max_modes=max(cfg.k_list))
        files[name] = None

    timings["total_s"] = time.perf_counter() - t0
    manifest = RunManifest(config=cfg.echo, version=__version__,
                           outputs={name: _sha256(out / name) for name in files},
                           timings=timings)
    manifest.write(out / "manifest.json")
    return manifest


def _check_rows(cfg: SweepConfig) -> list[tuple[str, float, float]]:
    """(name, residual, tolerance) rows for the configured check suites."""
    tol = cfg.check_tolerances
    rows: list[tuple[str, float, float]] = []
    n800 = DiscretizationConfig(n_points=800, rule=cfg.discretization.rule,
                                eigen_tolerance=cfg.discretization.eigen_tolerance)

    if "lorentzian" in cfg.check_suites:
        worst = 0.0
        for kT in (1.0, 3.0, 10.0, 30.0):
            spec = Lorentzian(eta_max=1.0, kappa=1.0)
            basis = solve_modes(spec, kT, n800)
            oracle = lorentzian_eigenvalues(1.0, 1.0, kT, 5)
            k = min(5, len(oracle.lambdas), len(basis.lambdas))
            worst = max(worst, float(np.max(np.abs(basis.lambdas[:k] - oracle.lambdas[:k]))))
        rows.append(("lorentzian_oracle", worst, tol["lorentzian_oracle"]))

    if "box" in cfg.check_suites:
        worst = 0.0
        for c in (0.5, 2.0, 5.0, 10.0):
            spec = Box(eta_bar=1.0, omega_half_width=1.0)
            basis = solve_modes(spec, 2.0 * c, DiscretizationConfig(n_points=400))
            oracle = slepian_eigensystem(c, 6)
            worst = max(worst, float(np.max(np.abs(basis.lambdas[:7] - oracle.lambdas_s))))
        rows.append(("box_oracle", worst, tol["box_oracle"]))

    if "multimode" in cfg.check_suites:
        spec = Lorentzian(eta_max=0.9, kappa=1.0)
        basis = solve_modes(spec, 10.0, cfg.discretization)
        inputs = ModeSet.from_basis(basis, 4)
        report = interlacing_check(inputs, spec, trials=40, seed=cfg.seed)
        rows.append(("interlacing", max(report.max_violation, report.max_shrink),
                     tol["interlacing"]))
        opt = optimal_readout(inputs, spec)
        analysis = analyze_scattering(opt.rotated_inputs, opt.readouts, spec, seed=cfg.seed)
        k = min(len(analysis.singular_values), len(opt.lambdas))
        equality = float(np.max(np.abs(analysis.singular_values[:k] ** 2 - opt.lambdas[:k])))
        rows.append(("optimal_readout_equality", equality, tol["optimal_readout_equality"]))

    if "invariants" in cfg.check_suites:
        spec = cfg.spec
        T = 0.5 * (cfg.t_min + cfg.t_max)
        basis = solve_modes(spec, T, cfg.discretization)
        gram = basis.profiles.conj().T @ (basis.weights[:, None] * basis.profiles)
        ortho = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
        rows.append(("profile_orthonormality", ortho, tol["profile_orthonormality"]))

        gap = abs(float(np.sum(basis.lambdas)) - T * basis.kernel_zero)
        coarse = solve_modes(spec, T, DiscretizationConfig(
            n_points=max(8, cfg.discretization.n_points // 2),
            rule=cfg.discretization.rule,
            eigen_tolerance=cfg.discretization.eigen_tolerance))
        estimate = abs(coarse.trace_defect - basis.trace_defect) + 1e-14
        rows.append(("trace_identity", gap, tol["trace_identity_factor"] * estimate))

        rng = np.random.default_rng(cfg.seed)
        worst = 0.0
        for _ in range(4):
            t1, t2 = sorted(rng.uniform(cfg.t_min, cfg.t_max, size=2))
            if t2 - t1 < 1e-3:
                continue
            lam1 = solve_modes(spec, t1, cfg.discretization).lambdas[:4]
            lam2 = solve_modes(spec, t2, cfg.discretization).lambdas[:4]
            worst = max(worst, float(np.max(lam1 - lam2)))
        rows.append(("lambda_monotonicity", worst, tol["lambda_monotonicity"]))
    return rows


def run_check(cfg: SweepConfig) -> tuple[RunManifest, bool]:
    """Run the configured cross-validation suites; returns (manifest, ok)."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = _check_rows(cfg)
    results = [(name, residual, tolerance, residual <= tolerance)
               for name, residual, tolerance in rows]
    _write_csv(out / "checks.csv", _config_comment_lines(cfg),
               ["check", "residual", "tolerance", "passed"],
               [[name, _fmt(res), _fmt(tolerance), str(int(ok))]
                for name, res, tolerance, ok in results])
    manifest = RunManifest(config=cfg.echo, version=__version__,
                           outputs={"checks.csv": _sha256(out / "checks.csv")},
                           timings={"total_s": time.perf_counter() - t0})
    manifest.write(out / "manifest.json")
    ok = all(r[3] for r in results)
    for name, res, tolerance, passed in results:
        print(f"{'PASS' if passed else 'FAIL'} {name}: residual {res:.3e} vs tolerance {tolerance:.3e}")
    return manifest, ok


def run_modes(cfg: SweepConfig, at_t: float) -> RunManifest:
    """Solve one duration and export the mode basis CSV."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    basis = solve_modes(cfg.spec, at_t, cfg.discretization)
    name = f"modes_T{at_t:g}.csv"
    basis.to_csv(out / name, max_modes=max(cfg.k_list))
    manifest = RunManifest(config=cfg.echo, version=__version__,
                           outputs={name: _sha256(out / name)},
                           timings={"total_s": time.perf_counter() - t0})
    manifest.write(out / "manifest.json")
    return manifest


def run_bound(cfg: SweepConfig) -> RunManifest:
    """Evaluate the top-transmissivity diagnostic over the configured grid."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    t_values = cfg.bound_t_values or tuple(np.geomspace(cfg.t_min, cfg.t_max, 16))
    rows = []
    for T in t_values:
        basis = solve_modes(cfg.spec, float(T), cfg.discretization)
        report = lambda1_bound_diagnostic(cfg.spec, float(T), basis)
        rows.append([_fmt(report.T), _fmt(report.omega_star),
                     _fmt(report.bound_value), _fmt(report.bound_paper_form),
                     _fmt(report.lambda1_numeric)])
    _write_csv(out / "bound.csv", _config_comment_lines(cfg),
               ["T", "omega_star", "bound_measured_sigma", "bound_paper_form", "lambda1"],
               rows)
    manifest = RunManifest(config=cfg.echo, version=__version__,
                           outputs={"bound.csv": _sha256(out / "bound.csv")},
                           timings={"total_s": time.perf_counter() - t0})
    manifest.write(out / "manifest.json")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="btlcap",
        description="Optimal modes and capacities of band- and time-limited channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("sweep", "run a duration sweep"),
                            ("check", "run oracle cross-validation checks"),
                            ("modes", "export mode profiles at one duration"),
                            ("bound", "evaluate the top-transmissivity bound")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="TOML run configuration")
        p.add_argument("--output-dir", help="override the configured output directory")
        if name == "modes":
            p.add_argument("--at-T", type=float, required=True, dest="at_t",
                           help="signal duration to export")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.output_dir:
            cfg.output_dir = Path(args.output_dir)
    except BtlcapError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "sweep":
            run_sweep(cfg)
        elif args.command == "check":
            _, ok = run_check(cfg)
            if not ok:
                return 4
        elif args.command == "modes":
            run_modes(cfg, args.at_t)
        elif args.command == "bound":
            run_bound(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BtlcapError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
