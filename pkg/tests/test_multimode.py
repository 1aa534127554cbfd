import json
import math

import numpy as np
import pytest

from btlcap import (
    DimensionError,
    DiscretizationConfig,
    Lorentzian,
    ModeSet,
    Tabulated,
    analyze_scattering,
    gram_matrix,
    interlacing_check,
    multimode_capacity,
    optimal_readout,
    scattering_matrix,
    solve_modes,
)
from btlcap.multimode import (
    _complement_basis,
    _grid_for,
    _orthonormal_freq,
    to_frequency,
)

# q(0.81) = log2(0.81/0.19), frozen from a direct evaluation
Q_OF_081 = 2.0919224894410395

CFG = DiscretizationConfig(n_points=300)


@pytest.fixture(scope="module")
def lorentzian_setup():
    spec = Lorentzian(0.9, 1.0)
    basis = solve_modes(spec, 10.0, DiscretizationConfig(n_points=400))
    return spec, basis


class TestModeSet:
    def test_orthonormality_enforced(self):
        grid = np.linspace(-1, 1, 32)
        weights = np.full(32, 2 / 32)
        bad = np.ones((32, 2))
        with pytest.raises(DimensionError):
            ModeSet(grid=grid, weights=weights, profiles=bad)

    def test_random_orthonormal(self):
        rng = np.random.default_rng(5)
        grid = np.linspace(-1, 1, 48)
        weights = np.full(48, 2 / 48)
        ms = ModeSet.random_orthonormal(grid, weights, 4, rng)
        gram = ms.profiles.T @ (weights[:, None] * ms.profiles)
        assert np.max(np.abs(gram - np.eye(4))) < 1e-12

    def test_from_basis_bounds(self, lorentzian_setup):
        _, basis = lorentzian_setup
        with pytest.raises(ValueError):
            ModeSet.from_basis(basis, 0)


class TestScatteringMatrix:
    def test_single_mode_cauchy_schwarz_optimum(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 1)
        om, wq = _grid_for(spec, inputs)
        F = to_frequency(inputs, om, wq)
        g = np.sqrt(spec.eta(om))[:, None] * F
        norm = math.sqrt(float(np.real(np.conj(g[:, 0]) @ (wq * g[:, 0]))))
        readout = ModeSet(grid=om, weights=wq, profiles=g / norm, domain="frequency")
        S = scattering_matrix(inputs, readout, spec, grid=(om, wq))
        assert S.shape == (1, 1)
        assert abs(S[0, 0]) == pytest.approx(norm, rel=1e-12)
        # the matched readout attains the norm bound; random ones stay below
        rng = np.random.default_rng(11)
        other = ModeSet.random_orthonormal(inputs.grid, inputs.weights, 1, rng)
        S2 = scattering_matrix(inputs, other, spec, grid=(om, wq))
        assert abs(S2[0, 0]) < norm

    def test_flat_spectrum_is_scaled_identity(self):
        flat = Tabulated(omegas=np.linspace(-80, 80, 9), etas=np.full(9, 0.7))
        basis = solve_modes(flat, 4.0, DiscretizationConfig(n_points=200))
        inputs = ModeSet.from_basis(basis, 3)
        S = scattering_matrix(inputs, inputs, flat)
        assert np.allclose(S, math.sqrt(0.7) * np.eye(3), atol=1e-6)

    def test_random_pairing_is_contractive(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        rng = np.random.default_rng(2)
        inputs = ModeSet.random_orthonormal(basis.grid, basis.weights, 3, rng)
        readouts = ModeSet.random_orthonormal(basis.grid, basis.weights, 3, rng)
        analysis = analyze_scattering(inputs, readouts, spec)
        assert np.all(analysis.singular_values <= 1.0 + 1e-10)

    def test_grid_mismatch_rejected(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 2)
        om, wq = _grid_for(spec, inputs)
        wrong = ModeSet(grid=om[:-2], weights=wq[:-2],
                        profiles=_orthonormal_freq(
                            np.random.default_rng(0).standard_normal((len(om) - 2, 2)),
                            wq[:-2]),
                        domain="frequency")
        with pytest.raises(DimensionError):
            scattering_matrix(inputs, wrong, spec, grid=(om, wq))


class TestMultimodeCapacity:
    def test_threshold_channel_contributes_nothing(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 2)
        analysis = analyze_scattering(inputs, ModeSet.from_basis(basis, 2), spec)
        sv = np.array([math.sqrt(0.5), 0.1])
        from btlcap.multimode import multimode_capacity_from_singular_values
        # sigma^2 lands within one ulp of the threshold, so only fp dust survives
        assert multimode_capacity_from_singular_values(sv) < 1e-12
        assert multimode_capacity_from_singular_values(np.array([0.5, 0.1])) == 0.0
        assert multimode_capacity(analysis) >= 0.0

    def test_two_channel_value(self):
        from btlcap.multimode import multimode_capacity_from_singular_values
        val = multimode_capacity_from_singular_values(np.array([0.9, 0.3]))
        assert val == pytest.approx(Q_OF_081, abs=1e-12)

    def test_unitary_remixing_invariance(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 3)
        readouts = ModeSet.from_basis(basis, 3)
        base = analyze_scattering(inputs, readouts, spec)
        rng = np.random.default_rng(7)
        q1, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        q2, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        mixed_in = ModeSet(grid=inputs.grid, weights=inputs.weights,
                           profiles=inputs.profiles @ q1)
        mixed_out = ModeSet(grid=readouts.grid, weights=readouts.weights,
                            profiles=readouts.profiles @ q2)
        mixed = analyze_scattering(mixed_in, mixed_out, spec)
        assert mixed.capacity == pytest.approx(base.capacity, rel=1e-9)
        assert mixed.singular_values == pytest.approx(base.singular_values, abs=1e-11)


class TestGramMatrix:
    def test_hermitian_positive_semidefinite(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        rng = np.random.default_rng(17)
        inputs = ModeSet.random_orthonormal(basis.grid, basis.weights, 4, rng)
        M = gram_matrix(inputs, spec)
        assert np.max(np.abs(M - M.conj().T)) < 1e-14
        assert np.min(np.linalg.eigvalsh(M)) >= -1e-12


class TestOptimalReadout:
    def test_reproduces_kernel_eigenvalues(self, lorentzian_setup):
        # frequency-domain Gram route vs time-domain kernel route
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 4)
        opt = optimal_readout(inputs, spec)
        assert np.max(np.abs(opt.lambdas - basis.lambdas[:4])) < 1e-6

    def test_single_mode_reduction(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 1)
        opt = optimal_readout(inputs, spec)
        M = gram_matrix(inputs, spec)
        assert opt.lambdas[0] == pytest.approx(float(np.real(M[0, 0])), rel=1e-12)

    def test_flat_spectrum_all_equal(self):
        flat = Tabulated(omegas=np.linspace(-80, 80, 9), etas=np.full(9, 0.7))
        basis = solve_modes(flat, 4.0, DiscretizationConfig(n_points=200))
        inputs = ModeSet.from_basis(basis, 3)
        opt = optimal_readout(inputs, flat)
        assert opt.lambdas == pytest.approx(np.full(3, 0.7), abs=1e-6)

    def test_readout_achieves_gram_eigenvalues(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 4)
        opt = optimal_readout(inputs, spec)
        analysis = analyze_scattering(opt.rotated_inputs, opt.readouts, spec)
        assert np.max(np.abs(analysis.singular_values**2 - opt.lambdas)) < 1e-9

    def test_everything_dropped_for_dead_channel(self):
        dead = Tabulated(omegas=np.linspace(-2, 2, 5), etas=np.zeros(5))
        basis = solve_modes(dead, 2.0, DiscretizationConfig(n_points=64))
        inputs = ModeSet.from_basis(basis, 2)
        opt = optimal_readout(inputs, dead)
        assert opt.dropped == (1, 2)
        assert opt.readouts.size == 0


class TestInterlacing:
    def test_orthogonal_readout_gives_zero(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 3)
        om, wq = _grid_for(spec, inputs)
        F = to_frequency(inputs, om, wq)
        G = np.sqrt(spec.eta(om))[:, None] * F
        H = _complement_basis(G, wq, 3, np.random.default_rng(3))
        readout = ModeSet(grid=om, weights=wq, profiles=H, domain="frequency")
        S = scattering_matrix(inputs, readout, spec, grid=(om, wq))
        assert np.max(np.abs(S)) < 1e-10

    def test_randomized_suite_clean(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 4)
        report = interlacing_check(inputs, spec, trials=24, seed=42)
        assert report.max_violation <= 1e-9
        assert report.max_shrink <= 1e-9
        assert not report.violations

    def test_reproducible_with_seed(self, lorentzian_setup):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 3)
        r1 = interlacing_check(inputs, spec, trials=8, seed=9)
        r2 = interlacing_check(inputs, spec, trials=8, seed=9)
        assert r1.max_violation == r2.max_violation
        assert r1.max_shrink == r2.max_shrink


class TestSerialization:
    def test_json_roundtrip(self, lorentzian_setup, tmp_path):
        spec, basis = lorentzian_setup
        inputs = ModeSet.from_basis(basis, 2)
        analysis = analyze_scattering(inputs, ModeSet.from_basis(basis, 2), spec, seed=13)
        path = tmp_path / "analysis.json"
        analysis.to_json(path)
        payload = json.loads(path.read_text())
        assert payload["seed"] == 13
        assert payload["capacity"] == pytest.approx(analysis.capacity)
        S = np.array(payload["S_real"]) + 1j * np.array(payload["S_imag"])
        assert np.allclose(S, analysis.S)
