import math

import numpy as np
import pytest

from lissajous_scars.errors import ConfigError, GridError, RankDeficiencyError, StepRejectedError
from lissajous_scars.lattice import GridSpec, ScalarField, StateFunction, inner_product
from lissajous_scars.oracle import HgIndex, diagonalize_truncated, hg_mode
from lissajous_scars.potential import BumpSet, PotentialConfig, harmonic_potential, total_potential
from lissajous_scars.solver import (
    ItpConfig, apply_hamiltonian, init_states, itp_step, orthonormalize, rayleigh_quotients, solve,
    subspace_rotate,
)
from lissajous_scars.solver.ensemble import stack_states
from lissajous_scars.utils.settings import RunConfig


def gram(states):
    return np.array([[inner_product(a, b) for b in states] for a in states])


def hamiltonian_matrix(states, potential):
    grid, amplitudes = stack_states(states)
    h_psi = apply_hamiltonian(grid, amplitudes, potential)
    k = len(states)
    return amplitudes.reshape(k, -1).conj() @ h_psi.reshape(k, -1).T * grid.cell_area


class TestItpConfig:
    def test_defaults(self):
        cfg = ItpConfig()
        assert cfg.k == 10
        assert cfg.dtau_initial > cfg.dtau_min > 0

    @pytest.mark.parametrize("kwargs", [
        {"k": 0},
        {"dtau_initial": 1e-3, "dtau_min": 1e-3},
        {"dtau_min": 0.0},
        {"tolerance": 0.0},
        {"max_iterations": 0},
        {"guard_states": -1},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ItpConfig(**kwargs)


class TestInitStates:
    def test_single_state_is_ground_mode(self, iso_grid):
        states = init_states(1, iso_grid)

        assert len(states) == 1
        assert states[0].norm() == pytest.approx(1.0, abs=1e-12)
        ground = hg_mode(HgIndex(0, 0), iso_grid, PotentialConfig(p=1, q=1, amplitude=0.0))
        np.testing.assert_array_equal(states[0].amplitudes, ground.amplitudes)

    def test_anisotropic_modes_in_energy_order(self, aniso_grid, aniso_cfg):
        states = init_states(5, aniso_grid, potential=aniso_cfg)

        assert [state.energy for state in states] == [1.5, 2.5, 3.5, 3.5, 4.5]
        np.testing.assert_allclose(gram(states), np.eye(5), atol=1e-10)

    def test_random_ensemble_is_seeded_and_orthonormal(self, iso_grid):
        first = init_states(4, iso_grid, seed=7, random=True)
        again = init_states(4, iso_grid, seed=7, random=True)
        other = init_states(4, iso_grid, seed=8, random=True)

        for a, b in zip(first, again):
            np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
        assert not np.array_equal(first[0].amplitudes, other[0].amplitudes)
        np.testing.assert_allclose(gram(first), np.eye(4), atol=1e-10)

    def test_too_many_states(self):
        grid = GridSpec(4.0, 4.0, 8, 8)

        with pytest.raises(GridError):
            init_states(17, grid)


class TestOrthonormalize:
    def test_orthonormal_set_is_fixed(self, iso_grid, iso_cfg):
        states = [hg_mode(HgIndex(n, m), iso_grid, iso_cfg) for n, m in [(0, 0), (1, 0), (0, 1)]]

        result = orthonormalize(states)

        for before, after in zip(states, result):
            np.testing.assert_allclose(after.amplitudes, before.amplitudes, atol=1e-10)

    def test_identical_states_are_rank_deficient(self, iso_grid, iso_cfg):
        psi = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg)

        with pytest.raises(RankDeficiencyError):
            orthonormalize([psi, psi])

    def test_half_overlap(self, iso_grid, iso_cfg):
        a = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg)
        b10 = hg_mode(HgIndex(1, 0), iso_grid, iso_cfg)
        b = StateFunction(iso_grid, 0.5 * a.amplitudes + math.sqrt(0.75) * b10.amplitudes)
        assert inner_product(a, b).real == pytest.approx(0.5, abs=1e-12)

        result = orthonormalize([a, b])

        np.testing.assert_allclose(gram(result), np.eye(2), atol=1e-10)

    def test_symmetric_treatment_of_order(self, iso_grid, iso_cfg):
        a = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg)
        b10 = hg_mode(HgIndex(1, 0), iso_grid, iso_cfg)
        b = StateFunction(iso_grid, 0.3 * a.amplitudes + b10.amplitudes)

        forward = orthonormalize([a, b])
        backward = orthonormalize([b, a])

        np.testing.assert_allclose(forward[0].amplitudes, backward[1].amplitudes, atol=1e-12)
        np.testing.assert_allclose(forward[1].amplitudes, backward[0].amplitudes, atol=1e-12)


class TestSubspaceRotate:
    def test_recovers_mixed_levels(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        a = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg).amplitudes
        b = hg_mode(HgIndex(1, 0), iso_grid, iso_cfg).amplitudes
        mixed = [
            StateFunction(iso_grid, (a + b) / math.sqrt(2.0)),
            StateFunction(iso_grid, (a - b) / math.sqrt(2.0)),
        ]

        rotated = subspace_rotate(mixed, V)

        assert [state.energy for state in rotated] == pytest.approx([1.0, 2.0], abs=1e-8)
        matrix = hamiltonian_matrix(rotated, V)
        assert abs(matrix[0, 1]) < 1e-8 * 2.0

    def test_diagonal_ensemble_only_changes_phase(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        states = [hg_mode(HgIndex(0, 0), iso_grid, iso_cfg), hg_mode(HgIndex(1, 0), iso_grid, iso_cfg)]

        rotated = subspace_rotate(states, V)

        for before, after in zip(states, rotated):
            assert abs(inner_product(before, after)) == pytest.approx(1.0, abs=1e-10)


class TestItpStep:
    def test_ground_state_is_fixed_point(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        ground = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg)

        stepped = itp_step([ground], V, 1e-3)[0]

        assert stepped.norm() == pytest.approx(1.0, abs=1e-12)
        assert abs(inner_product(ground, stepped)) > 1.0 - 1e-8

    def test_rayleigh_quotient_decreases(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        state = init_states(1, iso_grid, seed=11, random=True)

        before = rayleigh_quotients(iso_grid, state[0].amplitudes[None], V)[0]
        after = rayleigh_quotients(iso_grid, itp_step(state, V, 0.05)[0].amplitudes[None], V)[0]

        assert after < before

    def test_two_level_decay_ratio(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        psi00 = hg_mode(HgIndex(0, 0), iso_grid, iso_cfg)
        psi10 = hg_mode(HgIndex(1, 0), iso_grid, iso_cfg)
        mixture = StateFunction(iso_grid, (psi00.amplitudes + psi10.amplitudes) / math.sqrt(2.0))

        stepped = itp_step([mixture], V, 0.1)[0]

        ratio = abs(inner_product(psi00, stepped)) / abs(inner_product(psi10, stepped))
        assert ratio == pytest.approx(math.exp(0.1), rel=5e-3)

    def test_ensemble_energy_never_rises(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        states = orthonormalize(init_states(4, iso_grid, seed=3, random=True))

        totals = []
        for _ in range(30):
            states = subspace_rotate(orthonormalize(itp_step(states, V, 0.05)), V)
            totals.append(sum(state.energy for state in states))

        assert np.all(np.diff(totals) <= 1e-10)
        assert totals[-1] < totals[0]

    def test_overflowing_step_is_rejected(self, iso_grid):
        ground = init_states(1, iso_grid)
        steep = ScalarField(iso_grid, np.full(iso_grid.shape, 1e6) * (iso_grid.mesh()[0] > 0))

        with pytest.raises(StepRejectedError):
            itp_step(ground, steep, 1.0)

    def test_nonpositive_dtau(self, iso_grid, iso_cfg):
        with pytest.raises(ConfigError):
            itp_step(init_states(1, iso_grid), harmonic_potential(iso_grid, iso_cfg), 0.0)


class TestSolve:
    def test_unperturbed_anisotropic_spectrum(self, aniso_grid, aniso_cfg):
        V = harmonic_potential(aniso_grid, aniso_cfg)

        solution = solve(aniso_grid, V, ItpConfig(k=10), potential_config=aniso_cfg)

        assert solution.all_converged
        assert len(solution) == 10
        np.testing.assert_allclose(
            solution.energies, [1.5, 2.5, 3.5, 3.5, 4.5, 4.5, 5.5, 5.5, 5.5, 6.5], atol=1e-4
        )
        assert np.all(solution.energies >= np.array([1.5, 2.5, 3.5, 3.5, 4.5, 4.5, 5.5, 5.5, 5.5, 6.5]) - 1e-8)
        assert np.all(solution.residuals < 1e-3)
        np.testing.assert_allclose(gram(solution.states), np.eye(10), atol=1e-8)

    def test_unperturbed_isotropic_spectrum(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)

        solution = solve(iso_grid, V, ItpConfig(k=6), potential_config=iso_cfg)

        np.testing.assert_allclose(solution.energies, [1, 2, 2, 3, 3, 3], atol=1e-4)
        assert np.all(np.diff(solution.energies) >= 0)

    @pytest.mark.parametrize("max_iterations", [20, 2000])
    def test_energies_bound_exact_levels_from_above(self, aniso_grid, aniso_cfg, max_iterations):
        V = harmonic_potential(aniso_grid, aniso_cfg)
        exact = np.array([1.5, 2.5, 3.5, 3.5, 4.5, 4.5])

        solution = solve(aniso_grid, V, ItpConfig(k=6, random_init=True, seed=3, max_iterations=max_iterations))

        # Ritz values of any trial subspace lie above the levels they approximate
        assert np.all(solution.energies >= exact - 1e-8)

    def test_is_deterministic(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)
        cfg = ItpConfig(k=3, max_iterations=50)

        first = solve(iso_grid, V, cfg)
        second = solve(iso_grid, V, cfg)

        np.testing.assert_array_equal(first.energies, second.energies)
        for a, b in zip(first.states, second.states):
            np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_iteration_cap_flags_unconverged(self, iso_grid, iso_cfg, caplog):
        V = harmonic_potential(iso_grid, iso_cfg)

        with caplog.at_level("WARNING", logger="LissajousScars.solver"):
            solution = solve(iso_grid, V, ItpConfig(k=3, max_iterations=1), potential_config=iso_cfg)

        assert solution.iterations == 1
        assert not solution.all_converged
        assert np.all(np.isfinite(solution.residuals))
        assert "unconverged" in caplog.text

    def test_guard_states_are_dropped(self, iso_grid, iso_cfg):
        V = harmonic_potential(iso_grid, iso_cfg)

        solution = solve(iso_grid, V, ItpConfig(k=2, guard_states=3, max_iterations=5), potential_config=iso_cfg)

        assert len(solution) == 2
        assert solution.converged.shape == (2,)

    def test_matches_truncated_basis_with_wide_bumps(self, aniso_grid):
        cfg = PotentialConfig(p=1, q=2, amplitude=0.5, sigma=0.5)
        positions = np.array([[0.3, 0.2], [-0.5, 0.1], [0.1, -0.4], [-0.2, -0.3], [0.6, 0.5]])
        bumps = BumpSet(positions, cfg.amplitude, cfg.sigma, seed=0)
        V, _ = total_potential(aniso_grid, cfg, bumps)

        solution = solve(aniso_grid, V, ItpConfig(k=6), potential_config=cfg.unperturbed())
        oracle = diagonalize_truncated(float(solution.energies[-1]) + 12.0, bumps, cfg)

        assert solution.all_converged
        np.testing.assert_allclose(solution.energies, oracle.energies[:6], atol=1e-3)


@pytest.mark.slow
def test_matches_truncated_basis_with_narrow_bumps():
    cfg = PotentialConfig(p=1, q=2, amplitude=4.0, sigma=0.09979)
    grid = GridSpec(extent_x=11.0, extent_y=7.0, points_x=448, points_y=280)
    positions = np.array([[0.3, 0.2], [-0.5, 0.1], [0.1, -0.4], [-0.2, -0.3], [0.6, 0.5]])
    bumps = BumpSet(positions, cfg.amplitude, cfg.sigma, seed=0)
    V, _ = total_potential(grid, cfg, bumps)

    solution = solve(grid, V, ItpConfig(k=20), potential_config=cfg.unperturbed())
    target = float(solution.energies[-1])
    near = diagonalize_truncated(target + 8.0, bumps, cfg).energies[:20]
    far = diagonalize_truncated(target + 40.0, bumps, cfg).energies[:20]

    assert solution.all_converged
    # Nested bases: a larger cutoff can only lower each level
    assert np.all(far <= near + 1e-10)
    # Basis truncation bounds the grid levels from above
    assert np.all(far >= solution.energies - 1e-4)
    np.testing.assert_allclose(solution.energies, near, atol=0.1)
    assert np.max(np.abs(far - solution.energies)) < np.max(np.abs(near - solution.energies))


@pytest.mark.slow
def test_random_start_reaches_same_spectrum(aniso_grid, aniso_cfg):
    V = harmonic_potential(aniso_grid, aniso_cfg)

    solution = solve(aniso_grid, V, ItpConfig(k=6, random_init=True, seed=5, max_iterations=200000))

    np.testing.assert_allclose(solution.energies, [1.5, 2.5, 3.5, 3.5, 4.5, 4.5], atol=1e-4)


@pytest.mark.slow
def test_first_fifty_unperturbed_levels(aniso_cfg):
    itp = ItpConfig(k=50)
    grid = RunConfig(potential=aniso_cfg, itp=itp).resolve_grid()
    V = harmonic_potential(grid, aniso_cfg)
    exact = np.sort([n + 2 * m + 1.5 for n in range(60) for m in range(30)])[:50]

    solution = solve(grid, V, itp, potential_config=aniso_cfg)

    assert solution.all_converged
    np.testing.assert_allclose(solution.energies, exact, rtol=1e-4)
    # Level 1.5 + j holds j // 2 + 1 modes; the top level is cut off at 50 states
    counts = np.bincount(np.rint(solution.energies - 1.5).astype(int))
    assert counts[4] == 3
    np.testing.assert_array_equal(counts[:13], [j // 2 + 1 for j in range(13)])
