"""
Tests for the rotation solve, the RATTLE step, conservation laws and time reversal
"""

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from modules.diagnostics import convergence_slope, energy_drift, momenta, total_energy
from modules.mechanics import LoadSet, TimeProfile, PointForce
from modules.mesh_builder import build_box_lattice
from modules.particle_state import init_rest, set_initial_velocity
from modules.rattle_integrator import (CFL_BOUND, IntegratorError, RattleIntegrator,
                                       RotationSolveError, RotationSolveInput, SolverParams,
                                       StepFailure, cfl_margin, rattle_step, reverse_run,
                                       rotation_solve, suggest_dt, update_matrix)
from utils.geometry_utils import vee


def constraint(W, d):
    """vee(W D - D W^T) for a single particle"""
    D = np.diag(d)
    return vee(W @ D - D @ W.T)


class TestRotationSolve:

    def test_zero_drive(self):
        result = rotation_solve(RotationSolveInput(alpha=np.zeros(3), d=np.ones(3)), dt=0.1)
        assert result.iterations[0] == 0
        np.testing.assert_array_equal(result.e[0], [1.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(result.W[0], np.eye(3))
        np.testing.assert_array_equal(result.Z[0], 0.0)

    def test_spherical_closed_form(self):
        alpha = np.array([0.3, -0.2, 0.1])
        dt = 0.5
        result = rotation_solve(RotationSolveInput(alpha=alpha, d=np.ones(3)), dt, tol=1e-15)
        c = dt * np.linalg.norm(alpha) / 4.0
        e0 = np.sqrt((1.0 + np.sqrt(1.0 - 4.0 * c ** 2)) / 2.0)
        np.testing.assert_allclose(result.e[0, 0], e0, atol=1e-14)
        np.testing.assert_allclose(result.e[0, 1:], dt * alpha / (4.0 * e0), atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
           st.lists(st.floats(0.05, 2.0), min_size=3, max_size=3),
           st.floats(0.05, 0.9))
    def test_converges_within_bound(self, alpha, d, fraction):
        alpha, d = np.array(alpha), np.array(d)
        I = d.sum() - d
        drive = np.sum(np.abs(alpha) / I)
        assume(drive > 1e-6)
        dt = fraction * CFL_BOUND / drive
        assert cfl_margin(alpha, I, dt) == pytest.approx(fraction)

        result = rotation_solve(RotationSolveInput(alpha=alpha, d=d), dt, tol=1e-13, max_iter=200)
        assert result.converged[0]
        assert np.sum(result.e[0, 1:] ** 2) < 0.5
        np.testing.assert_allclose(constraint(result.W[0], d), dt * alpha,
                                   atol=4.0 * I.max() * 1e-13)
        np.testing.assert_allclose(result.W[0].T @ result.W[0], np.eye(3), atol=1e-14)

    def test_batched_inputs_within_bound(self):
        rng = np.random.default_rng(7)
        n, dt = 10000, 0.1
        alpha = rng.uniform(-1.0, 1.0, (n, 3))
        d = rng.uniform(0.05, 2.0, (n, 3))
        I = d.sum(axis=1, keepdims=True) - d
        target = rng.uniform(0.01, 1.0, n)
        alpha *= (target * CFL_BOUND / (dt * np.sum(np.abs(alpha) / I, axis=1)))[:, None]
        np.testing.assert_allclose(cfl_margin(alpha, I, dt), target)

        result = rotation_solve(RotationSolveInput(alpha=alpha, d=d), dt, tol=1e-14, max_iter=200,
                                record_history=True)
        assert result.converged.all()
        assert np.sum(result.e[:, 1:] ** 2, axis=1).max() < 0.5
        assert result.iterations[target <= 0.5].max() <= 50

        path = np.stack(result.history)[:, :, 1:]
        steps = np.linalg.norm(np.diff(path, axis=0), axis=2)
        prev, nxt = steps[:-1], steps[1:]
        significant = nxt > 1e-10
        ratios = nxt[significant] / prev[significant]
        assert ratios.size > 0
        assert ratios.max() <= 0.5 + 1e-6

    def test_batched(self):
        alpha = np.array([[0.0, 0.0, 0.0], [0.1, 0.2, 0.3]])
        d = np.array([[1.0, 1.0, 1.0], [0.5, 1.0, 2.0]])
        result = rotation_solve(RotationSolveInput(alpha=alpha, d=d), 0.1, record_history=True)
        assert result.e.shape == (2, 4)
        assert list(result.iterations[:1]) == [0]
        assert result.converged.all()
        assert len(result.history) == result.iterations.max() + 1

    def test_divergence(self):
        solve_input = RotationSolveInput(alpha=np.array([10.0, 0.0, 0.0]), d=np.ones(3))
        with pytest.raises(RotationSolveError) as info:
            rotation_solve(solve_input, dt=1.0)
        assert info.value.diverged
        result = rotation_solve(solve_input, dt=1.0, raise_on_failure=False)
        assert result.diverged[0] and not result.converged[0]

    def test_iteration_cap(self):
        solve_input = RotationSolveInput(alpha=np.array([0.1, 0.0, 0.0]), d=np.ones(3))
        with pytest.raises(RotationSolveError, match="did not converge") as info:
            rotation_solve(solve_input, dt=1.0, max_iter=1)
        assert info.value.iterations == 1
        assert not info.value.diverged
        assert info.value.particle == 0

    def test_input_helpers(self):
        solve_input = RotationSolveInput(alpha=np.array([1.0, 2.0, 3.0]), d=np.array([0.5, 2.0, 4.5]))
        np.testing.assert_allclose(solve_input.I_moments, [6.5, 5.0, 2.5])
        np.testing.assert_array_equal(vee(solve_input.skew_matrix()), [1.0, 2.0, 3.0])


class TestHelpers:

    def test_cfl_margin(self):
        margin = cfl_margin(np.array([0.1, 0.0, 0.0]), np.array([2.0, 2.0, 2.0]), 0.1)
        assert margin == pytest.approx(0.005 / CFL_BOUND)
        with pytest.raises(IntegratorError):
            cfl_margin(np.ones(3), np.array([1.0, 0.0, 1.0]), 0.1)

    @given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
    def test_update_matrix_is_a_rotation(self, q):
        q = np.array(q)
        assume(np.linalg.norm(q) > 1e-3)
        W = update_matrix(q / np.linalg.norm(q))[0]
        np.testing.assert_allclose(W.T @ W, np.eye(3), atol=1e-14)
        assert np.linalg.det(W) == pytest.approx(1.0)

    @pytest.mark.parametrize("kwargs", [{'dt': 0.0}, {'dt': 0.1, 'tol': 0.0},
                                        {'dt': 0.1, 'max_iter': 0}, {'dt': float('inf')}])
    def test_solver_params(self, kwargs):
        with pytest.raises(IntegratorError):
            SolverParams(**kwargs)

    def test_suggest_dt(self, pair_mesh):
        assert suggest_dt(pair_mesh) == pytest.approx(0.25 / np.sqrt(1.2))
        for factor in (0.0, 1.5):
            with pytest.raises(IntegratorError, match="cfl_factor"):
                suggest_dt(pair_mesh, factor)


def angular_scale(states):
    """Sum of per-particle orbital momentum magnitudes, the round-off scale of L"""
    return float(np.linalg.norm(np.cross(states.X, states.T_half), axis=1).sum())


class TestConservation:

    def test_linear_and_angular_momentum(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, None, SolverParams(dt=0.1, tol=1e-14))
        P0, L0 = momenta(box_mesh, moving_box)
        states = integrator.run(moving_box, 1000)
        P1, L1 = momenta(box_mesh, states)
        scale = np.abs(moving_box.T_half).max()
        np.testing.assert_allclose(P1, P0, atol=1e-12 * scale)
        np.testing.assert_allclose(L1, L0, atol=1e-12 * angular_scale(moving_box))
        assert states.orthogonality_error() < 1e-12
        assert states.step == 1000
        assert states.t == pytest.approx(100.0)

    def test_angular_momentum_does_not_depend_on_solve_tolerance(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, None, SolverParams(dt=0.1, tol=1e-8))
        _, L0 = momenta(box_mesh, moving_box)
        states = integrator.run(moving_box, 500)
        _, L1 = momenta(box_mesh, states)
        np.testing.assert_allclose(L1, L0, atol=1e-12 * angular_scale(moving_box))

    @pytest.mark.slow
    def test_long_run_drift(self, box_mesh, moving_box):
        tol = 1e-12
        integrator = RattleIntegrator(box_mesh, None, SolverParams(dt=0.1, tol=tol))
        P0, L0 = momenta(box_mesh, moving_box)
        states = integrator.run(moving_box, 100000)
        P1, L1 = momenta(box_mesh, states)
        assert np.linalg.norm(P1 - P0) <= 1e-12 * np.linalg.norm(moving_box.T_half, axis=1).sum()
        assert np.linalg.norm(L1 - L0) <= 100 * tol * max(np.linalg.norm(L0), angular_scale(moving_box))
        assert states.orthogonality_error() < 1e-10

    def test_free_asymmetric_body(self, unit_material):
        mesh = build_box_lattice((1.0, 2.0, 3.0), (1, 1, 1), unit_material)
        states = set_initial_velocity(mesh, init_rest(mesh), v=(0.1, 0.0, 0.0), Omega=(0.3, 0.5, 0.2))
        integrator = RattleIntegrator(mesh, None, SolverParams(dt=0.05, tol=1e-14))
        _, L0 = momenta(mesh, states)
        final = integrator.run(states, 400)
        _, L1 = momenta(mesh, final)
        np.testing.assert_allclose(L1, L0, atol=1e-12 * np.linalg.norm(L0))
        assert final.orthogonality_error() < 1e-12
        np.testing.assert_allclose(final.X[0], mesh.X0[0] + [0.1 * 20.0, 0.0, 0.0], atol=1e-12)
        assert integrator.max_margin < 1.0

    def test_bounded_energy_of_axial_oscillation(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        integrator = RattleIntegrator(pair_mesh, None, SolverParams(dt=0.05))
        reports = []

        def record(previous, current):
            reports.append(total_energy(pair_mesh, previous, current, integrator.assembler))

        integrator.run(states, 2000, callback=record)
        assert energy_drift(reports).relative_band < 1e-2


class TestStartup:

    @staticmethod
    def final_positions(mesh, dt, seeded=True, final_time=6.0):
        states = init_rest(mesh)
        states.X[1, 0] += 0.01
        integrator = RattleIntegrator(mesh, None, SolverParams(dt=dt, tol=1e-14))
        if seeded:
            states = integrator.start(states)
        return integrator.run(states, int(round(final_time / dt))).X

    def test_start_shifts_momenta_back_half_a_step(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        integrator = RattleIntegrator(pair_mesh, None, SolverParams(dt=0.1))
        F, _ = integrator.assembler.assemble(states, integrator.loads, 0.0)
        start = integrator.start(states)
        np.testing.assert_allclose(start.T_half, -0.05 * F)
        np.testing.assert_array_equal(start.X, states.X)
        first = integrator.step(start)
        np.testing.assert_allclose(first.T_half, 0.05 * F, atol=1e-18)

    def test_start_keeps_fixed_particles_and_momenta(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, LoadSet(fixed=[2]), SolverParams(dt=0.1))
        start = integrator.start(moving_box)
        np.testing.assert_array_equal(start.T_half[2], 0.0)
        np.testing.assert_array_equal(start.Z_half[2], 0.0)
        P0, L0 = momenta(box_mesh, moving_box)
        P1, L1 = momenta(box_mesh, RattleIntegrator(box_mesh, None, SolverParams(dt=0.1)).start(moving_box))
        np.testing.assert_allclose(P1, P0, atol=1e-16)
        np.testing.assert_allclose(L1, L0, atol=1e-15)

    def test_displaced_start_is_second_order(self, pair_mesh):
        reference = self.final_positions(pair_mesh, 0.0025)
        seeded = [(dt, np.abs(self.final_positions(pair_mesh, dt) - reference).max())
                  for dt in (0.08, 0.04, 0.02)]
        raw = [(dt, np.abs(self.final_positions(pair_mesh, dt, seeded=False) - reference).max())
               for dt in (0.08, 0.04, 0.02)]
        assert convergence_slope(seeded) == pytest.approx(2.0, abs=0.2)
        assert convergence_slope(raw) < 1.5


class TestReversal:

    def test_reverse_run_retraces(self, box_mesh, moving_box):
        params = SolverParams(dt=0.1, tol=1e-14)
        integrator = RattleIntegrator(box_mesh, None, params)
        final = integrator.run(moving_box, 200)
        back = integrator.reverse(final, 200)
        np.testing.assert_allclose(back.X, moving_box.X, atol=1e-8)
        np.testing.assert_allclose(back.Q, moving_box.Q, atol=1e-8)
        assert back.step == 0
        assert back.t == pytest.approx(0.0, abs=1e-12)

    def test_oscillator_retraces_to_round_off(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        integrator = RattleIntegrator(pair_mesh, None, SolverParams(dt=0.05, tol=1e-14))
        start = integrator.start(states)
        back = integrator.reverse(integrator.run(start, 1000), 1000)
        assert np.abs(back.X - start.X).max() <= 1e-8 * pair_mesh.h_min
        np.testing.assert_allclose(back.T_half, start.T_half, atol=1e-12)
        assert back.step == 0

    def test_zero_steps(self, box_mesh, moving_box):
        back = reverse_run(box_mesh, moving_box, 0, SolverParams(dt=0.1))
        np.testing.assert_array_equal(back.X, moving_box.X)

    @pytest.mark.parametrize("loads, n", [
        (LoadSet(damping=0.1), 5),
        (LoadSet(point_forces=[PointForce(0, (1.0, 0.0, 0.0), TimeProfile('ricker', f0=1.0))]), 5),
        (LoadSet(), -1),
    ])
    def test_rejected(self, box_mesh, moving_box, loads, n):
        with pytest.raises(IntegratorError):
            reverse_run(box_mesh, moving_box, n, SolverParams(dt=0.1), loads)


class TestStep:

    def test_cfl_guard(self, unit_material):
        mesh = build_box_lattice((1.0, 1.0, 1.0), (1, 1, 1), unit_material)
        states = set_initial_velocity(mesh, init_rest(mesh), Omega=(100.0, 0.0, 0.0))
        with pytest.raises(StepFailure) as info:
            rattle_step(mesh, states, None, SolverParams(dt=0.1))
        assert info.value.step == 0
        assert info.value.particle == 0
        assert info.value.margin == pytest.approx(10.0 / CFL_BOUND)

    def test_fixed_particles_stay_put(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, LoadSet(fixed=[0, 5]), SolverParams(dt=0.1))
        final = integrator.run(moving_box, 20)
        np.testing.assert_array_equal(final.X[[0, 5]], moving_box.X[[0, 5]])
        np.testing.assert_array_equal(final.Q[[0, 5]], moving_box.Q[[0, 5]])
        assert not np.allclose(final.X[1], moving_box.X[1])

    def test_damping_removes_energy(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, LoadSet(damping=0.5), SolverParams(dt=0.1))
        final = integrator.run(moving_box, 200)
        assert total_energy(box_mesh, final).total < 0.1 * total_energy(box_mesh, moving_box).total

    def test_damping_limit(self, box_mesh, moving_box):
        with pytest.raises(IntegratorError, match="damping"):
            rattle_step(box_mesh, moving_box, LoadSet(damping=20.0), SolverParams(dt=0.1))

    def test_callback_stops_early(self, box_mesh, moving_box):
        integrator = RattleIntegrator(box_mesh, None, SolverParams(dt=0.1))
        final = integrator.run(moving_box, 50, callback=lambda prev, cur: cur.step >= 7)
        assert final.step == 7
        integrator.close()
