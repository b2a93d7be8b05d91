"""
Tests for link kinematics, forces, torques, energies and external loads
"""

import numpy as np
import pytest

from modules.mechanics import (EndMoment, ForceAssembler, LoadSet, MechanicsError, PointForce,
                               SingularConfigurationError, TimeProfile, assemble,
                               interface_displacement, link_force, link_torques, potential_energy,
                               ricker, volumetric_strain)
from modules.particle_state import init_rest
from utils.geometry_utils import rotation_matrix
from tests.conftest import perturb


def energy(assembler, states):
    return assembler.potential_energy(states).total


class TestRest:

    def test_rest_is_force_free(self, box_mesh):
        F, M = assemble(box_mesh, init_rest(box_mesh))
        np.testing.assert_array_equal(F, 0.0)
        np.testing.assert_array_equal(M, 0.0)
        assert potential_energy(box_mesh, init_rest(box_mesh)).total == 0.0
        np.testing.assert_array_equal(volumetric_strain(box_mesh, init_rest(box_mesh)), 0.0)

    def test_rigid_translation_and_rotation(self, box_mesh):
        states = init_rest(box_mesh)
        R = rotation_matrix([0.2, -0.1, 0.3])
        states.X = box_mesh.X0 @ R.T + np.array([1.0, 2.0, 3.0])
        states.Q = np.tile(R, (box_mesh.n_particles, 1, 1))
        F, M = assemble(box_mesh, states)
        np.testing.assert_allclose(F, 0.0, atol=1e-14)
        np.testing.assert_allclose(M, 0.0, atol=1e-14)
        assert potential_energy(box_mesh, states).total == pytest.approx(0.0, abs=1e-28)


class TestEnergyGradient:

    @pytest.mark.parametrize("seed", range(100))
    def test_forces_are_minus_position_gradient(self, box_mesh, seed):
        states = perturb(box_mesh, seed=seed)
        assembler = ForceAssembler(box_mesh)
        F, _, _ = assembler.internal(states)
        h = 1e-6
        fd = np.zeros_like(F)
        for p in range(box_mesh.n_particles):
            for c in range(3):
                plus, minus = states.copy(), states.copy()
                plus.X[p, c] += h
                minus.X[p, c] -= h
                fd[p, c] = -(energy(assembler, plus) - energy(assembler, minus)) / (2 * h)
        np.testing.assert_allclose(fd, F, atol=1e-7 * np.abs(F).max())

    @pytest.mark.parametrize("seed", range(100))
    def test_torques_are_minus_rotation_gradient(self, box_mesh, seed):
        states = perturb(box_mesh, seed=seed, rotation=5e-2)
        assembler = ForceAssembler(box_mesh)
        _, M, _ = assembler.internal(states)
        h = 1e-6
        fd = np.zeros_like(M)
        for p in range(box_mesh.n_particles):
            for c in range(3):
                step = np.zeros(3)
                step[c] = h
                plus, minus = states.copy(), states.copy()
                plus.Q[p] = rotation_matrix(step) @ states.Q[p]
                minus.Q[p] = rotation_matrix(-step) @ states.Q[p]
                fd[p, c] = -(energy(assembler, plus) - energy(assembler, minus)) / (2 * h)
        np.testing.assert_allclose(fd, M, atol=1e-7 * np.abs(M).max())

    def test_internal_loads_balance(self, moving_box, box_mesh):
        F, M = assemble(box_mesh, moving_box)
        np.testing.assert_allclose(F.sum(axis=0), 0.0, atol=1e-15)
        torque = np.cross(moving_box.X, F).sum(axis=0) + M.sum(axis=0)
        np.testing.assert_allclose(torque, 0.0, atol=1e-14)


class TestSingleLink:

    def test_matches_assembler(self, pair_mesh):
        states = perturb(pair_mesh, seed=4, displacement=3e-2, rotation=3e-2)
        assembler = ForceAssembler(pair_mesh)
        kin_all, _, _, _ = assembler.kinematics(states)
        F, M, _ = assembler.internal(states)

        link = pair_mesh.link(0)
        kin = interface_displacement(states.X[0], states.Q[0], states.X[1], states.Q[1], link,
                                     eps_v_link=kin_all.eps_v_link[0])
        np.testing.assert_allclose(kin.du, kin_all.du[0], atol=1e-15)
        force = link_force(link, kin, pair_mesh.material)
        Mt_i, Mf_i, Mt_j, Mf_j = link_torques(link, states.Q[0], states.Q[1], kin, pair_mesh.material)
        np.testing.assert_allclose(force, F[0], atol=1e-14)
        np.testing.assert_allclose(-force, F[1], atol=1e-14)
        np.testing.assert_allclose(Mt_i + Mf_i, M[0], atol=1e-14)
        np.testing.assert_allclose(Mt_j + Mf_j, M[1], atol=1e-14)
        np.testing.assert_array_equal(Mf_j, -Mf_i)

    def test_axial_stretch(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        F, M = assemble(pair_mesh, states)
        assert F[0, 0] > 0 and F[1, 0] < 0
        np.testing.assert_allclose(F[:, 1:], 0.0, atol=1e-16)
        np.testing.assert_allclose(M, 0.0, atol=1e-16)
        energy_parts = potential_energy(pair_mesh, states)
        assert energy_parts.U_t == pytest.approx(0.5 * 0.8 * 1e-4)
        assert energy_parts.U_f == 0.0
        # both particles see eps = S gap / (2 V') with V' = 2.25
        np.testing.assert_allclose(volumetric_strain(pair_mesh, states), 0.01 / 4.5)

    def test_force_of_pure_stretch(self, pair_mesh):
        # k = 0.8 and lambda = 0.4 for E = 1, nu = 0.25 on a unit face
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        link = pair_mesh.link(0)
        kin = interface_displacement(states.X[0], states.Q[0], states.X[1], states.Q[1], link,
                                     eps_v_link=0.005)
        np.testing.assert_allclose(kin.du, [0.01, 0.0, 0.0], rtol=1e-12)
        np.testing.assert_allclose(kin.n, [1.0, 0.0, 0.0])
        force = link_force(link, kin, pair_mesh.material)
        np.testing.assert_allclose(force, [0.01, 0.0, 0.0], rtol=1e-12, atol=1e-18)

    def test_single_axis_flexion(self, pair_mesh):
        link = pair_mesh.link(0)
        theta = 0.05
        states = init_rest(pair_mesh)
        states.Q[1] = rotation_matrix(theta * link.t0)
        kin = interface_displacement(states.X[0], states.Q[0], states.X[1], states.Q[1], link)
        _, Mf_i, _, Mf_j = link_torques(link, states.Q[0], states.Q[1], kin, pair_mesh.material)
        # alpha_n + alpha_s = E Is / S
        expected = pair_mesh.material.E * link.Is * np.sin(theta) / link.D0 * link.t0
        np.testing.assert_allclose(Mf_i, expected, atol=1e-17)
        np.testing.assert_array_equal(Mf_j, -Mf_i)
        assert link.Is == pytest.approx(1.0 / 12.0)

    def test_coincident_centers(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1] = states.X[0]
        with pytest.raises(SingularConfigurationError, match="link 0"):
            assemble(pair_mesh, states)


class TestThreading:

    def test_thread_count_does_not_change_results(self, box_mesh, moving_box):
        with ForceAssembler(box_mesh, threads=1, chunk_size=4) as serial, \
                ForceAssembler(box_mesh, threads=3, chunk_size=4) as pooled:
            F1, M1, e1 = serial.internal(moving_box)
            F3, M3, e3 = pooled.internal(moving_box)
        np.testing.assert_array_equal(F1, F3)
        np.testing.assert_array_equal(M1, M3)
        np.testing.assert_array_equal(e1, e3)

    def test_bad_thread_count(self, box_mesh):
        with pytest.raises(MechanicsError, match="threads"):
            ForceAssembler(box_mesh, threads=0)


class TestProfiles:

    def test_ricker_peak_and_zeros(self):
        assert ricker(0.5, f0=2.0, t0=0.5, A=3.0) == pytest.approx(3.0)
        zero = 0.5 + 1.0 / (np.pi * 2.0 * np.sqrt(2.0))
        assert ricker(zero, f0=2.0, t0=0.5) == pytest.approx(0.0, abs=1e-15)
        assert ricker(np.linspace(0, 1, 5), f0=2.0, t0=0.5).shape == (5,)

    def test_ricker_needs_positive_frequency(self):
        with pytest.raises(MechanicsError):
            ricker(0.0, f0=0.0, t0=0.0)

    def test_profiles(self):
        ramp = TimeProfile(kind='ramp', amplitude=2.0, duration=4.0)
        assert ramp(-1.0) == 0.0
        assert ramp(1.0) == pytest.approx(0.5)
        assert ramp(10.0) == pytest.approx(2.0)
        assert TimeProfile(amplitude=5.0)(123.0) == 5.0
        assert not TimeProfile().time_dependent
        assert TimeProfile(kind='ricker', f0=1.0).time_dependent

    @pytest.mark.parametrize("kwargs", [
        {'kind': 'sine'},
        {'kind': 'ricker', 'f0': 0.0},
        {'kind': 'ramp', 'duration': 0.0},
    ])
    def test_invalid_profiles(self, kwargs):
        with pytest.raises(MechanicsError):
            TimeProfile(**kwargs)


class TestLoadSet:

    def test_external(self):
        loads = LoadSet(point_forces=[PointForce(1, (0.0, 2.0, 0.0), TimeProfile(amplitude=3.0))],
                        end_moments=[EndMoment(0, (0.0, 0.0, 2.0), 1.5)])
        F, M = loads.external(2, 0.0)
        np.testing.assert_allclose(F, [[0, 0, 0], [0, 6, 0]])
        np.testing.assert_allclose(M, [[0, 0, 1.5], [0, 0, 0]])
        assert loads.has_external and not loads.time_dependent

    def test_fixed_particles_get_no_load(self, pair_mesh):
        states = init_rest(pair_mesh)
        states.X[1, 0] += 0.01
        loads = LoadSet(point_forces=[PointForce(0, (1.0, 0.0, 0.0))], fixed=[1])
        F, M = assemble(pair_mesh, states, loads)
        np.testing.assert_array_equal(F[1], 0.0)
        assert F[0, 0] > 1.0

    def test_invalid(self):
        with pytest.raises(MechanicsError, match="out of range"):
            LoadSet(fixed=[5]).fixed_mask(2)
        with pytest.raises(MechanicsError, match="damping"):
            LoadSet(damping=-1.0)
