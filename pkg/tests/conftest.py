"""
Shared fixtures: materials, small lattices and perturbed states
"""

import numpy as np
import pytest

from modules.mesh_builder import MaterialParams, build_box_lattice
from modules.particle_state import init_rest, set_initial_velocity
from utils.geometry_utils import rotation_matrix


@pytest.fixture
def unit_material():
    return MaterialParams(E=1.0, nu=0.25, rho=1.0)


@pytest.fixture
def pair_mesh(unit_material):
    """Two unit cubes side by side along x"""
    return build_box_lattice((2.0, 1.0, 1.0), (2, 1, 1), unit_material)


@pytest.fixture
def box_mesh(unit_material):
    """3 x 2 x 2 lattice of unit cubes"""
    return build_box_lattice((3.0, 2.0, 2.0), (3, 2, 2), unit_material)


def perturb(mesh, seed=0, displacement=1e-2, rotation=1e-2, velocity=1e-2, spin=1e-2):
    """Rest state with small random displacements, rotations and velocities"""
    rng = np.random.default_rng(seed)
    n = mesh.n_particles
    states = init_rest(mesh)
    states.X = mesh.X0 + displacement * rng.standard_normal((n, 3))
    states.Q = rotation_matrix(rotation * rng.standard_normal((n, 3)))
    return set_initial_velocity(mesh, states,
                                v=velocity * rng.standard_normal((n, 3)),
                                Omega=spin * rng.standard_normal((n, 3)))


@pytest.fixture
def moving_box(box_mesh):
    return perturb(box_mesh)
