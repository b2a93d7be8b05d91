#!/usr/bin/env python3
"""
DEM Particle State Module
Evolving kinematic state of all particles in the staggered RATTLE representation
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from utils.file_utils import FileOperationError, FileUtils
from utils.geometry_utils import rotation_matrix, skew, vee

logger = logging.getLogger(__name__)

CHECKPOINT_COLUMNS = (
    ['id', 'X_x', 'X_y', 'X_z']
    + [f'Q_{r}{c}' for r in range(3) for c in range(3)]
    + ['T_x', 'T_y', 'T_z']
    + [f'Z_{r}{c}' for r in range(3) for c in range(3)]
)


class StateError(Exception):
    """Particle state error"""
    pass


@dataclass
class StateArray:
    """
    Positions, rotations and half-step momenta of every particle

    Q is the material rotation (identity at rest). Z_half is expressed in the
    principal body frame Qb = Q @ axes, where D = diag(d) is diagonal.
    """
    X: np.ndarray         # (N, 3) positions X^n
    Q: np.ndarray         # (N, 3, 3) rotations Q^n
    T_half: np.ndarray    # (N, 3) linear momenta T^{n-1/2}
    Z_half: np.ndarray    # (N, 3, 3) body angular update Z^{n-1/2}
    d: np.ndarray         # (N, 3) diagonal of D
    t: float = 0.0
    step: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_particles(self) -> int:
        return self.X.shape[0]

    def copy(self) -> 'StateArray':
        return StateArray(X=self.X.copy(), Q=self.Q.copy(), T_half=self.T_half.copy(),
                          Z_half=self.Z_half.copy(), d=self.d.copy(), t=self.t,
                          step=self.step, meta=dict(self.meta))

    def orthogonality_error(self) -> float:
        """max |Q^T Q - Id| over all particles"""
        if self.n_particles == 0:
            return 0.0
        gram = np.einsum('nki,nkj->nij', self.Q, self.Q)
        return float(np.abs(gram - np.eye(3)).max())


@dataclass(frozen=True)
class DerivedKinematics:
    """Velocities and momenta recovered from a state"""
    v: np.ndarray       # (N, 3)
    Omega: np.ndarray   # (N, 3) world-frame angular velocity
    P: np.ndarray       # (N, 3, 3) rotational momentum j(Omega) Qb D
    R: np.ndarray       # (N, 3, 3) world-frame inertia


def body_rotation(mesh, Q: np.ndarray) -> np.ndarray:
    """Principal body rotation Qb = Q @ axes"""
    return Q @ mesh.axes


def init_rest(mesh) -> StateArray:
    """Rest state: X = X0, Q = Id, zero momenta"""
    n = mesh.n_particles
    return StateArray(
        X=np.array(mesh.X0, dtype=float),
        Q=np.tile(np.eye(3), (n, 1, 1)),
        T_half=np.zeros((n, 3)),
        Z_half=np.zeros((n, 3, 3)),
        d=np.array(mesh.d, dtype=float),
    )


def set_initial_velocity(mesh, states: StateArray, v=None, Omega=None) -> StateArray:
    """
    Impose translational and angular velocities

    Args:
        mesh: Mesh the state belongs to
        states: Current state (not modified)
        v: Velocity, (3,) for all particles or (N, 3)
        Omega: World angular velocity, (3,) or (N, 3)

    Returns:
        New StateArray with T_half = m v and Z_half = Qb^T j(Omega) Qb

    Raises:
        StateError: If inputs are not finite or have the wrong shape
    """
    n = states.n_particles
    out = states.copy()
    try:
        v_arr = np.broadcast_to(np.asarray(0.0 if v is None else v, dtype=float), (n, 3))
        w_arr = np.broadcast_to(np.asarray(0.0 if Omega is None else Omega, dtype=float), (n, 3))
    except ValueError as e:
        raise StateError(f"velocity shape mismatch: {e}")
    if not (np.all(np.isfinite(v_arr)) and np.all(np.isfinite(w_arr))):
        raise StateError("initial velocities must be finite")

    out.T_half = mesh.mass[:, None] * v_arr
    Qb = body_rotation(mesh, out.Q)
    out.Z_half = np.swapaxes(Qb, 1, 2) @ skew(w_arr) @ Qb
    return out


def body_angular_momentum(Z: np.ndarray, d: np.ndarray) -> np.ndarray:
    """vee(D Z - Z^T D) for the stored half step, (N, 3)"""
    DZ = d[:, :, None] * Z
    return vee(DZ - np.swapaxes(DZ, 1, 2))


def derived_kinematics(mesh, states: StateArray) -> DerivedKinematics:
    """Velocity, angular velocity, rotational momentum and world inertia"""
    v = states.T_half / mesh.mass[:, None]
    Qb = body_rotation(mesh, states.Q)
    QbT = np.swapaxes(Qb, 1, 2)
    W = Qb @ states.Z_half @ QbT
    Omega = vee(0.5 * (W - np.swapaxes(W, 1, 2)))
    P = skew(Omega) @ Qb * states.d[:, None, :]
    R = (Qb * mesh.inertia[:, None, :]) @ QbT
    return DerivedKinematics(v=v, Omega=Omega, P=P, R=R)


def apply_displacement_field(mesh, states: StateArray, field_fn, rotation_fn=None) -> StateArray:
    """
    Displace particles by a smooth field evaluated at their rest positions

    Args:
        mesh: Mesh
        states: State to start from (not modified)
        field_fn: Callable (N, 3) rest positions -> (N, 3) displacements
        rotation_fn: Optional callable returning (N, 3) rotation vectors

    Returns:
        New StateArray with X = X0 + u(X0) and Q = exp(j(theta(X0)))
    """
    out = states.copy()
    u = np.asarray(field_fn(mesh.X0), dtype=float)
    if u.shape != mesh.X0.shape:
        raise StateError(f"displacement field returned shape {u.shape}, expected {mesh.X0.shape}")
    out.X = mesh.X0 + u
    if rotation_fn is not None:
        theta = np.asarray(rotation_fn(mesh.X0), dtype=float)
        if theta.shape != mesh.X0.shape:
            raise StateError(f"rotation field returned shape {theta.shape}, expected {mesh.X0.shape}")
        out.Q = rotation_matrix(theta)
    return out


def _flatten(states: StateArray) -> np.ndarray:
    n = states.n_particles
    return np.hstack([
        np.arange(n, dtype=float)[:, None],
        states.X,
        states.Q.reshape(n, 9),
        states.T_half,
        states.Z_half.reshape(n, 9),
    ])


def write_checkpoint(states: StateArray, path: Union[str, Path]) -> Path:
    """
    Write a checkpoint; '.npz' selects the binary profile, anything else CSV

    The CSV profile uses 17 significant digits so a read/write cycle is byte-identical.
    """
    path = Path(path)
    if path.suffix == '.npz':
        FileUtils.ensure_directory(path.parent)
        try:
            np.savez(path, X=states.X, Q=states.Q, T_half=states.T_half,
                     Z_half=states.Z_half, d=states.d, t=states.t, step=states.step)
        except OSError as e:
            raise FileOperationError(f"Failed to write checkpoint {path}: {e}")
        return path
    return FileUtils.write_csv(path, CHECKPOINT_COLUMNS, _flatten(states),
                               comments=[f"t={float(states.t)!r}", f"step={states.step}"],
                               integer_columns=1, overwrite=True)


def read_checkpoint(path: Union[str, Path], mesh) -> StateArray:
    """
    Read a checkpoint written by write_checkpoint

    Raises:
        StateError: If the checkpoint does not match the mesh
    """
    path = Path(path)
    if path.suffix == '.npz':
        try:
            with np.load(path) as data:
                states = StateArray(X=data['X'], Q=data['Q'], T_half=data['T_half'],
                                    Z_half=data['Z_half'], d=data['d'],
                                    t=float(data['t']), step=int(data['step']))
        except (OSError, KeyError) as e:
            raise FileOperationError(f"Failed to read checkpoint {path}: {e}")
    else:
        header, rows, comments = FileUtils.read_csv(path)
        if list(header) != CHECKPOINT_COLUMNS:
            raise StateError(f"{path}: unexpected checkpoint columns")
        meta = dict(c.split('=', 1) for c in comments if '=' in c)
        n = rows.shape[0]
        states = StateArray(
            X=rows[:, 1:4].copy(),
            Q=rows[:, 4:13].reshape(n, 3, 3).copy(),
            T_half=rows[:, 13:16].copy(),
            Z_half=rows[:, 16:25].reshape(n, 3, 3).copy(),
            d=np.array(mesh.d, dtype=float),
            t=float(meta.get('t', 0.0)),
            step=int(meta.get('step', 0)),
        )
    if states.n_particles != mesh.n_particles:
        raise StateError(
            f"checkpoint has {states.n_particles} particles, mesh has {mesh.n_particles}"
        )
    logger.debug("Read checkpoint %s (step %d)", path, states.step)
    return states


def main():
    """Test particle state"""
    try:
        from modules.mesh_builder import MaterialParams, build_box_lattice

        print("Testing Particle State")
        print("=" * 40)
        mesh = build_box_lattice((1, 1, 1), (1, 1, 1), MaterialParams(E=1.0, nu=0.25, rho=1.0))
        states = set_initial_velocity(mesh, init_rest(mesh), v=(1, 0, 0), Omega=(0.5, 0, 0))
        kin = derived_kinematics(mesh, states)
        print(f"v = {kin.v[0]}, Omega = {kin.Omega[0]}")
        print("\n✓ Particle state tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
