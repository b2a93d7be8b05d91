#!/usr/bin/env python3
"""
DEM Static Solver Module
Static equilibrium by minimising the potential energy over positions and rotations
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import minimize

from modules.mechanics import ForceAssembler, LoadSet
from modules.particle_state import StateArray
from utils.geometry_utils import left_jacobian, rotation_matrix

logger = logging.getLogger(__name__)


class StaticSolverError(Exception):
    """Static equilibrium solve error"""
    pass


@dataclass
class StaticResult:
    states: StateArray
    energy: float
    iterations: int
    converged: bool
    gradient_norm: float
    message: str
    newton_steps: int = 0


class StaticSolver:
    """
    Minimises U_h - W_ext with L-BFGS-B using the assembled forces and torques
    as exact gradients

    Rotations are parametrised as Q = exp(j(phi)) Q_ref, so the torque maps to
    the phi-gradient through the transposed left Jacobian. External loads are
    treated as constant (dead) loads.
    """

    def __init__(self, mesh, loads: Optional[LoadSet] = None, threads: int = 1):
        self.mesh = mesh
        self.loads = loads if loads is not None else LoadSet()
        self.assembler = ForceAssembler(mesh, threads=threads)
        self.length_scale = mesh.h_min
        self.energy_scale = mesh.material.E * self.length_scale ** 3

    def solve(self, states: StateArray, free_translation: Optional[np.ndarray] = None,
              free_rotation: Optional[np.ndarray] = None, gtol: float = 1e-10,
              max_iter: int = 20000, strict: bool = True, ftol: float = 1e-16,
              newton_steps: int = 0, fd_step: float = 1e-6) -> StaticResult:
        """
        Relax the selected degrees of freedom to equilibrium

        Args:
            states: Starting state; positions/rotations of frozen DoFs are kept
            free_translation: (N,) mask of particles whose position may move
            free_rotation: (N,) mask of particles whose rotation may change
            gtol: Projected-gradient tolerance in units of E h^2
            max_iter: L-BFGS-B iteration cap
            strict: Raise when the optimiser does not report convergence
            ftol: Relative energy-decrease stop; 0 leaves only the gradient test
            newton_steps: Newton refinements after L-BFGS-B, with a finite-difference
                tangent; resolves linear problems to round-off
            fd_step: Central-difference step of the tangent, in scaled DoF units

        Returns:
            StaticResult with zero momenta in the relaxed state

        Raises:
            StaticSolverError: On failure when strict
        """
        mesh = self.mesh
        n = mesh.n_particles
        fixed = self.loads.fixed_mask(n)
        move = np.ones(n, dtype=bool) if free_translation is None else np.asarray(free_translation, bool)
        turn = np.ones(n, dtype=bool) if free_rotation is None else np.asarray(free_rotation, bool)
        move = move & ~fixed
        turn = turn & ~fixed
        n_move, n_turn = int(move.sum()), int(turn.sum())
        if n_move + n_turn == 0:
            raise StaticSolverError("no free degrees of freedom")

        X_ref = states.X.copy()
        Q_ref = states.Q.copy()
        F_ext, M_ext = self.loads.external(n, states.t)
        h, scale = self.length_scale, self.energy_scale
        trial = states.copy()

        def unpack(x):
            dX = x[:3 * n_move].reshape(n_move, 3) * h
            phi = x[3 * n_move:].reshape(n_turn, 3)
            return dX, phi

        def objective(x):
            dX, phi = unpack(x)
            trial.X = X_ref.copy()
            trial.X[move] += dX
            trial.Q = Q_ref.copy()
            if n_turn:
                trial.Q[turn] = rotation_matrix(phi) @ Q_ref[turn]
            F, M, _ = self.assembler.internal(trial)
            energy = self.assembler.potential_energy(trial).total
            energy -= float(np.sum(F_ext[move] * dX)) + float(np.sum(M_ext[turn] * phi))
            grad_X = -(F[move] + F_ext[move]) * h
            grad_phi = np.zeros((n_turn, 3))
            if n_turn:
                J = left_jacobian(phi)
                grad_phi = -np.einsum('nji,nj->ni', J, M[turn]) - M_ext[turn]
            grad = np.concatenate([grad_X.ravel(), grad_phi.ravel()])
            return energy / scale, grad / scale

        x0 = np.zeros(3 * (n_move + n_turn))
        result = minimize(objective, x0, jac=True, method='L-BFGS-B',
                          options={'maxiter': max_iter, 'gtol': gtol, 'ftol': ftol,
                                   'maxcor': 30})
        x = result.x
        refined = 0
        for _ in range(newton_steps):
            _, grad = objective(x)
            if refined and np.abs(grad).max() <= gtol:
                break
            tangent = self._tangent(objective, x, fd_step)
            try:
                x = x - linalg.solve(tangent, grad, assume_a='sym')
            except linalg.LinAlgError as e:
                raise StaticSolverError(f"singular tangent in Newton refinement: {e}") from e
            refined += 1

        energy, grad = objective(x)
        grad_norm = float(np.abs(grad).max()) if grad.size else 0.0
        converged = (bool(result.success) and not refined) or grad_norm <= gtol

        relaxed = trial.copy()
        relaxed.T_half = np.zeros_like(states.T_half)
        relaxed.Z_half = np.zeros_like(states.Z_half)
        logger.info("Static solve: %d iterations, %d Newton steps, max gradient %.3e (%s)",
                    result.nit, refined, grad_norm, result.message)
        if strict and not converged:
            raise StaticSolverError(f"static solve did not converge: {result.message} "
                                    f"(max gradient {grad_norm:.3e})")
        return StaticResult(states=relaxed, energy=energy * scale, iterations=int(result.nit),
                            converged=converged, gradient_norm=grad_norm,
                            message=str(result.message), newton_steps=refined)

    @staticmethod
    def _tangent(objective, x: np.ndarray, step: float) -> np.ndarray:
        """Symmetrised central-difference Jacobian of the scaled gradient"""
        n = x.size
        tangent = np.empty((n, n))
        for k in range(n):
            shift = np.zeros(n)
            shift[k] = step
            tangent[:, k] = (objective(x + shift)[1] - objective(x - shift)[1]) / (2.0 * step)
        return 0.5 * (tangent + tangent.T)

    def close(self) -> None:
        self.assembler.close()


def relax(mesh, states: StateArray, loads: Optional[LoadSet] = None, **kwargs) -> StaticResult:
    """Convenience wrapper around StaticSolver.solve"""
    solver = StaticSolver(mesh, loads)
    try:
        return solver.solve(states, **kwargs)
    finally:
        solver.close()
