#!/usr/bin/env python3
"""
rattle-dem Modules Package
Core functional modules for discrete-element elastodynamics
"""

from .config_manager import ConfigManager, ConfigValidationError, parse_config, resolve_selector
from .mesh_builder import Mesh, MaterialParams, MeshError, build_box_lattice, build_mapped_shell
from .particle_state import StateArray, StateError, init_rest
from .mechanics import ForceAssembler, LoadSet, MechanicsError, assemble, potential_energy
from .rattle_integrator import RattleIntegrator, SolverParams, IntegratorError, StepFailure, suggest_dt
from .static_solver import StaticSolver, StaticSolverError
from .diagnostics import DiagnosticsError, total_energy, momenta
from .scenario_runner import ScenarioRunner, ScenarioError, run_scenario
from .benchmark_scenarios import BENCHMARKS, run_benchmark

__all__ = [
    'ConfigManager',
    'ConfigValidationError',
    'parse_config',
    'resolve_selector',
    'Mesh',
    'MaterialParams',
    'MeshError',
    'build_box_lattice',
    'build_mapped_shell',
    'StateArray',
    'StateError',
    'init_rest',
    'ForceAssembler',
    'LoadSet',
    'MechanicsError',
    'assemble',
    'potential_energy',
    'RattleIntegrator',
    'SolverParams',
    'IntegratorError',
    'StepFailure',
    'suggest_dt',
    'StaticSolver',
    'StaticSolverError',
    'DiagnosticsError',
    'total_energy',
    'momenta',
    'ScenarioRunner',
    'ScenarioError',
    'run_scenario',
    'BENCHMARKS',
    'run_benchmark',
]
