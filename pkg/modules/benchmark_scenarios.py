#!/usr/bin/env python3
"""
DEM Benchmark Scenarios Module
Canned scenarios with their measurements, plus the static and convergence studies
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from modules.config_manager import ConfigManager
from modules.diagnostics import (DiagnosticsError, arrival_time, curl_consistency, energy_drift,
                                 region_average_displacement, richardson_order, rotation_vector)
from modules.mechanics import EndMoment, LoadSet, PointForce
from modules.mesh_builder import MaterialParams, Mesh, build_box_lattice
from modules.particle_state import StateArray, apply_displacement_field, init_rest
from modules.rattle_integrator import RattleIntegrator, SolverParams
from modules.scenario_runner import RunResult, ScenarioError, ScenarioRunner, ScenarioSetup
from modules.static_solver import StaticSolver
from utils import FileUtils

logger = logging.getLogger(__name__)

# first clamped-free bending eigenvalue (beta_1 L)
CANTILEVER_MODE_1 = 1.875104068711961


@dataclass(frozen=True)
class Benchmark:
    """A canned scenario: config builder, default parameters and measurement"""
    name: str
    description: str
    build_config: Callable[[Dict[str, Any]], Dict[str, Any]]
    measure: Callable[[ScenarioSetup, RunResult, Dict[str, Any]], Dict[str, Any]]
    defaults: Dict[str, Any] = field(default_factory=dict)


def _nearest(mesh: Mesh, point: Sequence[float]) -> int:
    return int(np.argmin(np.linalg.norm(mesh.X0 - np.asarray(point, dtype=float), axis=1)))


def _ricker(amplitude: float, f0: float) -> Dict[str, Any]:
    return {'kind': 'ricker', 'amplitude': amplitude, 'f0': f0, 't0': 1.5 / f0}


def tip_rotation_angle(states: StateArray, ids: Sequence[int], axis: int = 2) -> float:
    """
    Sum of relative rotation angles along a chain of particles

    Adding link-by-link angles avoids the wrap of a single rotation vector
    at pi, so bends past one full turn are measured correctly.
    """
    ids = list(ids)
    rel = np.swapaxes(states.Q[ids[:-1]], 1, 2) @ states.Q[ids[1:]]
    return float(rotation_vector(rel)[:, axis].sum())


def cantilever_expected_angle(n_elements: int) -> float:
    """N arcsin(2 pi / N): tip angle of the discrete beam under M = 2 pi EI / L"""
    if n_elements <= 6:
        raise ScenarioError("cantilever needs more than 6 elements to reach a full turn")
    return n_elements * math.asin(2.0 * math.pi / n_elements)


def _cantilever_geometry(n_elements: int, length: float) -> Dict[str, Any]:
    h = length / n_elements
    # one clamped root cell left of x = 0
    return {'generator': 'box', 'extent': [(n_elements + 1) * h, h, h],
            'counts': [n_elements + 1, 1, 1], 'origin': [-h, 0.0, 0.0]}


# ---------------------------------------------------------------- cantilever

def _cantilever_config(p: Dict[str, Any]) -> Dict[str, Any]:
    n, L = int(p['n_elements']), float(p['length'])
    E, nu, rho = float(p['E']), float(p['nu']), float(p['rho'])
    h = L / n
    EI = E * h ** 4 / 12.0
    omega_1 = CANTILEVER_MODE_1 ** 2 * math.sqrt(EI / (rho * h * h * L ** 4))
    ramp = 2.0 * (2.0 * math.pi / omega_1)
    c_p = MaterialParams(E=E, nu=nu, rho=rho).p_wave_speed
    dt = 0.25 * h / c_p
    return {
        'scenario': 'cantilever',
        'description': f"Cantilever of {n} elements bent into a full circle by an end moment",
        'geometry': _cantilever_geometry(n, L),
        'material': {'E': E, 'nu': nu, 'rho': rho},
        'loads': {
            'end_moments': [{'selector': {'ids': [n]}, 'axis': [0.0, 0.0, 1.0],
                             'magnitude': 2.0 * math.pi * EI / L,
                             'profile': {'kind': 'ramp', 'duration': ramp}}],
            'fixed': [{'ids': [0]}],
            'damping': 2.0 * omega_1,
        },
        'solver': {'dt': dt, 'n_steps': int(math.ceil((ramp + 20.0 / omega_1) / dt)),
                   'stop_kinetic_ratio': float(p['stop_ratio'])},
        'output': {'probes': [{'ids': [n]}], 'probe_stride': 100, 'energy_stride': 100},
    }


def _cantilever_measure(setup: ScenarioSetup, result: RunResult, p: Dict[str, Any]) -> Dict[str, Any]:
    n = int(p['n_elements'])
    angle = tip_rotation_angle(result.states, range(n + 1))
    expected = cantilever_expected_angle(n)
    return {'tip_angle': angle, 'expected_angle': expected,
            'relative_error': abs(angle - expected) / expected,
            'error_vs_2pi': abs(angle - 2.0 * math.pi)}


def cantilever_static(n_elements: int, length: float = 1.0,
                      material: Optional[MaterialParams] = None,
                      load_steps: int = 8, threads: int = 1) -> Dict[str, Any]:
    """
    Bend the cantilever statically under M = 2 pi EI / L

    The moment is applied in load_steps increments so each static solve starts
    close to its equilibrium.

    Returns:
        Dictionary with tip_angle, expected_angle, relative_error, error_vs_2pi, converged
    """
    material = material or MaterialParams(E=1.0, nu=0.3, rho=1.0)
    geometry = _cantilever_geometry(n_elements, length)
    mesh = build_box_lattice(geometry['extent'], geometry['counts'], material,
                             origin=geometry['origin'])
    h = length / n_elements
    moment = 2.0 * math.pi * material.E * h ** 4 / 12.0 / length
    states = init_rest(mesh)
    converged = True
    for k in range(1, load_steps + 1):
        loads = LoadSet(end_moments=[EndMoment(n_elements, (0.0, 0.0, 1.0), moment * k / load_steps)],
                        fixed=frozenset({0}))
        solver = StaticSolver(mesh, loads, threads=threads)
        try:
            result = solver.solve(states, gtol=1e-11, strict=False)
        finally:
            solver.close()
        states = result.states
        converged = converged and result.converged
        logger.debug("cantilever N=%d load step %d/%d: %d iterations", n_elements, k,
                     load_steps, result.iterations)

    angle = tip_rotation_angle(states, range(n_elements + 1))
    expected = cantilever_expected_angle(n_elements)
    return {'n_elements': n_elements, 'tip_angle': angle, 'expected_angle': expected,
            'relative_error': abs(angle - expected) / expected,
            'error_vs_2pi': abs(angle - 2.0 * math.pi), 'converged': converged}


# ---------------------------------------------------------------- wave speed

def _wave_speed_config(p: Dict[str, Any]) -> Dict[str, Any]:
    cells, h = int(p['cells']), float(p['spacing'])
    if cells % 2 == 0:
        raise ScenarioError("wave-speed slab needs an odd cell count so the source sits at the origin")
    half = 0.5 * cells * h
    E, nu, rho, f0 = float(p['E']), float(p['nu']), float(p['rho']), float(p['f0'])
    amplitude = float(p['amplitude'])
    profile = _ricker(amplitude, f0)
    explosion = [{'selector': {'nearest': [sx * h, sy * h, 0.0]}, 'direction': [float(sx), float(sy), 0.0],
                  'profile': profile}
                 for sx, sy in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    material = MaterialParams(E=E, nu=nu, rho=rho)
    dt = 0.25 * h / material.p_wave_speed
    far = max(p['probe_distances'])
    t_end = 1.5 / f0 + far / material.s_wave_speed + 0.6 / f0
    return {
        'scenario': 'wave-speed',
        'description': "Plane-strain slab with explosion and torque Ricker sources at the origin",
        'geometry': {'generator': 'box', 'extent': [cells * h, cells * h, h],
                     'counts': [cells, cells, 1], 'origin': [-half, -half, -0.5 * h],
                     'free_boundaries': ['-x', '+x', '-y', '+y']},
        'material': {'E': E, 'nu': nu, 'rho': rho},
        'loads': {
            'point_forces': explosion,
            'end_moments': [{'selector': {'nearest': [0.0, 0.0, 0.0]}, 'axis': [0.0, 0.0, 1.0],
                             'magnitude': h, 'profile': _ricker(amplitude, f0)}],
        },
        'solver': {'dt': dt, 'n_steps': int(math.ceil(t_end / dt))},
        'output': {'probes': [{'nearest': [float(r), 0.0, 0.0]} for r in p['probe_distances']],
                   'probe_stride': 1, 'energy_stride': 50},
    }


def _wave_speed_measure(setup: ScenarioSetup, result: RunResult, p: Dict[str, Any]) -> Dict[str, Any]:
    near, far = (_nearest(setup.mesh, [float(r), 0.0, 0.0]) for r in p['probe_distances'][:2])
    distance = float(setup.mesh.X0[far, 0] - setup.mesh.X0[near, 0])
    threshold = float(p['threshold'])
    out: Dict[str, Any] = {'probe_separation': distance}
    # radial (x) motion on the ray carries P only, transverse (y) carries S only
    for label, component in (('p', 0), ('s', 1)):
        dt_arrival = (arrival_time(result.probes[far], threshold, component)
                      - arrival_time(result.probes[near], threshold, component))
        if dt_arrival <= 0.0:
            raise DiagnosticsError(f"{label.upper()} arrival at the far probe does not follow the near one")
        out[f'{label}_speed'] = distance / dt_arrival
    material = setup.mesh.material
    out['p_expected'] = material.p_wave_speed
    out['s_expected'] = material.s_wave_speed
    out['p_relative_error'] = abs(out['p_speed'] - out['p_expected']) / out['p_expected']
    out['s_relative_error'] = abs(out['s_speed'] - out['s_expected']) / out['s_expected']
    return out


# ---------------------------------------------------------------- pinched cylinder

def _pinched_cylinder_config(p: Dict[str, Any]) -> Dict[str, Any]:
    R = float(p['radius'])
    band = 0.15 * R
    height = float(p['height'])
    z_span = [-0.55 * height, 0.55 * height]

    def row(x_lo, x_hi):
        return {'box': {'min': [x_lo, -band, z_span[0]], 'max': [x_hi, band, z_span[1]]}}

    return {
        'scenario': 'pinched-cylinder',
        'description': "Cylinder released from a pinched static equilibrium",
        'geometry': {'generator': 'cylinder', 'counts': list(p['counts']),
                     'params': {'radius': R, 'height': height, 'thickness': float(p['thickness'])}},
        'material': {'E': float(p['E']), 'nu': float(p['nu']), 'rho': float(p['rho'])},
        'loads': {'pinch': [{'a': row(0.9 * R, 1.1 * R), 'b': row(-1.1 * R, -0.9 * R),
                             'magnitude': float(p['magnitude'])}]},
        'solver': {'n_steps': int(p['steps']), 'cfl_factor': 0.25},
        'output': {'energy_stride': 50, 'probe_stride': 50,
                   'probes': [{'nearest': [R, 0.0, 0.0]}, {'nearest': [-R, 0.0, 0.0]}]},
    }


def _pinched_cylinder_measure(setup: ScenarioSetup, result: RunResult, p: Dict[str, Any]) -> Dict[str, Any]:
    drift = energy_drift(result.energies)
    return {'energy_band_relative': drift.relative_band, 'energy_slope': drift.slope,
            'energy_slope_stderr': drift.slope_stderr, 'max_potential': drift.max_potential}


# ---------------------------------------------------------------- hemisphere

_EQUATOR_LOADS = ((1.0, 0.0, 1.0), (0.0, 1.0, -1.0), (-1.0, 0.0, 1.0), (0.0, -1.0, -1.0))


def _hemisphere_config(p: Dict[str, Any]) -> Dict[str, Any]:
    R = float(p['radius'])
    material = MaterialParams(E=float(p['E']), nu=float(p['nu']), rho=float(p['rho']))
    ramp = 20.0 * R / material.p_wave_speed
    forces = [{'selector': {'nearest': [cx * R, cy * R, 0.0]},
               'direction': [sign * cx, sign * cy, 0.0],
               'profile': {'kind': 'ramp', 'amplitude': float(p['force']), 'duration': ramp}}
              for cx, cy, sign in _EQUATOR_LOADS]
    return {
        'scenario': 'hemisphere',
        'description': "Hemispherical shell with a top cutout under alternating radial equator loads",
        'geometry': {'generator': 'hemisphere', 'counts': list(p['counts']),
                     'params': {'radius': R, 'thickness': float(p['thickness']),
                                'cutout_deg': float(p['cutout_deg'])}},
        'material': {'E': material.E, 'nu': material.nu, 'rho': material.rho},
        'loads': {'point_forces': forces, 'damping': 0.5 * material.p_wave_speed / R},
        'solver': {'n_steps': int(p['steps']), 'stop_kinetic_ratio': float(p['stop_ratio'])},
        'output': {'energy_stride': 50, 'probe_stride': 50,
                   'probes': [{'nearest': [cx * R, cy * R, 0.0]} for cx, cy, _ in _EQUATOR_LOADS]},
    }


def _hemisphere_measure(setup: ScenarioSetup, result: RunResult, p: Dict[str, Any]) -> Dict[str, Any]:
    R = float(p['radius'])
    mesh, states = setup.mesh, result.states
    out: Dict[str, Any] = {}
    for cx, cy, _ in _EQUATOR_LOADS:
        k = _nearest(mesh, [cx * R, cy * R, 0.0])
        radial = mesh.X0[k] / np.linalg.norm(mesh.X0[k])
        label = f"radial_deflection_{int(round(math.degrees(math.atan2(cy, cx)))) % 360}deg"
        out[label] = float(np.dot(states.X[k] - mesh.X0[k], radial))
    return out


# ---------------------------------------------------------------- oscillator

def oscillator_frequency(mesh: Mesh) -> float:
    """
    Angular frequency of the axial mode of a two-particle mesh

    Stretch stiffness k S / D0 acts in series with the volumetric term
    lambda S^2 / (2 V'), where V' is the free-surface corrected volume.
    """
    if mesh.n_particles != 2 or mesh.n_links != 1:
        raise ScenarioError("oscillator frequency needs exactly two particles and one link")
    material = mesh.material
    S, D0 = float(mesh.S[0]), float(mesh.D0[0])
    k_axial = material.link_stiffness * S / D0 + material.lame_lambda * S * S / (2.0 * mesh.corrected_volume[0])
    return math.sqrt(k_axial * (1.0 / mesh.mass[0] + 1.0 / mesh.mass[1]))


def _oscillator_config(p: Dict[str, Any]) -> Dict[str, Any]:
    return {
        'scenario': 'oscillator',
        'description': "Two cubes joined by one link, released from a small stretch",
        'geometry': {'generator': 'box', 'extent': [2.0, 1.0, 1.0], 'counts': [2, 1, 1]},
        'material': {'E': float(p['E']), 'nu': float(p['nu']), 'rho': float(p['rho'])},
        'initial': {'displacements': [{'selector': {'ids': [1]},
                                       'vector': [float(p['stretch']), 0.0, 0.0]}]},
        'solver': {'n_steps': int(p['steps'])},
        'output': {'probes': [{'ids': [0, 1]}], 'probe_stride': 1, 'energy_stride': 10},
    }


def _oscillator_measure(setup: ScenarioSetup, result: RunResult, p: Dict[str, Any]) -> Dict[str, Any]:
    t, xi0, _ = result.probes[0].arrays()
    _, xi1, _ = result.probes[1].arrays()
    e = xi1[:, 0] - xi0[:, 0]
    k = np.flatnonzero(np.sign(e[:-1]) * np.sign(e[1:]) < 0)
    if k.size < 3:
        raise DiagnosticsError("oscillator run too short to see three zero crossings")
    crossings = t[k] - e[k] * (t[k + 1] - t[k]) / (e[k + 1] - e[k])
    period = 2.0 * (crossings[-1] - crossings[0]) / (crossings.size - 1)
    omega = oscillator_frequency(setup.mesh)
    dt = setup.params.dt
    omega_discrete = 2.0 / dt * math.asin(min(1.0, 0.5 * omega * dt))
    return {'period_measured': float(period), 'period_analytic': 2.0 * math.pi / omega,
            'period_discrete': 2.0 * math.pi / omega_discrete,
            'relative_error_discrete': abs(period - 2.0 * math.pi / omega_discrete) * omega_discrete / (2.0 * math.pi)}


BENCHMARKS: Dict[str, Benchmark] = {
    'cantilever': Benchmark(
        'cantilever', "Damped cantilever under an end moment of 2 pi EI / L",
        _cantilever_config, _cantilever_measure,
        {'n_elements': 32, 'length': 1.0, 'E': 1.0, 'nu': 0.3, 'rho': 1.0, 'stop_ratio': 1.0e-12}),
    'wave-speed': Benchmark(
        'wave-speed', "P and S arrival speeds in a plane-strain slab",
        _wave_speed_config, _wave_speed_measure,
        {'cells': 201, 'spacing': 5.0, 'E': 1.88e10, 'nu': 0.25, 'rho': 2200.0, 'f0': 14.5,
         'amplitude': 1.0e8, 'probe_distances': [150.0, 300.0], 'threshold': 0.2}),
    'pinched-cylinder': Benchmark(
        'pinched-cylinder', "Energy conservation after releasing a pinched cylinder",
        _pinched_cylinder_config, _pinched_cylinder_measure,
        {'radius': 1.0, 'height': 2.0, 'thickness': 0.1, 'counts': [32, 12, 1], 'E': 1.0,
         'nu': 0.3, 'rho': 1.0, 'magnitude': 2.0e-6, 'steps': 50000}),
    'hemisphere': Benchmark(
        'hemisphere', "Hemispherical shell with alternating radial loads (demo)",
        _hemisphere_config, _hemisphere_measure,
        {'radius': 10.0, 'thickness': 0.5, 'cutout_deg': 18.0, 'counts': [8, 32, 1],
         'E': 6.825e7, 'nu': 0.3, 'rho': 1.0, 'force': 1.0e3, 'steps': 20000, 'stop_ratio': 1.0e-6}),
    'oscillator': Benchmark(
        'oscillator', "Two-particle axial oscillator, measured against the analytic period",
        _oscillator_config, _oscillator_measure,
        {'E': 1.0, 'nu': 0.0, 'rho': 1.0, 'stretch': 0.01, 'steps': 2000}),
}


def benchmark_config(name: str, **params) -> Dict[str, Any]:
    """
    Scenario configuration of a canned benchmark

    Raises:
        ScenarioError: On an unknown benchmark or parameter
    """
    if name not in BENCHMARKS:
        raise ScenarioError(f"unknown benchmark '{name}', expected one of {sorted(BENCHMARKS)}")
    bench = BENCHMARKS[name]
    unknown = sorted(set(params) - set(bench.defaults))
    if unknown:
        raise ScenarioError(f"benchmark '{name}' has no parameter(s) {unknown}")
    return bench.build_config({**bench.defaults, **params})


def run_benchmark(name: str, out_dir: Optional[str] = None, steps: Optional[int] = None,
                  dt: Optional[float] = None, threads: Optional[int] = None,
                  show_progress: bool = False, plot: bool = False, **params) -> RunResult:
    """
    Run a canned benchmark and record its measurements in summary.json

    Args:
        name: Benchmark name (see BENCHMARKS)
        out_dir: Output directory (default ./rattle_output/<name>)
        steps: Override of solver.n_steps
        dt: Override of solver.dt
        threads: Override of solver.threads
        show_progress: Print a progress bar
        plot: Write energy.png
        **params: Benchmark parameters overriding its defaults

    Returns:
        RunResult whose summary carries a 'measurements' block
    """
    config = benchmark_config(name, **params)
    manager = ConfigManager(config=config)
    manager.set_parameter('output.directory', str(out_dir or Path('./rattle_output') / name))
    if steps is not None:
        manager.set_parameter('solver.n_steps', int(steps))
    if dt is not None:
        manager.set_parameter('solver.dt', float(dt))
    if threads is not None:
        manager.set_parameter('solver.threads', int(threads))
    if plot:
        manager.set_parameter('output.plot', True)

    runner = ScenarioRunner(manager, show_progress=show_progress)
    setup = runner.setup()
    result = runner.run(setup)
    bench = BENCHMARKS[name]
    try:
        measurements = bench.measure(setup, result, {**bench.defaults, **params})
    except DiagnosticsError as e:
        logger.warning("Benchmark '%s' measurement failed: %s", name, e)
        measurements = {'error': str(e)}
    result.summary['measurements'] = measurements
    FileUtils.save_json(result.summary, result.output_dir / 'summary.json')
    return result


# ---------------------------------------------------------------- studies

def uniaxial_bar(n_elements: int, nu: float, strain: float = 1.0e-3, length: float = 1.0,
                 E: float = 1.0, load: str = 'end', threads: int = 1) -> Dict[str, Any]:
    """
    Static tension of an N x 1 x 1 bar clamped at cell 0

    load='end' pulls the last cell with strain * E h^2, a uniform stress.
    load='graded' applies the axial body force b(x) = b0 x / L, x measured from
    the clamped face, so sigma(x) = b0 (L^2 - x^2) / (2 L) with sigma(L/2) =
    strain * E. Its middle-link strain carries the O(h^2) error of the averaged
    volumetric strain, which vanishes for uniform stress.

    Returns:
        Dictionary with the middle-link strain and its relative error against
        sigma / E, the centre-to-centre elongation and its relative error

    Raises:
        ScenarioError: On fewer than three elements or an unknown load
    """
    if n_elements < 3:
        raise ScenarioError("uniaxial bar needs at least three elements")
    if load not in ('end', 'graded'):
        raise ScenarioError(f"unknown bar load '{load}', expected 'end' or 'graded'")
    h = length / n_elements
    mesh = build_box_lattice((length, h, h), (n_elements, 1, 1), MaterialParams(E=E, nu=nu, rho=1.0))
    x = mesh.X0[:, 0] - mesh.X0[0, 0] + 0.5 * h

    if load == 'end':
        def stress(s):
            return strain * E * np.ones_like(s)

        def displacement(s):
            return strain * (s - 0.5 * h)

        forces = [PointForce(n_elements - 1, (strain * E * h * h, 0.0, 0.0))]
    else:
        b0 = 8.0 * strain * E / (3.0 * length)

        def stress(s):
            return b0 * (length ** 2 - s ** 2) / (2.0 * length)

        def displacement(s):
            def G(r):
                return b0 * (length ** 2 * r - r ** 3 / 3.0) / (2.0 * length * E)
            return G(s) - G(0.5 * h)

        # midpoint loads are the exact cell integrals of a linear b
        forces = [PointForce(i, (b0 * x[i] / length * h ** 3, 0.0, 0.0)) for i in range(1, n_elements)]

    loads = LoadSet(point_forces=forces, fixed=frozenset({0}))
    guess = np.zeros_like(mesh.X0)
    guess[:, 0] = displacement(x)
    start = apply_displacement_field(mesh, init_rest(mesh), lambda X0: guess)
    solver = StaticSolver(mesh, loads, threads=threads)
    try:
        result = solver.solve(start, gtol=1e-12, strict=False, ftol=0.0, newton_steps=3)
    finally:
        solver.close()

    X = result.states.X
    mid = n_elements // 2
    middle_strain = float((X[mid, 0] - X[mid - 1, 0]) / h - 1.0)
    expected_strain = float(stress(np.array([mid * h]))[0] / E)
    elongation = float(X[-1, 0] - X[0, 0] - (mesh.X0[-1, 0] - mesh.X0[0, 0]))
    expected = float(displacement(np.array([x[-1]]))[0])
    return {'n_elements': n_elements, 'h': h, 'load': load,
            'middle_strain': middle_strain, 'expected_strain': expected_strain,
            'middle_strain_error': abs(middle_strain - expected_strain) / expected_strain,
            'elongation': elongation, 'expected_elongation': expected,
            'elongation_error': abs(elongation - expected) / expected,
            'converged': result.converged}


def curl_check(n: int, amplitude: float = 1.0e-6, wavenumber: float = math.pi,
               threads: int = 1) -> Dict[str, Any]:
    """
    Compare relaxed particle rotations with half the curl of an imposed field

    Positions follow u = (-A k y cos kx, A sin kx, 0) on the unit square; boundary
    rotations are prescribed, interior rotations are relaxed to equilibrium.

    Returns:
        Dictionary with n, h and the max interior discrepancy
    """
    h = 1.0 / n
    mesh = build_box_lattice((1.0, 1.0, h), (n, n, 1), MaterialParams(E=1.0, nu=0.25, rho=1.0),
                             origin=(0.0, 0.0, -0.5 * h), free_boundaries=['-x', '+x', '-y', '+y'])
    A, k = amplitude, wavenumber

    def field_fn(X0):
        x, y = X0[:, 0], X0[:, 1]
        return np.stack([-A * k * y * np.cos(k * x), A * np.sin(k * x), np.zeros_like(x)], axis=1)

    def curl_fn(X0):
        curl = np.zeros_like(X0)
        curl[:, 2] = 2.0 * A * k * np.cos(k * X0[:, 0])
        return curl

    states = apply_displacement_field(mesh, init_rest(mesh), field_fn,
                                      rotation_fn=lambda X0: 0.5 * curl_fn(X0))
    gi = mesh.grid_index
    interior = (gi[:, 0] > 0) & (gi[:, 0] < n - 1) & (gi[:, 1] > 0) & (gi[:, 1] < n - 1)
    solver = StaticSolver(mesh, threads=threads)
    try:
        result = solver.solve(states, free_translation=np.zeros(mesh.n_particles, dtype=bool),
                              free_rotation=interior, gtol=1e-13, strict=False, ftol=0.0)
    finally:
        solver.close()
    return {'n': n, 'h': h,
            'discrepancy': curl_consistency(mesh, result.states, curl_fn, mask=interior),
            'converged': result.converged}


def self_convergence(resolutions: Sequence[int] = (32, 64, 128), length: float = 2.0,
                     pulse_width: float = 0.12, amplitude: float = 1.0e-4,
                     threads: int = 1) -> Dict[str, Any]:
    """
    Observed spatial order from a Gaussian pulse at three resolutions

    Every run covers T = 0.25 / c_p with dt = 0.25 h / c_p and reports the
    volume-averaged displacement over the grid-aligned square [1, 1.25]^2.

    Returns:
        Dictionary with per-resolution averages and the Richardson order
    """
    if len(resolutions) != 3:
        raise ScenarioError("self-convergence needs exactly three resolutions")
    material = MaterialParams(E=1.0, nu=0.25, rho=1.0)
    T = 0.25 / material.p_wave_speed
    center = np.array([0.5 * length, 0.5 * length, 0.0])
    direction = np.array([1.0, 0.0, 0.0])
    averages = []
    for n in resolutions:
        h = length / n
        mesh = build_box_lattice((length, length, h), (n, n, 1), material,
                                 origin=(0.0, 0.0, -0.5 * h), free_boundaries=['-x', '+x', '-y', '+y'])

        def pulse(X0):
            r2 = ((X0 - center) ** 2).sum(axis=1)
            return amplitude * np.exp(-0.5 * r2 / pulse_width ** 2)[:, None] * direction

        states = apply_displacement_field(mesh, init_rest(mesh), pulse)
        n_steps = n // 2
        integrator = RattleIntegrator(mesh, None, SolverParams(dt=T / n_steps), threads=threads)
        try:
            states = integrator.run(integrator.start(states), n_steps)
        finally:
            integrator.close()
        mask = np.all((mesh.X0[:, :2] >= 0.5 * length) & (mesh.X0[:, :2] <= 0.5 * length + 0.125 * length),
                      axis=1)
        averages.append(region_average_displacement(mesh, states, mask))
        logger.info("self-convergence n=%d: region average %s", n, averages[-1])
    ratio = resolutions[1] / resolutions[0]
    return {'resolutions': list(resolutions), 'averages': [a.tolist() for a in averages],
            'order': richardson_order(*averages, ratio=ratio)}


def main():
    """Test benchmark scenarios"""
    try:
        print("Testing Benchmark Scenarios")
        print("=" * 40)
        print(f"Benchmarks: {', '.join(sorted(BENCHMARKS))}")

        result = run_benchmark('oscillator', out_dir='./test_benchmark_oscillator', steps=400)
        print(f"✓ Oscillator period: {result.summary['measurements']}")

        study = cantilever_static(16)
        print(f"✓ Cantilever N=16 tip angle {study['tip_angle']:.6f} "
              f"(expected {study['expected_angle']:.6f})")
        print("\n✓ Benchmark scenario tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
