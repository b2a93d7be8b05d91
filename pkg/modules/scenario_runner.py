#!/usr/bin/env python3
"""
DEM Scenario Runner Module
Builds meshes and loads from a configuration, integrates and writes run outputs
"""

import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from modules.config_manager import ConfigManager, ConfigValidationError, resolve_selector, resolve_selectors
from modules.diagnostics import EnergyReport, ProbeRecord, ProbeRecorder, momenta, total_energy
from modules.mechanics import EndMoment, ForceAssembler, LoadSet, MechanicsError, PointForce, TimeProfile
from modules.mesh_builder import MaterialParams, Mesh, MeshError, build_box_lattice, build_mapped_shell
from modules.particle_state import (StateArray, apply_displacement_field, derived_kinematics,
                                    init_rest, set_initial_velocity)
from modules.rattle_integrator import RattleIntegrator, SolverParams, StepFailure, suggest_dt
from modules.static_solver import StaticSolver
from utils import FileUtils, MaterialCalculator, OutputFormatter, VTKWriter

logger = logging.getLogger(__name__)

MOMENTUM_COLUMNS = ['step', 't', 'P_x', 'P_y', 'P_z', 'L_x', 'L_y', 'L_z']
ENERGY_COLUMNS = ['step'] + EnergyReport.columns()


class ScenarioError(Exception):
    """Scenario setup or execution error"""
    pass


@dataclass
class ScenarioSetup:
    """Everything needed to start integrating"""
    mesh: Mesh
    loads: LoadSet
    preload: Optional[LoadSet]
    states: StateArray
    params: SolverParams
    n_steps: int
    probe_ids: List[int]


@dataclass
class RunResult:
    states: StateArray
    summary: Dict[str, Any]
    energies: List[EnergyReport] = field(default_factory=list)
    probes: Dict[int, ProbeRecord] = field(default_factory=dict)
    output_dir: Optional[Path] = None


def build_mesh(config: Dict[str, Any]) -> Mesh:
    """
    Build the mesh named by the geometry block

    Raises:
        ScenarioError: If the generator rejects its parameters
    """
    geometry = config['geometry']
    material_cfg = config['material']
    try:
        material = MaterialParams(E=float(material_cfg['E']), nu=float(material_cfg['nu']),
                                  rho=float(material_cfg['rho']))
        free = geometry.get('free_boundaries')
        if geometry['generator'] == 'box':
            return build_box_lattice(geometry['extent'], geometry['counts'], material,
                                     origin=geometry.get('origin', (0.0, 0.0, 0.0)),
                                     free_boundaries=free)
        return build_mapped_shell(geometry['generator'], geometry['params'], geometry['counts'],
                                  material, free_boundaries=free)
    except MeshError as e:
        raise ScenarioError(f"geometry: {e}") from e


def _profile(entry: Optional[Dict[str, Any]]) -> TimeProfile:
    if not entry:
        return TimeProfile()
    keys = {f.name for f in fields(TimeProfile)}
    return TimeProfile(**{k: v for k, v in entry.items() if k in keys})


def build_loads(mesh: Mesh, config: Dict[str, Any]) -> Tuple[LoadSet, Optional[LoadSet]]:
    """
    Translate the loads block into the dynamic load set and the optional preload

    Pinch pairs push the two selected groups towards each other with equal and
    opposite constant forces; they only act during the static preload.

    Returns:
        (dynamic loads, preload or None)
    """
    loads_cfg = config.get('loads') or {}
    try:
        point_forces: List[PointForce] = []
        for k, entry in enumerate(loads_cfg.get('point_forces') or []):
            profile = _profile(entry.get('profile'))
            for pid in resolve_selector(mesh, entry['selector'], f"loads.point_forces[{k}].selector"):
                point_forces.append(PointForce(int(pid), tuple(float(c) for c in entry['direction']), profile))

        end_moments: List[EndMoment] = []
        for k, entry in enumerate(loads_cfg.get('end_moments') or []):
            profile = _profile(entry.get('profile'))
            for pid in resolve_selector(mesh, entry['selector'], f"loads.end_moments[{k}].selector"):
                end_moments.append(EndMoment(int(pid), tuple(float(c) for c in entry['axis']),
                                             float(entry['magnitude']), profile))

        fixed = frozenset(resolve_selectors(mesh, loads_cfg.get('fixed') or [], 'loads.fixed').tolist())
        damping = float(loads_cfg.get('damping', 0.0))
        loads = LoadSet(point_forces=point_forces, end_moments=end_moments,
                        fixed=fixed, damping=damping)

        pinch_forces: List[PointForce] = []
        for k, entry in enumerate(loads_cfg.get('pinch') or []):
            ids_a = resolve_selector(mesh, entry['a'], f"loads.pinch[{k}].a")
            ids_b = resolve_selector(mesh, entry['b'], f"loads.pinch[{k}].b")
            axis = mesh.X0[ids_b].mean(axis=0) - mesh.X0[ids_a].mean(axis=0)
            norm = float(np.linalg.norm(axis))
            if norm == 0.0:
                raise ConfigValidationError(f"loads.pinch[{k}]: groups a and b share a centroid")
            push = float(entry['magnitude']) * axis / norm
            pinch_forces += [PointForce(int(p), tuple(push)) for p in ids_a]
            pinch_forces += [PointForce(int(p), tuple(-push)) for p in ids_b]
    except MechanicsError as e:
        raise ScenarioError(f"loads: {e}") from e

    preload = None
    if pinch_forces:
        preload = LoadSet(point_forces=pinch_forces, fixed=fixed)
    return loads, preload


def build_initial_state(mesh: Mesh, config: Dict[str, Any]) -> StateArray:
    """Rest state with the optional initial velocities and displacement pulse"""
    initial = config.get('initial') or {}
    states = init_rest(mesh)
    pulse = initial.get('pulse')
    if pulse:
        center = np.asarray(pulse['center'], dtype=float)
        direction = np.asarray(pulse['direction'], dtype=float)
        direction = direction / np.linalg.norm(direction)
        width = float(pulse['width'])
        amplitude = float(pulse['amplitude'])

        def gaussian(X0: np.ndarray) -> np.ndarray:
            r2 = ((X0 - center) ** 2).sum(axis=1)
            return amplitude * np.exp(-0.5 * r2 / width ** 2)[:, None] * direction

        states = apply_displacement_field(mesh, states, gaussian)
    for k, shift in enumerate(initial.get('displacements') or []):
        ids = resolve_selector(mesh, shift['selector'], f"initial.displacements[{k}].selector")
        states.X[ids] += np.asarray(shift['vector'], dtype=float)
    if initial.get('velocity') is not None or initial.get('angular_velocity') is not None:
        states = set_initial_velocity(mesh, states, v=initial.get('velocity'),
                                      Omega=initial.get('angular_velocity'))
    return states


def write_vtk_snapshot(mesh: Mesh, states: StateArray, path: Union[str, Path],
                       assembler: Optional[ForceAssembler] = None) -> Path:
    """
    Write one legacy VTK frame with cell data eps_v and |Omega|

    Points are the rest corners moved rigidly with each particle, so point
    count and connectivity do not change between frames.
    """
    if mesh.cells is None:
        raise ScenarioError("mesh has no cell corners to write")
    assembler = assembler if assembler is not None else ForceAssembler(mesh)
    _, eps, _, _ = assembler.kinematics(states)
    omega = np.linalg.norm(derived_kinematics(mesh, states).Omega, axis=1)
    points = VTKWriter.rigid_corner_points(mesh.cells, mesh.X0, states.X, states.Q)
    return VTKWriter.write_unstructured(path, points, mesh.n_particles,
                                        {'eps_v': eps, 'omega_norm': omega},
                                        title=f"rattle-dem step {states.step} t={states.t!r}")


def _momentum_scale(mesh: Mesh, states: StateArray) -> Tuple[float, float]:
    linear = float(np.linalg.norm(states.T_half, axis=1).sum())
    _, ang = momenta(mesh, states)
    orbital = float(np.linalg.norm(np.cross(states.X, states.T_half), axis=1).sum())
    return linear, max(orbital, float(np.linalg.norm(ang)))


class ScenarioRunner:
    """
    Runs one configured scenario and writes its outputs

    Outputs: energy.csv, momentum.csv, probe_<id>.csv, frame_%06d.vtk and
    summary.json in the output directory.
    """

    def __init__(self, config: Union[ConfigManager, Dict[str, Any]], show_progress: bool = False):
        manager = config if isinstance(config, ConfigManager) else ConfigManager(config=config)
        manager.validate_config()
        self.manager = manager
        self.config = manager.get_all_parameters()
        self.show_progress = show_progress

    def setup(self) -> ScenarioSetup:
        """Build the mesh, loads, initial state and solver parameters"""
        mesh = build_mesh(self.config)
        loads, preload = build_loads(mesh, self.config)
        states = build_initial_state(mesh, self.config)
        solver = self.config['solver']
        dt = solver.get('dt') or suggest_dt(mesh, solver['cfl_factor'])
        params = SolverParams(dt=float(dt), tol=float(solver['tol']), max_iter=int(solver['max_iter']),
                              cfl_guard=bool(solver.get('cfl_guard', True)))
        probe_ids = resolve_selectors(mesh, self.config['output'].get('probes') or [], 'output.probes')
        return ScenarioSetup(mesh=mesh, loads=loads, preload=preload, states=states, params=params,
                             n_steps=int(solver['n_steps']), probe_ids=probe_ids.tolist())

    def _preload(self, setup: ScenarioSetup) -> StateArray:
        logger.info("Relaxing %d preload forces to static equilibrium", len(setup.preload.point_forces))
        solver = StaticSolver(setup.mesh, setup.preload, threads=int(self.config['solver']['threads']))
        try:
            result = solver.solve(setup.states, strict=False)
        finally:
            solver.close()
        if not result.converged:
            logger.warning("Preload relaxation stopped early: %s", result.message)
        states = result.states
        states.t, states.step = 0.0, 0
        return states

    def run(self, setup: Optional[ScenarioSetup] = None) -> RunResult:
        """
        Integrate the scenario and write all outputs

        Raises:
            StepFailure: With step index and particle id; outputs gathered so far are written first
        """
        setup = setup if setup is not None else self.setup()
        out_cfg = self.config['output']
        out_dir = FileUtils.ensure_directory(out_cfg['directory'])
        mesh, params = setup.mesh, setup.params
        energy_stride = int(out_cfg['energy_stride'])
        snapshot_stride = int(out_cfg['snapshot_stride'])
        stop_ratio = self.config['solver'].get('stop_kinetic_ratio')

        states = self._preload(setup) if setup.preload is not None else setup.states
        integrator = RattleIntegrator(mesh, setup.loads, params, threads=int(self.config['solver']['threads']))
        assembler = integrator.assembler
        states = integrator.start(states)
        recorder = ProbeRecorder(mesh, setup.probe_ids, stride=int(out_cfg['probe_stride']))
        energies: List[EnergyReport] = []
        energy_rows: List[List[float]] = []
        momentum_rows: List[List[float]] = []
        start_scale = _momentum_scale(mesh, states)
        P0, L0 = momenta(mesh, states)

        def record(prev: StateArray, cur: Optional[StateArray]) -> bool:
            recorder.sample(prev)
            if snapshot_stride and prev.step % snapshot_stride == 0:
                write_vtk_snapshot(mesh, prev, out_dir / f"frame_{prev.step:06d}.vtk", assembler)
            if prev.step % energy_stride:
                return False
            report = total_energy(mesh, prev, cur, assembler)
            energies.append(report)
            energy_rows.append([prev.step] + report.as_row())
            P, L = momenta(mesh, prev)
            momentum_rows.append([prev.step, prev.t, *P, *L])
            return bool(stop_ratio) and prev.step > 0 and report.kinetic < stop_ratio * abs(report.potential)

        stopped = {'flag': False, 'last': states}

        def callback(prev: StateArray, cur: StateArray) -> bool:
            stop = record(prev, cur)
            if self.show_progress:
                OutputFormatter.print_progress(cur.step, setup.n_steps, "Integrating")
            stopped['flag'] = stop
            stopped['last'] = cur
            return stop

        wall_start = time.perf_counter()
        failure: Optional[StepFailure] = None
        final = states
        try:
            final = integrator.run(states, setup.n_steps, callback=callback)
            if not stopped['flag']:
                try:
                    lookahead = integrator.step(final)
                except StepFailure:
                    lookahead = None
                record(final, lookahead)
        except StepFailure as e:
            failure = e
            final = stopped['last']
            logger.error("Step failure: %s", e)
        finally:
            integrator.close()
        wall_time = time.perf_counter() - wall_start

        self._write_series(out_dir, energy_rows, momentum_rows, recorder.records)
        P1, L1 = momenta(mesh, final)
        summary = self._summary(setup, final, energies, integrator, wall_time,
                                (P0, L0, P1, L1), start_scale, out_dir)
        if failure is not None:
            summary['failure'] = str(failure)
        FileUtils.save_json(summary, out_dir / 'summary.json')
        if out_cfg.get('plot') and energies:
            self._plot(energies, out_dir / 'energy.png')
        if failure is not None:
            raise failure
        return RunResult(states=final, summary=summary, energies=energies,
                         probes=dict(recorder.records), output_dir=out_dir)

    @staticmethod
    def _write_series(out_dir: Path, energy_rows, momentum_rows, probes: Dict[int, ProbeRecord]) -> None:
        FileUtils.write_csv(out_dir / 'energy.csv', ENERGY_COLUMNS,
                            np.asarray(energy_rows, dtype=float).reshape(-1, len(ENERGY_COLUMNS)),
                            integer_columns=1)
        FileUtils.write_csv(out_dir / 'momentum.csv', MOMENTUM_COLUMNS,
                            np.asarray(momentum_rows, dtype=float).reshape(-1, len(MOMENTUM_COLUMNS)),
                            integer_columns=1)
        for pid, probe in probes.items():
            FileUtils.write_csv(out_dir / f'probe_{pid}.csv', ProbeRecord.columns(), probe.rows())

    def _summary(self, setup: ScenarioSetup, final: StateArray, energies: List[EnergyReport],
                 integrator: RattleIntegrator, wall_time: float, momentum_pair, start_scale,
                 out_dir: Path) -> Dict[str, Any]:
        P0, L0, P1, L1 = momentum_pair
        lin_ref = max(start_scale[0], float(np.linalg.norm(P0)), np.finfo(float).tiny)
        ang_ref = max(start_scale[1], float(np.linalg.norm(L0)), np.finfo(float).tiny)
        summary: Dict[str, Any] = {
            'scenario': self.config.get('scenario', 'custom'),
            'particles': setup.mesh.n_particles,
            'links': setup.mesh.n_links,
            'steps': int(final.step),
            'dt': setup.params.dt,
            'final_time': float(final.t),
            'max_cfl_margin': integrator.max_margin,
            'max_iterations': integrator.max_iterations,
            'wall_time': wall_time,
            'output_dir': str(out_dir),
            'momentum_drift': {
                'linear_abs': float(np.linalg.norm(P1 - P0)),
                'linear_rel': float(np.linalg.norm(P1 - P0)) / lin_ref,
                'angular_abs': float(np.linalg.norm(L1 - L0)),
                'angular_rel': float(np.linalg.norm(L1 - L0)) / ang_ref,
            },
            'material': MaterialCalculator.material_summary(
                setup.mesh.material.E, setup.mesh.material.nu, setup.mesh.material.rho),
            'measurements': {},
        }
        if energies:
            first, last = energies[0], energies[-1]
            max_u = max(abs(r.potential) for r in energies)
            summary['initial_energy'] = dict(zip(EnergyReport.columns(), first.as_row()))
            summary['final_energy'] = dict(zip(EnergyReport.columns(), last.as_row()))
            summary['energy_drift'] = {
                'absolute': abs(last.total - first.total),
                'relative_to_max_potential': abs(last.total - first.total) / max_u if max_u > 0 else None,
                'max_band': max(abs(r.total - first.total) for r in energies),
            }
        return summary

    @staticmethod
    def _plot(energies: List[EnergyReport], path: Path) -> None:
        try:
            import matplotlib
            matplotlib.use('Agg')
            import matplotlib.pyplot as plt
        except ImportError:
            logger.warning("matplotlib not available; skipping %s", path)
            return
        t = [r.t for r in energies]
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(t, [r.kinetic for r in energies], label='kinetic')
        ax.plot(t, [r.potential for r in energies], label='potential')
        ax.plot(t, [r.total for r in energies], label='total', color='k')
        ax.set_xlabel('t (s)')
        ax.set_ylabel('energy (J)')
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def run_scenario(config: Union[ConfigManager, Dict[str, Any]], show_progress: bool = False) -> RunResult:
    """
    Run a validated scenario configuration end to end

    Raises:
        ConfigValidationError: If the configuration is invalid
        ScenarioError: If the mesh or loads cannot be built
        StepFailure: If integration fails (step index and particle id attached)
    """
    return ScenarioRunner(config, show_progress=show_progress).run()


def main():
    """Test scenario runner"""
    try:
        print("Testing Scenario Runner")
        print("=" * 40)
        result = run_scenario({
            'scenario': 'smoke',
            'geometry': {'generator': 'box', 'extent': [2.0, 1.0, 1.0], 'counts': [2, 1, 1]},
            'initial': {'pulse': {'center': [1.5, 0.5, 0.5], 'direction': [1, 0, 0],
                                  'width': 0.1, 'amplitude': 0.01}},
            'solver': {'n_steps': 50},
            'output': {'directory': './test_scenario_runner', 'probes': [{'ids': [1]}]},
        })
        OutputFormatter.print_run_summary(result.summary)
        print("\n✓ Scenario runner tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
