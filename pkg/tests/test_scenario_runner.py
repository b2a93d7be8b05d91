"""
Tests for scenario assembly and end-to-end runs with written outputs
"""

import json

import numpy as np
import pytest

from modules.config_manager import ConfigValidationError
from modules.rattle_integrator import StepFailure
from modules.scenario_runner import (ENERGY_COLUMNS, ScenarioError, ScenarioRunner, build_initial_state,
                                     build_loads, build_mesh, run_scenario)
from utils.file_utils import FileUtils

BOX = {'generator': 'box', 'extent': [3.0, 2.0, 2.0], 'counts': [3, 2, 2]}


def pulse_config(out_dir, threads=1, **solver):
    return {
        'scenario': 'pulse',
        'geometry': dict(BOX),
        'initial': {'pulse': {'center': [0.5, 0.5, 0.5], 'direction': [1, 0, 0],
                              'width': 0.5, 'amplitude': 0.01}},
        'solver': {'n_steps': 40, 'dt': 0.1, 'threads': threads, **solver},
        'output': {'directory': str(out_dir), 'probes': [{'ids': [1]}], 'probe_stride': 5,
                   'energy_stride': 10, 'snapshot_stride': 20},
    }


class TestBuilders:

    def test_mesh(self):
        mesh = build_mesh({'geometry': dict(BOX), 'material': {'E': 1.0, 'nu': 0.25, 'rho': 1.0}})
        assert mesh.n_particles == 12 and mesh.n_links == 20

    def test_mesh_errors_carry_the_block(self):
        config = {'geometry': {'generator': 'box', 'extent': [1.0, 1.0, 1.0], 'counts': [1, 1, 1]},
                  'material': {'E': 1.0, 'nu': -0.9, 'rho': 1.0}}
        with pytest.raises(ScenarioError, match="geometry:"):
            build_mesh(config)

    def test_selector_loads_apply_per_particle(self, box_mesh):
        loads, preload = build_loads(box_mesh, {'loads': {
            'point_forces': [{'selector': {'box': {'min': [2, 0, 0], 'max': [3, 2, 2]}},
                              'direction': [1, 0, 0], 'profile': {'kind': 'ricker', 'f0': 1.0}}],
            'end_moments': [{'selector': {'ids': [0]}, 'axis': [0, 0, 1], 'magnitude': 2.0}],
            'fixed': [{'ids': [3]}, {'nearest': [0.0, 0.0, 0.0]}],
            'damping': 0.2,
        }})
        assert sorted(f.particle for f in loads.point_forces) == [2, 5, 8, 11]
        assert loads.time_dependent
        assert [m.particle for m in loads.end_moments] == [0]
        assert loads.fixed == frozenset({0, 3})
        assert loads.damping == 0.2
        assert preload is None

    def test_pinch_builds_balanced_preload(self, box_mesh):
        loads, preload = build_loads(box_mesh, {'loads': {
            'pinch': [{'a': {'ids': [0]}, 'b': {'ids': [2]}, 'magnitude': 0.5}]}})
        assert not loads.has_external
        F, _ = preload.external(box_mesh.n_particles, 0.0)
        np.testing.assert_allclose(F[0], [0.5, 0.0, 0.0])
        np.testing.assert_allclose(F[2], [-0.5, 0.0, 0.0])
        np.testing.assert_allclose(F.sum(axis=0), 0.0)

    def test_pinch_needs_separate_groups(self, box_mesh):
        with pytest.raises(ConfigValidationError, match="share a centroid"):
            build_loads(box_mesh, {'loads': {'pinch': [{'a': {'ids': [0]}, 'b': {'ids': [0]},
                                                        'magnitude': 1.0}]}})

    def test_initial_state(self, box_mesh):
        states = build_initial_state(box_mesh, {'initial': {
            'pulse': {'center': box_mesh.X0[0].tolist(), 'direction': [0, 0, 2],
                      'width': 0.5, 'amplitude': 0.01},
            'displacements': [{'selector': {'ids': [11]}, 'vector': [0.0, 0.1, 0.0]}],
            'velocity': [0.1, 0.0, 0.0],
        }})
        np.testing.assert_allclose(states.X[0] - box_mesh.X0[0], [0.0, 0.0, 0.01])
        assert states.X[11, 1] - box_mesh.X0[11, 1] == pytest.approx(0.1, abs=1e-6)
        np.testing.assert_allclose(states.T_half[:, 0], 0.1 * box_mesh.mass)


class TestRuns:

    def test_outputs(self, tmp_path):
        result = run_scenario(pulse_config(tmp_path))
        assert result.states.step == 40
        assert len(result.energies) == 5

        header, rows, _ = FileUtils.read_csv(tmp_path / 'energy.csv')
        assert header == ENERGY_COLUMNS
        np.testing.assert_array_equal(rows[:, 0], [0, 10, 20, 30, 40])
        _, momentum, _ = FileUtils.read_csv(tmp_path / 'momentum.csv')
        assert momentum.shape == (5, 8)
        _, probe, _ = FileUtils.read_csv(tmp_path / 'probe_1.csv')
        assert probe.shape == (9, 7)
        assert sorted(p.name for p in tmp_path.glob('frame_*.vtk')) == \
            ['frame_000000.vtk', 'frame_000020.vtk', 'frame_000040.vtk']

        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert summary['scenario'] == 'pulse'
        assert summary['particles'] == 12 and summary['steps'] == 40
        assert summary['momentum_drift']['linear_abs'] < 1e-14
        assert summary['energy_drift']['relative_to_max_potential'] is not None
        assert 'failure' not in summary

    def test_thread_count_gives_identical_outputs(self, tmp_path):
        run_scenario(pulse_config(tmp_path / 'serial', threads=1))
        run_scenario(pulse_config(tmp_path / 'pooled', threads=2))
        for name in ('energy.csv', 'momentum.csv', 'probe_1.csv'):
            assert (tmp_path / 'serial' / name).read_bytes() == \
                (tmp_path / 'pooled' / name).read_bytes()

    def test_step_failure_writes_summary(self, tmp_path):
        config = {
            'geometry': {'generator': 'box', 'extent': [1.0, 1.0, 1.0], 'counts': [1, 1, 1]},
            'initial': {'angular_velocity': [100.0, 0.0, 0.0]},
            'solver': {'n_steps': 10, 'dt': 0.1},
            'output': {'directory': str(tmp_path)},
        }
        with pytest.raises(StepFailure) as info:
            run_scenario(config)
        assert info.value.step == 0 and info.value.particle == 0
        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert 'failure' in summary
        assert summary['steps'] == 0
        header, rows, _ = FileUtils.read_csv(tmp_path / 'energy.csv')
        assert rows.shape == (0, len(header))

    def test_pinch_preload_starts_loaded(self, tmp_path):
        config = {
            'geometry': {'generator': 'box', 'extent': [3.0, 1.0, 1.0], 'counts': [3, 1, 1]},
            'loads': {'pinch': [{'a': {'ids': [0]}, 'b': {'ids': [2]}, 'magnitude': 0.01}]},
            'solver': {'n_steps': 20, 'dt': 0.1},
            'output': {'directory': str(tmp_path), 'energy_stride': 5},
        }
        runner = ScenarioRunner(config)
        setup = runner.setup()
        assert setup.preload is not None
        result = runner.run(setup)
        assert result.energies[0].t == 0.0
        assert result.energies[0].potential > 0.0
        assert result.summary['initial_energy']['total'] > 0.0

    def test_released_preload_starts_at_rest(self, tmp_path):
        config = {
            'geometry': {'generator': 'box', 'extent': [3.0, 1.0, 1.0], 'counts': [3, 1, 1]},
            'loads': {'pinch': [{'a': {'ids': [0]}, 'b': {'ids': [2]}, 'magnitude': 0.01}]},
            'solver': {'n_steps': 10, 'dt': 0.1},
            'output': {'directory': str(tmp_path), 'energy_stride': 5},
        }
        result = ScenarioRunner(config).run()
        start = result.energies[0]
        # half-step start: momenta centred on t = 0 vanish
        assert start.kinetic < 1e-12 * start.potential
        assert result.summary['initial_energy']['total'] == pytest.approx(start.potential)

    def test_invalid_config(self, tmp_path):
        with pytest.raises(ConfigValidationError, match="geometry"):
            ScenarioRunner({'output': {'directory': str(tmp_path)}})
