"""
Tests for canned benchmarks and the convergence studies
"""

import math

import numpy as np
import pytest

from modules.benchmark_scenarios import (BENCHMARKS, benchmark_config, cantilever_expected_angle,
                                         cantilever_static, curl_check, oscillator_frequency,
                                         run_benchmark, self_convergence, tip_rotation_angle)
from modules.config_manager import ConfigManager
from modules.diagnostics import convergence_slope
from modules.particle_state import init_rest
from modules.scenario_runner import ScenarioError
from utils.geometry_utils import rotation_matrix


class TestConfigs:

    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_default_configs_validate(self, name):
        config = benchmark_config(name)
        ConfigManager(config=config).validate_config()
        assert config['scenario'] == name

    def test_unknown_benchmark(self):
        with pytest.raises(ScenarioError, match="unknown benchmark"):
            benchmark_config('bridge')

    def test_unknown_parameter(self):
        with pytest.raises(ScenarioError, match="has no parameter"):
            benchmark_config('oscillator', spring=2.0)

    def test_wave_speed_needs_odd_cells(self):
        with pytest.raises(ScenarioError, match="odd cell count"):
            benchmark_config('wave-speed', cells=200)

    def test_overrides_reach_the_config(self):
        config = benchmark_config('cantilever', n_elements=8)
        assert config['geometry']['counts'] == [9, 1, 1]
        assert config['loads']['end_moments'][0]['selector'] == {'ids': [8]}


class TestCantilever:

    def test_expected_angle(self):
        assert cantilever_expected_angle(32) == pytest.approx(32 * math.asin(2 * math.pi / 32))
        assert cantilever_expected_angle(1000) == pytest.approx(2 * math.pi, rel=1e-5)
        with pytest.raises(ScenarioError, match="more than 6"):
            cantilever_expected_angle(6)

    def test_tip_angle_sums_relative_rotations(self, unit_material):
        from modules.mesh_builder import build_box_lattice
        mesh = build_box_lattice((4.0, 1.0, 1.0), (4, 1, 1), unit_material)
        states = init_rest(mesh)
        states.Q = rotation_matrix(np.outer(np.arange(4) * 1.2, [0.0, 0.0, 1.0]))
        # 3.6 rad in total; a single rotation vector would wrap past pi
        assert tip_rotation_angle(states, range(4)) == pytest.approx(3.6)

    def test_static_bend_matches_discrete_angle(self):
        coarse, fine = cantilever_static(16), cantilever_static(32)
        for study in (coarse, fine):
            assert study['relative_error'] < 1e-3
        assert 3.5 < coarse['error_vs_2pi'] / fine['error_vs_2pi'] < 4.6

    @pytest.mark.slow
    def test_static_bend_fine(self):
        study = cantilever_static(64)
        assert study['relative_error'] < 1e-3
        assert study['error_vs_2pi'] < 0.02

    @pytest.mark.slow
    def test_dynamic_bend(self, tmp_path):
        result = run_benchmark('cantilever', out_dir=tmp_path, n_elements=16)
        measured = result.summary['measurements']
        assert measured['relative_error'] < 1e-2


class TestOscillator:

    def test_frequency(self, pair_mesh, box_mesh):
        assert oscillator_frequency(pair_mesh) == pytest.approx(4.0 / 3.0)
        with pytest.raises(ScenarioError, match="two particles"):
            oscillator_frequency(box_mesh)

    def test_period_matches_discrete_prediction(self, tmp_path):
        result = run_benchmark('oscillator', out_dir=tmp_path, steps=400)
        measured = result.summary['measurements']
        assert measured['relative_error_discrete'] < 1e-3
        assert measured['period_analytic'] == pytest.approx(math.pi * math.sqrt(2.0))
        assert (tmp_path / 'summary.json').exists()

    def test_too_short_run_reports_error(self, tmp_path):
        result = run_benchmark('oscillator', out_dir=tmp_path, steps=3)
        assert 'error' in result.summary['measurements']


class TestCurlConsistency:

    def test_second_order(self):
        pairs = []
        for n in (8, 16, 32):
            study = curl_check(n)
            pairs.append((study['h'], study['discrepancy']))
        assert pairs[0][1] > pairs[1][1] > pairs[2][1]
        assert convergence_slope(pairs) > 1.5


@pytest.mark.slow
class TestAcceptanceRuns:

    def test_wave_speeds(self, tmp_path):
        measured = run_benchmark('wave-speed', out_dir=tmp_path, threads=4).summary['measurements']
        assert measured['p_relative_error'] < 0.03
        assert measured['s_relative_error'] < 0.03

    def test_self_convergence_order(self):
        assert self_convergence()['order'] == pytest.approx(2.0, abs=0.3)

    def test_pinched_cylinder_energy_band(self, tmp_path):
        measured = run_benchmark('pinched-cylinder', out_dir=tmp_path).summary['measurements']
        assert measured['energy_band_relative'] <= 1e-3

    def test_hemisphere_demo_runs(self, tmp_path):
        result = run_benchmark('hemisphere', out_dir=tmp_path, steps=500)
        assert result.states.step <= 500
        assert len(result.summary['measurements']) == 4
