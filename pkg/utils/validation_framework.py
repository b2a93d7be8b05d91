#!/usr/bin/env python3
"""
DEM Validation Framework Module
Schema and physical-range checks for scenario configurations
"""

import math
from typing import Any, Dict, List, Optional

from .material_calculator import MaterialCalculator, MaterialCalculationError

GEOMETRY_GENERATORS = ('box', 'cylinder', 'hemisphere')
SELECTOR_KINDS = ('ids', 'nearest', 'box')
PROFILE_KINDS = ('ricker', 'constant', 'ramp')
CONFIG_BLOCKS = ('scenario', 'description', 'geometry', 'material', 'loads', 'solver',
                 'initial', 'output')


class ValidationFramework:
    """
    Validation helpers for rattle-dem configurations
    Every check returns a list of "<dotted.path>: <problem>" messages
    """

    @staticmethod
    def _is_number(value: Any) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)

    @staticmethod
    def _vector(value: Any, path: str, errors: List[str], length: int = 3,
                positive: bool = False, nonzero: bool = False) -> None:
        if not isinstance(value, (list, tuple)) or len(value) != length or \
                not all(ValidationFramework._is_number(v) for v in value):
            errors.append(f"{path}: expected a list of {length} numbers")
            return
        if positive and any(v <= 0 for v in value):
            errors.append(f"{path}: entries must be positive")
        if nonzero and all(v == 0 for v in value):
            errors.append(f"{path}: vector must be non-zero")

    @staticmethod
    def _positive(config: Dict[str, Any], key: str, path: str, errors: List[str],
                  required: bool = True, allow_zero: bool = False) -> None:
        if key not in config or config[key] is None:
            if required:
                errors.append(f"{path}.{key}: missing")
            return
        value = config[key]
        if not ValidationFramework._is_number(value):
            errors.append(f"{path}.{key}: expected a number, got {value!r}")
        elif value < 0 or (value == 0 and not allow_zero):
            errors.append(f"{path}.{key}: must be {'non-negative' if allow_zero else 'positive'}")

    @staticmethod
    def _integer(config: Dict[str, Any], key: str, path: str, errors: List[str],
                 minimum: int = 0) -> None:
        value = config.get(key)
        if value is None:
            return
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            errors.append(f"{path}.{key}: expected an integer >= {minimum}")

    @staticmethod
    def validate_selector(selector: Any, path: str) -> List[str]:
        """
        Check a particle selector: {ids: [...]}, {nearest: [x, y, z]} or
        {box: {min: [...], max: [...]}}
        """
        errors: List[str] = []
        if not isinstance(selector, dict) or len(selector) != 1:
            return [f"{path}: selector must have exactly one of {list(SELECTOR_KINDS)}"]
        kind, value = next(iter(selector.items()))
        if kind == 'ids':
            if not isinstance(value, (list, tuple)) or not value or \
                    not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value):
                errors.append(f"{path}.ids: expected a non-empty list of particle ids")
        elif kind == 'nearest':
            ValidationFramework._vector(value, f"{path}.nearest", errors)
        elif kind == 'box':
            if not isinstance(value, dict) or set(value) != {'min', 'max'}:
                errors.append(f"{path}.box: expected keys 'min' and 'max'")
            else:
                ValidationFramework._vector(value['min'], f"{path}.box.min", errors)
                ValidationFramework._vector(value['max'], f"{path}.box.max", errors)
                if not errors and any(a > b for a, b in zip(value['min'], value['max'])):
                    errors.append(f"{path}.box: min exceeds max")
        else:
            errors.append(f"{path}: unknown selector '{kind}', expected one of {list(SELECTOR_KINDS)}")
        return errors

    @staticmethod
    def validate_profile(profile: Any, path: str) -> List[str]:
        if profile is None:
            return []
        if not isinstance(profile, dict):
            return [f"{path}: expected a mapping"]
        errors: List[str] = []
        kind = profile.get('kind', 'constant')
        if kind not in PROFILE_KINDS:
            errors.append(f"{path}.kind: unknown profile '{kind}', expected one of {list(PROFILE_KINDS)}")
        if kind == 'ricker':
            ValidationFramework._positive(profile, 'f0', path, errors)
            ValidationFramework._positive(profile, 't0', path, errors, required=False, allow_zero=True)
        if kind == 'ramp':
            ValidationFramework._positive(profile, 'duration', path, errors)
        if 'amplitude' in profile and not ValidationFramework._is_number(profile['amplitude']):
            errors.append(f"{path}.amplitude: expected a number")
        return errors

    @staticmethod
    def validate_geometry(geometry: Any) -> List[str]:
        if not isinstance(geometry, dict) or not geometry:
            return ["geometry: missing"]
        errors: List[str] = []
        generator = geometry.get('generator')
        if generator not in GEOMETRY_GENERATORS:
            return [f"geometry.generator: expected exactly one of {list(GEOMETRY_GENERATORS)}, got {generator!r}"]

        counts = geometry.get('counts')
        if not isinstance(counts, (list, tuple)) or len(counts) != 3 or \
                not all(isinstance(c, int) and not isinstance(c, bool) and c >= 1 for c in counts):
            errors.append("geometry.counts: expected three positive integers")

        if generator == 'box':
            ValidationFramework._vector(geometry.get('extent'), 'geometry.extent', errors, positive=True)
            if 'origin' in geometry:
                ValidationFramework._vector(geometry['origin'], 'geometry.origin', errors)
        else:
            params = geometry.get('params')
            if not isinstance(params, dict):
                errors.append("geometry.params: missing shell parameters")
            else:
                required = ('radius', 'height', 'thickness') if generator == 'cylinder' else ('radius', 'thickness')
                for key in required:
                    ValidationFramework._positive(params, key, 'geometry.params', errors)

        free = geometry.get('free_boundaries')
        if free is not None and (not isinstance(free, (list, tuple)) or
                                 not all(isinstance(f, str) for f in free)):
            errors.append("geometry.free_boundaries: expected a list of boundary labels")
        return errors

    @staticmethod
    def validate_material(material: Any) -> List[str]:
        if not isinstance(material, dict):
            return ["material: missing"]
        errors: List[str] = []
        for key in ('E', 'nu', 'rho'):
            if not ValidationFramework._is_number(material.get(key)):
                errors.append(f"material.{key}: expected a number")
        if errors:
            return errors
        try:
            MaterialCalculator.validate_material_parameters(material['E'], material['nu'], material['rho'])
        except MaterialCalculationError as e:
            errors.append(f"material: {e}")
        return errors

    @staticmethod
    def validate_loads(loads: Any) -> List[str]:
        if loads is None:
            return []
        if not isinstance(loads, dict):
            return ["loads: expected a mapping"]
        errors: List[str] = []

        for k, force in enumerate(loads.get('point_forces') or []):
            path = f"loads.point_forces[{k}]"
            if not isinstance(force, dict):
                errors.append(f"{path}: expected a mapping")
                continue
            errors += ValidationFramework.validate_selector(force.get('selector'), f"{path}.selector")
            ValidationFramework._vector(force.get('direction'), f"{path}.direction", errors, nonzero=True)
            errors += ValidationFramework.validate_profile(force.get('profile'), f"{path}.profile")

        for k, moment in enumerate(loads.get('end_moments') or []):
            path = f"loads.end_moments[{k}]"
            if not isinstance(moment, dict):
                errors.append(f"{path}: expected a mapping")
                continue
            errors += ValidationFramework.validate_selector(moment.get('selector'), f"{path}.selector")
            ValidationFramework._vector(moment.get('axis'), f"{path}.axis", errors, nonzero=True)
            if not ValidationFramework._is_number(moment.get('magnitude')):
                errors.append(f"{path}.magnitude: expected a number")
            errors += ValidationFramework.validate_profile(moment.get('profile'), f"{path}.profile")

        for k, pinch in enumerate(loads.get('pinch') or []):
            path = f"loads.pinch[{k}]"
            if not isinstance(pinch, dict):
                errors.append(f"{path}: expected a mapping")
                continue
            errors += ValidationFramework.validate_selector(pinch.get('a'), f"{path}.a")
            errors += ValidationFramework.validate_selector(pinch.get('b'), f"{path}.b")
            ValidationFramework._positive(pinch, 'magnitude', path, errors)

        for k, selector in enumerate(loads.get('fixed') or []):
            errors += ValidationFramework.validate_selector(selector, f"loads.fixed[{k}]")

        ValidationFramework._positive(loads, 'damping', 'loads', errors, required=False, allow_zero=True)
        return errors

    @staticmethod
    def validate_solver(solver: Any) -> List[str]:
        if not isinstance(solver, dict):
            return ["solver: expected a mapping"]
        errors: List[str] = []
        ValidationFramework._positive(solver, 'dt', 'solver', errors, required=False)
        ValidationFramework._positive(solver, 'cfl_factor', 'solver', errors)
        if ValidationFramework._is_number(solver.get('cfl_factor')) and solver['cfl_factor'] > 1.0:
            errors.append("solver.cfl_factor: must not exceed 1")
        ValidationFramework._positive(solver, 'tol', 'solver', errors)
        ValidationFramework._integer(solver, 'max_iter', 'solver', errors, minimum=1)
        ValidationFramework._integer(solver, 'n_steps', 'solver', errors, minimum=0)
        ValidationFramework._integer(solver, 'threads', 'solver', errors, minimum=1)
        ValidationFramework._positive(solver, 'stop_kinetic_ratio', 'solver', errors, required=False)
        if not isinstance(solver.get('cfl_guard', True), bool):
            errors.append("solver.cfl_guard: expected true or false")
        return errors

    @staticmethod
    def validate_initial(initial: Any) -> List[str]:
        if initial is None:
            return []
        if not isinstance(initial, dict):
            return ["initial: expected a mapping"]
        errors: List[str] = []
        for key in ('velocity', 'angular_velocity'):
            if initial.get(key) is not None:
                ValidationFramework._vector(initial[key], f"initial.{key}", errors)
        pulse = initial.get('pulse')
        if pulse is not None:
            if not isinstance(pulse, dict):
                errors.append("initial.pulse: expected a mapping")
            else:
                ValidationFramework._vector(pulse.get('center'), 'initial.pulse.center', errors)
                ValidationFramework._vector(pulse.get('direction'), 'initial.pulse.direction', errors,
                                            nonzero=True)
                ValidationFramework._positive(pulse, 'width', 'initial.pulse', errors)
                if not ValidationFramework._is_number(pulse.get('amplitude')):
                    errors.append("initial.pulse.amplitude: expected a number")
        for k, shift in enumerate(initial.get('displacements') or []):
            path = f"initial.displacements[{k}]"
            if not isinstance(shift, dict):
                errors.append(f"{path}: expected a mapping")
                continue
            errors += ValidationFramework.validate_selector(shift.get('selector'), f"{path}.selector")
            ValidationFramework._vector(shift.get('vector'), f"{path}.vector", errors)
        return errors

    @staticmethod
    def validate_output(output: Any) -> List[str]:
        if not isinstance(output, dict):
            return ["output: expected a mapping"]
        errors: List[str] = []
        if not isinstance(output.get('directory'), str) or not output['directory']:
            errors.append("output.directory: expected a path")
        for k, selector in enumerate(output.get('probes') or []):
            errors += ValidationFramework.validate_selector(selector, f"output.probes[{k}]")
        ValidationFramework._integer(output, 'probe_stride', 'output', errors, minimum=1)
        ValidationFramework._integer(output, 'energy_stride', 'output', errors, minimum=1)
        ValidationFramework._integer(output, 'snapshot_stride', 'output', errors, minimum=0)
        return errors

    @staticmethod
    def validate_configuration(config: Dict[str, Any]) -> List[str]:
        """
        Validate a merged scenario configuration

        Args:
            config: Configuration dictionary (defaults applied)

        Returns:
            List of validation errors (empty if valid)
        """
        if not isinstance(config, dict):
            return ["<root>: expected a mapping"]
        errors: List[str] = [f"{key}: unknown configuration block" for key in config
                             if key not in CONFIG_BLOCKS]
        errors += ValidationFramework.validate_geometry(config.get('geometry'))
        errors += ValidationFramework.validate_material(config.get('material'))
        errors += ValidationFramework.validate_loads(config.get('loads'))
        errors += ValidationFramework.validate_solver(config.get('solver'))
        errors += ValidationFramework.validate_initial(config.get('initial'))
        errors += ValidationFramework.validate_output(config.get('output'))
        return errors

    @staticmethod
    def validate_probe_ids(ids: List[int], n_particles: int, path: str) -> Optional[str]:
        bad = [k for k in ids if not 0 <= k < n_particles]
        if bad:
            return f"{path}: particle ids {bad} out of range [0, {n_particles})"
        return None


def main():
    """Test validation framework"""
    try:
        print("Testing Validation Framework")
        print("=" * 40)
        config = {
            'geometry': {'generator': 'box', 'extent': [1, 1, 1], 'counts': [2, 1, 1]},
            'material': {'E': 1.0, 'nu': 0.6, 'rho': 1.0},
            'solver': {'cfl_factor': 0.25, 'tol': 1e-12, 'max_iter': 100},
            'output': {'directory': 'out'},
        }
        for error in ValidationFramework.validate_configuration(config):
            print(f"✗ {error}")
        print("\n✓ Validation framework tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
