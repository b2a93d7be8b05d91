#!/usr/bin/env python3
"""
DEM Configuration Manager Module
Loads, merges and validates scenario configurations and resolves particle selectors
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from utils import FileUtils, FileOperationError, OutputFormatter, ValidationFramework

logger = logging.getLogger(__name__)


class ConfigValidationError(Exception):
    """Configuration validation error"""
    pass


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base; lists are replaced"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigManager:
    """
    Scenario configuration manager
    Handles loading, validation and access to configuration parameters
    """

    DEFAULT_CONFIG = {
        'scenario': 'custom',
        'geometry': None,          # required: box | cylinder | hemisphere
        'material': {
            'E': 1.0,              # Young modulus (Pa)
            'nu': 0.25,            # Poisson ratio
            'rho': 1.0,            # Density (kg/m^3)
        },
        'loads': {
            'point_forces': [],
            'end_moments': [],
            'pinch': [],           # preload pairs released at t = 0
            'fixed': [],
            'damping': 0.0,        # momentum damping rate (1/s)
        },
        'solver': {
            'dt': None,            # None: cfl_factor * h_min / c_p
            'cfl_factor': 0.25,
            'tol': 1e-12,
            'max_iter': 100,
            'n_steps': 1000,
            'threads': 1,
            'cfl_guard': True,
            'stop_kinetic_ratio': None,  # stop once kinetic < ratio * |potential|
        },
        'initial': {
            'velocity': None,
            'angular_velocity': None,
            'pulse': None,
            'displacements': [],   # rigid shifts of selected particles
        },
        'output': {
            'directory': './rattle_output',
            'probes': [],
            'probe_stride': 10,
            'energy_stride': 10,
            'snapshot_stride': 0,  # 0 disables VTK frames
            'plot': False,
        },
    }

    def __init__(self, config_file: Optional[str] = None,
                 config: Optional[Dict[str, Any]] = None):
        """
        Initialize configuration manager

        Args:
            config_file: Path to a YAML or JSON scenario file
            config: Scenario dictionary (used when no file is given)
        """
        self.config_file = config_file
        self.config: Dict[str, Any] = copy.deepcopy(self.DEFAULT_CONFIG)

        if config_file:
            self.load_config(config_file)
        elif config is not None:
            self.update(config)

    @staticmethod
    def _parse_text(text: str) -> Dict[str, Any]:
        # JSON first: YAML 1.1 reads exponents such as 1e-12 as strings
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            try:
                data = yaml.safe_load(text)
            except yaml.YAMLError as e:
                raise ConfigValidationError(f"<root>: not a valid JSON or YAML document: {e}")
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigValidationError("<root>: top level must be a mapping")
        return data

    def update(self, user_config: Dict[str, Any]) -> None:
        """Deep-merge user settings over the current configuration"""
        if not isinstance(user_config, dict):
            raise ConfigValidationError("<root>: top level must be a mapping")
        self.config = deep_merge(self.config, user_config)

    def load_config(self, config_file: Union[str, Path]) -> None:
        """
        Load configuration from a YAML or JSON file

        Raises:
            ConfigValidationError: If the file cannot be read or parsed
        """
        try:
            text = FileUtils.safe_read(config_file)
        except FileOperationError as e:
            raise ConfigValidationError(f"Failed to load config: {e}")
        self.update(self._parse_text(text))
        logger.info("Loaded configuration from %s", config_file)

    def validate_config(self) -> None:
        """
        Validate configuration parameters using the validation framework

        Raises:
            ConfigValidationError: If configuration is invalid
        """
        errors = ValidationFramework.validate_configuration(self.config)
        if errors:
            error_msg = "\n".join(errors)
            raise ConfigValidationError(f"Configuration validation failed:\n{error_msg}")

    def get_parameter(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration parameter by dotted path, e.g. 'solver.tol'
        """
        node: Any = self.config
        for part in key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set_parameter(self, key: str, value: Any) -> None:
        """Set a configuration parameter by dotted path, creating blocks as needed"""
        parts = key.split('.')
        node = self.config
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value

    def get_all_parameters(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def save_config(self, config_file: Union[str, Path]) -> Path:
        return FileUtils.save_yaml(self.config, config_file)

    def print_summary(self) -> None:
        """Print configuration summary"""
        geometry = self.config.get('geometry') or {}
        solver = self.config['solver']
        loads = self.config['loads']
        OutputFormatter.print_header(f"Scenario '{self.config.get('scenario', 'custom')}'")
        OutputFormatter.print_summary({
            'Generator': geometry.get('generator', 'Not specified'),
            'Cells': 'x'.join(str(c) for c in geometry.get('counts', [])) or 'Not specified',
            'Material (E, nu, rho)': ", ".join(f"{self.config['material'][k]:g}" for k in ('E', 'nu', 'rho')),
        }, "Geometry")
        OutputFormatter.print_summary({
            'Time step': solver['dt'] if solver['dt'] is not None else f"auto (cfl {solver['cfl_factor']})",
            'Steps': solver['n_steps'],
            'Rotation tolerance': solver['tol'],
            'Max iterations': solver['max_iter'],
            'Threads': solver['threads'],
        }, "Solver")
        OutputFormatter.print_summary({
            'Point forces': len(loads.get('point_forces') or []),
            'End moments': len(loads.get('end_moments') or []),
            'Pinch pairs': len(loads.get('pinch') or []),
            'Fixed selectors': len(loads.get('fixed') or []),
            'Damping': loads.get('damping', 0.0),
        }, "Loads")
        OutputFormatter.print_status(f"Output directory: {self.config['output']['directory']}", 'info')


def parse_config(text: str) -> ConfigManager:
    """
    Parse and validate a scenario document

    Args:
        text: JSON (or YAML) document

    Returns:
        ConfigManager holding the merged, validated configuration

    Raises:
        ConfigValidationError: On schema or physical-range violations
    """
    manager = ConfigManager()
    manager.update(ConfigManager._parse_text(text))
    manager.validate_config()
    return manager


def resolve_selector(mesh, selector: Dict[str, Any], path: str = 'selector') -> np.ndarray:
    """
    Resolve a selector to sorted particle ids

    Args:
        mesh: Built mesh
        selector: {ids: [...]}, {nearest: [x, y, z]} or {box: {min, max}}
        path: Dotted path used in error messages

    Returns:
        Sorted unique particle ids (at least one)

    Raises:
        ConfigValidationError: If the selector is malformed or selects nothing
    """
    problems = ValidationFramework.validate_selector(selector, path)
    if problems:
        raise ConfigValidationError("\n".join(problems))
    kind, value = next(iter(selector.items()))
    if kind == 'ids':
        ids = np.unique(np.asarray(value, dtype=np.int64))
        problem = ValidationFramework.validate_probe_ids(ids.tolist(), mesh.n_particles, f"{path}.ids")
        if problem:
            raise ConfigValidationError(problem)
    elif kind == 'nearest':
        dist = np.linalg.norm(mesh.X0 - np.asarray(value, dtype=float), axis=1)
        ids = np.array([int(np.argmin(dist))])
    else:
        lo = np.asarray(value['min'], dtype=float)
        hi = np.asarray(value['max'], dtype=float)
        inside = np.all((mesh.X0 >= lo) & (mesh.X0 <= hi), axis=1)
        ids = np.flatnonzero(inside)
    if ids.size == 0:
        raise ConfigValidationError(f"{path}: selector resolves to no particles")
    return ids


def resolve_selectors(mesh, selectors: List[Dict[str, Any]], path: str) -> np.ndarray:
    """Union of several selectors"""
    if not selectors:
        return np.zeros(0, dtype=np.int64)
    parts = [resolve_selector(mesh, s, f"{path}[{k}]") for k, s in enumerate(selectors)]
    return np.unique(np.concatenate(parts))


def main():
    """Test configuration manager"""
    try:
        print("Testing Configuration Manager")
        print("=" * 40)

        manager = parse_config('{"geometry": {"generator": "box", "extent": [2, 1, 1], "counts": [2, 1, 1]}}')
        print(f"solver.tol: {manager.get_parameter('solver.tol')}")
        print(f"solver.cfl_factor: {manager.get_parameter('solver.cfl_factor')}")

        print("\nTesting validation:")
        try:
            parse_config('{"geometry": {"generator": "box", "extent": [1, 1, 1], "counts": [1, 1, 1]},'
                         ' "material": {"E": 1, "nu": 0.6, "rho": 1}}')
        except ConfigValidationError as e:
            print(f"✓ Caught expected error: {e}")

        manager.print_summary()
        print("\n✓ Configuration manager tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
