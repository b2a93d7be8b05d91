#!/usr/bin/env python3
"""
rattle-dem - Main Script
Elastodynamics of bonded polyhedral particles: scenario runs and canned benchmarks
"""

import sys
import argparse
import logging

import yaml

from modules.config_manager import ConfigManager, ConfigValidationError
from modules.benchmark_scenarios import BENCHMARKS, run_benchmark
from modules.diagnostics import DiagnosticsError
from modules.mechanics import MechanicsError
from modules.mesh_builder import MeshError
from modules.particle_state import StateError
from modules.rattle_integrator import IntegratorError, StepFailure
from modules.scenario_runner import ScenarioError, ScenarioRunner
from modules.static_solver import StaticSolverError
from utils import FileOperationError, MaterialCalculationError, MaterialCalculator, OutputFormatter

DOMAIN_ERRORS = (ScenarioError, MeshError, MechanicsError, IntegratorError, StaticSolverError,
                 StateError, DiagnosticsError, FileOperationError, MaterialCalculationError)


def setup_argument_parser():
    """Setup command line argument parser"""
    parser = argparse.ArgumentParser(
        description="Bonded-particle elastodynamics with a RATTLE integrator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run a scenario file
  python main.py run configs/box_wave.yaml

  # Validate a scenario without integrating
  python main.py run configs/cantilever.yaml --validate-only

  # Canned benchmark with overrides
  python main.py demo cantilever -p n_elements=16 --out ./cantilever16

  # Short oscillator run on 4 threads
  python main.py demo oscillator --steps 500 --threads 4
        """
    )
    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Debug logging and tracebacks on unexpected errors'
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-o', '--out', help='Output directory (overrides config)')
    common.add_argument('--steps', type=int, help='Number of steps (overrides config)')
    common.add_argument('--dt', type=float, help='Time step in seconds (overrides config)')
    common.add_argument('--threads', type=int, help='Worker threads for force assembly')
    common.add_argument('--plot', action='store_true', help='Write energy.png (needs matplotlib)')
    common.add_argument('--quiet', action='store_true', help='No progress bar')

    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', parents=[common], help='Run a scenario file (YAML or JSON)')
    run_parser.add_argument('config', help='Scenario file path')
    run_parser.add_argument(
        '--validate-only',
        action='store_true',
        help='Only validate configuration without execution'
    )

    demo_parser = subparsers.add_parser('demo', parents=[common], help='Run a canned benchmark')
    demo_parser.add_argument('name', choices=sorted(BENCHMARKS), help='Benchmark name')
    demo_parser.add_argument(
        '-p', '--param',
        action='append',
        default=[],
        metavar='KEY=VALUE',
        help='Benchmark parameter override (repeatable)'
    )

    return parser


def parse_params(pairs):
    """Turn KEY=VALUE strings into a dict; values are read as YAML scalars or lists"""
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        if not sep or not key:
            raise ConfigValidationError(f"--param {pair!r}: expected KEY=VALUE")
        params[key.strip()] = yaml.safe_load(value)
    return params


def validate_configuration(config_manager):
    """Validate configuration and print summary"""
    OutputFormatter.print_header("Configuration Validation")

    try:
        config_manager.validate_config()
        config_manager.print_summary()
        OutputFormatter.print_status("Configuration validation passed", 'success')
        return True
    except ConfigValidationError as e:
        OutputFormatter.print_status("Configuration validation failed:", 'error')
        print(f"  {e}")
        return False


def apply_overrides(config_manager, args):
    """Copy command-line overrides into the configuration"""
    if args.out:
        config_manager.set_parameter('output.directory', args.out)
    if args.steps is not None:
        config_manager.set_parameter('solver.n_steps', args.steps)
    if args.dt is not None:
        config_manager.set_parameter('solver.dt', args.dt)
    if args.threads is not None:
        config_manager.set_parameter('solver.threads', args.threads)
    if args.plot:
        config_manager.set_parameter('output.plot', True)


def run_configured_scenario(args):
    """Run the scenario file named on the command line"""
    config_manager = ConfigManager(args.config)
    apply_overrides(config_manager, args)

    if not validate_configuration(config_manager):
        return 1
    if args.validate_only:
        OutputFormatter.print_status("Configuration validation completed successfully", 'success')
        return 0

    runner = ScenarioRunner(config_manager, show_progress=not args.quiet)
    setup = runner.setup()
    material = setup.mesh.material
    OutputFormatter.print_mesh_summary(setup.mesh.summary(),
                                       MaterialCalculator.material_summary(material.E, material.nu,
                                                                           material.rho))
    result = runner.run(setup)
    OutputFormatter.print_energy_table([[r.t, r.kinetic, r.potential, r.total] for r in result.energies])
    OutputFormatter.print_run_summary(result.summary)
    return 0


def run_demo(args):
    """Run a canned benchmark"""
    params = parse_params(args.param)
    OutputFormatter.print_header(f"Benchmark '{args.name}': {BENCHMARKS[args.name].description}")
    result = run_benchmark(args.name, out_dir=args.out, steps=args.steps, dt=args.dt,
                           threads=args.threads, show_progress=not args.quiet,
                           plot=args.plot, **params)
    OutputFormatter.print_energy_table([[r.t, r.kinetic, r.potential, r.total] for r in result.energies])
    OutputFormatter.print_run_summary(result.summary)
    if 'error' in result.summary['measurements']:
        OutputFormatter.print_status(f"Measurement failed: {result.summary['measurements']['error']}", 'error')
        return 1
    return 0


def main():
    """Main execution function"""
    parser = setup_argument_parser()
    args = parser.parse_args()

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        if args.command == 'run':
            status = run_configured_scenario(args)
        else:
            status = run_demo(args)
        sys.exit(status)

    except KeyboardInterrupt:
        print("\nRun interrupted by user")
        sys.exit(130)
    except StepFailure as e:
        OutputFormatter.print_status(f"Integration failed: {e}", 'error')
        sys.exit(1)
    except ConfigValidationError as e:
        OutputFormatter.print_status(f"Configuration error: {e}", 'error')
        sys.exit(1)
    except DOMAIN_ERRORS as e:
        OutputFormatter.print_status(f"{type(e).__name__}: {e}", 'error')
        if args.verbose:
            import traceback
            traceback.print_exc()
        sys.exit(1)
    except Exception as e:
        OutputFormatter.print_status(f"Unexpected error: {e}", 'error')
        if args.verbose:
            import traceback
            traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
