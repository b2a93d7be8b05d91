#!/usr/bin/env python3
"""
DEM Output Formatter Module
Console formatting for meshes, runs and energy histories
"""

import sys
from typing import Any, Dict, Sequence


class OutputFormatter:
    """
    Console formatter for rattle-dem
    All user-facing CLI output goes through these helpers
    """

    STYLES = {
        'header': '=' * 60,
        'subheader': '-' * 50,
        'success': '✓',
        'error': '✗',
        'warning': '⚠',
        'info': 'ℹ'
    }

    @staticmethod
    def _format_value(value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    @staticmethod
    def print_header(title: str, style: str = 'header') -> None:
        print(f"\n{OutputFormatter.STYLES[style]}")
        print(title)
        print(OutputFormatter.STYLES[style])

    @staticmethod
    def print_subheader(title: str, style: str = 'subheader') -> None:
        print(f"\n{title}")
        print(OutputFormatter.STYLES[style])

    @staticmethod
    def print_summary(data: Dict[str, Any], title: str = "Summary") -> None:
        """
        Print a key/value summary; lists and dicts are abbreviated

        Args:
            data: Summary data dictionary
            title: Summary title
        """
        OutputFormatter.print_subheader(title)
        for key, value in data.items():
            if isinstance(value, (list, tuple)) and len(value) > 3:
                print(f"{key:<25}: {len(value)} items")
                for i, item in enumerate(value[:5]):
                    print(f"  {'':<25}  {i}: {OutputFormatter._format_value(item)}")
                if len(value) > 5:
                    print(f"  {'':<25}  ... and {len(value) - 5} more")
            elif isinstance(value, dict):
                print(f"{key:<25}: {len(value)} keys")
                for sub_key, sub_value in list(value.items())[:3]:
                    print(f"  {'':<25}  {sub_key}: {OutputFormatter._format_value(sub_value)}")
                if len(value) > 3:
                    print(f"  {'':<25}  ... and {len(value) - 3} more")
            else:
                print(f"{key:<25}: {OutputFormatter._format_value(value)}")

    @staticmethod
    def print_table(headers: Sequence[str], rows: Sequence[Sequence[Any]],
                    title: str = "Table") -> None:
        if not rows:
            return
        OutputFormatter.print_subheader(title)

        cells = [[OutputFormatter._format_value(c) for c in row] for row in rows]
        widths = [max([len(str(h))] + [len(row[i]) for row in cells if i < len(row)])
                  for i, h in enumerate(headers)]
        header_str = "  ".join(f"{h:<{w}}" for h, w in zip(headers, widths))
        print(header_str)
        print("-" * len(header_str))
        for row in cells:
            print("  ".join(f"{c:<{w}}" for c, w in zip(row, widths)))

    @staticmethod
    def print_status(message: str, status: str = 'info', indent: int = 0) -> None:
        """
        Print a status line with its icon

        Args:
            message: Status message
            status: 'success', 'error', 'warning' or 'info'
            indent: Indentation level
        """
        icon = OutputFormatter.STYLES.get(status, '')
        print(f"{'  ' * indent}{icon} {message}")

    @staticmethod
    def print_progress(current: int, total: int, description: str = "Progress") -> None:
        if total <= 0:
            return
        current = min(current, total)
        percentage = 100.0 * current / total
        bar_length = 30
        filled = int(bar_length * current // total)
        bar = '█' * filled + '░' * (bar_length - filled)
        print(f"\r{description}: |{bar}| {percentage:.1f}% ({current}/{total})", end='')
        sys.stdout.flush()
        if current == total:
            print()

    @staticmethod
    def print_mesh_summary(summary: Dict[str, Any], material: Dict[str, float]) -> None:
        """
        Print mesh statistics and the derived material constants

        Args:
            summary: Mesh.summary() output
            material: MaterialCalculator.material_summary() output
        """
        OutputFormatter.print_summary({
            'Mesh kind': summary.get('kind', 'unknown'),
            'Particles': summary.get('particles', 0),
            'Links': summary.get('links', 0),
            'Free faces': summary.get('free_faces', 0),
            'Total volume (m^3)': summary.get('total_volume', 0.0),
            'Total mass (kg)': summary.get('total_mass', 0.0),
            'Smallest spacing (m)': summary.get('h_min', 0.0),
        }, "Mesh")
        OutputFormatter.print_summary({
            'Young modulus (Pa)': material.get('E', 0.0),
            'Poisson ratio': material.get('nu', 0.0),
            'P-wave speed (m/s)': material.get('c_p', 0.0),
            'S-wave speed (m/s)': material.get('c_s', 0.0),
            'Shear modulus (Pa)': material.get('mu', 0.0),
            'Lame lambda (Pa)': material.get('lambda', 0.0),
        }, "Material")

    @staticmethod
    def print_energy_table(rows: Sequence[Sequence[float]], title: str = "Energy History",
                           max_rows: int = 10) -> None:
        """Print (t, kinetic, potential, total) rows, thinned to max_rows"""
        if not rows:
            return
        stride = max(1, len(rows) // max_rows)
        index = list(range(0, len(rows), stride))
        if index[-1] != len(rows) - 1:
            index.append(len(rows) - 1)
        picked = [rows[k] for k in index]
        OutputFormatter.print_table(['t (s)', 'kinetic', 'potential', 'total'],
                                    [[f"{r[0]:.6e}", f"{r[1]:.6e}", f"{r[2]:.6e}", f"{r[3]:.6e}"]
                                     for r in picked], title)

    @staticmethod
    def print_run_summary(summary: Dict[str, Any]) -> None:
        """
        Print the end-of-run report written to summary.json
        """
        OutputFormatter.print_header(f"Scenario '{summary.get('scenario', 'custom')}' finished")
        OutputFormatter.print_summary({
            'Steps': summary.get('steps', 0),
            'Time step (s)': summary.get('dt', 0.0),
            'Final time (s)': summary.get('final_time', 0.0),
            'Max CFL margin': summary.get('max_cfl_margin', 0.0),
            'Max solver iterations': summary.get('max_iterations', 0),
            'Wall time (s)': summary.get('wall_time', 0.0),
        }, "Run")

        energy = summary.get('final_energy', {})
        if energy:
            OutputFormatter.print_summary(energy, "Final Energy")
        drift = summary.get('momentum_drift', {})
        if drift:
            OutputFormatter.print_summary(drift, "Momentum Drift")
        measured = summary.get('measurements', {})
        if measured:
            OutputFormatter.print_summary(measured, "Measurements")
        OutputFormatter.print_status(f"Outputs in {summary.get('output_dir', '.')}", 'info')


def main():
    """Test output formatter"""
    try:
        print("Testing Output Formatter")
        print("=" * 40)

        OutputFormatter.print_header("Test Header")
        OutputFormatter.print_status("Success message", 'success')
        OutputFormatter.print_status("Warning message", 'warning')
        OutputFormatter.print_mesh_summary(
            {'kind': 'box', 'particles': 8, 'links': 12, 'free_faces': 24,
             'total_volume': 1.0, 'total_mass': 2200.0, 'h_min': 0.5},
            {'c_p': 3202.0, 'c_s': 1849.0})
        OutputFormatter.print_energy_table([[0.0, 1.0, 0.0, 1.0], [0.1, 0.5, 0.5, 1.0]])
        OutputFormatter.print_run_summary({'scenario': 'oscillator', 'steps': 100,
                                           'final_energy': {'total': 1.0}})
        print("\n✓ Output formatter tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
