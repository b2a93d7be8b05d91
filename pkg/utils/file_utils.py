#!/usr/bin/env python3
"""
DEM File Utilities Module
Unified file operations for simulation inputs and outputs
"""

import io
import json
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml


class FileOperationError(Exception):
    """File operation error"""
    pass


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class FileUtils:
    """
    Unified file utilities for DEM simulations
    Handles all file operations across different modules
    """

    # Full round-trip precision for binary64
    FLOAT_FORMAT = '%.17g'

    @staticmethod
    def ensure_directory(path: Union[str, Path], create_parents: bool = True) -> Path:
        """
        Ensure directory exists, create if necessary

        Args:
            path: Directory path
            create_parents: Whether to create parent directories

        Returns:
            Path object for the directory
        """
        path_obj = Path(path)
        try:
            path_obj.mkdir(parents=create_parents, exist_ok=True)
        except OSError as e:
            raise FileOperationError(f"Failed to create directory {path_obj}: {e}")
        return path_obj

    @staticmethod
    def safe_write(content: str, file_path: Union[str, Path],
                   overwrite: bool = False, backup: bool = True) -> Path:
        """
        Safely write content to file

        Args:
            content: Content to write
            file_path: Target file path
            overwrite: Whether to overwrite existing file
            backup: Whether to create backup of existing file

        Returns:
            Path object for the written file

        Raises:
            FileOperationError: If the file exists without overwrite, or writing fails
        """
        path_obj = Path(file_path)

        try:
            path_obj.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise FileOperationError(f"Failed to create directory {path_obj.parent}: {e}")

        if path_obj.exists():
            if not overwrite:
                raise FileOperationError(f"File exists: {path_obj}")

            if backup:
                backup_path = path_obj.with_suffix(path_obj.suffix + '.backup')
                if not backup_path.exists():
                    shutil.copy2(path_obj, backup_path)

        try:
            with open(path_obj, 'w', encoding='utf-8', newline='\n') as f:
                f.write(content)
            return path_obj
        except Exception as e:
            raise FileOperationError(f"Failed to write to {path_obj}: {e}")

    @staticmethod
    def safe_read(file_path: Union[str, Path]) -> str:
        """
        Safely read file content

        Raises:
            FileOperationError: If read operation fails
        """
        path_obj = Path(file_path)

        if not path_obj.exists():
            raise FileOperationError(f"File not found: {path_obj}")

        try:
            with open(path_obj, 'r', encoding='utf-8') as f:
                return f.read()
        except Exception as e:
            raise FileOperationError(f"Failed to read {path_obj}: {e}")

    @staticmethod
    def save_yaml(data: Dict[str, Any], file_path: Union[str, Path],
                  default_flow_style: bool = False, indent: int = 2) -> Path:
        """Save data to a YAML file (overwriting)"""
        try:
            content = yaml.safe_dump(data, default_flow_style=default_flow_style,
                                     indent=indent, sort_keys=False)
        except yaml.YAMLError as e:
            raise FileOperationError(f"Failed to serialise YAML for {file_path}: {e}")
        return FileUtils.safe_write(content, file_path, overwrite=True, backup=False)

    @staticmethod
    def save_json(data: Dict[str, Any], file_path: Union[str, Path]) -> Path:
        """Save data as indented JSON; numpy values are converted"""
        try:
            content = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
        except (TypeError, ValueError) as e:
            raise FileOperationError(f"Failed to serialise JSON for {file_path}: {e}")
        return FileUtils.safe_write(content + '\n', file_path, overwrite=True, backup=False)

    @staticmethod
    def write_csv(file_path: Union[str, Path], header: Sequence[str], rows: np.ndarray,
                  comments: Optional[Sequence[str]] = None, integer_columns: int = 0,
                  overwrite: bool = True) -> Path:
        """
        Write a numeric table with full float precision

        Args:
            file_path: Target path
            header: Column names
            rows: (n, k) numeric array
            comments: Lines written first, prefixed with '# '
            integer_columns: Number of leading columns written as integers
            overwrite: Whether to overwrite an existing file

        Returns:
            Path object for the written file
        """
        data = np.asarray(rows, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, len(header)) if data.size else np.zeros((0, len(header)))
        if data.shape[1] != len(header):
            raise FileOperationError(
                f"{file_path}: {data.shape[1]} columns for {len(header)} header names"
            )

        buffer = io.StringIO()
        for line in comments or ():
            buffer.write(f"# {line}\n")
        buffer.write(','.join(header) + '\n')
        if data.shape[0]:
            fmt = ['%d'] * integer_columns + [FileUtils.FLOAT_FORMAT] * (len(header) - integer_columns)
            np.savetxt(buffer, data, fmt=fmt, delimiter=',')
        return FileUtils.safe_write(buffer.getvalue(), file_path, overwrite=overwrite, backup=False)

    @staticmethod
    def read_csv(file_path: Union[str, Path]) -> Tuple[List[str], np.ndarray, List[str]]:
        """
        Read a table written by write_csv

        Returns:
            (header, rows as float array, comment lines)
        """
        lines = FileUtils.safe_read(file_path).splitlines()
        comments = [ln[1:].strip() for ln in lines if ln.startswith('#')]
        body = [ln for ln in lines if ln and not ln.startswith('#')]
        if not body:
            raise FileOperationError(f"{file_path}: missing header row")
        header = body[0].split(',')
        if len(body) == 1:
            return header, np.zeros((0, len(header))), comments
        try:
            rows = np.loadtxt(io.StringIO('\n'.join(body[1:])), delimiter=',', ndmin=2)
        except ValueError as e:
            raise FileOperationError(f"{file_path}: malformed numeric data: {e}")
        if rows.shape[1] != len(header):
            raise FileOperationError(f"{file_path}: rows do not match the header")
        return header, rows, comments


def main():
    """Test file utilities"""
    try:
        print("Testing File Utils")
        print("=" * 40)

        test_dir = Path("./test_file_utils")
        FileUtils.ensure_directory(test_dir)

        table = np.array([[0, 0.1, 1.0 / 3.0], [1, 2.5e-17, -7.0]])
        path = FileUtils.write_csv(test_dir / "table.csv", ['id', 'a', 'b'], table,
                                   comments=['demo'], integer_columns=1)
        header, rows, comments = FileUtils.read_csv(path)
        print(f"✓ CSV round trip exact: {np.array_equal(rows, table)} ({header}, {comments})")

        FileUtils.save_json({'value': np.float64(1.5), 'ids': np.arange(3)}, test_dir / "s.json")
        print("✓ Saved JSON")

        shutil.rmtree(test_dir)
        print("\n✓ File utils tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
