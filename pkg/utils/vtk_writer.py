#!/usr/bin/env python3
"""
DEM VTK Writer Module
Legacy ASCII unstructured-grid snapshots of hexahedral particles
"""

import io
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .file_utils import FileOperationError, FileUtils

VTK_HEXAHEDRON = 12


class VTKWriter:
    """
    Writes particle meshes as VTK legacy files

    Each particle owns its eight corner points (no sharing), so rigid
    particle motion shows the interface gaps and overlaps as they are.
    """

    @staticmethod
    def rigid_corner_points(rest_cells: np.ndarray, X0: np.ndarray,
                            X: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """
        Corner positions X + Q (c0 - X0) of every particle

        Args:
            rest_cells: (N, 8, 3) rest corners in VTK hexahedron order
            X0: (N, 3) rest centers
            X: (N, 3) current centers
            Q: (N, 3, 3) current rotations

        Returns:
            (8N, 3) points, particle-major
        """
        rel = rest_cells - X0[:, None, :]
        moved = X[:, None, :] + np.einsum('nij,nkj->nki', Q, rel)
        return moved.reshape(-1, 3)

    @staticmethod
    def write_unstructured(path: Union[str, Path], points: np.ndarray, n_cells: int,
                           cell_data: Dict[str, np.ndarray],
                           title: str = "rattle-dem snapshot") -> Path:
        """
        Write hexahedral cells with per-cell scalar fields

        Args:
            path: Output file
            points: (8 n_cells, 3) corner points
            n_cells: Number of hexahedra
            cell_data: Scalar arrays of length n_cells
            title: Header line

        Returns:
            Path of the written file

        Raises:
            FileOperationError: On shape mismatch or I/O failure (with the path)
        """
        points = np.asarray(points, dtype=float)
        if points.shape != (8 * n_cells, 3):
            raise FileOperationError(f"{path}: expected {8 * n_cells} points, got {points.shape[0]}")

        buf = io.StringIO()
        buf.write("# vtk DataFile Version 3.0\n")
        buf.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        buf.write(f"POINTS {points.shape[0]} double\n")
        np.savetxt(buf, points, fmt='%.10g')

        connectivity = np.column_stack([np.full(n_cells, 8),
                                        np.arange(8 * n_cells).reshape(n_cells, 8)])
        buf.write(f"CELLS {n_cells} {9 * n_cells}\n")
        np.savetxt(buf, connectivity, fmt='%d')
        buf.write(f"CELL_TYPES {n_cells}\n")
        np.savetxt(buf, np.full((n_cells, 1), VTK_HEXAHEDRON), fmt='%d')

        if cell_data:
            buf.write(f"CELL_DATA {n_cells}\n")
            for name, values in cell_data.items():
                values = np.asarray(values, dtype=float).reshape(-1)
                if values.size != n_cells:
                    raise FileOperationError(f"{path}: field '{name}' has {values.size} values "
                                             f"for {n_cells} cells")
                buf.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(buf, values[:, None], fmt='%.10g')

        return FileUtils.safe_write(buf.getvalue(), path, overwrite=True, backup=False)


def main():
    """Test VTK writer"""
    try:
        print("Testing VTK Writer")
        print("=" * 40)
        corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
        X0 = np.array([[0.5, 0.5, 0.5]])
        points = VTKWriter.rigid_corner_points(corners[None], X0, X0 + 1.0, np.eye(3)[None])
        path = VTKWriter.write_unstructured("./test_frame.vtk", points, 1, {'eps_v': np.zeros(1)})
        print(f"✓ Wrote {path}")
        path.unlink()
        print("\n✓ VTK writer tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
