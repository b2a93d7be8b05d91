"""
Tests for file helpers and the VTK snapshot writer
"""

import json

import numpy as np
import pytest

from modules.particle_state import init_rest
from utils.file_utils import FileOperationError, FileUtils
from utils.vtk_writer import VTKWriter


class TestFileUtils:

    def test_csv_round_trip(self, tmp_path):
        table = np.array([[0, 0.1, 1.0 / 3.0], [7, 2.5e-17, -7.0]])
        path = FileUtils.write_csv(tmp_path / "t.csv", ['id', 'a', 'b'], table,
                                   comments=['t=0.5'], integer_columns=1)
        header, rows, comments = FileUtils.read_csv(path)
        assert header == ['id', 'a', 'b']
        assert comments == ['t=0.5']
        np.testing.assert_array_equal(rows, table)
        assert path.read_text().splitlines()[2].startswith('0,0.10000000000000001,')

    def test_csv_header_only(self, tmp_path):
        path = FileUtils.write_csv(tmp_path / "empty.csv", ['a', 'b'], np.zeros((0, 2)))
        header, rows, _ = FileUtils.read_csv(path)
        assert header == ['a', 'b'] and rows.shape == (0, 2)

    def test_csv_column_mismatch(self, tmp_path):
        with pytest.raises(FileOperationError, match="columns"):
            FileUtils.write_csv(tmp_path / "bad.csv", ['a', 'b'], np.zeros((2, 3)))

    def test_safe_write_refuses_overwrite(self, tmp_path):
        path = FileUtils.safe_write("one", tmp_path / "f.txt")
        with pytest.raises(FileOperationError, match="File exists"):
            FileUtils.safe_write("two", path)
        FileUtils.safe_write("two", path, overwrite=True)
        assert path.read_text() == "two"
        assert (tmp_path / "f.txt.backup").read_text() == "one"

    def test_safe_read_missing(self, tmp_path):
        with pytest.raises(FileOperationError, match="File not found"):
            FileUtils.safe_read(tmp_path / "missing.txt")

    def test_save_json_converts_numpy(self, tmp_path):
        path = FileUtils.save_json({'x': np.float64(1.5), 'ids': np.arange(3), 'fixed': {2, 1}},
                                   tmp_path / "s.json")
        assert json.loads(path.read_text()) == {'x': 1.5, 'ids': [0, 1, 2], 'fixed': [1, 2]}


class TestVTKWriter:

    def test_rest_pair(self, pair_mesh, tmp_path):
        states = init_rest(pair_mesh)
        points = VTKWriter.rigid_corner_points(pair_mesh.cells, pair_mesh.X0, states.X, states.Q)
        assert points.shape == (16, 3)
        np.testing.assert_allclose(points, pair_mesh.cells.reshape(-1, 3), atol=1e-15)

        path = VTKWriter.write_unstructured(tmp_path / "frame.vtk", points, 2,
                                            {'eps_v': np.zeros(2), 'id': np.arange(2)})
        text = path.read_text()
        assert text.startswith("# vtk DataFile Version 3.0")
        for line in ("POINTS 16 double", "CELLS 2 18", "CELL_TYPES 2", "CELL_DATA 2",
                     "SCALARS eps_v double 1", "SCALARS id double 1"):
            assert line in text

    def test_moved_corners(self, pair_mesh):
        Q = np.tile(np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), (2, 1, 1))
        points = VTKWriter.rigid_corner_points(pair_mesh.cells, pair_mesh.X0, pair_mesh.X0, Q)
        # corner 0 of particle 0 sits at (-0.5, -0.5, -0.5) from its center
        np.testing.assert_allclose(points[0], [1.0, 0.0, 0.0])

    def test_shape_mismatch(self, tmp_path):
        with pytest.raises(FileOperationError, match="expected 16 points"):
            VTKWriter.write_unstructured(tmp_path / "bad.vtk", np.zeros((8, 3)), 2, {})
        with pytest.raises(FileOperationError, match="field 'eps_v'"):
            VTKWriter.write_unstructured(tmp_path / "bad.vtk", np.zeros((8, 3)), 1,
                                         {'eps_v': np.zeros(3)})
