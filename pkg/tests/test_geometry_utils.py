"""
Tests for rotation helpers, polygon integrals and hexahedron mass properties
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.geometry_utils import (HEX_CORNER_OFFSETS, GeometryError, hexahedron_corner_jacobians,
                                  hexahedron_mass_properties, left_jacobian, polygon_properties,
                                  principal_inertia, rotation_matrix, select_tangent, skew, vee)

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
vectors = st.tuples(finite, finite, finite).map(np.array)


class TestSkew:

    @given(vectors, vectors)
    def test_skew_is_cross_product(self, v, y):
        np.testing.assert_allclose(skew(v) @ y, np.cross(v, y), atol=1e-12)

    @given(vectors)
    def test_vee_inverts_skew(self, v):
        np.testing.assert_array_equal(vee(skew(v)), v)

    def test_batched_shapes(self):
        v = np.arange(12.0).reshape(4, 3)
        assert skew(v).shape == (4, 3, 3)
        np.testing.assert_array_equal(vee(skew(v)), v)


class TestSelectTangent:

    def test_x_normal_gives_z(self):
        np.testing.assert_allclose(select_tangent([1.0, 0.0, 0.0]), [0.0, 0.0, 1.0])

    @given(vectors.filter(lambda v: np.linalg.norm(v) > 1e-3))
    def test_unit_and_orthogonal(self, v):
        n = v / np.linalg.norm(v)
        s = select_tangent(n)
        assert abs(np.linalg.norm(s) - 1.0) < 1e-12
        assert abs(s @ n) < 1e-12


class TestRotations:

    def test_quarter_turn_about_z(self):
        R = rotation_matrix([0.0, 0.0, np.pi / 2])
        np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)

    @given(vectors)
    def test_orthogonal_with_unit_determinant(self, phi):
        R = rotation_matrix(phi)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-13)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_left_jacobian_at_zero_is_identity(self):
        np.testing.assert_array_equal(left_jacobian(np.zeros(3)), np.eye(3))

    @pytest.mark.parametrize("phi", [[0.3, -0.2, 0.5], [1e-8, 0.0, 2e-8], [2.0, 1.0, -0.5]])
    def test_left_jacobian_matches_finite_differences(self, phi):
        phi = np.asarray(phi)
        J = left_jacobian(phi)
        R0T = rotation_matrix(phi).T
        eps = 1e-6
        for k in range(3):
            step = np.zeros(3)
            step[k] = eps
            dR = (rotation_matrix(phi + step) - rotation_matrix(phi - step)) @ R0T / (2 * eps)
            np.testing.assert_allclose(vee(dR), J[:, k], atol=1e-8)


class TestPolygonProperties:

    def test_unit_square(self):
        square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        poly = polygon_properties(square, normal_hint=[0, 0, 1])
        assert poly.area == pytest.approx(1.0)
        np.testing.assert_allclose(poly.centroid, [0.5, 0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(poly.normal, [0.0, 0.0, 1.0], atol=1e-15)
        assert poly.moment_about([1.0, 0.0, 0.0]) == pytest.approx(1.0 / 12.0)
        assert poly.moment_about([0.0, 1.0, 0.0]) == pytest.approx(1.0 / 12.0)

    def test_orientation_does_not_change_integrals(self):
        rect = np.array([[0, 0, 1], [2, 0, 1], [2, 1, 1], [0, 1, 1]], dtype=float)
        ccw = polygon_properties(rect, normal_hint=[0, 0, 1])
        cw = polygon_properties(rect[::-1], normal_hint=[0, 0, 1])
        assert cw.area == pytest.approx(ccw.area)
        np.testing.assert_allclose(cw.centroid, ccw.centroid, atol=1e-14)
        assert cw.moment_about([1, 0, 0]) == pytest.approx(2.0 * 4.0 / 12.0)
        assert ccw.moment_about([0, 1, 0]) == pytest.approx(2.0 / 12.0)

    def test_triangle_centroid(self):
        tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        poly = polygon_properties(tri)
        assert poly.area == pytest.approx(0.5)
        np.testing.assert_allclose(poly.centroid, [1 / 3, 1 / 3, 0.0], atol=1e-15)

    def test_normal_follows_hint(self):
        square = np.array([[0, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=float)
        assert polygon_properties(square, normal_hint=[-1, 0, 0]).normal[0] == pytest.approx(-1.0)
        assert polygon_properties(square, normal_hint=[1, 0, 0]).normal[0] == pytest.approx(1.0)

    def test_principal_directions_of_rectangle(self):
        rect = np.array([[0, 0, 0], [3, 0, 0], [3, 1, 0], [0, 1, 0]], dtype=float)
        values, directions = polygon_properties(rect).principal_directions()
        assert values[0] == pytest.approx(3.0 / 12.0)
        assert values[1] == pytest.approx(27.0 / 12.0)
        assert abs(directions[1] @ [1.0, 0.0, 0.0]) == pytest.approx(1.0)

    def test_non_planar_rejected(self):
        warped = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0.1], [0, 1, 0]], dtype=float)
        with pytest.raises(GeometryError, match="not planar"):
            polygon_properties(warped)
        assert polygon_properties(warped, project=True).area > 0

    def test_degenerate_rejected(self):
        with pytest.raises(GeometryError, match="zero area"):
            polygon_properties(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float))
        with pytest.raises(GeometryError):
            polygon_properties(np.zeros((2, 3)))


class TestHexahedron:

    def test_unit_cube(self):
        volume, centroid, C = hexahedron_mass_properties(HEX_CORNER_OFFSETS.astype(float))
        assert volume == pytest.approx(1.0)
        np.testing.assert_allclose(centroid, [0.5, 0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(C, np.eye(3) / 12.0, atol=1e-15)
        np.testing.assert_allclose(hexahedron_corner_jacobians(HEX_CORNER_OFFSETS), np.ones(8))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-0.15, max_value=0.15), min_size=6, max_size=6),
           st.tuples(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(0.5, 3.0)))
    def test_parallelepiped(self, shear, lengths):
        M = np.diag(lengths)
        M[0, 1], M[0, 2], M[1, 0], M[1, 2], M[2, 0], M[2, 1] = shear
        corners = HEX_CORNER_OFFSETS @ M
        volume, centroid, C = hexahedron_mass_properties(corners)
        det = np.linalg.det(M)
        assert volume == pytest.approx(det, rel=1e-12)
        np.testing.assert_allclose(centroid, corners.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(C, det * M.T @ M / 12.0, atol=1e-12)

    def test_inverted_cell_rejected(self):
        mirrored = HEX_CORNER_OFFSETS * np.array([1.0, 1.0, -1.0])
        assert np.all(hexahedron_corner_jacobians(mirrored) < 0)
        with pytest.raises(GeometryError, match="non-positive volume"):
            hexahedron_mass_properties(mirrored)

    def test_principal_inertia_of_box(self):
        corners = HEX_CORNER_OFFSETS * np.array([1.0, 2.0, 3.0])
        _, _, C = hexahedron_mass_properties(corners)
        moments, axes = principal_inertia(C, mass_density=1.0)
        np.testing.assert_allclose(moments, [2.5, 5.0, 6.5], rtol=1e-12)
        assert np.linalg.det(axes) == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(axes), np.eye(3)[:, ::-1], atol=1e-12)
