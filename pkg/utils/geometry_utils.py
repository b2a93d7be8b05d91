#!/usr/bin/env python3
"""
DEM Geometry Utilities Module
Polygon and polyhedron integrals, skew maps and rotation helpers
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation


class GeometryError(Exception):
    """Geometry computation error"""
    pass


# Outward-oriented quad faces of a hexahedron in VTK corner order.
# Keys are (parametric axis, side).
HEX_FACES = {
    (0, 0): (0, 4, 7, 3),
    (0, 1): (1, 2, 6, 5),
    (1, 0): (0, 1, 5, 4),
    (1, 1): (2, 3, 7, 6),
    (2, 0): (0, 3, 2, 1),
    (2, 1): (4, 5, 6, 7),
}

# Parametric offsets of the VTK hexahedron corners
HEX_CORNER_OFFSETS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
], dtype=int)

# For each corner, the neighbouring corners along parametric axes 0, 1, 2
_HEX_CORNER_EDGES = {
    0: (1, 3, 4), 1: (0, 2, 5), 2: (3, 1, 6), 3: (2, 0, 7),
    4: (5, 7, 0), 5: (4, 6, 1), 6: (7, 5, 2), 7: (6, 4, 3),
}


@dataclass(frozen=True)
class PolygonProperties:
    """Area, centroid and second moments of a planar polygon"""
    area: float
    centroid: np.ndarray
    normal: np.ndarray
    basis: np.ndarray          # rows e_u, e_v spanning the plane
    second_moments: np.ndarray  # 2x2 tensor about the centroid in (e_u, e_v)

    def moment_about(self, direction: np.ndarray) -> float:
        """Return the integral of ((X - P) . direction)^2 over the polygon"""
        c = self.basis @ np.asarray(direction, dtype=float)
        return float(c @ self.second_moments @ c)

    def principal_directions(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and in-plane 3D eigenvectors (rows)"""
        values, vectors = np.linalg.eigh(self.second_moments)
        return values, vectors.T @ self.basis


def skew(v: np.ndarray) -> np.ndarray:
    """Map vectors (..., 3) to the skew matrices j(v) with j(v) y = v ^ y"""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(A: np.ndarray) -> np.ndarray:
    """Inverse of skew on the skew part: (A21, A02, A10)"""
    A = np.asarray(A, dtype=float)
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def select_tangent(n: np.ndarray) -> np.ndarray:
    """
    Deterministic unit tangent to a unit normal

    Uses the global axis least aligned with n (ties broken x < y < z).
    """
    n = np.asarray(n, dtype=float)
    axis = int(np.argmin(np.abs(n)))
    a = np.zeros(3)
    a[axis] = 1.0
    s = np.cross(n, a)
    return s / np.linalg.norm(s)


def rotation_matrix(rotvec: np.ndarray) -> np.ndarray:
    """Rotation matrices from rotation vectors (..., 3)"""
    rotvec = np.asarray(rotvec, dtype=float)
    flat = rotvec.reshape(-1, 3)
    mats = Rotation.from_rotvec(flat).as_matrix()
    return mats.reshape(rotvec.shape[:-1] + (3, 3))


def left_jacobian(rotvec: np.ndarray) -> np.ndarray:
    """
    Left Jacobian of the SO(3) exponential

    d exp(j(phi)) = j(J_l(phi) dphi) exp(j(phi)).
    """
    phi = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(phi, axis=-1)[..., None, None]
    K = skew(phi)
    K2 = K @ K
    small = angle < 1e-6
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 0.5 - angle ** 2 / 24.0, (1.0 - np.cos(safe)) / safe ** 2)
    b = np.where(small, 1.0 / 6.0 - angle ** 2 / 120.0, (safe - np.sin(safe)) / safe ** 3)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a * K + b * K2


def polygon_properties(vertices: np.ndarray, normal_hint: Optional[np.ndarray] = None,
                       planar_tol: float = 1e-9, project: bool = False) -> PolygonProperties:
    """
    Area, centroid and second moments of a (nearly) planar polygon in 3D

    Args:
        vertices: Ordered polygon vertices (k, 3)
        normal_hint: Direction the returned normal should agree with
        planar_tol: Allowed out-of-plane deviation relative to the polygon diameter
        project: Project onto the least-squares plane instead of rejecting

    Returns:
        PolygonProperties

    Raises:
        GeometryError: If the polygon is degenerate or not planar
    """
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise GeometryError("polygon needs at least three 3D vertices")

    mean = pts.mean(axis=0)
    rel = pts - mean
    _, _, vt = np.linalg.svd(rel)
    normal = vt[2]
    diameter = max(np.ptp(pts, axis=0).max(), np.finfo(float).tiny)
    deviation = np.abs(rel @ normal).max()
    if deviation > planar_tol * diameter and not project:
        raise GeometryError(
            f"polygon is not planar (deviation {deviation:.3e} for diameter {diameter:.3e})"
        )

    if normal_hint is not None and normal @ np.asarray(normal_hint, dtype=float) < 0:
        normal = -normal
    e_u = vt[0]
    e_v = np.cross(normal, e_u)

    u = rel @ e_u
    v = rel @ e_v
    u1, v1 = np.roll(u, -1), np.roll(v, -1)
    cross = u * v1 - u1 * v
    area = 0.5 * cross.sum()
    if abs(area) <= 1e-14 * diameter ** 2:
        raise GeometryError("polygon has zero area")

    cu = ((u + u1) * cross).sum() / (6.0 * area)
    cv = ((v + v1) * cross).sum() / (6.0 * area)
    Iuu = ((u * u + u * u1 + u1 * u1) * cross).sum() / 12.0
    Ivv = ((v * v + v * v1 + v1 * v1) * cross).sum() / 12.0
    Iuv = ((u * v1 + 2.0 * u * v + 2.0 * u1 * v1 + u1 * v) * cross).sum() / 24.0

    # Clockwise traversal flips every signed integral
    sign = 1.0 if area > 0 else -1.0
    area *= sign
    Iuu, Ivv, Iuv = sign * Iuu, sign * Ivv, sign * Iuv

    J = np.array([
        [Iuu - area * cu * cu, Iuv - area * cu * cv],
        [Iuv - area * cu * cv, Ivv - area * cv * cv],
    ])
    centroid = mean + cu * e_u + cv * e_v
    return PolygonProperties(
        area=float(area),
        centroid=centroid,
        normal=normal,
        basis=np.vstack([e_u, e_v]),
        second_moments=J,
    )


def hexahedron_corner_jacobians(corners: np.ndarray) -> np.ndarray:
    """Triple products of the three parametric edges at each of the 8 corners"""
    corners = np.asarray(corners, dtype=float)
    dets = np.empty(8)
    for k, (a, b, c) in _HEX_CORNER_EDGES.items():
        offs = HEX_CORNER_OFFSETS
        ea = (corners[a] - corners[k]) * (offs[a][0] - offs[k][0])
        eb = (corners[b] - corners[k]) * (offs[b][1] - offs[k][1])
        ec = (corners[c] - corners[k]) * (offs[c][2] - offs[k][2])
        dets[k] = np.dot(np.cross(ea, eb), ec)
    return dets


def hexahedron_mass_properties(corners: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Volume, centroid and second-moment tensor of a hexahedron

    The cell is split into 24 tetrahedra: each face is fanned into four
    triangles around its mean point and joined to the cell mean point.

    Args:
        corners: Hexahedron corners in VTK order (8, 3)

    Returns:
        (volume, centroid, C) with C = integral of (x - c)(x - c)^T dV

    Raises:
        GeometryError: If the cell volume is not positive
    """
    corners = np.asarray(corners, dtype=float)
    g = corners.mean(axis=0)
    rel = corners - g

    volume = 0.0
    first = np.zeros(3)
    second = np.zeros((3, 3))
    for face in HEX_FACES.values():
        quad = rel[list(face)]
        f = quad.mean(axis=0)
        for k in range(4):
            a, b = quad[k], quad[(k + 1) % 4]
            vol = np.dot(np.cross(a, b), f) / 6.0
            s = a + b + f
            volume += vol
            first += vol * s / 4.0
            second += vol / 20.0 * (np.outer(a, a) + np.outer(b, b) + np.outer(f, f) + np.outer(s, s))

    if volume <= 0:
        raise GeometryError(f"hexahedron has non-positive volume {volume:.3e}")

    c_rel = first / volume
    C = second - volume * np.outer(c_rel, c_rel)
    return float(volume), g + c_rel, C


def principal_inertia(C: np.ndarray, mass_density: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Principal moments and right-handed principal axes from a second-moment tensor

    Args:
        C: Integral of (x - c)(x - c)^T dV
        mass_density: Density used to scale the tensor

    Returns:
        (moments (3,), axes (3, 3) with the principal axes as columns, det +1)
    """
    inertia = mass_density * (np.trace(C) * np.eye(3) - C)
    moments, axes = np.linalg.eigh(inertia)
    if np.linalg.det(axes) < 0:
        axes[:, 2] = -axes[:, 2]
    return moments, axes


def main():
    """Test geometry utilities"""
    try:
        print("Testing Geometry Utilities")
        print("=" * 40)

        square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        props = polygon_properties(square)
        print(f"Unit square area: {props.area}, Is: {props.moment_about([1, 0, 0]):.6f}")

        cube = HEX_CORNER_OFFSETS.astype(float)
        volume, centroid, C = hexahedron_mass_properties(cube)
        print(f"Unit cube volume: {volume}, centroid: {centroid}")
        print(f"Principal moments: {principal_inertia(C, 1.0)[0]}")

        print("\n✓ Geometry utilities tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
