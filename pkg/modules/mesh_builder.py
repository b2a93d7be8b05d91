#!/usr/bin/env python3
"""
DEM Mesh Builder Module
Builds structured particle lattices (boxes and mapped shells) and all per-particle
and per-link geometric constants
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.geometry_utils import (
    HEX_CORNER_OFFSETS, HEX_FACES, GeometryError, hexahedron_corner_jacobians,
    hexahedron_mass_properties, polygon_properties, principal_inertia, select_tangent,
)
from utils.material_calculator import MaterialCalculationError, MaterialCalculator

logger = logging.getLogger(__name__)

BOX_FACE_LABELS = ('-x', '+x', '-y', '+y', '-z', '+z')

# Relative gap between face principal moments below which (s, t) keep the axis rule
PRINCIPAL_AXIS_TOL = 1e-9


class MeshError(Exception):
    """Mesh construction error"""
    pass


class MeshConfigurationError(MeshError):
    """Invalid mesh parameters"""
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Continuum constants shared by all links of a body"""
    E: float
    nu: float
    rho: float

    def __post_init__(self):
        try:
            MaterialCalculator.validate_material_parameters(self.E, self.nu, self.rho)
        except MaterialCalculationError as e:
            raise MeshConfigurationError(f"invalid material: {e}")

    @property
    def link_stiffness(self) -> float:
        """E / (1 + nu)"""
        return MaterialCalculator.shear_stiffness(self.E, self.nu)

    @property
    def lame_lambda(self) -> float:
        return MaterialCalculator.lame_lambda(self.E, self.nu)

    @property
    def free_volume_factor(self) -> float:
        return MaterialCalculator.free_volume_factor(self.nu)

    @property
    def p_wave_speed(self) -> float:
        return MaterialCalculator.p_wave_speed(self.E, self.nu, self.rho)

    @property
    def s_wave_speed(self) -> float:
        return MaterialCalculator.s_wave_speed(self.E, self.nu, self.rho)


@dataclass(frozen=True)
class FreeFace:
    """Stress-free face of a particle with its mirror-ghost distance"""
    label: str
    area: float
    centroid: np.ndarray
    normal: np.ndarray
    ghost_distance: float

    @property
    def pyramid_volume(self) -> float:
        return self.area * self.ghost_distance / 6.0


@dataclass(frozen=True)
class ParticleGeom:
    """Immutable geometry and inertia of one particle"""
    id: int
    X0: np.ndarray
    volume: float
    mass: float
    principal_inertia: np.ndarray
    principal_axes: np.ndarray   # columns e1, e2, e3
    d_coeffs: np.ndarray
    free_volume: float
    free_faces: Tuple[FreeFace, ...] = ()


@dataclass(frozen=True)
class Link:
    """Precomputed interface geometry between particles i and j"""
    i: int
    j: int
    S: float
    D0: float
    n0: np.ndarray
    s0: np.ndarray
    t0: np.ndarray
    lever_i: np.ndarray
    lever_j: np.ndarray
    Is: float
    It: float
    alpha_n: float
    alpha_s: float
    alpha_t: float


def flexion_coefficients(Is: float, It: float, S: float,
                         E: float, nu: float) -> Tuple[float, float, float]:
    """
    Flexion/torsion coefficients (alpha_n, alpha_s, alpha_t) of an interface

    Raises:
        MeshError: If the interface is degenerate
    """
    try:
        return MaterialCalculator.flexion_coefficients(Is, It, S, E, nu)
    except MaterialCalculationError as e:
        raise MeshError(str(e))


def _interface_triad(n0: np.ndarray, face) -> Tuple[np.ndarray, np.ndarray]:
    s0 = select_tangent(n0)
    values, directions = face.principal_directions()
    if abs(values[1] - values[0]) > PRINCIPAL_AXIS_TOL * max(abs(values[1]), 1e-300):
        best = directions[int(np.argmax(np.abs(directions @ s0)))]
        best = best - (best @ n0) * n0
        norm = np.linalg.norm(best)
        if norm > 0.5:
            best = best / norm
            s0 = best if best @ s0 >= 0 else -best
    t0 = np.cross(n0, s0)
    return s0, t0


def link_geometry(cell_a: ParticleGeom, cell_b: ParticleGeom, shared_face: np.ndarray,
                  material: MaterialParams, project: bool = False) -> Link:
    """
    Interface constants of the link between two particles

    Args:
        cell_a: Particle I
        cell_b: Particle J
        shared_face: Ordered vertices of the shared polygon (k, 3)
        material: Material of the body
        project: Project a slightly warped face onto its least-squares plane

    Returns:
        Link with n0 pointing from I to J

    Raises:
        MeshError: If the face is degenerate, non-planar or the centers coincide
    """
    delta = np.asarray(cell_b.X0, dtype=float) - np.asarray(cell_a.X0, dtype=float)
    D0 = float(np.linalg.norm(delta))
    if D0 <= 0.0:
        raise MeshError(f"particles {cell_a.id} and {cell_b.id} share a center")
    n0 = delta / D0

    try:
        face = polygon_properties(shared_face, normal_hint=n0, project=project)
    except GeometryError as e:
        raise MeshError(f"link ({cell_a.id}, {cell_b.id}): {e}")

    s0, t0 = _interface_triad(n0, face)
    Is = face.moment_about(s0)
    It = face.moment_about(t0)
    alpha_n, alpha_s, alpha_t = flexion_coefficients(Is, It, face.area, material.E, material.nu)

    return Link(
        i=cell_a.id, j=cell_b.id, S=face.area, D0=D0, n0=n0, s0=s0, t0=t0,
        lever_i=face.centroid - cell_a.X0, lever_j=face.centroid - cell_b.X0,
        Is=Is, It=It, alpha_n=alpha_n, alpha_s=alpha_s, alpha_t=alpha_t,
    )


class Mesh:
    """
    Immutable particle/link mesh stored as arrays

    Per-particle arrays are indexed by particle id, per-link arrays by link
    index. ``particles`` and ``links`` give dataclass views of the same data.
    """

    def __init__(self, material: MaterialParams, X0, volume, inertia, axes,
                 free_volume, free_faces: Sequence[Tuple[FreeFace, ...]],
                 link_i, link_j, S, D0, n0, s0, t0, lever_i, lever_j, Is, It, alpha,
                 cells: Optional[np.ndarray] = None, kind: str = 'custom',
                 grid_shape: Optional[Tuple[int, int, int]] = None,
                 grid_index: Optional[np.ndarray] = None):
        self.material = material
        self.kind = kind
        self.X0 = np.asarray(X0, dtype=float).reshape(-1, 3)
        self.volume = np.asarray(volume, dtype=float)
        self.mass = material.rho * self.volume
        self.inertia = np.asarray(inertia, dtype=float).reshape(-1, 3)
        self.axes = np.asarray(axes, dtype=float).reshape(-1, 3, 3)
        self.d = 0.5 * self.inertia.sum(axis=1, keepdims=True) - self.inertia
        self.free_volume = np.asarray(free_volume, dtype=float)
        self.free_faces = [tuple(faces) for faces in free_faces]
        self.corrected_volume = self.volume + material.free_volume_factor * self.free_volume

        self.link_i = np.asarray(link_i, dtype=np.int64)
        self.link_j = np.asarray(link_j, dtype=np.int64)
        self.S = np.asarray(S, dtype=float)
        self.D0 = np.asarray(D0, dtype=float)
        self.n0 = np.asarray(n0, dtype=float).reshape(-1, 3)
        self.s0 = np.asarray(s0, dtype=float).reshape(-1, 3)
        self.t0 = np.asarray(t0, dtype=float).reshape(-1, 3)
        self.lever_i = np.asarray(lever_i, dtype=float).reshape(-1, 3)
        self.lever_j = np.asarray(lever_j, dtype=float).reshape(-1, 3)
        self.Is = np.asarray(Is, dtype=float)
        self.It = np.asarray(It, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float).reshape(-1, 3)

        self.cells = None if cells is None else np.asarray(cells, dtype=float)
        self.grid_shape = grid_shape
        self.grid_index = None if grid_index is None else np.asarray(grid_index, dtype=np.int64)

        for arr in (self.X0, self.volume, self.mass, self.inertia, self.axes, self.d,
                    self.free_volume, self.corrected_volume, self.link_i, self.link_j,
                    self.S, self.D0, self.n0, self.s0, self.t0, self.lever_i,
                    self.lever_j, self.Is, self.It, self.alpha):
            arr.setflags(write=False)

        self._validate()
        self.adjacency = self._build_adjacency()

    def _validate(self) -> None:
        n = self.n_particles
        if len(self.free_faces) != n:
            raise MeshError("free face list does not match the particle count")
        if np.any(self.volume <= 0):
            raise MeshError("particle volumes must be positive")
        if self.n_links:
            if self.link_i.min() < 0 or max(self.link_i.max(), self.link_j.max()) >= n:
                raise MeshError("link refers to an unknown particle")
            if np.any(self.link_i == self.link_j):
                raise MeshError("link joins a particle to itself")
            pairs = np.sort(np.stack([self.link_i, self.link_j], axis=1), axis=1)
            if len(np.unique(pairs, axis=0)) != self.n_links:
                raise MeshError("duplicate link between the same particles")
        limit = MaterialCalculator.MIN_CORRECTED_VOLUME_FRACTION * self.volume
        bad = np.flatnonzero(self.corrected_volume <= limit)
        if bad.size:
            raise MeshConfigurationError(
                f"corrected volume of particle {int(bad[0])} is below "
                f"{MaterialCalculator.MIN_CORRECTED_VOLUME_FRACTION:g} of its volume "
                f"(nu={self.material.nu})"
            )

    def _build_adjacency(self) -> List[np.ndarray]:
        incident: List[List[int]] = [[] for _ in range(self.n_particles)]
        for k, (i, j) in enumerate(zip(self.link_i.tolist(), self.link_j.tolist())):
            incident[i].append(k)
            incident[j].append(k)
        return [np.asarray(ks, dtype=np.int64) for ks in incident]

    @classmethod
    def from_components(cls, particles: Sequence[ParticleGeom], links: Sequence[Link],
                        material: MaterialParams, **kwargs) -> 'Mesh':
        """Assemble a mesh from dataclass particles and links"""
        ordered = sorted(particles, key=lambda p: p.id)
        if [p.id for p in ordered] != list(range(len(ordered))):
            raise MeshError("particle ids must be 0..N-1")

        def stack(getter: Callable, shape: Tuple[int, ...], items: Sequence) -> np.ndarray:
            if not items:
                return np.zeros((0,) + shape)
            return np.array([getter(x) for x in items], dtype=float)

        return cls(
            material=material,
            X0=stack(lambda p: p.X0, (3,), ordered),
            volume=np.array([p.volume for p in ordered]),
            inertia=stack(lambda p: p.principal_inertia, (3,), ordered),
            axes=stack(lambda p: p.principal_axes, (3, 3), ordered),
            free_volume=np.array([p.free_volume for p in ordered]),
            free_faces=[p.free_faces for p in ordered],
            link_i=[lk.i for lk in links],
            link_j=[lk.j for lk in links],
            S=[lk.S for lk in links],
            D0=[lk.D0 for lk in links],
            n0=stack(lambda lk: lk.n0, (3,), links),
            s0=stack(lambda lk: lk.s0, (3,), links),
            t0=stack(lambda lk: lk.t0, (3,), links),
            lever_i=stack(lambda lk: lk.lever_i, (3,), links),
            lever_j=stack(lambda lk: lk.lever_j, (3,), links),
            Is=[lk.Is for lk in links],
            It=[lk.It for lk in links],
            alpha=stack(lambda lk: (lk.alpha_n, lk.alpha_s, lk.alpha_t), (3,), links),
            **kwargs,
        )

    @property
    def n_particles(self) -> int:
        return self.X0.shape[0]

    @property
    def n_links(self) -> int:
        return self.link_i.shape[0]

    @property
    def h_min(self) -> float:
        """Smallest center-to-center distance (cube root of the volume without links)"""
        if self.n_links:
            return float(self.D0.min())
        return float(np.cbrt(self.volume.min()))

    def particle(self, k: int) -> ParticleGeom:
        return ParticleGeom(
            id=int(k), X0=self.X0[k], volume=float(self.volume[k]), mass=float(self.mass[k]),
            principal_inertia=self.inertia[k], principal_axes=self.axes[k],
            d_coeffs=self.d[k], free_volume=float(self.free_volume[k]),
            free_faces=self.free_faces[k],
        )

    def link(self, k: int) -> Link:
        return Link(
            i=int(self.link_i[k]), j=int(self.link_j[k]), S=float(self.S[k]),
            D0=float(self.D0[k]), n0=self.n0[k], s0=self.s0[k], t0=self.t0[k],
            lever_i=self.lever_i[k], lever_j=self.lever_j[k],
            Is=float(self.Is[k]), It=float(self.It[k]),
            alpha_n=float(self.alpha[k, 0]), alpha_s=float(self.alpha[k, 1]),
            alpha_t=float(self.alpha[k, 2]),
        )

    @cached_property
    def particles(self) -> List[ParticleGeom]:
        return [self.particle(k) for k in range(self.n_particles)]

    @cached_property
    def links(self) -> List[Link]:
        return [self.link(k) for k in range(self.n_links)]

    def interface_centroid(self, k: int) -> np.ndarray:
        return self.X0[self.link_i[k]] + self.lever_i[k]

    def summary(self) -> Dict[str, float]:
        return {
            'kind': self.kind,
            'particles': self.n_particles,
            'links': self.n_links,
            'total_volume': float(self.volume.sum()),
            'total_mass': float(self.mass.sum()),
            'h_min': self.h_min,
            'free_faces': int(sum(len(f) for f in self.free_faces)),
        }


def _check_counts(counts: Sequence[int], name: str = 'counts') -> Tuple[int, int, int]:
    if len(counts) != 3:
        raise MeshConfigurationError(f"{name} must have three entries")
    out = []
    for c in counts:
        if int(c) != c or int(c) < 1:
            raise MeshConfigurationError(f"{name} must be positive integers, got {list(counts)}")
        out.append(int(c))
    return tuple(out)


def _normalise_free_boundaries(free_boundaries: Optional[Iterable[str]],
                               labels: Sequence[str]) -> set:
    if free_boundaries is None:
        return set(labels)
    chosen = set(free_boundaries)
    unknown = chosen - set(labels)
    if unknown:
        raise MeshConfigurationError(
            f"unknown boundary labels {sorted(unknown)}; expected a subset of {list(labels)}"
        )
    return chosen


def build_box_lattice(extent: Sequence[float], counts: Sequence[int], material: MaterialParams,
                      origin: Sequence[float] = (0.0, 0.0, 0.0),
                      free_boundaries: Optional[Iterable[str]] = None) -> Mesh:
    """
    Build a Cartesian lattice of rectangular-box particles

    Args:
        extent: Box lengths (Lx, Ly, Lz)
        counts: Cells per axis (nx, ny, nz)
        material: Material parameters
        origin: Lower corner of the box
        free_boundaries: Boundary labels ('-x', '+x', ...) treated as stress-free;
            the others get no ghost volume (plane-strain mirror). Default: all.

    Returns:
        Mesh with particle id = ix + nx*(iy + ny*iz)

    Raises:
        MeshConfigurationError: If counts or extents are invalid
    """
    nx, ny, nz = _check_counts(counts)
    ext = np.asarray(extent, dtype=float)
    if ext.shape != (3,) or not np.all(np.isfinite(ext)) or np.any(ext <= 0):
        raise MeshConfigurationError(f"extent must be three positive lengths, got {list(extent)}")
    free = _normalise_free_boundaries(free_boundaries, BOX_FACE_LABELS)
    shape = np.array([nx, ny, nz])
    h = ext / shape
    origin = np.asarray(origin, dtype=float)

    iz, iy, ix = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing='ij')
    grid_index = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
    n = grid_index.shape[0]
    X0 = origin + (grid_index + 0.5) * h

    cell_volume = float(np.prod(h))
    volume = np.full(n, cell_volume)
    mass = material.rho * cell_volume
    inertia_one = mass / 12.0 * np.array([h[1] ** 2 + h[2] ** 2,
                                          h[0] ** 2 + h[2] ** 2,
                                          h[0] ** 2 + h[1] ** 2])
    inertia = np.tile(inertia_one, (n, 1))
    axes = np.tile(np.eye(3), (n, 1, 1))
    cells = X0[:, None, :] + (HEX_CORNER_OFFSETS[None, :, :] - 0.5) * h

    # Free faces on the chosen boundaries
    face_area = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
    free_faces: List[List[FreeFace]] = [[] for _ in range(n)]
    free_volume = np.zeros(n)
    for axis in range(3):
        for side, label in ((0, BOX_FACE_LABELS[2 * axis]), (1, BOX_FACE_LABELS[2 * axis + 1])):
            if label not in free:
                continue
            on_face = np.flatnonzero(grid_index[:, axis] == (0 if side == 0 else shape[axis] - 1))
            normal = np.zeros(3)
            normal[axis] = 1.0 if side else -1.0
            for k in on_face.tolist():
                face = FreeFace(label=label, area=float(face_area[axis]),
                                centroid=X0[k] + 0.5 * h[axis] * normal, normal=normal.copy(),
                                ghost_distance=float(h[axis]))
                free_faces[k].append(face)
                free_volume[k] += face.pyramid_volume

    # Links across shared faces, grouped by axis
    link_parts = {key: [] for key in ('i', 'j', 'S', 'D0', 'n0', 's0', 't0',
                                      'lever_i', 'lever_j', 'Is', 'It', 'alpha')}
    ids = np.arange(n).reshape(nz, ny, nx)
    for axis in range(3):
        if shape[axis] < 2:
            continue
        np_axis = 2 - axis
        lo = np.take(ids, np.arange(shape[axis] - 1), axis=np_axis).ravel()
        hi = np.take(ids, np.arange(1, shape[axis]), axis=np_axis).ravel()
        order = np.argsort(lo, kind='stable')
        lo, hi = lo[order], hi[order]
        count = lo.size

        n0 = np.zeros(3)
        n0[axis] = 1.0
        s0 = select_tangent(n0)
        t0 = np.cross(n0, s0)
        area = float(face_area[axis])
        Is = area * float(np.dot(np.abs(s0), h) ** 2) / 12.0
        It = area * float(np.dot(np.abs(t0), h) ** 2) / 12.0
        alphas = flexion_coefficients(Is, It, area, material.E, material.nu)
        lever = 0.5 * h[axis] * n0

        link_parts['i'].append(lo)
        link_parts['j'].append(hi)
        link_parts['S'].append(np.full(count, area))
        link_parts['D0'].append(np.full(count, h[axis]))
        link_parts['n0'].append(np.tile(n0, (count, 1)))
        link_parts['s0'].append(np.tile(s0, (count, 1)))
        link_parts['t0'].append(np.tile(t0, (count, 1)))
        link_parts['lever_i'].append(np.tile(lever, (count, 1)))
        link_parts['lever_j'].append(np.tile(-lever, (count, 1)))
        link_parts['Is'].append(np.full(count, Is))
        link_parts['It'].append(np.full(count, It))
        link_parts['alpha'].append(np.tile(alphas, (count, 1)))

    def cat(key: str, shape: Tuple[int, ...] = ()) -> np.ndarray:
        parts = link_parts[key]
        return np.concatenate(parts) if parts else np.zeros((0,) + shape)

    mesh = Mesh(
        material=material, X0=X0, volume=volume, inertia=inertia, axes=axes,
        free_volume=free_volume, free_faces=free_faces,
        link_i=cat('i'), link_j=cat('j'), S=cat('S'), D0=cat('D0'),
        n0=cat('n0', (3,)), s0=cat('s0', (3,)), t0=cat('t0', (3,)),
        lever_i=cat('lever_i', (3,)), lever_j=cat('lever_j', (3,)),
        Is=cat('Is'), It=cat('It'), alpha=cat('alpha', (3,)),
        cells=cells, kind='box', grid_shape=(nx, ny, nz), grid_index=grid_index,
    )
    logger.info("Built box lattice %dx%dx%d: %d particles, %d links",
                nx, ny, nz, mesh.n_particles, mesh.n_links)
    return mesh


def _cylinder_mapping(params: Dict) -> Tuple[Callable, Tuple, Tuple[bool, bool, bool], Tuple[str, str, str]]:
    radius = float(params.get('radius', 0.0))
    height = float(params.get('height', 0.0))
    thickness = float(params.get('thickness', 0.0))
    if radius <= 0 or height <= 0 or thickness <= 0:
        raise MeshConfigurationError("cylinder needs positive radius, height and thickness")
    if thickness >= 2.0 * radius:
        raise MeshConfigurationError("cylinder thickness must be smaller than its diameter")

    def mapping(theta, z, r):
        return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)

    ranges = ((0.0, 2.0 * np.pi), (-0.5 * height, 0.5 * height),
              (radius - 0.5 * thickness, radius + 0.5 * thickness))
    return mapping, ranges, (True, False, False), ('theta', 'z', 'r')


def _hemisphere_mapping(params: Dict) -> Tuple[Callable, Tuple, Tuple[bool, bool, bool], Tuple[str, str, str]]:
    radius = float(params.get('radius', 0.0))
    thickness = float(params.get('thickness', 0.0))
    cutout = float(params.get('cutout_deg', 18.0))
    if radius <= 0 or thickness <= 0 or thickness >= 2.0 * radius:
        raise MeshConfigurationError("hemisphere needs positive radius and a thickness below its diameter")
    if not 0.0 < cutout < 90.0:
        raise MeshConfigurationError(f"hemisphere cutout angle must lie in (0, 90) degrees, got {cutout}")

    def mapping(lat, lon, r):
        c = np.cos(lat)
        return np.stack([r * c * np.cos(lon), r * c * np.sin(lon), r * np.sin(lat)], axis=-1)

    ranges = ((0.0, np.deg2rad(90.0 - cutout)), (0.0, 2.0 * np.pi),
              (radius - 0.5 * thickness, radius + 0.5 * thickness))
    return mapping, ranges, (False, True, False), ('lat', 'lon', 'r')


SHELL_SURFACES = {
    'cylinder': _cylinder_mapping,
    'hemisphere': _hemisphere_mapping,
}


def build_mapped_shell(surface: str, params: Dict, counts: Sequence[int],
                       material: MaterialParams,
                       free_boundaries: Optional[Iterable[str]] = None) -> Mesh:
    """
    Build a hexahedral shell lattice from a parametric surface mapping

    Args:
        surface: 'cylinder' (radius, height, thickness) or 'hemisphere'
            (radius, thickness, cutout_deg)
        params: Surface parameters
        counts: Cells along the two surface directions and the thickness
        material: Material parameters
        free_boundaries: Boundary labels treated as stress-free (default: all)

    Returns:
        Mesh with periodic closure in the angular direction

    Raises:
        MeshConfigurationError: If parameters are invalid
        MeshError: If a cell is degenerate
    """
    if surface not in SHELL_SURFACES:
        raise MeshConfigurationError(f"unknown shell surface '{surface}', expected one of {list(SHELL_SURFACES)}")
    shape = _check_counts(counts)
    mapping, ranges, periodic, axis_names = SHELL_SURFACES[surface](params)
    for axis in range(3):
        if periodic[axis] and shape[axis] < 3:
            raise MeshConfigurationError(f"periodic direction '{axis_names[axis]}' needs at least 3 cells")

    labels = tuple(f"{sign}{name}" for name in axis_names for sign in '-+')
    boundary_labels = tuple(lb for k, lb in enumerate(labels) if not periodic[k // 2])
    free = _normalise_free_boundaries(free_boundaries, boundary_labels)

    grids = [np.linspace(lo, hi, m + 1) for (lo, hi), m in zip(ranges, shape)]
    g1, g2, g3 = np.meshgrid(*grids, indexing='ij')
    nodes = mapping(g1, g2, g3)

    def cell_corners(a: int, b: int, c: int) -> np.ndarray:
        idx = np.array([a, b, c]) + HEX_CORNER_OFFSETS
        for axis in range(3):
            if periodic[axis]:
                idx[:, axis] %= shape[axis]
        return nodes[idx[:, 0], idx[:, 1], idx[:, 2]]

    # Orient the corner ordering so the parametric Jacobian is positive
    flip = hexahedron_corner_jacobians(cell_corners(0, 0, 0)).mean() < 0
    if flip:
        nodes = nodes[:, :, ::-1]
        labels_swap = {f"-{axis_names[2]}": f"+{axis_names[2]}", f"+{axis_names[2]}": f"-{axis_names[2]}"}
    else:
        labels_swap = {}

    n1, n2, n3 = shape
    n = n1 * n2 * n3
    cells = np.empty((n, 8, 3))
    grid_index = np.empty((n, 3), dtype=np.int64)
    particles: List[ParticleGeom] = []

    def pid(a: int, b: int, c: int) -> int:
        return a + n1 * (b + n2 * c)

    for c in range(n3):
        for b in range(n2):
            for a in range(n1):
                k = pid(a, b, c)
                corners = cell_corners(a, b, c)
                if np.any(hexahedron_corner_jacobians(corners) <= 0):
                    raise MeshError(f"cell {k} at ({a}, {b}, {c}) has a non-positive Jacobian")
                try:
                    volume, centroid, C = hexahedron_mass_properties(corners)
                except GeometryError as e:
                    raise MeshError(f"cell {k}: {e}")
                moments, axes = principal_inertia(C, material.rho)
                cells[k] = corners
                grid_index[k] = (a, b, c)

                faces = []
                for axis in range(3):
                    if periodic[axis]:
                        continue
                    for side in (0, 1):
                        if (a, b, c)[axis] != (0 if side == 0 else shape[axis] - 1):
                            continue
                        label = f"{'-+'[side]}{axis_names[axis]}"
                        label = labels_swap.get(label, label) if axis == 2 else label
                        if label not in free:
                            continue
                        pts = corners[list(HEX_FACES[(axis, side)])]
                        try:
                            poly = polygon_properties(pts, normal_hint=pts.mean(axis=0) - centroid,
                                                      project=True)
                        except GeometryError as e:
                            raise MeshError(f"cell {k} face {label}: {e}")
                        ghost = 2.0 * abs(float((poly.centroid - centroid) @ poly.normal))
                        faces.append(FreeFace(label=label, area=poly.area, centroid=poly.centroid,
                                              normal=poly.normal, ghost_distance=ghost))

                d = 0.5 * moments.sum() - moments
                if np.any(d <= 0):
                    raise MeshError(f"cell {k} has non-positive inertia coefficients {d}")
                particles.append(ParticleGeom(
                    id=k, X0=centroid, volume=volume, mass=material.rho * volume,
                    principal_inertia=moments, principal_axes=axes, d_coeffs=d,
                    free_volume=float(sum(f.pyramid_volume for f in faces)),
                    free_faces=tuple(faces),
                ))

    links: List[Link] = []
    for c in range(n3):
        for b in range(n2):
            for a in range(n1):
                k = pid(a, b, c)
                for axis in range(3):
                    nxt = [a, b, c]
                    nxt[axis] += 1
                    if nxt[axis] == shape[axis]:
                        if not periodic[axis]:
                            continue
                        nxt[axis] = 0
                    shared = cells[k][list(HEX_FACES[(axis, 1)])]
                    links.append(link_geometry(particles[k], particles[pid(*nxt)], shared,
                                               material, project=True))

    mesh = Mesh.from_components(particles, links, material, cells=cells, kind=surface,
                                grid_shape=tuple(shape), grid_index=grid_index)
    logger.info("Built %s shell %s: %d particles, %d links",
                surface, 'x'.join(map(str, shape)), mesh.n_particles, mesh.n_links)
    return mesh


def main():
    """Test mesh builder"""
    try:
        print("Testing Mesh Builder")
        print("=" * 40)

        material = MaterialParams(E=1.0, nu=0.25, rho=1.0)
        mesh = build_box_lattice((2, 1, 1), (2, 1, 1), material)
        print(f"Box 2x1x1: {mesh.summary()}")
        print(f"Free volumes: {mesh.free_volume}")

        ring = build_mapped_shell('cylinder', {'radius': 1.0, 'height': 0.2, 'thickness': 0.05},
                                  (8, 1, 1), material)
        print(f"Cylinder ring: {ring.summary()}")

        print("\n✓ Mesh builder tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
