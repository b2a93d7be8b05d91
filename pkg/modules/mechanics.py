#!/usr/bin/env python3
"""
DEM Mechanics Module
Interface displacements, volumetric strains, link forces/torques, external loads
and potential energies
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Centers closer than this fraction of D0 are treated as coincident
SINGULAR_DISTANCE_FRACTION = 1e-12

PROFILE_KINDS = ('ricker', 'constant', 'ramp')


class MechanicsError(Exception):
    """Mechanics evaluation error"""
    pass


class SingularConfigurationError(MechanicsError):
    """Two linked particle centers coincide"""
    pass


def ricker(t, f0: float, t0: float, A: float = 1.0):
    """
    Ricker wavelet A (1 - 2 pi^2 f0^2 (t - t0)^2) exp(-pi^2 f0^2 (t - t0)^2)

    Args:
        t: Time (scalar or array)
        f0: Peak frequency (Hz)
        t0: Time of the peak (s)
        A: Peak amplitude

    Returns:
        Wavelet value(s)
    """
    if f0 <= 0:
        raise MechanicsError(f"Ricker peak frequency must be positive, got {f0}")
    arg = (math.pi * f0 * (np.asarray(t, dtype=float) - t0)) ** 2
    out = A * (1.0 - 2.0 * arg) * np.exp(-arg)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time function multiplying a load"""
    kind: str = 'constant'
    amplitude: float = 1.0
    f0: float = 0.0
    t0: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise MechanicsError(f"unknown load profile '{self.kind}', expected one of {list(PROFILE_KINDS)}")
        if self.kind == 'ricker' and self.f0 <= 0:
            raise MechanicsError("ricker profile needs f0 > 0")
        if self.kind == 'ramp' and self.duration <= 0:
            raise MechanicsError("ramp profile needs duration > 0")

    @property
    def time_dependent(self) -> bool:
        return self.kind != 'constant'

    def __call__(self, t: float) -> float:
        if self.kind == 'ricker':
            return ricker(t, self.f0, self.t0, self.amplitude)
        if self.kind == 'ramp':
            return self.amplitude * min(max(t / self.duration, 0.0), 1.0)
        return self.amplitude


@dataclass(frozen=True)
class PointForce:
    particle: int
    direction: Tuple[float, float, float]
    profile: TimeProfile = TimeProfile()


@dataclass(frozen=True)
class EndMoment:
    """World-frame moment magnitude * profile(t) about a fixed axis"""
    particle: int
    axis: Tuple[float, float, float]
    magnitude: float
    profile: TimeProfile = TimeProfile()


@dataclass
class LoadSet:
    """External loads, clamped particles and momentum damping"""
    point_forces: List[PointForce] = field(default_factory=list)
    end_moments: List[EndMoment] = field(default_factory=list)
    fixed: FrozenSet[int] = frozenset()
    damping: float = 0.0

    def __post_init__(self):
        self.fixed = frozenset(int(k) for k in self.fixed)
        if self.damping < 0:
            raise MechanicsError("damping must be non-negative")

    @property
    def time_dependent(self) -> bool:
        return any(f.profile.time_dependent for f in self.point_forces) or \
            any(m.profile.time_dependent for m in self.end_moments)

    @property
    def has_external(self) -> bool:
        return bool(self.point_forces or self.end_moments)

    def fixed_mask(self, n_particles: int) -> np.ndarray:
        mask = np.zeros(n_particles, dtype=bool)
        if self.fixed:
            idx = np.fromiter(self.fixed, dtype=np.int64)
            if idx.min() < 0 or idx.max() >= n_particles:
                raise MechanicsError("fixed particle id out of range")
            mask[idx] = True
        return mask

    def external(self, n_particles: int, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """External (force, moment) arrays at time t"""
        F = np.zeros((n_particles, 3))
        M = np.zeros((n_particles, 3))
        for load in self.point_forces:
            F[load.particle] += np.asarray(load.direction, dtype=float) * load.profile(t)
        for load in self.end_moments:
            axis = np.asarray(load.axis, dtype=float)
            M[load.particle] += axis / np.linalg.norm(axis) * load.magnitude * load.profile(t)
        return F, M


@dataclass(frozen=True)
class LinkKinematics:
    """Interface kinematics of one or many links (leading axis = link)"""
    du: np.ndarray
    D: np.ndarray
    n: np.ndarray
    eps_v_link: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return _dot(self.du, self.n)


@dataclass(frozen=True)
class PotentialEnergy:
    U_t: float
    U_d: float
    U_f: float

    @property
    def total(self) -> float:
        return self.U_t + self.U_d + self.U_f


# Elementwise helpers with a fixed summation order per row, so results do
# not depend on how links are chunked across workers.
def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _matvec(Q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return Q[..., :, 0] * v[..., None, 0] + Q[..., :, 1] * v[..., None, 1] + Q[..., :, 2] * v[..., None, 2]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def _raw_kinematics(X_i, Q_i, X_j, Q_j, lever_i, lever_j, D0, link_ids=None):
    delta = X_j - X_i
    D = np.sqrt(np.asarray(_dot(delta, delta)))
    small = D <= SINGULAR_DISTANCE_FRACTION * D0
    if np.any(small):
        k = int(np.flatnonzero(np.atleast_1d(small))[0])
        label = k if link_ids is None else int(link_ids[k])
        raise SingularConfigurationError(f"link {label}: particle centers coincide")
    n = delta / D[..., None]
    R_i = _matvec(Q_i, lever_i)
    R_j = _matvec(Q_j, lever_j)
    du = delta + R_j - R_i
    return du, D, n, R_i, R_j


def interface_displacement(X_i: np.ndarray, Q_i: np.ndarray, X_j: np.ndarray, Q_j: np.ndarray,
                           link, eps_v_link: float = 0.0) -> LinkKinematics:
    """
    Interface displacement of a single link

    Args:
        X_i, Q_i: Position and rotation of particle I
        X_j, Q_j: Position and rotation of particle J
        link: Link (mesh_builder.Link)
        eps_v_link: Interpolated volumetric strain to attach

    Returns:
        LinkKinematics with du = X_J - X_I + Q_J lever_j - Q_I lever_i

    Raises:
        SingularConfigurationError: If the centers coincide
    """
    du, D, n, _, _ = _raw_kinematics(
        np.asarray(X_i, float), np.asarray(Q_i, float), np.asarray(X_j, float),
        np.asarray(Q_j, float), np.asarray(link.lever_i, float),
        np.asarray(link.lever_j, float), float(link.D0))
    return LinkKinematics(du=du, D=np.asarray(D), n=n, eps_v_link=np.asarray(float(eps_v_link)))


def link_force(link, kin: LinkKinematics, material) -> np.ndarray:
    """Force exerted on particle I by particle J (the J side receives the opposite)"""
    k = link.S * material.link_stiffness / link.D0
    lam_eps_s = material.lame_lambda * float(kin.eps_v_link) * link.S
    g = float(kin.gap)
    return k * kin.du + lam_eps_s * (kin.n + kin.du / kin.D - g * kin.n / kin.D)


def link_torques(link, Q_i: np.ndarray, Q_j: np.ndarray, kin: LinkKinematics,
                 material) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Link torques on both particles

    Returns:
        (Mt_i, Mf_i, Mt_j, Mf_j): lever torques and flexion-torsion torques
    """
    k = link.S * material.link_stiffness / link.D0
    lam_eps_s = material.lame_lambda * float(kin.eps_v_link) * link.S
    R_i = np.asarray(Q_i) @ link.lever_i
    R_j = np.asarray(Q_j) @ link.lever_j
    Mt_i = k * np.cross(R_i, kin.du) + lam_eps_s * np.cross(R_i, kin.n)
    Mt_j = -(k * np.cross(R_j, kin.du) + lam_eps_s * np.cross(R_j, kin.n))
    Mf_i = np.zeros(3)
    for alpha, c0 in ((link.alpha_n, link.n0), (link.alpha_s, link.s0), (link.alpha_t, link.t0)):
        Mf_i += alpha * np.cross(np.asarray(Q_i) @ c0, np.asarray(Q_j) @ c0)
    Mf_i *= link.S / link.D0
    return Mt_i, Mf_i, Mt_j, -Mf_i


class ForceAssembler:
    """
    Evaluates per-particle forces and torques of a mesh

    Links are processed in fixed-size chunks, optionally on a thread pool;
    accumulation into particles always runs in link order so results are
    independent of the worker count.
    """

    def __init__(self, mesh, threads: int = 1, chunk_size: int = 8192):
        if threads < 1:
            raise MechanicsError("threads must be >= 1")
        self.mesh = mesh
        self.threads = int(threads)
        self.chunk_size = int(chunk_size)
        material = mesh.material
        self.k = mesh.S * material.link_stiffness / mesh.D0
        self.lam = material.lame_lambda
        self.strain_weight_i = 0.5 * mesh.S / mesh.corrected_volume[mesh.link_i]
        self.strain_weight_j = 0.5 * mesh.S / mesh.corrected_volume[mesh.link_j]
        self.flexion = mesh.alpha * (mesh.S / mesh.D0)[:, None]
        bounds = list(range(0, mesh.n_links, self.chunk_size)) + [mesh.n_links]
        self.chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        self._pool: Optional[ThreadPoolExecutor] = None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _map(self, fn, chunks: Sequence[slice]) -> list:
        if self.threads == 1 or len(chunks) < 2:
            return [fn(c) for c in chunks]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        return list(self._pool.map(fn, chunks))

    def _chunk_kinematics(self, states, sl: slice):
        m = self.mesh
        i, j = m.link_i[sl], m.link_j[sl]
        return _raw_kinematics(states.X[i], states.Q[i], states.X[j], states.Q[j],
                               m.lever_i[sl], m.lever_j[sl], m.D0[sl],
                               link_ids=np.arange(sl.start, sl.stop))

    def kinematics(self, states):
        """
        Phase one: link kinematics and particle volumetric strains

        Returns:
            (LinkKinematics for all links, eps per particle, R_i, R_j)
        """
        m = self.mesh
        if m.n_links == 0:
            empty3 = np.zeros((0, 3))
            kin = LinkKinematics(du=empty3, D=np.zeros(0), n=empty3, eps_v_link=np.zeros(0))
            return kin, np.zeros(m.n_particles), empty3, empty3

        parts = self._map(lambda sl: self._chunk_kinematics(states, sl), self.chunks)
        du, D, n, R_i, R_j = (np.concatenate([p[k] for p in parts]) for k in range(5))
        gap = _dot(du, n)
        eps = np.zeros(m.n_particles)
        np.add.at(eps, m.link_i, self.strain_weight_i * gap)
        np.add.at(eps, m.link_j, self.strain_weight_j * gap)
        eps_link = 0.5 * (eps[m.link_i] + eps[m.link_j])
        return LinkKinematics(du=du, D=D, n=n, eps_v_link=eps_link), eps, R_i, R_j

    def _chunk_loads(self, states, kin: LinkKinematics, R_i, R_j, sl: slice):
        m = self.mesh
        du, D, n, eps = kin.du[sl], kin.D[sl], kin.n[sl], kin.eps_v_link[sl]
        gap = _dot(du, n)
        k = self.k[sl][:, None]
        lam_eps_s = (self.lam * eps * m.S[sl])[:, None]
        F = k * du + lam_eps_s * (n + (du - gap[:, None] * n) / D[:, None])

        ri, rj = R_i[sl], R_j[sl]
        M_i = k * _cross(ri, du) + lam_eps_s * _cross(ri, n)
        M_j = -(k * _cross(rj, du) + lam_eps_s * _cross(rj, n))

        Qi, Qj = states.Q[m.link_i[sl]], states.Q[m.link_j[sl]]
        flex = self.flexion[sl]
        Mf = np.zeros_like(du)
        for col, c0 in enumerate((m.n0[sl], m.s0[sl], m.t0[sl])):
            Mf += flex[:, col:col + 1] * _cross(_matvec(Qi, c0), _matvec(Qj, c0))
        return F, M_i + Mf, M_j - Mf

    def internal(self, states) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Internal forces and torques

        Returns:
            (F (N, 3), M (N, 3), eps (N,))
        """
        m = self.mesh
        kin, eps, R_i, R_j = self.kinematics(states)
        F = np.zeros((m.n_particles, 3))
        M = np.zeros((m.n_particles, 3))
        if m.n_links == 0:
            return F, M, eps

        parts = self._map(lambda sl: self._chunk_loads(states, kin, R_i, R_j, sl), self.chunks)
        F_link, M_i, M_j = (np.concatenate([p[k] for p in parts]) for k in range(3))
        np.add.at(F, m.link_i, F_link)
        np.add.at(F, m.link_j, -F_link)
        np.add.at(M, m.link_i, M_i)
        np.add.at(M, m.link_j, M_j)
        return F, M, eps

    def assemble(self, states, loads: Optional[LoadSet] = None,
                 t: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """Total per-particle (force, torque) at time t with fixed particles zeroed"""
        F, M, _ = self.internal(states)
        if loads is not None:
            if loads.has_external:
                F_ext, M_ext = loads.external(self.mesh.n_particles, t)
                F += F_ext
                M += M_ext
            mask = loads.fixed_mask(self.mesh.n_particles)
            F[mask] = 0.0
            M[mask] = 0.0
        return F, M

    def potential_energy(self, states) -> PotentialEnergy:
        m = self.mesh
        kin, eps, _, _ = self.kinematics(states)
        U_t = 0.5 * float(np.sum(self.k * _dot(kin.du, kin.du)))
        U_d = 0.5 * self.lam * float(np.sum(m.corrected_volume * eps ** 2))
        U_f = 0.0
        if m.n_links:
            Qi, Qj = states.Q[m.link_i], states.Q[m.link_j]
            for col, c0 in enumerate((m.n0, m.s0, m.t0)):
                a, b = _matvec(Qi, c0), _matvec(Qj, c0)
                # 1 - a.b computed as |a - b|^2 / 2 keeps precision near rest
                diff = a - b
                U_f += float(np.sum(self.flexion[:, col] * 0.5 * _dot(diff, diff)))
        return PotentialEnergy(U_t=U_t, U_d=U_d, U_f=U_f)


def volumetric_strain(mesh, states) -> np.ndarray:
    """Per-particle volumetric strain with the free-surface correction"""
    _, eps, _, _ = ForceAssembler(mesh).kinematics(states)
    return eps


def assemble(mesh, states, loads: Optional[LoadSet] = None, t: float = 0.0,
             threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Per-particle (force, torque) sums including external loads"""
    with ForceAssembler(mesh, threads=threads) as assembler:
        return assembler.assemble(states, loads, t)


def potential_energy(mesh, states) -> PotentialEnergy:
    """(U_t, U_d, U_f) relative to the rest configuration"""
    return ForceAssembler(mesh).potential_energy(states)


def main():
    """Test mechanics"""
    try:
        from modules.mesh_builder import MaterialParams, build_box_lattice
        from modules.particle_state import init_rest

        print("Testing Mechanics")
        print("=" * 40)
        mesh = build_box_lattice((2, 1, 1), (2, 1, 1), MaterialParams(E=1.0, nu=0.25, rho=1.0))
        states = init_rest(mesh)
        states.X[1, 0] += 0.01
        F, M = assemble(mesh, states)
        print(f"Forces:\n{F}\nEnergy: {potential_energy(mesh, states)}")
        print("\n✓ Mechanics tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
