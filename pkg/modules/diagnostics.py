#!/usr/bin/env python3
"""
DEM Diagnostics Module
Conserved quantities, probes, wave arrivals and convergence orders
"""

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.spatial.transform import Rotation

from modules.mechanics import ForceAssembler
from modules.particle_state import StateArray, body_angular_momentum, body_rotation

logger = logging.getLogger(__name__)


class DiagnosticsError(Exception):
    """Diagnostics error"""
    pass


class MeasurementError(DiagnosticsError):
    """A requested measurement is not present in the data"""
    pass


class DiagnosticsInputError(DiagnosticsError):
    """Invalid input to a diagnostic"""
    pass


@dataclass(frozen=True)
class EnergyReport:
    t: float
    kinetic_trans: float
    kinetic_rot: float
    U_t: float
    U_d: float
    U_f: float

    @property
    def kinetic(self) -> float:
        return self.kinetic_trans + self.kinetic_rot

    @property
    def potential(self) -> float:
        return self.U_t + self.U_d + self.U_f

    @property
    def total(self) -> float:
        return self.kinetic + self.potential

    @staticmethod
    def columns() -> List[str]:
        return [f.name for f in fields(EnergyReport)] + ['total']

    def as_row(self) -> List[float]:
        return [getattr(self, f.name) for f in fields(self)] + [self.total]


@dataclass
class ProbeRecord:
    """Time series of displacement and rotation of one particle"""
    particle: int
    times: List[float] = field(default_factory=list)
    displacement: List[np.ndarray] = field(default_factory=list)
    rotation: List[np.ndarray] = field(default_factory=list)

    def append(self, t: float, xi: np.ndarray, theta: np.ndarray) -> None:
        if self.times and t < self.times[-1]:
            raise DiagnosticsInputError(f"probe {self.particle}: time {t} precedes {self.times[-1]}")
        self.times.append(float(t))
        self.displacement.append(np.asarray(xi, dtype=float).copy())
        self.rotation.append(np.asarray(theta, dtype=float).copy())

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = len(self.times)
        return (np.asarray(self.times),
                np.asarray(self.displacement).reshape(n, 3),
                np.asarray(self.rotation).reshape(n, 3))

    @staticmethod
    def columns() -> List[str]:
        return ['t', 'xi_x', 'xi_y', 'xi_z', 'theta_x', 'theta_y', 'theta_z']

    def rows(self) -> np.ndarray:
        t, xi, theta = self.arrays()
        return np.column_stack([t, xi, theta])


@dataclass(frozen=True)
class DriftReport:
    """Energy band and secular trend of a run"""
    relative_band: float
    slope: float
    slope_stderr: float
    max_potential: float


def rotation_vector(Q: np.ndarray) -> np.ndarray:
    """Axis-angle vector(s) of rotation matrices (3, 3) or (N, 3, 3)"""
    Q = np.asarray(Q, dtype=float)
    single = Q.ndim == 2
    vec = Rotation.from_matrix(Q.reshape(-1, 3, 3)).as_rotvec()
    return vec[0] if single else vec


def _centered_body_momentum(mesh, states: StateArray, next_states: Optional[StateArray]):
    ell_prev = body_angular_momentum(states.Z_half, states.d)
    if next_states is None:
        return ell_prev
    Qb = body_rotation(mesh, states.Q)
    Qb_next = body_rotation(mesh, next_states.Q)
    ell_next = body_angular_momentum(next_states.Z_half, next_states.d)
    # n + 1/2 momentum expressed in the frame at step n
    W = np.swapaxes(Qb, 1, 2) @ Qb_next
    return 0.5 * (ell_prev + np.einsum('nij,nj->ni', W, ell_next))


def total_energy(mesh, states: StateArray, next_states: Optional[StateArray] = None,
                 assembler: Optional[ForceAssembler] = None) -> EnergyReport:
    """
    Energy at step n

    Momenta are centred on step n by averaging the half steps when the following
    state is given; otherwise the stored half-step momenta are used.
    """
    assembler = assembler if assembler is not None else ForceAssembler(mesh)
    potential = assembler.potential_energy(states)
    T = states.T_half if next_states is None else 0.5 * (states.T_half + next_states.T_half)
    ell = _centered_body_momentum(mesh, states, next_states)
    kinetic_trans = 0.5 * float(np.sum((T ** 2).sum(axis=1) / mesh.mass))
    kinetic_rot = 0.5 * float(np.sum(ell ** 2 / mesh.inertia))
    return EnergyReport(t=float(states.t), kinetic_trans=kinetic_trans, kinetic_rot=kinetic_rot,
                        U_t=potential.U_t, U_d=potential.U_d, U_f=potential.U_f)


def momenta(mesh, states: StateArray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear momentum and angular momentum about the origin

    Uses the staggered pairs (X^n, T^{n-1/2}) and the n - 1/2 body momentum in
    the frame at step n, which the scheme conserves exactly.
    """
    linear = states.T_half.sum(axis=0)
    Qb = body_rotation(mesh, states.Q)
    spin = np.einsum('nij,nj->ni', Qb, body_angular_momentum(states.Z_half, states.d))
    angular = np.cross(states.X, states.T_half).sum(axis=0) + spin.sum(axis=0)
    return linear, angular


def region_average_displacement(mesh, states: StateArray, mask: np.ndarray) -> np.ndarray:
    """Volume-weighted mean displacement over the selected particles"""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DiagnosticsInputError("region selects no particles")
    w = mesh.volume[mask]
    return ((states.X[mask] - mesh.X0[mask]) * w[:, None]).sum(axis=0) / w.sum()


class ProbeRecorder:
    """Samples ProbeRecords at a fixed step stride"""

    def __init__(self, mesh, particle_ids: Iterable[int], stride: int = 10):
        if stride < 1:
            raise DiagnosticsInputError("probe stride must be >= 1")
        self.mesh = mesh
        self.stride = int(stride)
        self.records = {int(k): ProbeRecord(particle=int(k)) for k in particle_ids}

    def sample(self, states: StateArray, force: bool = False) -> None:
        if not self.records or (states.step % self.stride and not force):
            return
        ids = np.fromiter(self.records.keys(), dtype=np.int64)
        xi = states.X[ids] - self.mesh.X0[ids]
        theta = rotation_vector(states.Q[ids])
        for row, k in enumerate(ids.tolist()):
            self.records[k].append(states.t, xi[row], theta[row])


def arrival_time(probe: ProbeRecord, threshold_fraction: float,
                 component: Optional[int] = None) -> float:
    """
    First time the displacement exceeds threshold_fraction of its maximum

    Args:
        probe: Probe record
        threshold_fraction: Fraction of the peak in (0, 1]
        component: Use |xi[component]| instead of |xi|

    Returns:
        Linearly interpolated crossing time (s)

    Raises:
        MeasurementError: If the signal never crosses the threshold
    """
    if not 0.0 < threshold_fraction <= 1.0:
        raise DiagnosticsInputError("threshold_fraction must lie in (0, 1]")
    t, xi, _ = probe.arrays()
    if t.size == 0:
        raise MeasurementError(f"probe {probe.particle} has no samples")
    signal = np.linalg.norm(xi, axis=1) if component is None else np.abs(xi[:, component])
    peak = float(signal.max())
    if peak <= 0.0:
        raise MeasurementError(f"probe {probe.particle} never moves")
    threshold = threshold_fraction * peak
    above = np.flatnonzero(signal >= threshold)
    k = int(above[0])
    if k == 0:
        return float(t[0])
    v0, v1 = signal[k - 1], signal[k]
    return float(t[k - 1] + (threshold - v0) / (v1 - v0) * (t[k] - t[k - 1]))


def convergence_slope(pairs: Sequence[Tuple[float, float]]) -> float:
    """
    Least-squares slope of log(error) against log(h)

    Raises:
        DiagnosticsInputError: With fewer than 3 pairs or non-positive entries
    """
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise DiagnosticsInputError("convergence_slope needs at least three (h, error) pairs")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise DiagnosticsInputError("convergence_slope needs positive finite values")
    fit = stats.linregress(np.log(data[:, 0]), np.log(data[:, 1]))
    return float(fit.slope)


def richardson_order(coarse, medium, fine, ratio: float = 2.0) -> float:
    """Observed order log(|coarse - medium| / |medium - fine|) / log(ratio)"""
    if ratio <= 1.0:
        raise DiagnosticsInputError("refinement ratio must exceed 1")
    a = float(np.linalg.norm(np.asarray(coarse, float) - np.asarray(medium, float)))
    b = float(np.linalg.norm(np.asarray(medium, float) - np.asarray(fine, float)))
    if a <= 0.0 or b <= 0.0:
        raise DiagnosticsInputError("successive solutions must differ")
    return math.log(a / b) / math.log(ratio)


def curl_consistency(mesh, states: StateArray, curl_fn: Callable[[np.ndarray], np.ndarray],
                     mask: Optional[np.ndarray] = None) -> float:
    """
    max |theta_I - curl(xi)(X0_I) / 2| over the selected particles

    Args:
        curl_fn: Analytic curl of the imposed displacement field, (N, 3) -> (N, 3)
        mask: Particles to include (default all)
    """
    mask = np.ones(mesh.n_particles, dtype=bool) if mask is None else np.asarray(mask, bool)
    if not mask.any():
        raise DiagnosticsInputError("curl_consistency needs at least one particle")
    theta = rotation_vector(states.Q[mask])
    expected = 0.5 * np.asarray(curl_fn(mesh.X0[mask]), dtype=float)
    return float(np.linalg.norm(theta - expected, axis=1).max())


def energy_drift(reports: Sequence[EnergyReport]) -> DriftReport:
    """Band of |H - H0| relative to max |U| and the linear trend of H(t)"""
    if len(reports) < 3:
        raise DiagnosticsInputError("energy_drift needs at least three reports")
    t = np.array([r.t for r in reports])
    H = np.array([r.total for r in reports])
    U = np.array([abs(r.potential) for r in reports])
    max_u = float(U.max())
    if max_u <= 0.0:
        raise MeasurementError("potential energy stays zero")
    fit = stats.linregress(t, H)
    return DriftReport(relative_band=float(np.abs(H - H[0]).max() / max_u),
                       slope=float(fit.slope), slope_stderr=float(fit.stderr),
                       max_potential=max_u)


def main():
    """Test diagnostics"""
    try:
        print("Testing Diagnostics")
        print("=" * 40)
        pairs = [(h, 3.0 * h ** 2) for h in (0.1, 0.05, 0.025)]
        print(f"Slope of h^2 data: {convergence_slope(pairs):.6f}")
        print(f"Richardson order: {richardson_order(1.0, 0.25, 0.0625):.3f}")
        print("\n✓ Diagnostics tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
