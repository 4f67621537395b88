"""One- and two-electron Hamiltonians and the electric-field schedules.

The localized basis is (psi_B, psi_T) for one electron and the singlet
charge states (|BB;s>, |BT;s>, |TT;s>) for two.  The field enters through
the detuning e*d*F between the dots; with F in V/nm and d in nm that is
1000*d*F meV.  Switching schedules are tanh ramps, parameterized by the
rate k and quoted as the speed v = k * d_i * f_max of the bias ramp across
the diode's intrinsic region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constants import EV_PER_VNM
from .coulomb import CoulombElements, coulomb_elements
from .phonons import MaterialParams
from .wavefunctions import AxialBasis, PotentialSpec, barrier_width_for_tunnel_coupling, solve_axial_basis

SECTORS = ("1e", "2e")
BASIS_LABELS = {"1e": ("B", "T"), "2e": ("BB;s", "BT;s", "TT;s")}

# Operational saturation: |tanh(k t)| >= 1 - 1e-5 requires |k t| >= atanh(1-1e-5) ~ 6.1
SATURATION_KT = 6.5


@dataclass(frozen=True)
class DeviceModel:
    """Geometry, tunnel coupling and interaction data for one device.

    ``t_e`` is the (positive, by convention of the printed Hamiltonians)
    tunnel coupling in meV; ``d`` the center-to-center dot distance in nm;
    ``d_i`` the diode intrinsic region in nm.  ``axial`` carries the wave
    functions that produced ``t_e`` so phonon form factors stay consistent.
    """

    t_e: float
    d: float
    coulomb: CoulombElements
    material: MaterialParams
    axial: AxialBasis
    d_i: float = 200.0

    def __post_init__(self):
        if self.t_e == 0:
            raise ValueError("t_e must be nonzero")
        if self.d <= 0 or self.d_i <= 0:
            raise ValueError("distances must be positive")

    @classmethod
    def from_barrier_width(
        cls,
        barrier_width: float,
        material: Optional[MaterialParams] = None,
        n_points: int = 4001,
        d_i: float = 200.0,
    ) -> "DeviceModel":
        material = material or MaterialParams()
        spec = PotentialSpec(
            well_depth=material.well_depth,
            dot_height=material.dot_height,
            barrier_width=barrier_width,
            effective_mass=material.effective_mass,
            n_points=n_points,
        )
        axial = solve_axial_basis(spec)
        return cls(
            t_e=abs(axial.t_e),
            d=spec.dot_separation,
            coulomb=coulomb_elements(axial, material.beta_e, material.eps_r),
            material=material,
            axial=axial,
            d_i=d_i,
        )

    @classmethod
    def from_tunnel_coupling(
        cls,
        t_e: float,
        material: Optional[MaterialParams] = None,
        n_points: int = 4001,
        d_i: float = 200.0,
    ) -> "DeviceModel":
        """Resolve the geometry realizing |t_e| by bisection on the barrier."""
        material = material or MaterialParams()
        w = barrier_width_for_tunnel_coupling(
            abs(t_e),
            well_depth=material.well_depth,
            dot_height=material.dot_height,
            effective_mass=material.effective_mass,
            n_points=n_points,
        )
        return cls.from_barrier_width(w, material, n_points=n_points, d_i=d_i)

    def with_tunnel_coupling(self, t_e: float) -> "DeviceModel":
        """Same geometry and interactions, t_e overridden as a free parameter."""
        return replace(self, t_e=t_e)

    def detuning_mev(self, field_vnm: float) -> float:
        """e d F in meV."""
        return EV_PER_VNM * self.d * field_vnm


@dataclass(frozen=True)
class FieldSchedule:
    """Tanh ramp of the electric field.

    ``invert``:       F(t) = -f_max tanh(k t)       (one-electron inversion)
    ``to_resonance``: F(t) = f_max (tanh(k t) - 1)  (two-electron, ends at 0)

    The window [t_start, t_end] starts saturated; v = k d_i f_max.
    """

    variant: str
    f_max: float
    k: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.variant not in ("invert", "to_resonance"):
            raise ValueError("variant must be 'invert' or 'to_resonance'")
        if self.f_max <= 0 or self.k <= 0:
            raise ValueError("f_max and k must be positive")
        if abs(math.tanh(self.k * self.t_start)) < 1.0 - 1e-5:
            raise ValueError("schedule must start saturated: |tanh(k t_start)| >= 1 - 1e-5")

    @classmethod
    def from_speed(
        cls,
        variant: str,
        speed: float,
        device: DeviceModel,
        drive_energy_mev: float = 10.0,
        saturation_kt: float = SATURATION_KT,
    ) -> "FieldSchedule":
        """Schedule with e d f_max = drive_energy_mev and k = v/(d_i f_max)."""
        if speed <= 0:
            raise ValueError("speed must be positive")
        f_max = drive_energy_mev / (EV_PER_VNM * device.d)
        k = speed / (device.d_i * f_max)
        return cls(
            variant=variant,
            f_max=f_max,
            k=k,
            t_start=-saturation_kt / k,
            t_end=saturation_kt / k,
        )

    def field_at(self, t: float) -> float:
        if self.variant == "invert":
            return -self.f_max * math.tanh(self.k * t)
        return self.f_max * (math.tanh(self.k * t) - 1.0)

    def field_final(self) -> float:
        return -self.f_max if self.variant == "invert" else 0.0

    def speed(self, d_i: float = 200.0) -> float:
        return self.k * d_i * self.f_max


def field_at(schedule: FieldSchedule, t: float) -> float:
    """F(t) in V/nm."""
    return schedule.field_at(t)


def h1e(device: DeviceModel, field_vnm: float) -> np.ndarray:
    """2x2 single-electron Hamiltonian in (psi_B, psi_T), meV."""
    edf = device.detuning_mev(field_vnm)
    return np.array([[0.0, device.t_e], [device.t_e, edf]])


def h2e(device: DeviceModel, field_vnm: float) -> np.ndarray:
    """3x3 singlet-sector Hamiltonian in (|BB;s>, |BT;s>, |TT;s>), meV."""
    edf = device.detuning_mev(field_vnm)
    c = device.coulomb
    s2t = math.sqrt(2.0) * device.t_e
    return np.array(
        [
            [c.V_BB - edf, -s2t, 0.0],
            [-s2t, c.V_BT, -s2t],
            [0.0, -s2t, c.V_TT + edf],
        ]
    )


def hamiltonian(device: DeviceModel, sector: str, field_vnm: float) -> np.ndarray:
    if sector == "1e":
        return h1e(device, field_vnm)
    if sector == "2e":
        return h2e(device, field_vnm)
    raise ValueError(f"unknown sector {sector!r}")


def hamiltonian_parts(device: DeviceModel, sector: str):
    """Split H(F) = H0 + edF * H1 for fast reassembly inside propagators."""
    if sector == "1e":
        h0 = np.array([[0.0, device.t_e], [device.t_e, 0.0]])
        h1 = np.diag([0.0, 1.0])
    elif sector == "2e":
        c = device.coulomb
        s2t = math.sqrt(2.0) * device.t_e
        h0 = np.array([[c.V_BB, -s2t, 0.0], [-s2t, c.V_BT, -s2t], [0.0, -s2t, c.V_TT]])
        h1 = np.diag([-1.0, 0.0, 1.0])
    else:
        raise ValueError(f"unknown sector {sector!r}")
    return h0, h1


def gap_1e(device: DeviceModel, field_vnm: float) -> float:
    """Analytic avoided-crossing gap sqrt((edF)^2 + 4 t_e^2)."""
    edf = device.detuning_mev(field_vnm)
    return math.sqrt(edf**2 + 4.0 * device.t_e**2)


def max_gap(device: DeviceModel, sector: str, schedule: FieldSchedule) -> float:
    """Largest spectral span (meV) along the schedule; sets the table range."""
    fields = [schedule.field_at(schedule.t_start), schedule.field_at(schedule.t_end), 0.0]
    span = 0.0
    for f in fields:
        evals = np.linalg.eigvalsh(hamiltonian(device, sector, f))
        span = max(span, float(evals[-1] - evals[0]))
    return span


@dataclass(frozen=True)
class SpectrumTable:
    """Instantaneous spectra over a field grid, with localized-basis weights."""

    sector: str
    fields: np.ndarray
    energies: np.ndarray  # (n_F, dim), ascending per row
    weights: np.ndarray  # (n_F, dim, dim): |<basis_j|Psi_i>|^2
    triplet: Optional[np.ndarray] = None  # constant V_BT reference, 2e only


def spectrum_sweep(device: DeviceModel, sector: str, fields: np.ndarray) -> SpectrumTable:
    fields = np.asarray(fields, dtype=float)
    if fields.ndim != 1 or np.any(~np.isfinite(fields)) or np.any(np.diff(fields) <= 0):
        raise ValueError("fields must be a finite, strictly ascending 1D grid")
    dim = 2 if sector == "1e" else 3
    energies = np.empty((len(fields), dim))
    weights = np.empty((len(fields), dim, dim))
    for i, f in enumerate(fields):
        evals, evecs = np.linalg.eigh(hamiltonian(device, sector, f))
        energies[i] = evals
        weights[i] = (evecs.T) ** 2  # weights[i, state, basis]
    triplet = None
    if sector == "2e":
        triplet = np.full(len(fields), device.coulomb.V_BT)
    return SpectrumTable(sector=sector, fields=fields, energies=energies, weights=weights, triplet=triplet)
