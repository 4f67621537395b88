"""Switching experiments: fidelity sweeps, scaling collapse, maximum speed.

A sweep point is (tunnel coupling, temperature, speed, dissipation).  Each
tunnel coupling is resolved to a geometry by bisection so the phonon form
factors come from real wave functions; for scaling studies the geometry
can be pinned to a reference coupling instead (``shared_geometry_te``),
since the dissipationless dynamics only needs t_e itself and a common
field scale makes the v/t_e^2 rescaling exact.

Fidelity convention: population of the target instantaneous eigenstate
after the switching has settled; the upper state for the one-electron
inversion, the ground state for two-electron singlet preparation.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constants import HBAR
from .hamiltonians import DeviceModel, FieldSchedule, max_gap
from .phonons import MaterialParams, SpectralTables, spectral_density_tables
from .redfield import BathSpec, SolverOptions, initial_state, propagate

_VARIANTS = {"1e": "invert", "2e": "to_resonance"}
_TARGET_STATE = {"1e": "upper", "2e": "ground"}


@dataclass(frozen=True)
class SweepSpec:
    sector: str
    tunnel_couplings: tuple
    speeds: tuple
    temperatures: tuple = (10.0,)
    dissipation: str = "on"  # on | off | both
    drive_energy_mev: float = 10.0
    shared_geometry_te: Optional[float] = None
    pure_dephasing: bool = True
    material: MaterialParams = field(default_factory=MaterialParams)
    options: SolverOptions = field(default_factory=SolverOptions)
    n_omega: int = 2000
    table_span_factor: float = 3.0

    def __post_init__(self):
        if self.sector not in _VARIANTS:
            raise ValueError(f"unknown sector {self.sector!r}")
        if self.dissipation not in ("on", "off", "both"):
            raise ValueError("dissipation must be 'on', 'off' or 'both'")
        speeds = np.asarray(self.speeds, dtype=float)
        if len(speeds) == 0 or np.any(speeds <= 0) or np.any(np.diff(speeds) <= 0):
            raise ValueError("speeds must be positive and strictly ascending")
        if any(t <= 0 for t in self.temperatures):
            raise ValueError("temperatures must be positive")
        if any(te <= 0 for te in self.tunnel_couplings):
            raise ValueError("tunnel couplings must be positive")


@dataclass(frozen=True)
class FidelityResult:
    sector: str
    t_e: float
    temperature: float
    speed: float
    dissipation: bool
    populations: tuple
    fidelity: float
    status: str = "ok"
    n_steps: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def log_speed_grid(v_min: float, v_max: float, per_decade: int = 10) -> tuple:
    """Log-spaced speed grid covering [v_min, v_max]."""
    n = max(2, int(round(per_decade * math.log10(v_max / v_min))) + 1)
    return tuple(np.geomspace(v_min, v_max, n))


class GeometryCache:
    """Device models and spectral tables, one per resolved tunnel coupling."""

    def __init__(self, material: MaterialParams, n_omega: int = 2000, span_factor: float = 3.0):
        self.material = material
        self.n_omega = n_omega
        self.span_factor = span_factor
        self._devices: dict = {}
        self._tables: dict = {}

    def device(self, t_e: float) -> DeviceModel:
        key = round(t_e, 9)
        if key not in self._devices:
            self._devices[key] = DeviceModel.from_tunnel_coupling(t_e, self.material)
        return self._devices[key]

    def tables(self, device: DeviceModel, sector: str, drive_energy_mev: float) -> SpectralTables:
        key = (round(device.t_e, 9), round(device.d, 9), sector, drive_energy_mev)
        if key not in self._tables:
            sched = FieldSchedule.from_speed(
                _VARIANTS[sector], 1.0, device, drive_energy_mev=drive_energy_mev
            )
            omega_max = self.span_factor * max_gap(device, sector, sched)
            self._tables[key] = spectral_density_tables(
                device.axial, self.material, omega_max_mev=omega_max, n_omega=self.n_omega
            )
        return self._tables[key]


def run_point(
    device: DeviceModel,
    sector: str,
    speed: float,
    temperature: float,
    dissipative: bool,
    tables: Optional[SpectralTables],
    drive_energy_mev: float = 10.0,
    pure_dephasing: bool = True,
    options: SolverOptions = SolverOptions(),
) -> FidelityResult:
    """One switching run; propagation failures are recorded, not raised."""
    sched = FieldSchedule.from_speed(
        _VARIANTS[sector], speed, device, drive_energy_mev=drive_energy_mev
    )
    bath = None
    if dissipative:
        bath = BathSpec(temperature, tables, pure_dephasing=pure_dephasing)
    rho0 = initial_state(device, sector, sched, _TARGET_STATE[sector])
    try:
        traj = propagate(rho0, sched, device, sector, bath, options)
    except RuntimeError as exc:
        dim = 2 if sector == "1e" else 3
        return FidelityResult(
            sector=sector,
            t_e=device.t_e,
            temperature=temperature,
            speed=speed,
            dissipation=dissipative,
            populations=tuple([float("nan")] * dim),
            fidelity=float("nan"),
            status=f"{type(exc).__name__}: {exc}",
        )
    pops = traj.final_populations
    target = 1 if sector == "1e" else 0
    return FidelityResult(
        sector=sector,
        t_e=device.t_e,
        temperature=temperature,
        speed=speed,
        dissipation=dissipative,
        populations=tuple(float(p) for p in pops),
        fidelity=float(pops[target]),
        status="ok",
        n_steps=traj.n_steps,
    )


def _run_te_group(args):
    spec, t_e = args
    cache = GeometryCache(spec.material, spec.n_omega, spec.table_span_factor)
    base = cache.device(spec.shared_geometry_te) if spec.shared_geometry_te else cache.device(t_e)
    device = base.with_tunnel_coupling(t_e) if spec.shared_geometry_te else base
    modes = {"on": (True,), "off": (False,), "both": (False, True)}[spec.dissipation]
    needs_tables = any(modes)
    tables = cache.tables(device, spec.sector, spec.drive_energy_mev) if needs_tables else None
    rows = []
    for temperature in spec.temperatures:
        for dissipative in modes:
            for speed in spec.speeds:
                rows.append(
                    run_point(
                        device,
                        spec.sector,
                        speed,
                        temperature,
                        dissipative,
                        tables,
                        spec.drive_energy_mev,
                        spec.pure_dephasing,
                        spec.options,
                    )
                )
    return rows


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """All grid points, grouped by tunnel coupling; deterministic order."""
    tasks = [(spec, t_e) for t_e in spec.tunnel_couplings]
    if workers <= 1 or len(tasks) == 1:
        groups = [_run_te_group(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(_run_te_group, tasks))
    return [row for group in groups for row in group]


def lz_probability(device: DeviceModel, speed: float, d_i: Optional[float] = None) -> float:
    """Analytic Landau-Zener diabatic probability for the tanh sweep.

    The detuning slope at the crossing is e d f_max k = 1000 d v / d_i
    meV/ps (independent of the drive amplitude), giving
    P = exp(-2 pi t_e^2 / (hbar |d(edF)/dt|)).
    """
    d_i = d_i if d_i is not None else device.d_i
    slope = 1000.0 * device.d * speed / d_i
    return math.exp(-2.0 * math.pi * device.t_e**2 / (HBAR * slope))


@dataclass(frozen=True)
class CollapseResult:
    x_grid: np.ndarray
    curves: dict  # t_e -> p0 values on x_grid
    sup_distance: float


def lz_collapse(
    results: list,
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
    n_grid: int = 120,
) -> CollapseResult:
    """Rescale final ground-state populations onto x = v / t_e^2 and compare.

    Returns the maximum pairwise sup-distance over the common (windowed)
    grid; a single curve collapses trivially to distance zero.
    """
    by_te: dict = {}
    for row in results:
        if not row.ok:
            continue
        by_te.setdefault(row.t_e, []).append((row.speed / row.t_e**2, row.populations[0]))
    if not by_te:
        raise ValueError("no successful runs to collapse")
    lo = max(min(x for x, _ in pts) for pts in by_te.values())
    hi = min(max(x for x, _ in pts) for pts in by_te.values())
    if x_min is not None:
        lo = max(lo, x_min)
    if x_max is not None:
        hi = min(hi, x_max)
    if not lo < hi:
        raise ValueError("rescaled ranges do not overlap in the requested window")
    x_grid = np.geomspace(lo, hi, n_grid)
    curves = {}
    for t_e, pts in sorted(by_te.items()):
        pts.sort()
        xs = np.array([x for x, _ in pts])
        ps = np.array([p for _, p in pts])
        curves[t_e] = np.interp(np.log(x_grid), np.log(xs), ps)
    keys = list(curves)
    sup = 0.0
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            sup = max(sup, float(np.max(np.abs(curves[keys[i]] - curves[keys[j]]))))
    return CollapseResult(x_grid=x_grid, curves=curves, sup_distance=sup)


@dataclass(frozen=True)
class MaxSpeedResult:
    t_e: float
    temperature: float
    target_fidelity: float
    v_max: Optional[float]  # None: unreachable at any probed speed
    scan: list  # FidelityResult rows of the coarse scan

    @property
    def reachable(self) -> bool:
        return self.v_max is not None


def max_speed_for_fidelity(
    t_e: float,
    temperature: float,
    target_fidelity: float,
    material: MaterialParams = MaterialParams(),
    v_lo: float = 3e-4,
    v_hi: float = 1.0,
    per_decade: int = 7,
    bisect_iters: int = 9,
    drive_energy_mev: float = 10.0,
    options: SolverOptions = SolverOptions(),
    n_omega: int = 2000,
    cache: Optional[GeometryCache] = None,
) -> MaxSpeedResult:
    """Fastest speed still reaching the target fidelity (2e preparation).

    Coarse log scan, then bisection on the fast-side boundary of the
    region F >= target.  Returns unreachable when no probed speed attains
    the target; returns v_hi itself when even the fastest probe does.
    """
    if not 0.0 < target_fidelity < 1.0:
        raise ValueError("target_fidelity must be in (0, 1)")
    cache = cache or GeometryCache(material, n_omega)
    device = cache.device(t_e)
    tables = cache.tables(device, "2e", drive_energy_mev)

    def fidelity(v: float) -> FidelityResult:
        return run_point(
            device, "2e", v, temperature, True, tables, drive_energy_mev, True, options
        )

    scan_grid = log_speed_grid(v_lo, v_hi, per_decade)
    scan = [fidelity(v) for v in scan_grid]
    good = [r for r in scan if r.ok and r.fidelity >= target_fidelity]
    if not good:
        return MaxSpeedResult(t_e, temperature, target_fidelity, None, scan)
    v_good = max(r.speed for r in good)
    if v_good >= scan_grid[-1]:
        return MaxSpeedResult(t_e, temperature, target_fidelity, float(v_good), scan)
    above = min(r.speed for r in scan if r.speed > v_good)
    lo, hi = v_good, above
    for _ in range(bisect_iters):
        mid = math.sqrt(lo * hi)
        row = fidelity(mid)
        scan.append(row)
        if row.ok and row.fidelity >= target_fidelity:
            lo = mid
        else:
            hi = mid
    return MaxSpeedResult(t_e, temperature, target_fidelity, float(lo), scan)
