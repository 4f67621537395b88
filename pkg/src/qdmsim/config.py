"""Declarative run configuration: strict YAML with range-checked values.

Unknown keys are rejected so typos fail loudly; the resolved configuration
round-trips losslessly through ``to_dict``/``from_dict``.  Defaults are the
material table used throughout (InAs dots, 350 meV wells, 4.5 nm height).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import yaml

from .phonons import MaterialParams
from .redfield import SolverOptions


class ConfigError(ValueError):
    """Configuration parsing or validation failure (CLI exit code 2)."""


@dataclass(frozen=True)
class DeviceConfig:
    tunnel_coupling_mev: Optional[float] = 0.5
    barrier_width_nm: Optional[float] = None
    intrinsic_region_nm: float = 200.0
    drive_energy_mev: float = 10.0
    n_grid_points: int = 4001

    def __post_init__(self):
        if (self.tunnel_coupling_mev is None) == (self.barrier_width_nm is None):
            raise ConfigError("specify exactly one of tunnel_coupling_mev / barrier_width_nm")
        if self.tunnel_coupling_mev is not None and not 0.005 <= self.tunnel_coupling_mev <= 20.0:
            raise ConfigError("tunnel_coupling_mev out of range (0.005, 20)")
        if self.barrier_width_nm is not None and not 0.0 <= self.barrier_width_nm <= 40.0:
            raise ConfigError("barrier_width_nm out of range (0, 40)")
        if self.intrinsic_region_nm <= 0:
            raise ConfigError("intrinsic_region_nm must be positive")
        if self.drive_energy_mev <= 0:
            raise ConfigError("drive_energy_mev must be positive")
        if self.n_grid_points < 1000:
            raise ConfigError("n_grid_points must be at least 1000")


@dataclass(frozen=True)
class BathConfig:
    temperature_k: float = 10.0
    pure_dephasing: bool = True
    n_omega: int = 2000
    n_theta: int = 128
    table_span_factor: float = 3.0

    def __post_init__(self):
        if self.temperature_k <= 0:
            raise ConfigError("temperature_k must be positive")
        if self.n_omega < 100 or self.n_theta < 16:
            raise ConfigError("spectral grids too coarse (n_omega >= 100, n_theta >= 16)")
        if self.table_span_factor < 1.5:
            raise ConfigError("table_span_factor must be >= 1.5")


@dataclass(frozen=True)
class SweepConfig:
    sector: str = "1e"
    tunnel_couplings_mev: tuple = (0.5,)
    temperatures_k: tuple = (10.0,)
    v_min: float = 1e-4
    v_max: float = 1.0
    per_decade: int = 10
    dissipation: str = "on"
    shared_geometry_te_mev: Optional[float] = None

    def __post_init__(self):
        if self.sector not in ("1e", "2e"):
            raise ConfigError("sector must be '1e' or '2e'")
        if self.dissipation not in ("on", "off", "both"):
            raise ConfigError("dissipation must be on/off/both")
        if not 0 < self.v_min < self.v_max:
            raise ConfigError("require 0 < v_min < v_max")
        if self.per_decade < 1:
            raise ConfigError("per_decade must be >= 1")
        if any(t <= 0 for t in self.temperatures_k):
            raise ConfigError("temperatures must be positive")
        if any(t <= 0 for t in self.tunnel_couplings_mev):
            raise ConfigError("tunnel couplings must be positive")


@dataclass(frozen=True)
class RunSection:
    output_dir: str = "out"
    workers: int = 1
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


_MATERIAL_KEYS = {
    "effective_mass": "effective_mass",
    "eps_r": "eps_r",
    "density_kg_m3": "density",
    "c_l_nm_ps": "c_l",
    "c_t_nm_ps": "c_t",
    "deformation_potential_ev": "deformation_potential",
    "piezo_constant_c_m2": "piezo_constant",
    "osc_length_nm": "osc_length",
    "well_depth_mev": "well_depth",
    "dot_height_nm": "dot_height",
}

_SOLVER_KEYS = (
    "atol",
    "h_max_factor",
    "secular_tol_mev",
    "full_sum",
    "positivity_tol",
    "n_samples",
    "gauge_seed",
    "readout_drift_tol",
    "max_extensions",
    "backend",
)


@dataclass(frozen=True)
class RunConfig:
    material: MaterialParams = field(default_factory=MaterialParams)
    device: DeviceConfig = field(default_factory=DeviceConfig)
    bath: BathConfig = field(default_factory=BathConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> dict:
        mat = asdict(self.material)
        material = {yk: mat[attr] for yk, attr in _MATERIAL_KEYS.items()}
        return {
            "material": material,
            "device": asdict(self.device),
            "bath": asdict(self.bath),
            "solver": asdict(self.solver),
            "sweep": {
                **asdict(self.sweep),
                "tunnel_couplings_mev": list(self.sweep.tunnel_couplings_mev),
                "temperatures_k": list(self.sweep.temperatures_k),
            },
            "run": asdict(self.run),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")


def _build(section, data, cls, tuple_keys=()):
    kwargs = dict(data)
    for key in tuple_keys:
        if key in kwargs:
            value = kwargs[key]
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"[{section}] {key} must be a list")
            kwargs[key] = tuple(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value in [{section}]: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid [{section}]: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("root", data, ("material", "device", "bath", "solver", "sweep", "run"))

    mat_data = data.get("material", {})
    _check_keys("material", mat_data, _MATERIAL_KEYS)
    mat_kwargs = {_MATERIAL_KEYS[k]: v for k, v in mat_data.items()}
    try:
        material = MaterialParams(**mat_kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid [material]: {exc}") from exc

    dev_data = data.get("device", {})
    _check_keys("device", dev_data, DeviceConfig.__dataclass_fields__)
    # explicit tunnel coupling clears the default when a width is given
    if "barrier_width_nm" in dev_data and "tunnel_coupling_mev" not in dev_data:
        dev_data = {**dev_data, "tunnel_coupling_mev": None}
    device = _build("device", dev_data, DeviceConfig)

    bath_data = data.get("bath", {})
    _check_keys("bath", bath_data, BathConfig.__dataclass_fields__)
    bath = _build("bath", bath_data, BathConfig)

    solver_data = data.get("solver", {})
    _check_keys("solver", solver_data, _SOLVER_KEYS)
    solver = _build("solver", solver_data, SolverOptions)

    sweep_data = data.get("sweep", {})
    _check_keys("sweep", sweep_data, SweepConfig.__dataclass_fields__)
    # YAML 1.1 reads a bare on/off as a boolean
    if isinstance(sweep_data.get("dissipation"), bool):
        sweep_data = {**sweep_data, "dissipation": "on" if sweep_data["dissipation"] else "off"}
    sweep = _build("sweep", sweep_data, SweepConfig, ("tunnel_couplings_mev", "temperatures_k"))

    run_data = data.get("run", {})
    _check_keys("run", run_data, RunSection.__dataclass_fields__)
    run = _build("run", run_data, RunSection)

    return RunConfig(material=material, device=device, bath=bath, solver=solver, sweep=sweep, run=run)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data or {})


def dump(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
