"""Disk cache for spectral-density tables, keyed by geometry and material.

Layout (version 1, one JSON file per key, no binary blobs):

    {
      "version": 1,
      "key": { ... the exact inputs that produced the tables ... },
      "omega_1ps": [ ... ],
      "branches": { "LA_DP": [[9 row-major entries of the 3x3 fold] ...], ... },
      "slopes":   { "LA_DP": [9 entries], ... },
      "beta_e": ..., "t_e": ...
    }

Floats are serialized with repr precision, so a reload reproduces the
in-memory tables exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .phonons import BRANCHES, MaterialParams, SpectralTables, spectral_density_tables
from .wavefunctions import AxialBasis

CACHE_VERSION = 1


def _cache_key(basis: AxialBasis, material: MaterialParams, omega_max_mev: float, n_omega: int, n_theta: int) -> dict:
    spec = basis.spec
    return {
        "version": CACHE_VERSION,
        "well_depth": spec.well_depth,
        "dot_height": spec.dot_height,
        "barrier_width": spec.barrier_width,
        "effective_mass": spec.effective_mass,
        "n_points": spec.n_points,
        "margin": spec.margin,
        "material": {
            "eps_r": material.eps_r,
            "density": material.density,
            "c_l": material.c_l,
            "c_t": material.c_t,
            "deformation_potential": material.deformation_potential,
            "piezo_constant": material.piezo_constant,
            "osc_length": material.osc_length,
        },
        "omega_max_mev": omega_max_mev,
        "n_omega": n_omega,
        "n_theta": n_theta,
    }


def _key_digest(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]


def save_tables(tables: SpectralTables, key: dict, path: Path) -> None:
    payload = {
        "version": CACHE_VERSION,
        "key": key,
        "omega_1ps": tables.omega.tolist(),
        "branches": {b: tables.folded[b].reshape(-1, 9).tolist() for b in BRANCHES},
        "slopes": {b: tables.slopes[b].reshape(9).tolist() for b in BRANCHES},
        "beta_e": tables.beta_e,
        "t_e": tables.t_e,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)


def load_tables(path: Path, key: dict) -> SpectralTables | None:
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if payload.get("version") != CACHE_VERSION or payload.get("key") != key:
        return None
    omega = np.asarray(payload["omega_1ps"])
    n = len(omega)
    folded = {b: np.asarray(payload["branches"][b]).reshape(n, 3, 3) for b in BRANCHES}
    slopes = {b: np.asarray(payload["slopes"][b]).reshape(3, 3) for b in BRANCHES}
    return SpectralTables(
        omega=omega,
        folded=folded,
        slopes=slopes,
        beta_e=payload["beta_e"],
        t_e=payload["t_e"],
    )


def cached_spectral_density_tables(
    basis: AxialBasis,
    material: MaterialParams,
    omega_max_mev: float,
    n_omega: int = 2000,
    n_theta: int = 128,
    cache_dir=None,
) -> SpectralTables:
    """Build tables, consulting/storing the JSON cache when a dir is given."""
    if cache_dir is None:
        return spectral_density_tables(basis, material, omega_max_mev, n_omega, n_theta)
    key = _cache_key(basis, material, omega_max_mev, n_omega, n_theta)
    path = Path(cache_dir) / f"tables_{_key_digest(key)}.json"
    cached = load_tables(path, key) if path.exists() else None
    if cached is not None:
        return cached
    tables = spectral_density_tables(basis, material, omega_max_mev, n_omega, n_theta)
    save_tables(tables, key, path)
    return tables
