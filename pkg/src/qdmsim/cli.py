"""Command-line interface: configuration, orchestration, CSV/JSON output.

Every subcommand writes RFC-4180-style CSV (UTF-8, '.' decimal, header row
with units in the column names) plus a JSON metadata sidecar carrying the
resolved config hash, package version and wall time.  Exit codes: 0 ok,
2 configuration/usage errors, 3 numeric failures; errors also emit a
machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump, load
from .constants import HBAR
from .coulomb import coulomb_elements
from .hamiltonians import DeviceModel, FieldSchedule, max_gap, spectrum_sweep
from .phonons import (
    BRANCHES,
    correlation_function,
    spectral_density_tables,
)
from .protocols import (
    GeometryCache,
    SweepSpec,
    log_speed_grid,
    max_speed_for_fidelity,
    run_point,
    run_sweep,
)
from .redfield import (
    BathSpec,
    build_transitions,
    eigenframe,
    initial_state,
    occupation_transition_matrices,
    propagate,
)
from .tablecache import cached_spectral_density_tables
from .wavefunctions import PotentialSpec, solve_axial_basis

_FMT = "%.12g"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return _FMT % float(x)


def write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_metadata(path: Path, config: RunConfig, subcommand: str, t_start: float, extra=None) -> None:
    meta = {
        "subcommand": subcommand,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "version": __version__,
        "wall_time_s": round(time.time() - t_start, 3),
    }
    if extra:
        meta.update(extra)
    path.write_text(json.dumps(meta, sort_keys=True, indent=1))


class NumericFailure(RuntimeError):
    pass


def _device_from_config(cfg: RunConfig, t_e=None) -> DeviceModel:
    dev_cfg = cfg.device
    if t_e is not None:
        return DeviceModel.from_tunnel_coupling(
            t_e, cfg.material, n_points=dev_cfg.n_grid_points, d_i=dev_cfg.intrinsic_region_nm
        )
    if dev_cfg.barrier_width_nm is not None:
        return DeviceModel.from_barrier_width(
            dev_cfg.barrier_width_nm,
            cfg.material,
            n_points=dev_cfg.n_grid_points,
            d_i=dev_cfg.intrinsic_region_nm,
        )
    return DeviceModel.from_tunnel_coupling(
        dev_cfg.tunnel_coupling_mev,
        cfg.material,
        n_points=dev_cfg.n_grid_points,
        d_i=dev_cfg.intrinsic_region_nm,
    )


def _tables_for(cfg: RunConfig, device: DeviceModel, sector: str, cache_dir):
    sched = FieldSchedule.from_speed(
        "invert" if sector == "1e" else "to_resonance",
        1.0,
        device,
        drive_energy_mev=cfg.device.drive_energy_mev,
    )
    omega_max = cfg.bath.table_span_factor * max_gap(device, sector, sched)
    return cached_spectral_density_tables(
        device.axial,
        cfg.material,
        omega_max_mev=omega_max,
        n_omega=cfg.bath.n_omega,
        n_theta=cfg.bath.n_theta,
        cache_dir=cache_dir,
    )


def _resonant_j_curves(device, tables):
    """Branch-resolved J(w) for the resonant one-electron transition (F=0)."""
    m = np.array([0.5, 0.0, -0.5])
    curves = {b: np.einsum("i,kij,j->k", m, tables.folded[b], m) for b in BRANCHES}
    curves["total"] = sum(curves[b] for b in BRANCHES)
    return curves


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.output_dir or cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cache_dir(cfg: RunConfig, out: Path):
    if cfg.run.cache_dir is not None:
        return Path(cfg.run.cache_dir)
    return out / "cache"


# ------------------------------------------------------------- subcommands


def cmd_validate_config(cfg: RunConfig, args) -> int:
    sys.stdout.write(dump(cfg))
    sys.stdout.write(f"# config_hash: {cfg.config_hash()}\n")
    return 0


def cmd_spectra(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    device = _device_from_config(cfg, args.te)
    sector = args.sector
    f_half = args.edf_max / (1000.0 * device.d)
    fields = np.linspace(-f_half, f_half, args.n_fields)
    table = spectrum_sweep(device, sector, fields)
    dim = 2 if sector == "1e" else 3
    labels = ("B", "T") if sector == "1e" else ("BB", "BT", "TT")
    header = ["F_Vnm", "edF_meV"] + [f"E{i}_meV" for i in range(dim)]
    for i in range(dim):
        header += [f"w{i}_{lab}" for lab in labels]
    if sector == "2e":
        header.append("triplet_meV")
    rows = []
    for idx, f in enumerate(fields):
        row = [f, device.detuning_mev(f)] + list(table.energies[idx])
        for i in range(dim):
            row += list(table.weights[idx, i])
        if sector == "2e":
            row.append(table.triplet[idx])
        rows.append(row)
    path = out / f"spectra_{sector}.csv"
    write_csv(path, header, rows)
    write_metadata(
        path.with_suffix(".json"),
        cfg,
        "spectra",
        t0,
        {
            "t_e_meV": device.t_e,
            "d_nm": device.d,
            "V_BB_meV": device.coulomb.V_BB,
            "V_BT_meV": device.coulomb.V_BT,
            "V_TT_meV": device.coulomb.V_TT,
        },
    )
    print(path)
    return 0


def cmd_matrix_elements(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    widths = np.linspace(args.w_min, args.w_max, args.n_widths)
    rows = []
    for w in widths:
        spec = PotentialSpec(
            well_depth=cfg.material.well_depth,
            dot_height=cfg.material.dot_height,
            barrier_width=float(w),
            effective_mass=cfg.material.effective_mass,
            n_points=cfg.device.n_grid_points,
        )
        basis = solve_axial_basis(spec)
        elems = coulomb_elements(basis, cfg.material.beta_e, cfg.material.eps_r)
        rows.append(
            [w, spec.dot_separation, abs(basis.t_e), elems.V_BB, elems.V_BT, elems.V_TT]
        )
    path = out / "matrix_elements.csv"
    write_csv(path, ["w_nm", "d_nm", "te_meV", "V_BB_meV", "V_BT_meV", "V_TT_meV"], rows)
    write_metadata(path.with_suffix(".json"), cfg, "matrix-elements", t0)
    print(path)
    return 0


def cmd_spectral_density(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    device = _device_from_config(cfg, args.te)
    tables = _tables_for(cfg, device, "1e", _cache_dir(cfg, out))
    curves = _resonant_j_curves(device, tables)
    rows = []
    for i, w in enumerate(tables.omega):
        rows.append(
            [
                w * HBAR,
                curves["LA_DP"][i],
                curves["LA_PE"][i],
                curves["TA1"][i],
                curves["TA2"][i],
                curves["total"][i],
            ]
        )
    path = out / "spectral_density.csv"
    write_csv(
        path,
        ["omega_meV", "J_LA_DP_1ps", "J_LA_PE_1ps", "J_TA1_1ps", "J_TA2_1ps", "J_total_1ps"],
        rows,
    )
    write_metadata(path.with_suffix(".json"), cfg, "spectral-density", t0, {"t_e_meV": device.t_e})
    print(path)
    return 0


def cmd_correlation(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    device = _device_from_config(cfg, args.te)
    tables = _tables_for(cfg, device, "1e", _cache_dir(cfg, out))
    if args.pair == "resonant":
        j = _resonant_j_curves(device, tables)["total"]
    else:
        fold_index = {"BB": 0, "BT": 1, "TT": 2}[args.pair]
        j = tables.folded_total()[:, fold_index, fold_index]
    tau = np.linspace(0.0, args.tau_max, args.n_tau)
    c = correlation_function(tables.omega, j, cfg.bath.temperature_k, tau)
    a2 = np.abs(c) ** 2
    path = out / "correlation.csv"
    write_csv(
        path,
        ["tau_ps", "reC", "imC", "abs2C", "abs2C_rel"],
        [[tau[i], c[i].real, c[i].imag, a2[i], a2[i] / a2[0]] for i in range(len(tau))],
    )
    write_metadata(
        path.with_suffix(".json"), cfg, "correlation", t0,
        {"t_e_meV": device.t_e, "barrier_width_nm": device.axial.spec.barrier_width, "pair": args.pair},
    )
    print(path)
    return 0


def cmd_switch(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    sector = args.sector
    device = _device_from_config(cfg, args.te)
    sched = FieldSchedule.from_speed(
        "invert" if sector == "1e" else "to_resonance",
        args.v,
        device,
        drive_energy_mev=cfg.device.drive_energy_mev,
    )
    bath = None
    if args.dissipation == "on":
        tables = _tables_for(cfg, device, sector, _cache_dir(cfg, out))
        temp = args.T if args.T is not None else cfg.bath.temperature_k
        bath = BathSpec(temp, tables, pure_dephasing=cfg.bath.pure_dephasing)
    which = "upper" if sector == "1e" else "ground"
    rho0 = initial_state(device, sector, sched, which)
    traj = propagate(rho0, sched, device, sector, bath, cfg.solver)
    dim = traj.dim
    header = ["t_ps", "F_Vnm"] + [f"p{i}" for i in range(dim)]
    for i in range(dim):
        for j in range(dim):
            header.append(f"reRho{i}{j}")
    for i in range(dim):
        for j in range(dim):
            header.append(f"imRho{i}{j}")
    header += ["trace_err", "min_eig"]
    rows = []
    for idx in range(len(traj.times)):
        row = [traj.times[idx], traj.fields[idx]] + list(traj.populations[idx])
        row += list(traj.rho[idx].real.ravel())
        row += list(traj.rho[idx].imag.ravel())
        row += [traj.trace_error[idx], traj.min_eigenvalue[idx]]
        rows.append(row)
    tag = f"{sector}_v{args.v:g}" + ("" if args.dissipation == "on" else "_nodiss")
    path = out / f"switch_{tag}.csv"
    write_csv(path, header, rows)
    write_metadata(
        path.with_suffix(".json"), cfg, "switch", t0,
        {
            "t_e_meV": device.t_e,
            "speed_Vps": args.v,
            "final_populations": [float(p) for p in traj.final_populations],
            "n_steps": traj.n_steps,
            "readout_converged": traj.readout_converged,
        },
    )
    print(path)
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    sw = cfg.sweep
    sector = args.sector or sw.sector
    speeds = log_speed_grid(sw.v_min, sw.v_max, sw.per_decade)
    spec = SweepSpec(
        sector=sector,
        tunnel_couplings=tuple(sw.tunnel_couplings_mev),
        speeds=speeds,
        temperatures=tuple(sw.temperatures_k),
        dissipation=sw.dissipation,
        drive_energy_mev=cfg.device.drive_energy_mev,
        shared_geometry_te=sw.shared_geometry_te_mev,
        pure_dephasing=cfg.bath.pure_dephasing,
        material=cfg.material,
        options=cfg.solver,
        n_omega=cfg.bath.n_omega,
        table_span_factor=cfg.bath.table_span_factor,
    )
    workers = args.workers or int(os.environ.get("QDMSIM_WORKERS", cfg.run.workers))
    rows = run_sweep(spec, workers=workers)
    dim = 2 if sector == "1e" else 3
    header = ["te_meV", "T_K", "v_Vps", "dissipation"] + [f"p_final_{i}" for i in range(dim)] + [
        "fidelity",
        "status",
    ]
    data = [
        [r.t_e, r.temperature, r.speed, r.dissipation] + list(r.populations) + [r.fidelity, r.status]
        for r in rows
    ]
    path = out / f"sweep_{sector}.csv"
    write_csv(path, header, data)
    n_failed = sum(0 if r.ok else 1 for r in rows)
    write_metadata(
        path.with_suffix(".json"), cfg, "sweep", t0, {"n_points": len(rows), "n_failed": n_failed}
    )
    print(path)
    return 0 if n_failed == 0 else 3


def cmd_max_speed(cfg: RunConfig, args) -> int:
    t0 = time.time()
    out = _out_dir(cfg, args)
    cache = GeometryCache(cfg.material, cfg.bath.n_omega, cfg.bath.table_span_factor)
    targets = [float(x) for x in args.targets.split(",")]
    couplings = cfg.sweep.tunnel_couplings_mev
    temp = cfg.bath.temperature_k
    rows = []
    for target in targets:
        for te in couplings:
            res = max_speed_for_fidelity(
                te,
                temp,
                target,
                cfg.material,
                drive_energy_mev=cfg.device.drive_energy_mev,
                options=cfg.solver,
                n_omega=cfg.bath.n_omega,
                cache=cache,
            )
            rows.append(
                [te, temp, target, res.v_max if res.reachable else "", int(res.reachable)]
            )
    path = out / "max_speed.csv"
    write_csv(path, ["te_meV", "T_K", "target_fidelity", "v_max_Vps", "reachable"], rows)
    write_metadata(path.with_suffix(".json"), cfg, "max-speed", t0)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdmsim",
        description="Charge dynamics of electrically switched quantum-dot molecules",
    )
    parser.add_argument("--config", type=str, default=None, help="YAML run configuration")
    parser.add_argument("--output-dir", type=str, default=None, help="override output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate-config", help="echo the resolved configuration")

    p = sub.add_parser("spectra", help="instantaneous spectra vs field")
    p.add_argument("--sector", choices=("1e", "2e"), default="1e")
    p.add_argument("--te", type=float, default=None, help="tunnel coupling override (meV)")
    p.add_argument("--edf-max", type=float, default=10.0, help="detuning half-range (meV)")
    p.add_argument("--n-fields", type=int, default=201)

    p = sub.add_parser("matrix-elements", help="t_e and Coulomb elements vs barrier width")
    p.add_argument("--w-min", type=float, default=2.0)
    p.add_argument("--w-max", type=float, default=10.0)
    p.add_argument("--n-widths", type=int, default=17)

    p = sub.add_parser("spectral-density", help="branch-resolved J(w) at resonance")
    p.add_argument("--te", type=float, default=None)

    p = sub.add_parser("correlation", help="bath correlation function C(tau)")
    p.add_argument("--te", type=float, default=None)
    p.add_argument("--tau-max", type=float, default=10.0)
    p.add_argument("--n-tau", type=int, default=401)
    p.add_argument("--pair", choices=("resonant", "BB", "BT", "TT"), default="resonant")

    p = sub.add_parser("switch", help="single switching trajectory")
    p.add_argument("--sector", choices=("1e", "2e"), default="1e")
    p.add_argument("--te", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--v", type=float, required=True, help="switching speed (V/ps)")
    p.add_argument("--dissipation", choices=("on", "off"), default="on")

    p = sub.add_parser("sweep", help="fidelity sweep over the config grid")
    p.add_argument("--sector", choices=("1e", "2e"), default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("max-speed", help="fastest speed reaching target fidelities (2e)")
    p.add_argument("--targets", type=str, default="0.99")

    return parser


_COMMANDS = {
    "validate-config": cmd_validate_config,
    "spectra": cmd_spectra,
    "matrix-elements": cmd_matrix_elements,
    "spectral-density": cmd_spectral_density,
    "correlation": cmd_correlation,
    "switch": cmd_switch,
    "sweep": cmd_sweep,
    "max-speed": cmd_max_speed,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "detail": str(exc)}) + "\n")
        return 2
    try:
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "detail": str(exc)}) + "\n")
        return 2
    except Exception as exc:  # numeric / propagation failures
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}) + "\n"
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
