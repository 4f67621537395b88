#!/usr/bin/env python3
"""Produce the CSV inputs for figures 2-10 by driving the qdmsim CLI.

Default settings reproduce publication-quality data (roughly 15 minutes on
one core, dominated by the sweeps).  --fast switches to coarse grids for
smoke tests and the figure-package golden files (~3 minutes).

Usage: python scripts/make_figure_data.py OUTPUT_DIR [--fast]
"""

import argparse
import subprocess
import sys
import tempfile
from pathlib import Path

FAST_CFG = """
device:
  n_grid_points: 2001
bath:
  n_omega: 800
solver:
  n_samples: 200
"""


def cli(cfg_path, out_dir, *args):
    cmd = [sys.executable, "-m", "qdmsim.cli", "--output-dir", str(out_dir)]
    if cfg_path:
        cmd += ["--config", str(cfg_path)]
    cmd += list(args)
    print("+", " ".join(cmd[3:]))
    subprocess.run(cmd, check=True)


def write_cfg(path, body):
    path.write_text(body)
    return path


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output_dir", type=Path)
    parser.add_argument("--fast", action="store_true", help="coarse grids for smoke/golden data")
    args = parser.parse_args()
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix="qdmsim_cfg_"))

    base = write_cfg(tmp / "base.yaml", FAST_CFG if args.fast else "")

    # Fig. 2: spectra; Fig. 9: matrix elements; Fig. 3: spectral density
    cli(base, out, "spectra", "--sector", "1e", "--n-fields", "81" if args.fast else "201")
    cli(base, out, "spectra", "--sector", "2e", "--n-fields", "81" if args.fast else "201")
    cli(base, out, "matrix-elements", "--n-widths", "7" if args.fast else "17")
    cli(base, out, "spectral-density")

    # Fig. 10: correlation decay for two barrier widths
    cli(base, out, "correlation", "--n-tau", "101" if args.fast else "401")
    (out / "correlation.csv").replace(out / "correlation_w7.5.csv")
    (out / "correlation.json").replace(out / "correlation_w7.5.json")
    if args.fast:
        wide_body = (
            "device:\n  n_grid_points: 2001\n  barrier_width_nm: 4.0\n"
            "bath:\n  n_omega: 800\nsolver:\n  n_samples: 200\n"
        )
    else:
        wide_body = "device:\n  barrier_width_nm: 4.0\n"
    wide = write_cfg(tmp / "wide.yaml", wide_body)
    cli(wide, out, "correlation", "--n-tau", "101" if args.fast else "401")
    (out / "correlation.csv").replace(out / "correlation_w4.csv")
    (out / "correlation.json").replace(out / "correlation_w4.json")

    # Figs. 4(b-d), 6: trajectories
    for v in ("0.00025", "0.02", "0.5") if not args.fast else ("0.003", "0.02", "0.5"):
        cli(base, out, "switch", "--sector", "1e", "--v", v)
    for v in ("0.003", "0.5"):
        cli(base, out, "switch", "--sector", "2e", "--v", v)

    # Fig. 4(a): 1e sweep with and without dissipation
    sweep_1e = write_cfg(
        tmp / "sweep1e.yaml",
        (FAST_CFG if args.fast else "")
        + f"""
sweep:
  sector: "1e"
  tunnel_couplings_mev: [0.5]
  dissipation: both
  v_min: 1.0e-4
  v_max: 1.0
  per_decade: {3 if args.fast else 10}
""",
    )
    cli(sweep_1e, out, "sweep")
    (out / "sweep_1e.csv").replace(out / "sweep_1e_te0.5.csv")
    (out / "sweep_1e.json").replace(out / "sweep_1e_te0.5.json")

    # Fig. 5: several couplings, shared geometry, rescaled axis
    sweep_lz = write_cfg(
        tmp / "sweeplz.yaml",
        (FAST_CFG if args.fast else "")
        + f"""
sweep:
  sector: "1e"
  tunnel_couplings_mev: [0.25, 0.5, 1.0]
  dissipation: "on"
  shared_geometry_te_mev: 0.5
  v_min: 1.0e-3
  v_max: 3.0
  per_decade: {3 if args.fast else 10}
""",
    )
    cli(sweep_lz, out, "sweep")
    (out / "sweep_1e.csv").replace(out / "sweep_1e_multite.csv")
    (out / "sweep_1e.json").replace(out / "sweep_1e_multite.json")

    # Fig. 7: 2e sweeps by coupling and by temperature
    sweep_te = write_cfg(
        tmp / "sweepte.yaml",
        (FAST_CFG if args.fast else "")
        + f"""
sweep:
  sector: "2e"
  tunnel_couplings_mev: [0.25, 0.5, 1.0]
  dissipation: "on"
  v_min: 1.0e-3
  v_max: 1.0
  per_decade: {3 if args.fast else 10}
""",
    )
    cli(sweep_te, out, "sweep")
    (out / "sweep_2e.csv").replace(out / "sweep_2e_by_te.csv")
    (out / "sweep_2e.json").replace(out / "sweep_2e_by_te.json")
    sweep_temp = write_cfg(
        tmp / "sweeptemp.yaml",
        (FAST_CFG if args.fast else "")
        + f"""
sweep:
  sector: "2e"
  tunnel_couplings_mev: [0.5]
  temperatures_k: [4.0, 10.0, 20.0, 30.0]
  dissipation: "on"
  v_min: 1.0e-3
  v_max: 1.0
  per_decade: {3 if args.fast else 10}
""",
    )
    cli(sweep_temp, out, "sweep")
    (out / "sweep_2e.csv").replace(out / "sweep_2e_by_T.csv")
    (out / "sweep_2e.json").replace(out / "sweep_2e_by_T.json")

    # Fig. 8: maximum switching speed vs coupling
    max_speed = write_cfg(
        tmp / "maxspeed.yaml",
        (FAST_CFG if args.fast else "")
        + f"""
sweep:
  sector: "2e"
  tunnel_couplings_mev: [{'0.8, 1.0' if args.fast else '0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2'}]
""",
    )
    cli(
        max_speed,
        out,
        "max-speed",
        "--targets",
        "0.9" if args.fast else "0.9,0.95,0.99",
    )
    print(f"done: {out}")


if __name__ == "__main__":
    main()
