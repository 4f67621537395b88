"""Figure recipes 2-10: column contracts, rendering, and dump mode.

Each recipe lists the CSV columns it consumes per input file.  Cells are
kept as the original strings; plotting converts on the fly while --dump
re-emits the untouched strings, so a dump is byte-comparable with the
input columns.  Styling approximates the source figures (log axes where
they use them); only the data content is contractual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "qdmfigures"}


class RecipeError(ValueError):
    """Missing/mismatched columns or unusable input data."""


@dataclass
class Table:
    path: str
    header: list
    cells: dict  # column -> list of raw strings

    def __len__(self):
        return len(next(iter(self.cells.values()))) if self.cells else 0

    def col(self, name: str) -> np.ndarray:
        return np.array([float(x) for x in self.cells[name]])

    def raw(self, name: str) -> list:
        return self.cells[name]


def read_table(path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{path}: empty file, nothing to plot") from None
        rows = list(reader)
    if not rows:
        raise RecipeError(f"{path}: header only, no data rows")
    cells = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return Table(path=str(path), header=header, cells=cells)


def require_columns(table: Table, needed) -> None:
    missing = [c for c in needed if c not in table.header]
    if missing:
        raise RecipeError(
            f"{table.path}: missing columns {missing}; found {table.header}"
        )


def _columns_with_prefix(table: Table, prefix: str) -> list:
    return [c for c in table.header if c.startswith(prefix)]


@dataclass
class FigureRecipe:
    figure_id: int
    inputs: list  # paths
    output: str
    dump: str | None = None

    def render(self) -> str:
        fn = _RENDERERS.get(self.figure_id)
        if fn is None:
            raise RecipeError(f"no recipe for figure {self.figure_id} (have 2..10)")
        tables = [read_table(p) for p in self.inputs]
        used = fn(tables, self.output)
        if self.dump:
            _write_dump(self.dump, used)
        return self.output


def _write_dump(path, used) -> None:
    """Re-emit the plotted columns with their original cell strings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for table, columns in used:
            writer.writerow([f"# {table.path}"])
            writer.writerow(columns)
            for i in range(len(table)):
                writer.writerow([table.raw(c)[i] for c in columns])


def _save(fig, output) -> None:
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    if str(output).endswith(".svg"):
        fig.savefig(output, metadata={"Date": None})
    else:
        fig.savefig(output, dpi=160, metadata=_PNG_META)
    plt.close(fig)


# ----------------------------------------------------------------- recipes


def _fig2(tables, output):
    """Two-panel energy spectra: 1e with weight coloring, 2e with triplet."""
    if len(tables) != 2:
        raise RecipeError("figure 2 needs the 1e and 2e spectra CSVs")
    t1, t2 = tables
    require_columns(t1, ["edF_meV", "E0_meV", "E1_meV", "w0_B", "w1_B"])
    require_columns(t2, ["edF_meV", "E0_meV", "E1_meV", "E2_meV", "triplet_meV"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    edf = t1.col("edF_meV")
    for state in (0, 1):
        e = t1.col(f"E{state}_meV")
        w_b = t1.col(f"w{state}_B")
        ax1.scatter(edf, e, c=w_b, cmap="coolwarm_r", s=4, vmin=0, vmax=1)
    ax1.set_xlabel("edF (meV)")
    ax1.set_ylabel("energy (meV)")
    ax1.set_title("one electron")
    edf2 = t2.col("edF_meV")
    for state in (0, 1, 2):
        ax2.plot(edf2, t2.col(f"E{state}_meV"), lw=1.4)
    ax2.plot(edf2, t2.col("triplet_meV"), "k--", lw=1.2, label="triplets")
    ax2.set_xlabel("edF (meV)")
    ax2.set_ylabel("energy (meV)")
    ax2.set_title("two electrons")
    ax2.legend(frameon=False)
    fig.tight_layout()
    _save(fig, output)
    return [
        (t1, ["edF_meV", "E0_meV", "E1_meV", "w0_B", "w1_B"]),
        (t2, ["edF_meV", "E0_meV", "E1_meV", "E2_meV", "triplet_meV"]),
    ]


def _fig3(tables, output):
    """Branch-resolved spectral density at the one-electron resonance."""
    (t,) = tables
    cols = ["omega_meV", "J_LA_DP_1ps", "J_LA_PE_1ps", "J_TA1_1ps", "J_TA2_1ps", "J_total_1ps"]
    require_columns(t, cols)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    w = t.col("omega_meV")
    labels = {"J_LA_DP_1ps": "LA (DP)", "J_LA_PE_1ps": "LA (PE)", "J_TA1_1ps": "TA1", "J_TA2_1ps": "TA2"}
    for col, lab in labels.items():
        ax.plot(w, t.col(col), lw=1.2, label=lab)
    ax.plot(w, t.col("J_total_1ps"), "k-", lw=1.8, label="total")
    ax.set_xlim(0, min(5.0, w.max()))
    ax.set_xlabel("energy (meV)")
    ax.set_ylabel("spectral density (1/ps)")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, output)
    return [(t, cols)]


def _pop_columns(table):
    cols = [c for c in table.header if c.startswith("p") and c[1:].isdigit()]
    if not cols:
        raise RecipeError(f"{table.path}: no population columns p0..pn")
    return cols


def _fig4(tables, output):
    """Sweep panel (dissipation on/off) plus three time-evolution panels."""
    if len(tables) != 4:
        raise RecipeError("figure 4 needs the 1e sweep CSV and three trajectory CSVs")
    sweep, *trajs = tables
    require_columns(sweep, ["v_Vps", "dissipation", "fidelity"])
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.4))
    ax = axes[0, 0]
    v = sweep.col("v_Vps")
    diss = sweep.col("dissipation").astype(bool)
    fid = sweep.col("fidelity")
    used = [(sweep, ["v_Vps", "dissipation", "fidelity"])]
    for on, style, label in ((True, "-", "with phonons"), (False, "--", "dissipationless")):
        sel = diss == on
        if np.any(sel):
            order = np.argsort(v[sel])
            ax.semilogx(v[sel][order], fid[sel][order], style, label=f"p1 {label}")
            ax.semilogx(v[sel][order], 1.0 - fid[sel][order], style, alpha=0.5, label=f"p0 {label}")
    ax.set_xlabel("switching speed (V/ps)")
    ax.set_ylabel("final population")
    ax.legend(frameon=False, fontsize=7)
    for ax, traj in zip(axes.ravel()[1:], trajs):
        require_columns(traj, ["t_ps", "F_Vnm"])
        pcols = _pop_columns(traj)
        t = traj.col("t_ps")
        for c in pcols:
            ax.plot(t, traj.col(c), lw=1.3, label=c)
        f = traj.col("F_Vnm")
        ax.plot(t, f / max(1e-30, np.abs(f).max()), "k:", lw=1.0, label="field (scaled)")
        ax.set_xlabel("t (ps)")
        ax.set_ylabel("population")
        ax.legend(frameon=False, fontsize=7)
        used.append((traj, ["t_ps", "F_Vnm"] + pcols))
    fig.tight_layout()
    _save(fig, output)
    return used


def _fig5(tables, output):
    """Ground-state population vs speed and vs the rescaled v/t_e^2 axis."""
    (t,) = tables
    require_columns(t, ["te_meV", "v_Vps", "p_final_0"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    te_vals = sorted({x for x in t.col("te_meV")})
    cmap = plt.get_cmap("viridis")
    te = t.col("te_meV")
    v = t.col("v_Vps")
    p0 = t.col("p_final_0")
    for i, te_val in enumerate(te_vals):
        sel = te == te_val
        color = cmap(i / max(1, len(te_vals) - 1))
        order = np.argsort(v[sel])
        ax1.semilogx(v[sel][order], p0[sel][order], color=color, label=f"t_e = {te_val:g} meV")
        ax2.semilogx(v[sel][order] / te_val**2, p0[sel][order], color=color)
    ax1.set_xlabel("v (V/ps)")
    ax2.set_xlabel("v / t_e^2 (V/ps/meV^2)")
    ax1.set_ylabel("final ground-state population")
    ax1.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, output)
    return [(t, ["te_meV", "v_Vps", "p_final_0"])]


def _fig6(tables, output):
    """Two-electron time evolution for a slow and a fast switching run."""
    if len(tables) != 2:
        raise RecipeError("figure 6 needs two 2e trajectory CSVs (slow, fast)")
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    used = []
    for ax, traj, title in zip(axes, tables, ("slow", "fast")):
        require_columns(traj, ["t_ps", "F_Vnm"])
        pcols = _pop_columns(traj)
        t = traj.col("t_ps")
        for c in pcols:
            ax.plot(t, traj.col(c), lw=1.3, label=c)
        f = traj.col("F_Vnm")
        ax.plot(t, np.abs(f) / max(1e-30, np.abs(f).max()), "k:", lw=1.0, label="|field| (scaled)")
        ax.set_title(f"{title} switching")
        ax.set_xlabel("t (ps)")
        ax.set_ylabel("population")
        ax.legend(frameon=False, fontsize=7)
        used.append((traj, ["t_ps", "F_Vnm"] + pcols))
    fig.tight_layout()
    _save(fig, output)
    return used


def _fig7(tables, output):
    """Switching fidelity vs speed: by tunnel coupling and by temperature."""
    if len(tables) != 2:
        raise RecipeError("figure 7 needs two 2e sweep CSVs (by t_e, by T)")
    t_te, t_temp = tables
    for tab in tables:
        require_columns(tab, ["te_meV", "T_K", "v_Vps", "fidelity"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, tab, group_col, label in (
        (ax1, t_te, "te_meV", "t_e = {:g} meV"),
        (ax2, t_temp, "T_K", "T = {:g} K"),
    ):
        groups = sorted({x for x in tab.col(group_col)})
        v = tab.col("v_Vps")
        fid = tab.col("fidelity")
        gvals = tab.col(group_col)
        for gv in groups:
            sel = gvals == gv
            order = np.argsort(v[sel])
            ax.semilogx(v[sel][order], fid[sel][order], label=label.format(gv))
        ax.set_xlabel("v (V/ps)")
        ax.legend(frameon=False, fontsize=8)
    ax1.set_ylabel("fidelity <Psi0|rho|Psi0>")
    fig.tight_layout()
    _save(fig, output)
    return [(t_te, ["te_meV", "T_K", "v_Vps", "fidelity"]), (t_temp, ["te_meV", "T_K", "v_Vps", "fidelity"])]


def _fig8(tables, output):
    """Fastest speed reaching each target fidelity vs tunnel coupling."""
    (t,) = tables
    require_columns(t, ["te_meV", "target_fidelity", "v_max_Vps", "reachable"])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    targets = sorted({x for x in t.col("target_fidelity")})
    te = t.col("te_meV")
    reach = t.col("reachable").astype(bool)
    tgt = t.col("target_fidelity")
    vmax = np.array([float(x) if x else np.nan for x in t.raw("v_max_Vps")])
    for target in targets:
        sel = (tgt == target) & reach
        order = np.argsort(te[sel])
        ax.semilogy(te[sel][order], vmax[sel][order], "o-", label=f"F_t = {target:g}")
        bad = (tgt == target) & ~reach
        if np.any(bad):
            floor = np.nanmin(vmax[sel]) if np.any(sel) else 1e-4
            ax.semilogy(te[bad], np.full(bad.sum(), floor), "x:", color="gray")
    ax.set_xlabel("t_e (meV)")
    ax.set_ylabel("v_max (V/ps)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, output)
    return [(t, ["te_meV", "target_fidelity", "v_max_Vps", "reachable"])]


def _fig9(tables, output):
    """Tunnel and Coulomb matrix elements vs barrier width."""
    (t,) = tables
    require_columns(t, ["w_nm", "te_meV", "V_BT_meV"])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    w = t.col("w_nm")
    ax.semilogy(w, t.col("te_meV"), "b-", label="t_e")
    ax.set_xlabel("barrier width w (nm)")
    ax.set_ylabel("t_e (meV)")
    ax2 = ax.twinx()
    ax2.plot(w, t.col("V_BT_meV"), "r--", label="V_BT")
    ax2.set_ylabel("V_BT (meV)")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], frameon=False)
    fig.tight_layout()
    _save(fig, output)
    return [(t, ["w_nm", "te_meV", "V_BT_meV"])]


def _fig10(tables, output):
    """Decay of the bath correlation function for several barrier widths."""
    if not tables:
        raise RecipeError("figure 10 needs at least one correlation CSV")
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    used = []
    for t in tables:
        require_columns(t, ["tau_ps", "abs2C_rel"])
        label = Path(t.path).stem
        ax.semilogy(t.col("tau_ps"), np.maximum(t.col("abs2C_rel"), 1e-12), label=label)
        used.append((t, ["tau_ps", "abs2C_rel"]))
    ax.set_xlabel("tau (ps)")
    ax.set_ylabel("|C(tau)|^2 / |C(0)|^2")
    ax.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    _save(fig, output)
    return used


_RENDERERS = {
    2: _fig2,
    3: _fig3,
    4: _fig4,
    5: _fig5,
    6: _fig6,
    7: _fig7,
    8: _fig8,
    9: _fig9,
    10: _fig10,
}
