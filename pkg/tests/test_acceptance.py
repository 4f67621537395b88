"""Acceptance suite: the quantitative exit criteria of the simulator.

Each test prints one summary line with the measured numbers so a full run
doubles as a results report.  The heavy sweeps share one geometry cache;
everything runs with the default solver settings (tolerances pinned here,
nothing calibrated after the fact).
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qdmsim.constants import HBAR, KB, TWO_PI
from qdmsim.hamiltonians import (
    DeviceModel,
    FieldSchedule,
    gap_1e,
    hamiltonian,
    hamiltonian_parts,
    spectrum_sweep,
)
from qdmsim.phonons import (
    BRANCHES,
    MaterialParams,
    correlation_function,
    spectral_density_tables,
)
from qdmsim.protocols import (
    GeometryCache,
    SolverOptions,
    SweepSpec,
    log_speed_grid,
    lz_collapse,
    lz_probability,
    max_speed_for_fidelity,
    run_point,
    run_sweep,
)
from qdmsim.redfield import (
    BathSpec,
    initial_state,
    populations_in_eigenbasis,
    propagate,
    propagate_fixed_field,
)
from qdmsim.wavefunctions import PotentialSpec, solve_axial_basis

MAT = MaterialParams()


def report(criterion: str, detail: str) -> None:
    print(f"\n[PASS] {criterion}: {detail}")


@pytest.fixture(scope="module")
def cache():
    return GeometryCache(MAT)


@pytest.fixture(scope="module")
def device(cache):
    return cache.device(0.5)


@pytest.fixture(scope="module")
def tables_1e(cache, device):
    return cache.tables(device, "1e", 10.0)


@pytest.fixture(scope="module")
def tables_2e(cache, device):
    return cache.tables(device, "2e", 10.0)


def test_criterion_1_switching_peak(device, tables_1e):
    """1e sweep at t_e=0.5 meV, T=10 K: max final upper-state population."""
    t0 = time.time()
    speeds = log_speed_grid(1e-4, 1.0, 10)
    assert len(speeds) >= 40
    rows = [run_point(device, "1e", v, 10.0, True, tables_1e) for v in speeds]
    assert all(r.ok for r in rows)
    p1 = np.array([r.fidelity for r in rows])
    peak = float(p1.max())
    v_peak = float(speeds[int(np.argmax(p1))])
    elapsed = time.time() - t0
    assert peak == pytest.approx(0.70, abs=0.05)
    assert p1[0] < peak - 0.2 and p1[-1] < peak - 0.2  # decay toward both ends
    assert elapsed < 1800.0
    report(
        "criterion 1 (switching peak)",
        f"max p(Psi1) = {peak:.3f} at v = {v_peak:.3g} V/ps over {len(speeds)} points "
        f"(ends {p1[0]:.3f}/{p1[-1]:.3f}), {elapsed:.0f} s",
    )


def test_criterion_2_max_speed_threshold(cache):
    """0.99 unreachable at t_e=0.6; reachable at 0.8 near 0.05 V/ps; monotone."""
    res_06 = max_speed_for_fidelity(0.6, 10.0, 0.99, MAT, cache=cache)
    assert not res_06.reachable
    v_max = {}
    for te in (0.8, 1.0, 1.2):
        res = max_speed_for_fidelity(te, 10.0, 0.99, MAT, cache=cache)
        assert res.reachable, f"0.99 should be reachable at t_e = {te}"
        v_max[te] = res.v_max
    assert 0.017 <= v_max[0.8] <= 0.15
    ordered = [None] + [v_max[te] for te in (0.8, 1.0, 1.2)]  # None = unreachable at 0.6
    reachable_sequence = [v for v in ordered if v is not None]
    assert all(a <= b for a, b in zip(reachable_sequence, reachable_sequence[1:]))
    report(
        "criterion 2 (max-speed threshold)",
        "F_t=0.99 unreachable at t_e=0.6; "
        + ", ".join(f"v_max({te})={v_max[te]:.3f}" for te in (0.8, 1.0, 1.2))
        + " V/ps (monotone over 4 couplings)",
    )


def test_criterion_3_landau_zener(cache, device):
    """Dissipationless collapse in v/t_e^2 and the analytic LZ exponential."""
    spec = SweepSpec(
        sector="1e",
        tunnel_couplings=(0.25, 0.5, 1.0),
        speeds=log_speed_grid(3.3e-3, 3.0, 10),
        dissipation="off",
        shared_geometry_te=0.5,
    )
    rows = run_sweep(spec)
    assert all(r.ok for r in rows)
    # window: diabatic probability between 5% and 95% on the shared device
    c = 2.0 * math.pi / (HBAR * 1000.0 * device.d / device.d_i)
    res = lz_collapse(rows, x_min=c / math.log(1 / 0.05), x_max=c / math.log(1 / 0.95))
    assert res.sup_distance < 0.05

    worst = 0.0
    n_checked = 0
    for row in rows:
        dev_row = device.with_tunnel_coupling(row.t_e)
        p_lz = lz_probability(dev_row, row.speed)
        if 0.1 <= p_lz <= 0.9:
            worst = max(worst, abs(row.populations[0] / p_lz - 1.0))
            n_checked += 1
    assert n_checked >= 10
    assert worst < 0.05
    report(
        "criterion 3 (Landau-Zener)",
        f"collapse sup-distance = {res.sup_distance:.4f} (3 couplings); "
        f"LZ exponential matched to {100 * worst:.2f}% over {n_checked} points",
    )


def test_criterion_4_thermalization(device, tables_1e, tables_2e):
    """Gibbs fixed point to 1e-4 and the golden-rule relaxation rate to 2%."""
    bath = BathSpec(10.0, tables_1e)
    h = hamiltonian(device, "1e", 0.0)
    evals, vecs = np.linalg.eigh(h)
    boltz = np.exp(-(evals - evals[0]) / (KB * 10.0))
    boltz /= boltz.sum()
    rng = np.random.default_rng(42)
    worst_gibbs = 0.0
    for _ in range(2):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho0 = a @ a.conj().T
        rho0 /= np.trace(rho0).real
        traj = propagate_fixed_field(rho0, device, "1e", 0.0, bath, t_final=600.0)
        worst_gibbs = max(worst_gibbs, float(np.max(np.abs(traj.final_populations - boltz))))
    # two-electron block at the anticrossing (third state beyond phonon band)
    dv = device.coulomb.V_BB - device.coulomb.V_BT
    f_cross = -dv / (1000.0 * device.d)
    h2 = hamiltonian(device, "2e", f_cross)
    e2, v2 = np.linalg.eigh(h2)
    boltz2 = np.exp(-(e2 - e2[0]) / (KB * 10.0))
    boltz2 /= boltz2.sum()
    rho_eig = np.diag([0.2, 0.8, 0.0]).astype(complex)
    rho0 = v2 @ rho_eig @ v2.T
    traj2 = propagate_fixed_field(rho0, device, "2e", f_cross, BathSpec(10.0, tables_2e), t_final=800.0)
    worst_gibbs = max(worst_gibbs, float(np.max(np.abs(traj2.final_populations - boltz2))))
    assert worst_gibbs < 1e-4

    # golden-rule oracle: rate of exponential decay toward Gibbs at F = 0
    w = 2.0 * device.t_e / HBAR
    m = np.array([0.5, 0.0, -0.5])
    tot = tables_1e.folded_total()
    j = float(
        m
        @ np.array([[np.interp(w, tables_1e.omega, tot[:, p, q]) for q in range(3)] for p in range(3)])
        @ m
    )
    n_bose = 1.0 / math.expm1(HBAR * w / (KB * 10.0))
    gamma_oracle = TWO_PI * j * (2.0 * n_bose + 1.0)
    rho0 = np.outer(vecs[:, 1], vecs[:, 1]).astype(complex)
    traj = propagate_fixed_field(rho0, device, "1e", 0.0, bath, t_final=6.0 / gamma_oracle, n_samples=400)
    sel = (traj.times > 0.5 / gamma_oracle) & (traj.times < 4.0 / gamma_oracle)
    fit = np.polyfit(traj.times[sel], np.log(traj.populations[sel, 1] - boltz[1]), 1)
    rel = abs(-fit[0] / gamma_oracle - 1.0)
    assert rel < 0.02
    report(
        "criterion 4 (thermalization)",
        f"Gibbs deviation <= {worst_gibbs:.2e}; relaxation rate {-fit[0]:.4f}/ps vs "
        f"golden rule {gamma_oracle:.4f}/ps ({100 * rel:.2f}%)",
    )


def test_criterion_5_structural_invariants(device, tables_1e):
    """Trace, positivity, gauge, unitary limit, triplet line, sweet spot, gap."""
    bath = BathSpec(10.0, tables_1e)
    sched = FieldSchedule.from_speed("invert", 0.02, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    traj = propagate(rho0, sched, device, "1e", bath)
    trace_drift = float(traj.trace_error.max())
    min_eig = float(traj.min_eigenvalue.min())
    assert trace_drift < 1e-7
    assert min_eig > -1e-7

    flip = propagate(rho0, sched, device, "1e", bath, SolverOptions(gauge_seed=2024))
    gauge_dev = float(np.max(np.abs(traj.final_populations - flip.final_populations)))
    assert gauge_dev < 1e-9

    # unitary limit vs direct state-vector integration
    sched_f = FieldSchedule.from_speed("invert", 0.2, device)
    rho0f = initial_state(device, "1e", sched_f, "upper")
    traj_u = propagate(rho0f, sched_f, device, "1e", None, SolverOptions(atol=1e-10))
    h0, h1 = hamiltonian_parts(device, "1e")
    evals, vecs = np.linalg.eigh(h0 + device.detuning_mev(sched_f.field_at(sched_f.t_start)) * h1)
    sol = solve_ivp(
        lambda t, psi: -1j / HBAR * ((h0 + device.detuning_mev(sched_f.field_at(t)) * h1) @ psi),
        (sched_f.t_start, sched_f.t_end),
        vecs[:, 1].astype(complex),
        rtol=1e-11,
        atol=1e-13,
        method="DOP853",
    )
    h_end = h0 + device.detuning_mev(sched_f.field_at(sched_f.t_end)) * h1
    pops_sv = np.abs(np.linalg.eigh(h_end)[1].T @ sol.y[:, -1]) ** 2
    unitary_dev = float(np.max(np.abs(traj_u.final_populations - pops_sv)))
    assert unitary_dev < 1e-8

    # triplet reference exactly flat; sweet spot; analytic 1e gap
    f_half = 10.0 / (1000.0 * device.d)
    fields = np.linspace(-f_half, f_half, 201)
    table2 = spectrum_sweep(device, "2e", fields)
    assert np.ptp(table2.triplet) == 0.0
    split = table2.energies[:, 0] - table2.triplet
    i0 = len(fields) // 2
    sweet = abs((split[i0 + 1] - split[i0 - 1]) / (2 * (fields[1] - fields[0])))
    assert sweet < 1e-6
    gap_dev = 0.0
    for f in np.linspace(-f_half, f_half, 41):
        ev = np.linalg.eigvalsh(hamiltonian(device, "1e", f))
        gap_dev = max(gap_dev, abs(ev[1] - ev[0] - gap_1e(device, f)))
    assert gap_dev < 1e-12
    report(
        "criterion 5 (structural invariants)",
        f"trace drift {trace_drift:.1e}, min eig {min_eig:.1e}, gauge dev {gauge_dev:.1e}, "
        f"unitary dev {unitary_dev:.1e}, sweet-spot slope {sweet:.1e} meV nm/V, "
        f"gap formula dev {gap_dev:.1e} meV",
    )


def test_criterion_6_microscopics(device, tables_1e):
    """Wave-function, Coulomb, spectral-density and correlation checks."""
    # |t_e| = half the bonding-antibonding splitting
    basis = device.axial
    te_dev = abs(abs(basis.t_e) - basis.splitting / 2.0)
    assert te_dev < 1e-6

    # log t_e linear in w over the large-w half
    widths = np.linspace(2.0, 10.0, 9)
    te_w = [abs(solve_axial_basis(PotentialSpec(barrier_width=w)).t_e) for w in widths]
    sel = widths >= 6.0
    coeff = np.polyfit(widths[sel], np.log(te_w)[sel], 1)
    resid = np.log(te_w)[sel] - np.polyval(coeff, widths[sel])
    r2 = 1.0 - np.sum(resid**2) / np.sum((np.log(te_w)[sel] - np.mean(np.log(te_w)[sel])) ** 2)
    assert r2 > 0.99

    # V_BT approaches the point-charge energy at large separation
    from qdmsim.constants import E2_OVER_4PI_EPS0
    from qdmsim.coulomb import coulomb_matrix_element

    wide = solve_axial_basis(PotentialSpec(barrier_width=25.0, n_points=6001))
    v_bt = coulomb_matrix_element("B", "T", wide, MAT.beta_e, MAT.eps_r)
    point = E2_OVER_4PI_EPS0 / MAT.eps_r / wide.spec.dot_separation
    pc_rel = abs(v_bt / point - 1.0)
    assert pc_rel < 0.05

    # Gram positivity of I_munu at every grid frequency
    total = tables_1e.imunu_total()
    min_ev = 0.0
    for idx in range(len(tables_1e.omega)):
        ev = np.linalg.eigvalsh(total[idx])
        floor = -1e-12 * max(np.trace(total[idx]), 1e-30)
        assert ev[0] >= floor
        min_ev = min(min_ev, ev[0])

    # branch ordering of the resonant spectral density
    m = np.array([0.5, 0.0, -0.5])
    curves = {b: np.einsum("i,kij,j->k", m, tables_1e.folded[b], m) for b in BRANCHES}
    tot_curve = sum(curves.values())
    i_small = np.searchsorted(tables_1e.omega_mev, 0.2)
    assert curves["TA1"][i_small] + curves["TA2"][i_small] > curves["LA_DP"][i_small]
    i_peak = int(np.argmax(tot_curve))
    assert all(curves["LA_DP"][i_peak] > curves[b][i_peak] for b in ("LA_PE", "TA1", "TA2"))

    # bath correlation decays within 5 ps for the Fig. 9/10 width range
    worst_c = 0.0
    for w in (2.0, 4.0, 7.5314, 10.0):
        ab = solve_axial_basis(PotentialSpec(barrier_width=w))
        tabs = spectral_density_tables(ab, MAT, omega_max_mev=30.0, n_omega=1200)
        j = np.einsum("i,kij,j->k", m, tabs.folded_total(), m)
        tau = np.linspace(0.0, 6.0, 121)
        c_abs2 = np.abs(correlation_function(tabs.omega, j, 10.0, tau)) ** 2
        tail = c_abs2[np.searchsorted(tau, 5.0):] / c_abs2[0]
        worst_c = max(worst_c, float(tail.max()))
    assert worst_c < 0.01
    report(
        "criterion 6 (microscopics)",
        f"|t_e| vs splitting dev {te_dev:.1e} meV; log t_e R^2 = {r2:.4f}; "
        f"point-charge dev {100 * pc_rel:.1f}%; I PSD (min ev {min_ev:.1e}); "
        f"branch ordering ok; |C(5ps)|^2/|C(0)|^2 <= {worst_c:.1e}",
    )


def test_criterion_7_temperature_ordering(device, tables_2e):
    """Slow-speed fidelity strictly decreasing in T; fast-speed T-insensitive."""
    temps = (4.0, 10.0, 20.0, 30.0)
    slow, fast = [], []
    for temp in temps:
        slow.append(run_point(device, "2e", 1e-3, temp, True, tables_2e).fidelity)
        fast.append(run_point(device, "2e", 0.5, temp, True, tables_2e).fidelity)
    assert all(a > b for a, b in zip(slow, slow[1:]))
    fast_spread = max(fast) - min(fast)
    assert fast_spread < 0.02
    report(
        "criterion 7 (temperature ordering)",
        "slow-v fidelities " + "/".join(f"{f:.3f}" for f in slow) + f" at T = {temps} K; "
        f"fast-v spread {fast_spread:.4f}",
    )
