import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from qdmsim import _kernels
from qdmsim.constants import HBAR, KB, TWO_PI
from qdmsim.hamiltonians import (
    DeviceModel,
    FieldSchedule,
    hamiltonian,
    hamiltonian_parts,
    max_gap,
)
from qdmsim.phonons import MaterialParams, spectral_density_tables
from qdmsim.redfield import (
    BathSpec,
    FrequencyRangeError,
    SolverOptions,
    build_transitions,
    drift,
    eigenframe,
    fold_occupation,
    initial_state,
    occupation_transition_matrices,
    populations_in_eigenbasis,
    propagate,
    propagate_fixed_field,
)


@pytest.fixture(scope="module")
def device():
    return DeviceModel.from_tunnel_coupling(0.5, MaterialParams())


@pytest.fixture(scope="module")
def tables_1e(device):
    sched = FieldSchedule.from_speed("invert", 1.0, device)
    return spectral_density_tables(
        device.axial, device.material, omega_max_mev=3.0 * max_gap(device, "1e", sched)
    )


@pytest.fixture(scope="module")
def tables_2e(device):
    sched = FieldSchedule.from_speed("to_resonance", 1.0, device)
    return spectral_density_tables(
        device.axial, device.material, omega_max_mev=3.0 * max_gap(device, "2e", sched)
    )


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


# ------------------------------------------------- occupation matrices


def test_particle_number():
    o1 = occupation_transition_matrices("1e")
    assert np.allclose(o1[0] + o1[3], np.eye(2))
    o2 = occupation_transition_matrices("2e")
    assert np.allclose(o2[0] + o2[3], 2.0 * np.eye(3))


def test_2e_interdot_element():
    o2 = occupation_transition_matrices("2e")
    # <BT;s| a+_T a_B |BB;s> = sqrt(2)
    assert o2[2][1, 0] == pytest.approx(math.sqrt(2.0))
    assert o2[2][2, 1] == pytest.approx(math.sqrt(2.0))


def test_tunneling_reconstruction(device):
    """-t_e (a+_B a_T + h.c.) reproduces the printed off-diagonal structure."""
    o2 = occupation_transition_matrices("2e")
    h_tun = -device.t_e * (o2[1] + o2[2])
    h_full = hamiltonian(device, "2e", 0.0)
    off = h_full - np.diag(np.diag(h_full))
    assert np.allclose(h_tun, off, atol=1e-14)
    assert h_tun[0, 2] == 0.0


# --------------------------------------------------------- eigenframes


def test_eigenframe_continuity(device):
    h_a = hamiltonian(device, "1e", 1e-4)
    h_b = hamiltonian(device, "1e", 1.05e-4)
    f_a = eigenframe(h_a, 0.0)
    f_b = eigenframe(h_b, 1.0, prev=f_a)
    assert np.all(np.diag(f_b.overlap_with_prev) > 0.99)
    assert f_b.eigenvalues[0] < f_b.eigenvalues[1]


def test_transitions_selection_rule(device, tables_1e):
    h = hamiltonian(device, "1e", 0.0)
    frame = eigenframe(h, 0.0)
    ts = build_transitions(frame, occupation_transition_matrices("1e"))
    # A_(i,j) = |Psi_j><Psi_i|
    for c, (i, j) in enumerate(ts.pairs):
        a = ts.jump_operator(c)
        v = frame.eigenvectors
        assert np.allclose(a, np.outer(v[:, j], v[:, i]), atol=1e-14)
        assert ts.omegas[c] == pytest.approx(frame.omega(i, j))


def test_m_rows_at_saturation(device):
    sched = FieldSchedule.from_speed("invert", 0.02, device)
    h = hamiltonian(device, "1e", sched.field_at(sched.t_start))
    frame = eigenframe(h, sched.t_start)
    ts = build_transitions(frame, occupation_transition_matrices("1e"))
    c01 = ts.pairs.index((0, 1))
    mixing = device.t_e / device.detuning_mev(sched.f_max)
    # inter-dot move dominates; intra-dot entries are eigenvector mixing
    inter = max(abs(ts.m[c01, 1]), abs(ts.m[c01, 2]))
    intra = max(abs(ts.m[c01, 0]), abs(ts.m[c01, 3]))
    assert inter > 0.99
    assert intra < 1.5 * mixing


def test_m_gauge_covariance(device):
    h = hamiltonian(device, "1e", 2.3e-4)
    frame = eigenframe(h, 0.0)
    flipped = eigenframe(h, 0.0)
    vec = flipped.eigenvectors.copy()
    vec[:, 1] *= -1.0
    flipped = type(frame)(t=0.0, eigenvalues=flipped.eigenvalues, eigenvectors=vec)
    o = occupation_transition_matrices("1e")
    m_a = build_transitions(frame, o).m
    m_b = build_transitions(flipped, o).m
    # |M|^2 of diagonal pairs unchanged under sign re-gauging
    assert np.allclose(m_a**2, m_b**2, atol=1e-14)


# ------------------------------------------------------- drift algebra


@given(seed=st.integers(0, 2**31 - 1), sector=st.sampled_from(["1e", "2e"]))
@settings(max_examples=30, deadline=None)
def test_drift_preserves_trace_and_hermiticity(seed, sector, device, tables_1e, tables_2e):
    rng = np.random.default_rng(seed)
    bath = BathSpec(10.0, tables_1e if sector == "1e" else tables_2e)
    sched = FieldSchedule.from_speed("invert" if sector == "1e" else "to_resonance", 0.02, device)
    rho = random_density(rng, 2 if sector == "1e" else 3)
    t = rng.uniform(sched.t_start, sched.t_end)
    d = drift(rho, t, sched, device, sector, bath)
    assert abs(np.trace(d)) < 1e-13
    assert np.max(np.abs(d - d.conj().T)) < 1e-13


@pytest.mark.parametrize("sector", ["1e", "2e"])
@pytest.mark.parametrize("full_sum", [False, True])
def test_drift_kernel_matches_reference(sector, full_sum, device, tables_1e, tables_2e):
    rng = np.random.default_rng(11)
    tabs = tables_1e if sector == "1e" else tables_2e
    bath = BathSpec(10.0, tabs)
    variant = "invert" if sector == "1e" else "to_resonance"
    sched = FieldSchedule.from_speed(variant, 0.05, device)
    opts = SolverOptions(full_sum=full_sum)
    h0, h1 = hamiltonian_parts(device, sector)
    o_fold = np.ascontiguousarray(fold_occupation(occupation_transition_matrices(sector)))
    dim = 2 if sector == "1e" else 3
    for _ in range(5):
        rho = random_density(rng, dim)
        t = rng.uniform(sched.t_start, sched.t_end)
        ref = drift(rho, t, sched, device, sector, bath, opts)
        got, status = _kernels.drift_kernel(
            t,
            rho,
            h0,
            h1,
            0 if variant == "invert" else 1,
            device.detuning_mev(sched.f_max),
            sched.k,
            o_fold,
            np.ascontiguousarray(tabs.omega),
            np.ascontiguousarray(tabs.folded_total()),
            np.ascontiguousarray(tabs.slope_total()),
            10.0,
            True,
            True,
            opts.secular_tol_mev / HBAR,
            full_sum,
            HBAR,
            KB,
            np.ones(dim),
        )
        assert status == 0
        assert np.max(np.abs(ref - got)) < 1e-13 * max(1.0, np.max(np.abs(ref)))


# ------------------------------------------------------- propagation


def test_unitary_limit_matches_state_vector(device):
    """Rates off: density-matrix propagation equals Schroedinger evolution."""
    sched = FieldSchedule.from_speed("invert", 0.2, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    opts = SolverOptions(atol=1e-10)
    traj = propagate(rho0, sched, device, "1e", None, opts)

    h0, h1 = hamiltonian_parts(device, "1e")

    def rhs(t, psi):
        h = h0 + device.detuning_mev(sched.field_at(t)) * h1
        return -1j / HBAR * (h @ psi)

    # initial upper eigenstate
    evals, vecs = np.linalg.eigh(h0 + device.detuning_mev(sched.field_at(sched.t_start)) * h1)
    psi0 = vecs[:, 1].astype(complex)
    sol = solve_ivp(
        rhs, (sched.t_start, sched.t_end), psi0, rtol=1e-11, atol=1e-13, method="DOP853"
    )
    psi_end = sol.y[:, -1]
    h_end = h0 + device.detuning_mev(sched.field_at(sched.t_end)) * h1
    pops_sv = np.abs(np.linalg.eigh(h_end)[1].T @ psi_end) ** 2
    assert np.max(np.abs(traj.final_populations - pops_sv)) < 1e-8


def test_trace_and_positivity_invariants(device, tables_1e):
    sched = FieldSchedule.from_speed("invert", 0.02, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    traj = propagate(rho0, sched, device, "1e", BathSpec(10.0, tables_1e))
    assert traj.trace_error.max() < 1e-7
    assert traj.min_eigenvalue.min() > -1e-7
    assert np.allclose(traj.populations.sum(axis=1), 1.0, atol=1e-7)


def test_gauge_invariance_of_populations(device, tables_1e):
    sched = FieldSchedule.from_speed("invert", 0.05, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    bath = BathSpec(10.0, tables_1e)
    base = propagate(rho0, sched, device, "1e", bath, SolverOptions(gauge_seed=0))
    flip = propagate(rho0, sched, device, "1e", bath, SolverOptions(gauge_seed=12345))
    assert np.max(np.abs(base.final_populations - flip.final_populations)) < 1e-9


def test_gibbs_fixed_point_1e(device, tables_1e):
    """Detailed balance drives any initial state to the Boltzmann weights."""
    bath = BathSpec(10.0, tables_1e)
    h = hamiltonian(device, "1e", 0.0)
    evals = np.linalg.eigvalsh(h)
    boltz = np.exp(-(evals - evals[0]) / (KB * bath.temperature))
    boltz /= boltz.sum()
    rng = np.random.default_rng(3)
    for _ in range(2):
        rho0 = random_density(rng, 2)
        traj = propagate_fixed_field(rho0, device, "1e", 0.0, bath, t_final=600.0)
        assert np.max(np.abs(traj.final_populations - boltz)) < 1e-4


def test_gibbs_fixed_point_2e(device, tables_2e):
    # The third singlet sits ~25 meV up at the anticrossing, beyond the
    # phonon band: it is dynamically disconnected (and its Gibbs weight is
    # ~e-13), so the oracle starts inside the thermally connected doublet.
    bath = BathSpec(10.0, tables_2e)
    dv = device.coulomb.V_BB - device.coulomb.V_BT
    f_cross = -dv / (1000.0 * device.d)
    h = hamiltonian(device, "2e", f_cross)
    evals, vecs = np.linalg.eigh(h)
    boltz = np.exp(-(evals - evals[0]) / (KB * bath.temperature))
    boltz /= boltz.sum()
    # mixed populations plus a coherence within the active doublet
    rho_eig = np.array([[0.3, 0.2j, 0.0], [-0.2j, 0.7, 0.0], [0.0, 0.0, 0.0]])
    rho0 = vecs @ rho_eig @ vecs.T
    traj = propagate_fixed_field(rho0, device, "2e", f_cross, bath, t_final=800.0)
    assert np.max(np.abs(traj.final_populations - boltz)) < 1e-4


def golden_rule_rate(device, tables, temperature):
    """Independent relaxation-rate oracle at the 1e resonance.

    Eigenstates are (1, -+1)/sqrt(2); the folded M row of the decay channel
    is (1/2, 0, -1/2), so the rate is 2 pi J(2 t_e/hbar) (2 n + 1) with J
    taken straight from the tables.
    """
    w = 2.0 * device.t_e / HBAR
    m = np.array([0.5, 0.0, -0.5])
    tot = tables.folded_total()
    j = float(
        m
        @ np.array(
            [[np.interp(w, tables.omega, tot[:, p, q]) for q in range(3)] for p in range(3)]
        )
        @ m
    )
    n = 1.0 / math.expm1(HBAR * w / (KB * temperature))
    return TWO_PI * j * (2.0 * n + 1.0)


def test_relaxation_rate_matches_golden_rule(device, tables_1e):
    """Population decay toward Gibbs is exponential at 2 pi J (2n+1)."""
    bath = BathSpec(10.0, tables_1e)
    h = hamiltonian(device, "1e", 0.0)
    evals, vecs = np.linalg.eigh(h)
    rho0 = np.outer(vecs[:, 1], vecs[:, 1]).astype(complex)
    boltz = np.exp(-(evals - evals[0]) / (KB * bath.temperature))
    boltz /= boltz.sum()
    gamma = golden_rule_rate(device, tables_1e, bath.temperature)
    t_final = 6.0 / gamma
    traj = propagate_fixed_field(rho0, device, "1e", 0.0, bath, t_final=t_final, n_samples=400)
    p1 = traj.populations[:, 1]
    sel = (traj.times > 0.5 / gamma) & (traj.times < 4.0 / gamma)
    fit = np.polyfit(traj.times[sel], np.log(p1[sel] - boltz[1]), 1)
    assert -fit[0] == pytest.approx(gamma, rel=0.02)


def test_population_transfer_happens_near_resonance(device, tables_1e):
    """> 90% of the population change accumulates while |edF| < 10 t_e."""
    for v, bath in ((0.003, BathSpec(10.0, tables_1e)), (0.3, None)):
        sched = FieldSchedule.from_speed("invert", v, device)
        rho0 = initial_state(device, "1e", sched, "upper")
        traj = propagate(rho0, sched, device, "1e", bath)
        p0 = traj.populations[:, 0]
        dp = np.abs(np.diff(p0))
        edf = np.array([device.detuning_mev(f) for f in traj.fields])
        window = np.abs(edf[1:]) < 10.0 * device.t_e
        assert dp[window].sum() / dp.sum() > 0.9


def test_frequency_range_error(device):
    small_tables = spectral_density_tables(device.axial, device.material, omega_max_mev=2.0, n_omega=200)
    sched = FieldSchedule.from_speed("invert", 0.05, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    with pytest.raises(FrequencyRangeError):
        propagate(rho0, sched, device, "1e", BathSpec(10.0, small_tables))


def test_full_sum_mode_close_to_secular(device, tables_1e):
    sched = FieldSchedule.from_speed("invert", 0.05, device)
    rho0 = initial_state(device, "1e", sched, "upper")
    bath = BathSpec(10.0, tables_1e)
    sec = propagate(rho0, sched, device, "1e", bath, SolverOptions(full_sum=False))
    full = propagate(rho0, sched, device, "1e", bath, SolverOptions(full_sum=True))
    assert np.max(np.abs(sec.final_populations - full.final_populations)) < 0.02


def test_initial_state_selection(device):
    sched = FieldSchedule.from_speed("invert", 0.02, device)
    rho_up = initial_state(device, "1e", sched, "upper")
    h = hamiltonian(device, "1e", sched.field_at(sched.t_start))
    pops = populations_in_eigenbasis(rho_up, h)
    assert pops[1] == pytest.approx(1.0, abs=1e-12)
    sched2 = FieldSchedule.from_speed("to_resonance", 0.02, device)
    rho_g = initial_state(device, "2e", sched2, "ground")
    h2 = hamiltonian(device, "2e", sched2.field_at(sched2.t_start))
    pops2 = populations_in_eigenbasis(rho_g, h2)
    assert pops2[0] == pytest.approx(1.0, abs=1e-12)
    # ground state at edF = -2 e d f_max is top-dot doubly occupied
    assert np.real(rho_g[2, 2]) > 0.98
