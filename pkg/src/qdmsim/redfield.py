"""Time-dependent Bloch-Redfield propagation of the charge density matrix.

The master equation is

    d rho/dt = -(i/hbar) [H(t), rho]
               + sum_{ab} gamma_{ab}(w_a(t), t) D[A_a(t), A_b(t)] rho,

with jump operators A_(i,j) = |Psi_j><Psi_i| between instantaneous
eigenstates and rates assembled from the single-particle spectral densities
through the occupation-transition matrix elements
M_{a,mu} = <Psi_i| a+_n a_m |Psi_j>.  Cross terms a != b are kept inside
near-degenerate frequency clusters (evaluated at the cluster mean), which
preserves Lindblad positivity; the literal full double sum of the printed
equation is available behind ``full_sum``.

``drift`` is the plain-numpy reference; ``propagate`` runs the compiled
kernel (bit-compatible drift, adaptive Dormand-Prince, per-step
hermitization and positivity monitoring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .constants import HBAR, KB, TWO_PI
from .hamiltonians import DeviceModel, FieldSchedule, hamiltonian, hamiltonian_parts, max_gap
from .phonons import PAIR_FOLD, PAIRS, SpectralTables

_SCHED_KIND = {"invert": 0, "to_resonance": 1}


@dataclass(frozen=True)
class BathSpec:
    """Thermal phonon environment: temperature plus precomputed tables."""

    temperature: float
    tables: SpectralTables
    pure_dephasing: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class SolverOptions:
    atol: float = 1e-8
    h_max_factor: float = 0.05  # ceiling = h_max_factor / k
    secular_tol_mev: float = 0.01
    full_sum: bool = False
    positivity_tol: float = 1e-5
    n_samples: int = 800
    gauge_seed: int = 0  # > 0 randomizes eigenvector signs per step
    readout_drift_tol: float = 1e-4
    max_extensions: int = 40
    backend: str = "numba"


def occupation_transition_matrices(sector: str) -> np.ndarray:
    """a+_n a_m for the four ordered pairs (BB, BT, TB, TT), shape (4, dim, dim).

    One electron: elementary matrix units.  Two-electron singlet sector:
    matrix elements in (|BB;s>, |BT;s>, |TT;s>); the inter-dot moves carry
    the sqrt(2) of the doubly-occupied configurations.
    """
    if sector == "1e":
        out = np.zeros((4, 2, 2))
        out[0, 0, 0] = 1.0  # a+_B a_B
        out[1, 0, 1] = 1.0  # a+_B a_T
        out[2, 1, 0] = 1.0  # a+_T a_B
        out[3, 1, 1] = 1.0  # a+_T a_T
        return out
    if sector == "2e":
        s2 = math.sqrt(2.0)
        o_bb = np.diag([2.0, 1.0, 0.0])
        o_bt = np.array([[0.0, s2, 0.0], [0.0, 0.0, s2], [0.0, 0.0, 0.0]])  # a+_B a_T
        o_tb = o_bt.T.copy()
        o_tt = np.diag([0.0, 1.0, 2.0])
        return np.stack([o_bb, o_bt, o_tb, o_tt])
    raise ValueError(f"unknown sector {sector!r}")


def fold_occupation(o_full: np.ndarray) -> np.ndarray:
    """Fold (BB, BT, TB, TT) onto the density products (BB, BT+TB, TT).

    Exact because the BT and TB transitions share one real form factor.
    """
    return np.stack([o_full[0], o_full[1] + o_full[2], o_full[3]])


@dataclass(frozen=True)
class EigenFrame:
    """Instantaneous eigensystem with continuity-fixed order and gauge."""

    t: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    overlap_with_prev: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def omega(self, i: int, j: int) -> float:
        return (self.eigenvalues[i] - self.eigenvalues[j]) / HBAR


def eigenframe(h: np.ndarray, t: float = 0.0, prev: Optional[EigenFrame] = None) -> EigenFrame:
    """Diagonalize symmetric H; align order and sign to the previous frame.

    Assignment by maximal overlap (falls back to ascending energies without
    a previous frame); signs fixed so diagonal overlaps are positive.
    """
    evals, evecs = np.linalg.eigh(h)
    overlap = None
    if prev is not None:
        ov = prev.eigenvectors.T @ evecs
        perm = np.full(len(evals), -1, dtype=int)
        taken = np.zeros(len(evals), dtype=bool)
        for ref in range(len(evals)):
            cand = np.argsort(-np.abs(ov[ref]))
            for c in cand:
                if not taken[c]:
                    perm[ref] = c
                    taken[c] = True
                    break
        evals = evals[perm]
        evecs = evecs[:, perm]
        ov = prev.eigenvectors.T @ evecs
        signs = np.where(np.diag(ov) < 0, -1.0, 1.0)
        evecs = evecs * signs
        overlap = prev.eigenvectors.T @ evecs
    else:
        # deterministic default gauge: largest-magnitude component positive
        for c in range(evecs.shape[1]):
            idx = np.argmax(np.abs(evecs[:, c]))
            if evecs[idx, c] < 0:
                evecs[:, c] = -evecs[:, c]
    return EigenFrame(t=t, eigenvalues=evals, eigenvectors=evecs, overlap_with_prev=overlap)


@dataclass(frozen=True)
class TransitionSet:
    """Jump-operator data for one frame: channels (i, j), frequencies, M rows."""

    frame: EigenFrame
    pairs: tuple  # ((i, j), ...) in channel order c = i*dim + j
    omegas: np.ndarray  # (n_ch,)
    m: np.ndarray  # (n_ch, 4) over PAIRS

    def jump_operator(self, channel: int) -> np.ndarray:
        i, j = self.pairs[channel]
        v = self.frame.eigenvectors
        return np.outer(v[:, j], v[:, i])


def build_transitions(frame: EigenFrame, occupation: np.ndarray) -> TransitionSet:
    """All ordered eigenstate pairs (including i = j) with their M rows."""
    dim = frame.dim
    v = frame.eigenvectors
    pairs = tuple((i, j) for i in range(dim) for j in range(dim))
    omegas = np.array([(frame.eigenvalues[i] - frame.eigenvalues[j]) / HBAR for i, j in pairs])
    m = np.empty((len(pairs), occupation.shape[0]))
    for c, (i, j) in enumerate(pairs):
        for mu in range(occupation.shape[0]):
            m[c, mu] = v[:, i] @ occupation[mu] @ v[:, j]
    return TransitionSet(frame=frame, pairs=pairs, omegas=omegas, m=m)


def _packed_tables(bath: BathSpec):
    tabs = bath.tables
    i3 = np.ascontiguousarray(tabs.folded_total())
    s3 = np.ascontiguousarray(tabs.slope_total())
    return np.ascontiguousarray(tabs.omega), i3, s3


def drift(
    rho: np.ndarray,
    t: float,
    schedule: FieldSchedule,
    device: DeviceModel,
    sector: str,
    bath: Optional[BathSpec],
    options: SolverOptions = SolverOptions(),
) -> np.ndarray:
    """Reference d(rho)/dt in the fixed basis (plain numpy, no compilation)."""
    h0, h1 = hamiltonian_parts(device, sector)
    edf = device.detuning_mev(schedule.field_at(t))
    h = h0 + edf * h1
    evals, vecs = np.linalg.eigh(h)
    rho_e = vecs.T @ rho @ vecs
    drho_e = -1j / HBAR * (evals[:, None] - evals[None, :]) * rho_e

    if bath is not None:
        omega_tab, i3_tab, s3 = _packed_tables(bath)
        o_fold = fold_occupation(occupation_transition_matrices(sector))
        dim = len(evals)
        n_ch = dim * dim
        w_ch = np.array([(evals[c // dim] - evals[c % dim]) / HBAR for c in range(n_ch)])
        m_rows = np.array(
            [
                [vecs[:, c // dim] @ o_fold[p] @ vecs[:, c % dim] for p in range(3)]
                for c in range(n_ch)
            ]
        )
        secular_tol = options.secular_tol_mev / HBAR

        def gamma_weight(w: float) -> np.ndarray:
            if abs(w) < secular_tol:
                if not bath.pure_dephasing:
                    return np.zeros((3, 3))
                return TWO_PI * KB * bath.temperature / HBAR * s3
            wa = abs(w)
            if wa > omega_tab[-1]:
                raise FrequencyRangeError(
                    f"transition frequency {wa * HBAR:.3f} meV beyond table range "
                    f"{omega_tab[-1] * HBAR:.3f} meV; rebuild tables with larger omega_max"
                )
            i3w = np.array(
                [[np.interp(wa, omega_tab, i3_tab[:, p, q]) for q in range(3)] for p in range(3)]
            )
            x = HBAR * wa / (KB * bath.temperature)
            nb = 0.0 if x > 700 else 1.0 / math.expm1(x)
            return TWO_PI * i3w * ((nb + 1.0) if w > 0 else nb)

        def apply_pair(g, ca, cb):
            ia, ja = ca // dim, ca % dim
            ib, jb = cb // dim, cb % dim
            half = 0.5 * g
            drho_e[jb, ja] += half * rho_e[ib, ia]
            drho_e[ja, jb] += half * rho_e[ia, ib]
            if ja == jb:
                drho_e[ia, :] -= half * rho_e[ib, :]
                drho_e[:, ia] -= half * rho_e[:, ib]

        if options.full_sum:
            for ca in range(n_ch):
                i3w = gamma_weight(w_ch[ca])
                for cb in range(n_ch):
                    g = m_rows[ca] @ i3w @ m_rows[cb]
                    if g != 0.0:
                        apply_pair(g, ca, cb)
        else:
            order = np.argsort(w_ch)
            start = 0
            while start < n_ch:
                stop = start + 1
                while stop < n_ch and w_ch[order[stop]] - w_ch[order[stop - 1]] < secular_tol:
                    stop += 1
                members = order[start:stop]
                i3w = gamma_weight(float(np.mean(w_ch[members])))
                for ca in members:
                    for cb in members:
                        g = m_rows[ca] @ i3w @ m_rows[cb]
                        if g != 0.0:
                            apply_pair(g, ca, cb)
                start = stop

    return vecs @ drho_e @ vecs.T


class FrequencyRangeError(RuntimeError):
    """A transition frequency fell outside the spectral tables."""


class PositivityError(RuntimeError):
    """The propagated state developed a negative eigenvalue beyond tolerance."""


class StepSizeError(RuntimeError):
    """The adaptive integrator underflowed its step size."""


_STATUS_ERRORS = {
    1: FrequencyRangeError,
    2: PositivityError,
    3: StepSizeError,
}


@dataclass(frozen=True)
class Trajectory:
    """Sampled switching run: density matrices and eigenbasis populations."""

    sector: str
    times: np.ndarray
    fields: np.ndarray
    rho: np.ndarray  # (n_t, dim, dim)
    populations: np.ndarray  # (n_t, dim), instantaneous eigenbasis
    trace_error: np.ndarray
    min_eigenvalue: np.ndarray
    final_rho: np.ndarray = field(repr=False, default=None)
    final_populations: np.ndarray = field(repr=False, default=None)
    n_steps: int = 0
    n_extensions: int = 0
    readout_converged: bool = True

    @property
    def dim(self) -> int:
        return self.rho.shape[1]


def initial_state(device: DeviceModel, sector: str, schedule: FieldSchedule, which: str) -> np.ndarray:
    """Projector on an instantaneous eigenstate at the schedule start.

    which: 'ground' (two-electron preparation) or 'upper' (one-electron
    inversion, the highest state of the 1e doublet).
    """
    h = hamiltonian(device, sector, schedule.field_at(schedule.t_start))
    frame = eigenframe(h, schedule.t_start)
    idx = 0 if which == "ground" else (1 if sector == "1e" else frame.dim - 1)
    v = frame.eigenvectors[:, idx]
    return np.outer(v, v).astype(np.complex128)


def populations_in_eigenbasis(rho: np.ndarray, h: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(h)
    return np.real(np.einsum("ai,ab,bi->i", vecs, rho, vecs))


def _require_tables_cover(device, sector, schedule, bath):
    if bath is None:
        return
    span = max_gap(device, sector, schedule)
    if span / HBAR > bath.tables.omega[-1]:
        raise FrequencyRangeError(
            f"spectral tables reach {bath.tables.omega_mev[-1]:.2f} meV but the sweep "
            f"spans transitions up to {span:.2f} meV; rebuild with larger omega_max"
        )


def _run_kernel(rho, t0, t1, h0, h1, sched, device, sector, bath, options, sample_times):
    omega_tab, i3_tab, s3 = (
        _packed_tables(bath)
        if bath is not None
        else (np.array([0.0, 1.0]), np.zeros((2, 3, 3)), np.zeros((3, 3)))
    )
    o_fold = np.ascontiguousarray(fold_occupation(occupation_transition_matrices(sector)))
    return _kernels.propagate_kernel(
        rho,
        t0,
        t1,
        np.ascontiguousarray(h0),
        np.ascontiguousarray(h1),
        _SCHED_KIND[sched.variant],
        device.detuning_mev(sched.f_max),
        sched.k,
        o_fold,
        omega_tab,
        i3_tab,
        s3,
        bath.temperature if bath is not None else 1.0,
        bath is not None,
        bath.pure_dephasing if bath is not None else False,
        options.secular_tol_mev / HBAR,
        options.full_sum,
        options.atol,
        options.h_max_factor / sched.k,
        options.positivity_tol,
        sample_times,
        options.gauge_seed,
        HBAR,
        KB,
    )


def propagate(
    rho0: np.ndarray,
    schedule: FieldSchedule,
    device: DeviceModel,
    sector: str,
    bath: Optional[BathSpec],
    options: SolverOptions = SolverOptions(),
) -> Trajectory:
    """Integrate one switching run and extend until the readout settles.

    After the schedule window the field is saturated; integration continues
    in windows of 1/k until the eigenbasis populations drift less than
    ``readout_drift_tol`` per window (operational 'after the switching').
    """
    rho0 = np.asarray(rho0, dtype=np.complex128)
    tr = float(np.real(np.trace(rho0)))
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"initial state trace {tr} != 1")
    _require_tables_cover(device, sector, schedule, bath)
    h0, h1 = hamiltonian_parts(device, sector)

    sample_times = np.linspace(schedule.t_start, schedule.t_end, options.n_samples)
    status, rho, t_reached, n_steps, _, n_filled, s_t, s_rho, s_mineig = _run_kernel(
        rho0, schedule.t_start, schedule.t_end, h0, h1, schedule, device, sector, bath, options, sample_times
    )
    if status != 0:
        raise _STATUS_ERRORS[status](
            f"propagation failed with status {status} at t = {t_reached:.3f} ps "
            f"after {n_steps} steps"
        )

    times = [s_t[:n_filled]]
    rhos = [s_rho[:n_filled]]
    mineigs = [s_mineig[:n_filled]]

    # readout extension: run extra windows of 1/k until populations settle
    def pops_at(rho_val, t_val):
        h = h0 + device.detuning_mev(schedule.field_at(t_val)) * h1
        return populations_in_eigenbasis(rho_val, h)

    n_ext = 0
    converged = True
    if bath is not None:
        window = 1.0 / schedule.k
        t_cur = t_reached
        p_prev = pops_at(rho, t_cur)
        empty = np.array([], dtype=float)
        for n_ext in range(1, options.max_extensions + 1):
            status, rho, t_cur, extra_steps, _, _, _, _, _ = _run_kernel(
                rho, t_cur, t_cur + window, h0, h1, schedule, device, sector, bath, options, empty
            )
            n_steps += extra_steps
            if status != 0:
                raise _STATUS_ERRORS[status](f"readout extension failed with status {status}")
            p_new = pops_at(rho, t_cur)
            drift_mag = float(np.max(np.abs(p_new - p_prev)))
            p_prev = p_new
            if drift_mag < options.readout_drift_tol:
                break
        else:
            converged = False
        t_reached = t_cur

    all_t = np.concatenate(times + [[t_reached]])
    all_rho = np.concatenate(rhos + [rho[None]])
    all_mineig = np.concatenate(mineigs + [[float(np.linalg.eigvalsh(rho)[0])]])
    # one accepted step can serve several sample slots; keep the first of each
    keep = np.concatenate([[True], np.diff(all_t) > 0.0])
    all_t, all_rho, all_mineig = all_t[keep], all_rho[keep], all_mineig[keep]
    fields = np.array([schedule.field_at(tv) for tv in all_t])
    pops = np.empty((len(all_t), rho.shape[0]))
    for idx, tv in enumerate(all_t):
        pops[idx] = pops_at(all_rho[idx], tv)
    trace_err = np.abs(np.real(np.einsum("kii->k", all_rho)) - 1.0)

    return Trajectory(
        sector=sector,
        times=all_t,
        fields=fields,
        rho=all_rho,
        populations=pops,
        trace_error=trace_err,
        min_eigenvalue=all_mineig,
        final_rho=rho,
        final_populations=pops[-1],
        n_steps=n_steps,
        n_extensions=n_ext,
        readout_converged=converged,
    )


def propagate_fixed_field(
    rho0: np.ndarray,
    device: DeviceModel,
    sector: str,
    field_vnm: float,
    bath: Optional[BathSpec],
    t_final: float,
    options: SolverOptions = SolverOptions(),
    n_samples: int = 400,
):
    """Relaxation at constant field: thermalization runs and rate fits.

    Implemented as a degenerate schedule (k chosen so tanh stays saturated
    over the window and the field equals ``field_vnm`` throughout).
    """
    # fold the constant detuning into h0 and run the kernel with zero drive
    rho0 = np.asarray(rho0, dtype=np.complex128)
    h0, h1 = hamiltonian_parts(device, sector)
    h_const = h0 + device.detuning_mev(field_vnm) * h1
    sample_times = np.linspace(0.0, t_final, n_samples)
    omega_tab, i3_tab, s3 = (
        _packed_tables(bath)
        if bath is not None
        else (np.array([0.0, 1.0]), np.zeros((2, 3, 3)), np.zeros((3, 3)))
    )
    o_fold = np.ascontiguousarray(fold_occupation(occupation_transition_matrices(sector)))
    status, rho, t_reached, n_steps, _, n_filled, s_t, s_rho, s_mineig = _kernels.propagate_kernel(
        rho0,
        0.0,
        t_final,
        np.ascontiguousarray(h_const),
        np.ascontiguousarray(h1),
        0,
        0.0,  # zero drive: H stays h_const
        1e-9,
        o_fold,
        omega_tab,
        i3_tab,
        s3,
        bath.temperature if bath is not None else 1.0,
        bath is not None,
        bath.pure_dephasing if bath is not None else False,
        options.secular_tol_mev / HBAR,
        options.full_sum,
        options.atol,
        max(t_final / 200.0, 1e-3),
        options.positivity_tol,
        sample_times,
        options.gauge_seed,
        HBAR,
        KB,
    )
    if status != 0:
        raise _STATUS_ERRORS[status](f"fixed-field propagation failed with status {status}")
    pops = np.empty((n_filled, rho.shape[0]))
    for idx in range(n_filled):
        pops[idx] = populations_in_eigenbasis(s_rho[idx], h_const)
    trace_err = np.abs(np.real(np.einsum("kii->k", s_rho[:n_filled])) - 1.0)
    return Trajectory(
        sector=sector,
        times=s_t[:n_filled],
        fields=np.full(n_filled, field_vnm),
        rho=s_rho[:n_filled].copy(),
        populations=pops,
        trace_error=trace_err,
        min_eigenvalue=s_mineig[:n_filled].copy(),
        final_rho=rho,
        final_populations=populations_in_eigenbasis(rho, h_const),
        n_steps=n_steps,
    )
