"""Compiled inner loops for the time-dependent Bloch-Redfield propagation.

Everything here mirrors the reference implementation in redfield.py; the
tests assert bit-level agreement of the drift and close agreement of full
trajectories.  The density matrix is propagated in the fixed charge basis;
each drift evaluation rediagonalizes H(t), assembles the thermal rates from
the folded spectral-density tables, applies the dissipator in the
instantaneous eigenbasis, and rotates back.

Status codes: 0 ok, 1 transition frequency beyond the table range,
2 positivity violation, 3 step size underflow.
"""

import math

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_DP_A = np.zeros((7, 7))
_DP_A[1, 0] = 1.0 / 5.0
_DP_A[2, :2] = (3.0 / 40.0, 9.0 / 40.0)
_DP_A[3, :3] = (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0)
_DP_A[4, :4] = (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0)
_DP_A[5, :5] = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_DP_A[6, :6] = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
_DP_B5 = _DP_A[6].copy()  # 5th-order weights (FSAL)
_DP_E = np.array(
    [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ]
)


@njit(cache=True)
def _field_scale(t, sched_kind, k):
    """Dimensionless profile: -tanh(kt) (invert) or tanh(kt)-1 (to resonance)."""
    if sched_kind == 0:
        return -math.tanh(k * t)
    return math.tanh(k * t) - 1.0


@njit(cache=True)
def _bose(w_abs, temp, hbar, kb):
    x = hbar * w_abs / (kb * temp)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


@njit(cache=True)
def _interp_tables(w_abs, omega_tab, i3_tab, out):
    """Linear interpolation of the (3,3) folded table slice at w_abs."""
    n = omega_tab.shape[0]
    if w_abs > omega_tab[n - 1]:
        return 1
    idx = np.searchsorted(omega_tab, w_abs)
    if idx <= 0:
        for p in range(3):
            for q in range(3):
                out[p, q] = i3_tab[0, p, q]
        return 0
    x0 = omega_tab[idx - 1]
    x1 = omega_tab[idx]
    f = (w_abs - x0) / (x1 - x0)
    for p in range(3):
        for q in range(3):
            out[p, q] = i3_tab[idx - 1, p, q] * (1.0 - f) + i3_tab[idx, p, q] * f
    return 0


@njit(cache=True)
def _apply_pair(drho_e, rho_e, g, ca, cb, n):
    """Accumulate g * D[A_ca, A_cb] rho in the eigenbasis.

    A_c = |j><i| for channel c = i*n + j; linear extension of
    (A_b rho A_a^+ + A_a rho A_b^+ - A_a^+ A_b rho - rho A_b^+ A_a)/2.
    """
    ia = ca // n
    ja = ca % n
    ib = cb // n
    jb = cb % n
    half = 0.5 * g
    drho_e[jb, ja] += half * rho_e[ib, ia]
    drho_e[ja, jb] += half * rho_e[ia, ib]
    if ja == jb:
        for m in range(n):
            drho_e[ia, m] -= half * rho_e[ib, m]
            drho_e[m, ia] -= half * rho_e[m, ib]


@njit(cache=True)
def drift_kernel(
    t,
    rho,
    h0,
    h1,
    sched_kind,
    edf_scale,
    k,
    o_fold,
    omega_tab,
    i3_tab,
    s3,
    temp,
    diss_on,
    pure_deph,
    secular_tol,
    full_sum,
    hbar,
    kb,
    gauge_signs,
):
    """One evaluation of d(rho)/dt in the fixed basis.

    gauge_signs: per-eigenvector signs applied after diagonalization;
    observables are invariant, which the gauge test exploits.
    """
    n = rho.shape[0]
    edf = edf_scale * _field_scale(t, sched_kind, k)
    h = h0 + edf * h1
    evals, vecs = np.linalg.eigh(h)
    for c in range(n):
        if gauge_signs[c] < 0:
            for r in range(n):
                vecs[r, c] = -vecs[r, c]

    vc = vecs.astype(np.complex128)
    rho_e = vc.T @ rho @ vc

    drho_e = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            drho_e[i, j] = -1j / hbar * (evals[i] - evals[j]) * rho_e[i, j]

    if diss_on:
        n_ch = n * n
        m_rows = np.empty((n_ch, 3))
        w_ch = np.empty(n_ch)
        for i in range(n):
            for j in range(n):
                c = i * n + j
                w_ch[c] = (evals[i] - evals[j]) / hbar
                for p in range(3):
                    acc = 0.0
                    for a in range(n):
                        for b in range(n):
                            acc += vecs[a, i] * o_fold[p, a, b] * vecs[b, j]
                    m_rows[c, p] = acc

        i3w = np.empty((3, 3))
        if full_sum:
            # literal double sum: gamma_{alpha beta} evaluated at omega_alpha
            for ca in range(n_ch):
                wa = w_ch[ca]
                if abs(wa) < secular_tol:
                    if not pure_deph:
                        continue
                    for p in range(3):
                        for q in range(3):
                            i3w[p, q] = 2.0 * math.pi * kb * temp / hbar * s3[p, q]
                else:
                    if _interp_tables(abs(wa), omega_tab, i3_tab, i3w) != 0:
                        return drho_e, 1
                    nb = _bose(abs(wa), temp, hbar, kb)
                    factor = 2.0 * math.pi * ((nb + 1.0) if wa > 0.0 else nb)
                    for p in range(3):
                        for q in range(3):
                            i3w[p, q] = factor * i3w[p, q]
                for cb in range(n_ch):
                    g = 0.0
                    for p in range(3):
                        for q in range(3):
                            g += m_rows[ca, p] * i3w[p, q] * m_rows[cb, q]
                    if g != 0.0:
                        _apply_pair(drho_e, rho_e, g, ca, cb, n)
        else:
            # secular clusters: cross terms only within near-degenerate groups,
            # rates at the cluster-mean frequency
            order = np.argsort(w_ch)
            start = 0
            while start < n_ch:
                stop = start + 1
                while stop < n_ch and w_ch[order[stop]] - w_ch[order[stop - 1]] < secular_tol:
                    stop += 1
                w_mean = 0.0
                for s in range(start, stop):
                    w_mean += w_ch[order[s]]
                w_mean /= stop - start

                dephasing = abs(w_mean) < secular_tol
                if dephasing and not pure_deph:
                    start = stop
                    continue
                if dephasing:
                    for p in range(3):
                        for q in range(3):
                            i3w[p, q] = 2.0 * math.pi * kb * temp / hbar * s3[p, q]
                else:
                    if _interp_tables(abs(w_mean), omega_tab, i3_tab, i3w) != 0:
                        return drho_e, 1
                    nb = _bose(abs(w_mean), temp, hbar, kb)
                    factor = 2.0 * math.pi * ((nb + 1.0) if w_mean > 0.0 else nb)
                    for p in range(3):
                        for q in range(3):
                            i3w[p, q] = factor * i3w[p, q]
                for sa in range(start, stop):
                    ca = order[sa]
                    for sb in range(start, stop):
                        cb = order[sb]
                        g = 0.0
                        for p in range(3):
                            for q in range(3):
                                g += m_rows[ca, p] * i3w[p, q] * m_rows[cb, q]
                        if g != 0.0:
                            _apply_pair(drho_e, rho_e, g, ca, cb, n)
                start = stop

    drho = vc @ drho_e @ vc.T
    return drho, 0


@njit(cache=True)
def _lcg_next(state):
    return state * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)


@njit(cache=True)
def propagate_kernel(
    rho0,
    t0,
    t1,
    h0,
    h1,
    sched_kind,
    edf_scale,
    k,
    o_fold,
    omega_tab,
    i3_tab,
    s3,
    temp,
    diss_on,
    pure_deph,
    secular_tol,
    full_sum,
    atol,
    h_max,
    positivity_tol,
    sample_times,
    gauge_seed,
    hbar,
    kb,
):
    """Adaptive Dormand-Prince integration of the drift over [t0, t1].

    Returns (status, rho_final, t_reached, n_steps, n_accepted, n_samples,
    samples_t, samples_rho, samples_mineig).  Samples are written at the
    first accepted step past each requested time, stamped with the actual
    step time.
    """
    n = rho0.shape[0]
    y = rho0.copy()
    t = t0
    n_samp = sample_times.shape[0]
    samples_t = np.empty(n_samp)
    samples_rho = np.empty((n_samp, n, n), dtype=np.complex128)
    samples_mineig = np.empty(n_samp)
    samp_ptr = 0

    gauge_state = np.uint64(gauge_seed if gauge_seed > 0 else 1)
    randomize_gauge = gauge_seed > 0
    gauge_signs = np.ones(n)

    ks = np.empty((7, n, n), dtype=np.complex128)
    h = min(h_max, 1e-2)
    if h > t1 - t0:
        h = t1 - t0
    max_steps = 200_000_000
    n_steps = 0
    n_accepted = 0

    d0, status = drift_kernel(
        t, y, h0, h1, sched_kind, edf_scale, k, o_fold, omega_tab, i3_tab, s3,
        temp, diss_on, pure_deph, secular_tol, full_sum, hbar, kb, gauge_signs,
    )
    if status != 0:
        return status, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig
    ks[0] = d0

    while t < t1 and n_steps < max_steps:
        if randomize_gauge:
            for c in range(n):
                gauge_state = _lcg_next(gauge_state)
                gauge_signs[c] = 1.0 if (gauge_state >> np.uint64(63)) == np.uint64(0) else -1.0
        if t + h > t1:
            h = t1 - t
            # sub-roundoff sliver: the state change would be below any
            # tolerance, so declare arrival instead of underflowing
            if h <= 1e-12 * max(abs(t1), 1.0):
                t = t1
                break
        n_steps += 1
        for s in range(1, 7):
            yt = y.copy()
            for m in range(s):
                a = _DP_A[s, m]
                if a != 0.0:
                    yt += (h * a) * ks[m]
            d, status = drift_kernel(
                t + _DP_C[s] * h, yt, h0, h1, sched_kind, edf_scale, k, o_fold,
                omega_tab, i3_tab, s3, temp, diss_on, pure_deph, secular_tol,
                full_sum, hbar, kb, gauge_signs,
            )
            if status != 0:
                return status, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig
            ks[s] = d

        err = 0.0
        for i in range(n):
            for j in range(n):
                e = (
                    _DP_E[0] * ks[0, i, j]
                    + _DP_E[2] * ks[2, i, j]
                    + _DP_E[3] * ks[3, i, j]
                    + _DP_E[4] * ks[4, i, j]
                    + _DP_E[5] * ks[5, i, j]
                    + _DP_E[6] * ks[6, i, j]
                )
                mag = abs(h * e)
                if mag > err:
                    err = mag

        if err <= atol:
            # accept; the stage-7 argument equals the 5th-order solution
            y_new = y.copy()
            for m in range(6):
                b = _DP_B5[m]
                if b != 0.0:
                    y_new += (h * b) * ks[m]
            t += h
            for i in range(n):
                for j in range(i, n):
                    avg = 0.5 * (y_new[i, j] + np.conj(y_new[j, i]))
                    y_new[i, j] = avg
                    y_new[j, i] = np.conj(avg)
            y = y_new
            n_accepted += 1
            ev = np.linalg.eigvalsh(y)
            if ev[0] < -positivity_tol:
                return 2, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig
            while samp_ptr < n_samp and sample_times[samp_ptr] <= t:
                samples_t[samp_ptr] = t
                samples_rho[samp_ptr] = y
                samples_mineig[samp_ptr] = ev[0]
                samp_ptr += 1
            d, status = drift_kernel(
                t, y, h0, h1, sched_kind, edf_scale, k, o_fold, omega_tab,
                i3_tab, s3, temp, diss_on, pure_deph, secular_tol, full_sum,
                hbar, kb, gauge_signs,
            )
            if status != 0:
                return status, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig
            ks[0] = d

        if err == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * (atol / err) ** 0.2
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
        h *= fac
        if h > h_max:
            h = h_max
        if h < 1e-14 * max(abs(t), 1.0):
            return 3, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig

    return 0, y, t, n_steps, n_accepted, samp_ptr, samples_t, samples_rho, samples_mineig
