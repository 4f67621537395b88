"""Electron-phonon coupling and single-particle spectral densities.

Acoustic phonons couple through the deformation potential (longitudinal
branch) and the piezoelectric potential (longitudinal and both transversal
branches).  The azimuthal integral of each |coupling|^2 is analytic (the
deformation/piezo cross term vanishes because one amplitude is real and the
other imaginary), leaving a polar-angle quadrature per frequency:

    I_munu^s(w) = w^2 / ((2 pi)^3 c_s^3 hbar^2)
                  * int_0^pi dtheta sin(theta) W_s(theta, q)
                    * exp(-(q sin theta)^2 / (2 beta^2))
                    * Re[F_mu^z* F_nu^z](q cos theta),   q = w/c_s.

The 1/hbar^2 makes the tables rate densities (1/ps), so the thermal rate is
gamma = 2 pi [J(-w) n(-w) + J(w) (n(w)+1)] with J assembled from the tables.
The polar measure carries w^2/c_s^3 from the linear dispersion; the printed
continuum prefactor w^2/c_s^2 is not dimensionally consistent and the cubic
power is what the delta-function substitution yields.

Piezoelectric branches vanish linearly at w -> 0, so the tables also carry
the analytic slopes dI/dw|_0 used for the pure-dephasing channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    DENSITY_SI_TO_INTERNAL,
    HBAR,
    KB,
    PIEZO_SI_TO_MEV_PER_NM,
    TWO_PI,
)
from .wavefunctions import AxialBasis

# Ordered single-particle transitions mu = (n, m); BT and TB share the same
# real-space product xi_B xi_T, hence the fold onto three density products.
PAIRS = ("BB", "BT", "TB", "TT")
PAIR_FOLD = (0, 1, 1, 2)
BRANCHES = ("LA_DP", "LA_PE", "TA1", "TA2")


@dataclass(frozen=True)
class MaterialParams:
    """Bulk and geometry parameters; defaults are the InAs set used throughout."""

    effective_mass: float = 0.065  # m0
    eps_r: float = 12.9
    density: float = 5300.0  # kg/m^3
    c_l: float = 5.15  # nm/ps
    c_t: float = 2.8  # nm/ps
    deformation_potential: float = -6.66  # eV
    piezo_constant: float = -0.16  # C/m^2
    osc_length: float = 5.4  # nm, 1/beta_e
    well_depth: float = 350.0  # meV
    dot_height: float = 4.5  # nm

    def __post_init__(self):
        if self.c_l <= 0 or self.c_t <= 0:
            raise ValueError("sound speeds must be positive")
        for name in ("effective_mass", "eps_r", "density", "osc_length", "well_depth", "dot_height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.deformation_potential == 0 or self.piezo_constant == 0:
            raise ValueError("coupling constants must be nonzero")

    @property
    def beta_e(self) -> float:
        """Inverse in-plane oscillator length, 1/nm."""
        return 1.0 / self.osc_length

    @property
    def dp_mev(self) -> float:
        """Deformation potential in meV."""
        return self.deformation_potential * 1000.0

    @property
    def piezo_mev_nm(self) -> float:
        """d_p e / (eps0 eps_r) in meV/nm."""
        return self.piezo_constant * PIEZO_SI_TO_MEV_PER_NM / self.eps_r

    @property
    def rho_internal(self) -> float:
        """Crystal density in meV ps^2 / nm^5."""
        return self.density * DENSITY_SI_TO_INTERNAL

    def branch_speed(self, branch: str) -> float:
        return self.c_l if branch.startswith("LA") else self.c_t


def coupling_prefactor(branch: str, q: float, theta: float, phi: float, material: MaterialParams, volume: float = 1.0) -> complex:
    """Bulk coupling amplitude G_s(q) in meV (for the given normalization volume).

    Deformation-potential part is real and grows like sqrt(q); the
    piezoelectric parts are imaginary and fall like 1/sqrt(q) with the
    branch-specific angular factors.
    """
    if q <= 0:
        raise ValueError("q must be positive; the q=0 limit is handled via the slope tables")
    rho = material.rho_internal
    pe = material.piezo_mev_nm
    if branch == "LA":
        c = material.c_l
        dp_term = math.sqrt(HBAR * q / (2.0 * rho * volume * c)) * material.dp_mev
        pe_term = (
            -1.5j
            * math.sqrt(HBAR / (2.0 * rho * volume * c * q))
            * pe
            * math.sin(2 * theta)
            * math.sin(theta)
            * math.sin(phi)
        )
        return dp_term + pe_term
    if branch == "TA1":
        c = material.c_t
        return -1j * math.sqrt(HBAR / (2.0 * rho * volume * c * q)) * pe * math.sin(2 * theta) * math.cos(2 * phi)
    if branch == "TA2":
        c = material.c_t
        return (
            -1j
            * math.sqrt(HBAR / (2.0 * rho * volume * c * q))
            * pe
            * (3.0 * math.cos(theta) ** 2 - 1.0)
            * math.sin(theta)
            * math.sin(2 * phi)
        )
    raise ValueError(f"unknown branch {branch!r}; use LA, TA1 or TA2")


def transition_form_factor(pair: str, q_rho: float, q_z: float, basis: AxialBasis, beta_e: float) -> complex:
    """F_mu(q) for mu = (n, m): in-plane Gaussian times the axial Fourier integral."""
    if pair not in PAIRS:
        raise ValueError(f"pair must be one of {PAIRS}")
    funcs = {"B": basis.xi_B, "T": basis.xi_T}
    xi_n, xi_m = funcs[pair[0]], funcs[pair[1]]
    axial = np.trapezoid(xi_n * xi_m * np.exp(1j * q_z * basis.z), basis.z)
    return complex(math.exp(-(q_rho**2) / (4.0 * beta_e**2)) * axial)


@dataclass(frozen=True)
class SpectralTables:
    """Branch-resolved single-particle spectral densities on a frequency grid.

    ``omega`` is angular frequency in 1/ps starting at 0; ``folded`` holds one
    (n_omega, 3, 3) rate-density array per branch in the density-product space
    (BB, BT, TT); ``slopes`` the analytic dI/dw at w = 0 of the PE branches.
    The full 4x4 transition-pair matrices are recovered via :meth:`imunu`.
    """

    omega: np.ndarray = field(repr=False)
    folded: dict = field(repr=False)
    slopes: dict = field(repr=False)
    beta_e: float = 0.0
    t_e: float = 0.0

    @property
    def omega_mev(self) -> np.ndarray:
        return self.omega * HBAR

    @property
    def omega_max(self) -> float:
        return float(self.omega[-1])

    def folded_total(self) -> np.ndarray:
        return sum(self.folded[b] for b in BRANCHES)

    def slope_total(self) -> np.ndarray:
        return sum(self.slopes[b] for b in BRANCHES)

    def imunu(self, branch: str) -> np.ndarray:
        """Expand a branch to the (n_omega, 4, 4) ordered-pair representation."""
        fold = self.folded[branch]
        idx = np.array(PAIR_FOLD)
        return fold[:, idx[:, None], idx[None, :]]

    def imunu_total(self) -> np.ndarray:
        idx = np.array(PAIR_FOLD)
        tot = self.folded_total()
        return tot[:, idx[:, None], idx[None, :]]


def _omega_grid(omega_max_mev: float, n_omega: int) -> np.ndarray:
    """Hybrid grid in 1/ps: log-dense below 2 meV, linear above, 0 prepended."""
    w_max = omega_max_mev / HBAR
    w_knee = min(2.0 / HBAR, w_max / 2.0)
    w_min = min(1e-3 / HBAR, w_knee / 100.0)
    n_log = max(n_omega * 2 // 5, 16)
    n_lin = n_omega - n_log
    log_part = np.geomspace(w_min, w_knee, n_log, endpoint=False)
    lin_part = np.linspace(w_knee, w_max, n_lin)
    return np.concatenate([[0.0], log_part, lin_part])


def _axial_products(basis: AxialBasis):
    return np.stack([basis.xi_B * basis.xi_B, basis.xi_B * basis.xi_T, basis.xi_T * basis.xi_T])


def _product_tables(basis: AxialBasis, qz_max: float, n_qz: int = 6000):
    """Re[F_p1^z* F_p2^z](|q_z|) for the three density products, on a dense grid."""
    z = basis.z
    dz = z[1] - z[0]
    prods = _axial_products(basis) * dz  # (3, n_z), trapezoid ~ plain sum (edges vanish)
    qz = np.linspace(0.0, qz_max, n_qz)
    fz = np.empty((3, n_qz), dtype=np.complex128)
    chunk = 256
    for start in range(0, n_qz, chunk):
        phase = np.exp(1j * np.outer(qz[start : start + chunk], z))
        fz[:, start : start + chunk] = prods @ phase.T
    r = np.real(np.conj(fz[:, None, :]) * fz[None, :, :])  # (3, 3, n_qz)
    return qz, np.ascontiguousarray(r)


def _angular_weights(theta: np.ndarray, material: MaterialParams):
    """Phi-integrated |G_s|^2 * V, up to the 1/q or q factor pulled out separately."""
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    sin_2t = np.sin(2.0 * theta)
    p2 = material.piezo_mev_nm**2
    rho = material.rho_internal
    return {
        # multiply by q afterwards
        "LA_DP": np.full_like(theta, TWO_PI * HBAR * material.dp_mev**2 / (2.0 * rho * material.c_l)),
        # multiply by 1/q afterwards
        "LA_PE": math.pi * 2.25 * HBAR * p2 / (2.0 * rho * material.c_l) * sin_2t**2 * sin_t**2,
        "TA1": math.pi * HBAR * p2 / (2.0 * rho * material.c_t) * sin_2t**2,
        "TA2": math.pi * HBAR * p2 / (2.0 * rho * material.c_t) * (3.0 * cos_t**2 - 1.0) ** 2 * sin_t**2,
    }


def spectral_density_tables(
    basis: AxialBasis,
    material: MaterialParams,
    omega_max_mev: float,
    n_omega: int = 2000,
    n_theta: int = 128,
) -> SpectralTables:
    """Build the branch-resolved I_munu tables by polar quadrature."""
    if omega_max_mev <= 0:
        raise ValueError("omega_max_mev must be positive")
    omega = _omega_grid(omega_max_mev, n_omega)
    beta = material.beta_e

    qz_max = omega[-1] / material.c_t
    qz_grid, r_tab = _product_tables(basis, qz_max)

    nodes, weights = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * math.pi * (nodes + 1.0)
    w_theta = 0.5 * math.pi * weights
    sin_t = np.sin(theta)
    abs_cos = np.abs(np.cos(theta))
    ang = _angular_weights(theta, material)

    n_w = len(omega)
    folded = {}
    slopes = {}
    for branch in BRANCHES:
        c_s = material.branch_speed(branch)
        q = omega[1:] / c_s  # skip w = 0
        qz_abs = np.outer(q, abs_cos)  # (n_w-1, n_theta)
        gauss = np.exp(-np.outer(q**2, sin_t**2) / (2.0 * beta**2))
        q_factor = q[:, None] if branch == "LA_DP" else 1.0 / q[:, None]
        weight = (w_theta * sin_t)[None, :] * ang[branch][None, :] * q_factor * gauss
        pref = omega[1:] ** 2 / (TWO_PI**3 * c_s**3 * HBAR**2)

        table = np.zeros((n_w, 3, 3))
        flat_qz = qz_abs.ravel()
        for p1 in range(3):
            for p2 in range(p1, 3):
                r_vals = np.interp(flat_qz, qz_grid, r_tab[p1, p2]).reshape(qz_abs.shape)
                vals = pref * np.sum(weight * r_vals, axis=1)
                table[1:, p1, p2] = vals
                table[1:, p2, p1] = vals
        folded[branch] = table

        if branch == "LA_DP":
            slopes[branch] = np.zeros((3, 3))  # DP vanishes like w^3
        else:
            a_s = float(np.sum(w_theta * sin_t * ang[branch]))
            # lim I/w: (w^2/c^3) * (1/q) = w/c^2, with ang carrying one 1/c_s
            slope = a_s / (TWO_PI**3 * c_s**2 * HBAR**2) * r_tab[:, :, 0]
            slopes[branch] = slope
    return SpectralTables(
        omega=omega,
        folded=folded,
        slopes=slopes,
        beta_e=beta,
        t_e=basis.t_e,
    )


def bose_occupation(omega: float, temperature: float) -> float:
    """n(w) = 1/(exp(hbar w / kT) - 1) for w > 0."""
    x = HBAR * omega / (KB * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def rate_gamma(j_at_omega: float, j_at_minus_omega: float, omega: float, temperature: float) -> float:
    """Thermal rate 2 pi [J(-w) n(-w) + J(w) (n(w)+1)] in 1/ps.

    ``j_at_omega`` is the one-sided spectral density at +w (zero for w <= 0)
    and ``j_at_minus_omega`` its value at -w, i.e. the table looked up at |w|
    when w is negative.  The w = 0 channel is handled by
    :func:`rate_gamma_dephasing` via the analytic slope.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if omega == 0.0:
        raise ValueError("use rate_gamma_dephasing for the zero-frequency channel")
    if omega > 0:
        return TWO_PI * j_at_omega * (bose_occupation(omega, temperature) + 1.0)
    return TWO_PI * j_at_minus_omega * bose_occupation(-omega, temperature)


def rate_gamma_dephasing(j_slope: float, temperature: float) -> float:
    """Zero-frequency limit 2 pi (kT/hbar) * lim_{w->0} J(w)/w.

    Both signs of the two-sided rate formula approach this value, since
    J(w)(n(w)+1) -> (kT/hbar) J'(0) + O(w) and J(-w)n(-w) likewise.
    """
    return TWO_PI * KB * temperature / HBAR * j_slope


def correlation_function(omega: np.ndarray, j_values: np.ndarray, temperature: float, tau: np.ndarray) -> np.ndarray:
    """Bath correlation diagnostic C(tau) with the printed w^2 J(w) weighting.

    Only the decay timescale of |C|^2 is consumed (Markovianity check);
    the integral is a plain trapezoid over the table grid.
    """
    x = HBAR * omega / (2.0 * KB * temperature)
    coth = np.ones_like(omega)
    nz = omega > 0
    coth[nz] = 1.0 / np.tanh(x[nz])
    w2j = omega**2 * j_values
    re_weight = w2j * coth
    re_weight[0] = 0.0  # w^2 J coth -> 0 as w -> 0 for J ~ S w
    out = np.empty(len(tau), dtype=np.complex128)
    for i, t in enumerate(tau):
        out[i] = np.trapezoid(np.cos(omega * t) * re_weight, omega) - 1j * np.trapezoid(
            np.sin(omega * t) * w2j, omega
        )
    return out
