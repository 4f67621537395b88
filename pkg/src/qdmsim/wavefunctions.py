"""Growth-direction double-well problem for a two-dot molecule.

Solves the 1D effective-mass Schroedinger equation on a uniform grid with
central finite differences, builds the orthogonal localized basis from the
bonding/antibonding doublet, and extracts the tunnel matrix element.  The
confinement is two square wells of depth ``E_d`` and width ``h`` separated
by a barrier of width ``w``; outside the wells the potential is zero, so
bound states have negative energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .constants import HBAR2_OVER_2M0


class InsufficientBoundStatesError(RuntimeError):
    """Raised when the double well binds fewer than two states."""


@dataclass(frozen=True)
class PotentialSpec:
    """Geometry and material inputs of the growth-direction potential.

    well_depth, dot_height, barrier_width in meV/nm; effective_mass in units
    of the free-electron mass.  The grid spans the double well symmetrically
    with ``margin`` nm of vacuum on each side (hard walls at the box edge).
    """

    well_depth: float = 350.0
    dot_height: float = 4.5
    barrier_width: float = 4.0
    effective_mass: float = 0.065
    margin: float = 15.0
    n_points: int = 4001

    def __post_init__(self):
        if self.well_depth <= 0:
            raise ValueError("well_depth must be positive")
        if self.dot_height <= 0:
            raise ValueError("dot_height must be positive")
        if self.barrier_width < 0:
            raise ValueError("barrier_width must be non-negative")
        if self.effective_mass <= 0:
            raise ValueError("effective_mass must be positive")
        if self.margin < 10.0:
            raise ValueError("margin must be at least 10 nm of decay room")
        if self.n_points < 1000:
            raise ValueError("n_points must be at least 1000")

    @property
    def z_half(self) -> float:
        return self.barrier_width / 2.0 + self.dot_height + self.margin

    def grid(self) -> np.ndarray:
        """Uniform z grid, midpoint of the barrier at z = 0."""
        return np.linspace(-self.z_half, self.z_half, self.n_points)

    def potential(self, z: np.ndarray) -> np.ndarray:
        """Double-well profile: -E_d inside either dot, 0 elsewhere.

        Each grid cell gets the depth weighted by its overlap with the
        wells, so the sampled potential (and everything derived from it)
        varies smoothly with the geometry instead of jumping whenever a
        well edge crosses a grid node.
        """
        dz = z[1] - z[0]
        w2 = self.barrier_width / 2.0
        u = np.zeros_like(z)
        for a, b in ((-(w2 + self.dot_height), -w2), (w2, w2 + self.dot_height)):
            overlap = np.minimum(b, z + dz / 2.0) - np.maximum(a, z - dz / 2.0)
            u -= self.well_depth * np.clip(overlap / dz, 0.0, 1.0)
        return u

    @property
    def dot_separation(self) -> float:
        """Center-to-center dot distance d = h + w."""
        return self.dot_height + self.barrier_width


@dataclass(frozen=True)
class AxialBasis:
    """Axial eigenfunctions and the localized basis on the shared grid.

    All functions are L2-normalized with respect to the trapezoid rule on
    ``z``; since hard-wall eigenvectors vanish at the box edges this
    coincides with the plain Euclidean inner product times dz.
    """

    spec: PotentialSpec
    z: np.ndarray = field(repr=False)
    xi_plus: np.ndarray = field(repr=False)
    xi_minus: np.ndarray = field(repr=False)
    xi_B: np.ndarray = field(repr=False)
    xi_T: np.ndarray = field(repr=False)
    eps_plus: float = 0.0
    eps_minus: float = 0.0
    t_e: float = 0.0

    @property
    def dz(self) -> float:
        return self.z[1] - self.z[0]

    @property
    def splitting(self) -> float:
        return self.eps_minus - self.eps_plus

    def overlap(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.trapezoid(f * g, self.z))

    def dump_csv(self, path) -> None:
        """Debug dump of the four axial functions (columns in 1/sqrt(nm))."""
        header = "z_nm,xi_plus,xi_minus,xi_B,xi_T"
        data = np.column_stack([self.z, self.xi_plus, self.xi_minus, self.xi_B, self.xi_T])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10g")


@dataclass(frozen=True)
class InPlaneGround:
    """Harmonic in-plane ground state, characterized by beta_e = 1/l_osc."""

    beta_e: float

    def __post_init__(self):
        if self.beta_e <= 0:
            raise ValueError("beta_e must be positive")


def _hamiltonian_bands(spec: PotentialSpec):
    z = spec.grid()
    dz = z[1] - z[0]
    kin = HBAR2_OVER_2M0 / spec.effective_mass / dz**2
    diag = spec.potential(z) + 2.0 * kin
    off = np.full(spec.n_points - 1, -kin)
    return z, diag, off


def apply_hamiltonian(spec: PotentialSpec, xi: np.ndarray) -> np.ndarray:
    """Apply the discrete Hamiltonian (same stencil as the eigensolve)."""
    _, diag, off = _hamiltonian_bands(spec)
    out = diag * xi
    out[:-1] += off * xi[1:]
    out[1:] += off * xi[:-1]
    return out


def solve_axial_eigenstates(spec: PotentialSpec):
    """Two lowest eigenpairs of the finite-difference double well.

    Returns (eps_plus, eps_minus, xi_plus, xi_minus) with energies in meV
    and real normalized eigenfunctions.  Raises
    InsufficientBoundStatesError when either state is unbound (E >= 0).
    """
    z, diag, off = _hamiltonian_bands(spec)
    dz = z[1] - z[0]
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 1))
    eps_plus, eps_minus = float(vals[0]), float(vals[1])
    if eps_minus >= 0.0:
        raise InsufficientBoundStatesError(
            f"double well binds fewer than two states (E0={eps_plus:.3f} meV, "
            f"E1={eps_minus:.3f} meV); deepen or widen the wells"
        )
    xi_plus = vecs[:, 0] / math.sqrt(dz)
    xi_minus = vecs[:, 1] / math.sqrt(dz)

    # Sign conventions: bonding state positive at the midpoint; antibonding
    # state positive on the bottom (low-z) side so xi_B localizes there.
    mid = spec.n_points // 2
    if xi_plus[mid] < 0:
        xi_plus = -xi_plus
    if np.trapezoid(xi_minus[:mid], z[:mid]) < 0:
        xi_minus = -xi_minus
    return eps_plus, eps_minus, xi_plus, xi_minus


def build_localized_basis(xi_plus: np.ndarray, xi_minus: np.ndarray):
    """Rotate the bonding/antibonding pair into bottom/top localized states.

    xi_B = (xi_+ + xi_-)/sqrt(2) peaks in the bottom (low-z) well given the
    sign conventions of solve_axial_eigenstates; xi_T is its mirror.
    """
    xi_B = (xi_plus + xi_minus) / math.sqrt(2.0)
    xi_T = (xi_plus - xi_minus) / math.sqrt(2.0)
    return xi_B, xi_T


def tunnel_matrix_element(spec: PotentialSpec, xi_B: np.ndarray, xi_T: np.ndarray) -> float:
    """<xi_B| H |xi_T> on the grid, in meV, sign as computed.

    With the localized-basis conventions used here this is
    (eps_plus - eps_minus)/2, i.e. negative for a double well.
    """
    z = spec.grid()
    return float(np.trapezoid(xi_B * apply_hamiltonian(spec, xi_T), z))


def solve_axial_basis(spec: PotentialSpec) -> AxialBasis:
    """Full pipeline: eigensolve, localize, tunnel element."""
    eps_plus, eps_minus, xi_plus, xi_minus = solve_axial_eigenstates(spec)
    xi_B, xi_T = build_localized_basis(xi_plus, xi_minus)
    # Orientation guard: xi_B must live in the bottom (low-z) well.
    z = spec.grid()
    mid = spec.n_points // 2
    if np.trapezoid(xi_B[:mid] ** 2, z[:mid]) < 0.5:
        xi_B, xi_T = xi_T, xi_B
        xi_minus = -xi_minus
    t_e = tunnel_matrix_element(spec, xi_B, xi_T)
    return AxialBasis(
        spec=spec,
        z=z,
        xi_plus=xi_plus,
        xi_minus=xi_minus,
        xi_B=xi_B,
        xi_T=xi_T,
        eps_plus=eps_plus,
        eps_minus=eps_minus,
        t_e=t_e,
    )


def barrier_width_for_tunnel_coupling(
    te_target: float,
    well_depth: float = 350.0,
    dot_height: float = 4.5,
    effective_mass: float = 0.065,
    w_lo: float = 0.25,
    w_hi: float = 15.0,
    rel_tol: float = 1e-3,
    n_points: int = 4001,
) -> float:
    """Invert |t_e|(w) by bisection at fixed well depth and dot height.

    |t_e| decays monotonically with the barrier width, so bisection on
    log|t_e| is safe.  Returns the width w such that the recomputed
    |t_e| matches ``te_target`` to ``rel_tol``.
    """
    if te_target <= 0:
        raise ValueError("te_target must be positive")

    def abs_te(w: float) -> float:
        spec = PotentialSpec(
            well_depth=well_depth,
            dot_height=dot_height,
            barrier_width=w,
            effective_mass=effective_mass,
            n_points=n_points,
        )
        return abs(solve_axial_basis(spec).t_e)

    f_lo, f_hi = abs_te(w_lo), abs_te(w_hi)
    if not (f_hi < te_target < f_lo):
        raise ValueError(
            f"te_target={te_target} meV outside attainable range "
            f"[{f_hi:.3e}, {f_lo:.3e}] for w in [{w_lo}, {w_hi}] nm"
        )
    target_log = math.log(te_target)
    for _ in range(60):
        w_mid = 0.5 * (w_lo + w_hi)
        f_mid = abs_te(w_mid)
        if abs(math.log(f_mid) - target_log) < rel_tol:
            return w_mid
        if f_mid > te_target:
            w_lo = w_mid
        else:
            w_hi = w_mid
    return 0.5 * (w_lo + w_hi)
