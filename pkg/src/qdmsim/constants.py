"""Physical constants in the internal unit system: meV, nm, ps, K.

All quantities in this package are expressed in these units unless a name
says otherwise.  Electric fields are V/nm; an electron moved across 1 nm by
1 V/nm picks up 1000 meV, hence the EV_PER_VNM factor in detuning formulas.
"""

import math

# Reduced Planck constant, meV*ps
HBAR = 0.6582119569

# Boltzmann constant, meV/K
KB = 0.08617333262

# Free electron mass, meV*ps^2/nm^2  (m0 c^2 / c^2)
ELECTRON_MASS_MEV_C2 = 0.51099895000e9
SPEED_OF_LIGHT_NM_PS = 2.99792458e5
M0 = ELECTRON_MASS_MEV_C2 / SPEED_OF_LIGHT_NM_PS**2

# hbar^2 / (2 m0), meV*nm^2
HBAR2_OVER_2M0 = HBAR**2 / (2.0 * M0)

# Coulomb constant e^2/(4 pi eps0), meV*nm
E2_OVER_4PI_EPS0 = 1439.96454856

# e/eps0 in V*nm*nm^2... expressed as the piezo conversion below instead.

# Conversion: (d_p [C/m^2] * e / eps0) -> meV/nm.
# d_p*e/eps0 has SI units J/m; 1 J/m = 6.241509074e21 meV / 1e9 nm.
_E_CHARGE_C = 1.602176634e-19
_EPS0_SI = 8.8541878128e-12
_JOULE_TO_MEV = 1.0 / _E_CHARGE_C * 1.0e3
PIEZO_SI_TO_MEV_PER_NM = _E_CHARGE_C / _EPS0_SI * _JOULE_TO_MEV / 1.0e9

# Conversion: mass density kg/m^3 -> meV*ps^2/nm^5
DENSITY_SI_TO_INTERNAL = _JOULE_TO_MEV * 1.0e24 / 1.0e18 / 1.0e27

# Detuning scale: e * (1 V/nm) * (1 nm) = 1000 meV
EV_PER_VNM = 1000.0

TWO_PI = 2.0 * math.pi
