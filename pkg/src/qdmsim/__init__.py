"""Charge dynamics of electrically switched quantum-dot molecules.

Core pipeline: solve the growth-direction double well (wavefunctions),
derive Coulomb matrix elements (coulomb) and phonon spectral densities
(phonons), build the one- and two-electron Hamiltonians and field schedules
(hamiltonians), propagate density matrices under the time-dependent
Bloch-Redfield equation (redfield), and drive switching-fidelity
experiments (protocols).  The command-line entry point lives in cli.
"""

__version__ = "0.1.0"
