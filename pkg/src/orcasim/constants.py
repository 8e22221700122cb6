"""Reference atomic and physical data.

These are defaults only. Every operation takes them through its parameter
objects so a configuration file can override any value.
"""
import numpy as np
from scipy import constants as _sc

K_B = _sc.k  # J/K
C_LIGHT = _sc.c

MASS_RB87 = 86.909180527 * _sc.atomic_mass  # kg

# Rb D2 natural linewidth 6.07 MHz FWHM -> half width in rad/s
GAMMA_E_RB_D2 = 2 * np.pi * 3.03e6
# 4D5/2 storage-state linewidth
GAMMA_S_RB_4D52 = 2 * np.pi * 0.9e6

SIGNAL_WAVELENGTH = 1529.3e-9
CONTROL_WAVELENGTH = 780.2e-9

CELL_LENGTH = 0.08
CELL_TEMPERATURE = 393.15  # 120 C
OPTICAL_DEPTH = 8500.0
CONTROL_DETUNING = -2 * np.pi * 6e9

GAUSSIAN_TBP = 2 * np.log(2) / np.pi  # 0.4413 for transform-limited Gaussians
FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))

TDC_BIN = 16e-12
REP_RATE = 80e6
