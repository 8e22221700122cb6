"""Store a 300 ps photon in the ladder memory and read it back.

Walks through calibrating the control pulse, checking where the input photon
ends up, and how retrieval falls with storage time as thermal motion dephases
the spin wave.

    python demos/01_store_and_retrieve.py
"""
import numpy as np

from orcasim.memory import (
    ControlPulse,
    MemoryParams,
    calibrate_control,
    doppler_dephasing,
    input_signal,
    lifetime_sweep,
    solve_retrieval,
    solve_storage,
)

params = MemoryParams()
print(f"optical depth {params.optical_depth:.0f}, control detuning "
      f"{params.detuning / (2 * np.pi * 1e9):.1f} GHz, cell at {params.temperature - 273.15:.0f} C")

# The control strength is the one free knob: find the Rabi frequency that
# stores 49.3 % of a 300 ps Gaussian photon.
signal = input_signal(ControlPulse(1.0e10))
control = calibrate_control(params, signal, 0.493)
print(f"\ncalibrated peak Rabi frequency: 2pi x {control.peak_rabi / (2 * np.pi * 1e9):.4f} GHz")

out, coherences = solve_storage(params, signal, control)
rest = 1 - out.transmitted_fraction - out.stored_fraction - out.scattered_fraction
print("where the input photon goes:")
print(f"  stored in the spin wave  {out.stored_fraction:.4f}")
print(f"  transmitted              {out.transmitted_fraction:.4f}")
print(f"  scattered by decay       {out.scattered_fraction:.4f}")
print(f"  left in the polarisation {rest:.2e}")

# Read out with a pulse ten times more energetic, after a range of delays.
print("\nstorage time   retrieved   Doppler amplitude factor")
for t in (0.8e-9, 1.5e-9, 2.5e-9, 4e-9):
    r = solve_retrieval(params, coherences, control.scaled(10.0), t)
    print(f"  {t * 1e9:4.1f} ns      {r.retrieved_fraction:.4f}      {float(doppler_dephasing(params, t)):.4f}")

res = lifetime_sweep(params, signal, control, np.array([0.8, 1.2, 1.6, 2.0, 2.5, 3.0]) * 1e-9)
print(f"\nGaussian 1/e lifetime of the retrieved efficiency: {res.lifetime * 1e9:.2f} ns")
print(f"closed form 1/(dk u): {1e9 / (params.delta_k * params.thermal_speed):.2f} ns")
