"""Why a quantum-dot photon is harder to store than a laser pulse.

The dot's photons are long (0.85 ns exponential decay) and their centre
frequency wanders over a 12.4 GHz inhomogeneous line, while the memory only
accepts about 2 GHz. This demo shapes the photon in time with a gate, filters
it with an etalon, and averages the read-in efficiency over the line.

    python demos/02_filtering_a_broad_source.py      (about a minute)
"""
import numpy as np

from orcasim.memory import ControlPulse, MemoryParams, input_signal
from orcasim.photonics import (
    REFERENCE_LOSS_STAGES,
    EtalonSpec,
    InhomogeneousModel,
    LossBudget,
    TemporalProfile,
    broadened_transmission,
    compose_loss_budget,
    etalon_power,
    monte_carlo_readin,
    optimal_gate_delay,
    readin_scan,
)
from orcasim.scenarios import OMEGA_CALIBRATED

qd = TemporalProfile.exponential(0.85e-9)
gate = TemporalProfile.gaussian(300e-12)
delay, eff = optimal_gate_delay(qd, gate)
print(f"300 ps gate on the 0.85 ns photon: best delay {delay * 1e12:.0f} ps, "
      f"{eff:.3f} of photons pass")

etalon = EtalonSpec()
line = InhomogeneousModel(12.4e9, 200e6)
print(f"etalon ({etalon.lorentzian_fwhm / 1e9:.2f} GHz, peak {etalon.peak_power_transmission}) "
      f"passes {broadened_transmission(line, etalon):.3f} of the broadened line")

total, unc = compose_loss_budget(LossBudget(REFERENCE_LOSS_STAGES))
print(f"optical path transmission: {total:.3f} +/- {unc:.3f}")

params = MemoryParams()
control = ControlPulse(OMEGA_CALIBRATED, calibrated=True)
signal = input_signal(control)
print("\nscanning read-in efficiency against signal detuning (61 solves)...")
scan = readin_scan(params, signal, control)
print(f"read-in peak {scan.eta_in.max():.3f}, FWHM {scan.fwhm() / 1e9:.2f} GHz")

unfiltered = monte_carlo_readin(params, signal, control, line, 10_000, 1, scan=scan)
print(f"averaged over the 12.4 GHz line: {unfiltered.mean:.4f} +/- {unfiltered.stderr:.4f}")

# Photons that make it through the etalon are concentrated near line centre.
x = line.sample(100_000, np.random.Generator(np.random.Philox(2)))
w = etalon_power(etalon, x)
filtered = np.sum(w * scan.interpolate(x)) / np.sum(w)
print(f"averaged over photons passing the etalon: {filtered:.4f}")
