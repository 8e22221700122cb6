"""From detector clicks to memory figures of merit.

Synthesises the three measurement settings (input only, input with control,
control only) at realistic count rates, fits Gaussians to the arrival
histograms, and turns the areas into efficiencies, signal-to-noise and a
prediction for the retrieved photon's g2(0). Ends with an HBT measurement
of a blinking source.

    python demos/03_counting_and_analysis.py
"""
import numpy as np

from orcasim.analysis import fit_gaussians, memory_report, synthesize_memory_data, window_sweep
from orcasim.counting import (
    Blinking,
    DetectorModel,
    SourceModel,
    extract_g2,
    predict_g2_out,
    synthesize_hbt,
)

data = synthesize_memory_data(seed=7)
print(f"input histogram: {data.input.total} counts over {data.input.acquisition_time:.0f} s")
fit = fit_gaussians(data.memory, 2)
for name, c in zip(("transmitted", "retrieved"), fit.components):
    print(f"  {name:11s} centre {c.center * 1e9:.4f} ns +/- {c.center_err * 1e12:.1f} ps, "
          f"sigma {c.sigma * 1e12:.0f} ps")

r = memory_report(data.input, data.memory, data.noise, 500e-12)
print("\n500 ps window        measured            synthesis truth")
for key in ("eta_in", "eta_tot", "snr"):
    print(f"  {key:8s}  {getattr(r, key):8.4f} +/- {getattr(r, key + '_err'):.4f}   {data.truth[key]:.4f}")
print(f"  retrieved rate {r.retrieved_rate:.1f} /s; counting the whole input pulse, "
      f"eta_tot = {r.eta_tot_whole_input:.4f}")

print("\nwindow    SNR     rate/s   predicted g2_out")
sweep = window_sweep(data.input, data.memory, data.noise, np.array([200, 350, 500, 800, 1200]) * 1e-12)
for w, s, rate, g in zip(sweep.windows, sweep.snr, sweep.rate, sweep.g2_out_pred):
    print(f"  {w * 1e12:4.0f} ps {s:6.2f} {rate:8.2f}   {g:.3f}")
print(f"narrow windows trade counts for purity; at SNR 18.2 a g2 of 0.325 becomes "
      f"{predict_g2_out(0.325, 18.2):.3f}")

det = DetectorModel(0.8)
for label, blink in (("steady", None), ("blinking", Blinking(0.306 / 0.325, 1e-6))):
    src = SourceModel(mean_photons_per_pulse=0.0025, g2_zero=0.306, blinking=blink)
    g = extract_g2(synthesize_hbt(src, (det, det), 10.0, seed=3))
    print(f"HBT, {label:8s} source: g2(0) = {g.g2:.3f} +/- {g.stderr:.3f}")
