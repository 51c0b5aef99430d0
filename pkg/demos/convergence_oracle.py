"""Monte-Carlo checks of the consensus filter's limiting behavior.

Draws one-bin spectral values with controlled phase noise and verifies:
the empirical resultant converges to sin(a)/a, aligned phases pass the shared
signal through untouched, and uniform phases suppress the filtered mean at
O(1/S) while the raw mean only shrinks at O(1/sqrt(S)).
"""

import numpy as np

from sgsdistill import (
    SeededRng,
    SpectralModel,
    attenuation_curve,
    export_metrics_csv,
    resultant_sweep,
)

print("empirical resultant at S = 100000 vs the sin(a)/a limit:")
grid = [0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi]
sweep = resultant_sweep(grid, 100_000, SeededRng(1), trials=10)
for a, est, exp in zip(sweep.halfwidths, sweep.estimates, sweep.expected):
    print(f"  a = {a:5.3f}: estimate {est:.4f}, limit {exp:.4f}")
export_metrics_csv(sweep, "resultant_sweep.csv")

print("\naligned phases (a = 0): the filter is transparent")
aligned = SpectralModel(shared=1.0 + 0.0j, phase_halfwidth=0.0)
curve = attenuation_curve(aligned, [4, 16, 64, 256, 1024], SeededRng(2), trials=500)
print(f"  E|filtered mean| per S: {np.round(curve.class_magnitudes, 6)}")
print(f"  log-log slope: {curve.class_slope:+.4f} (flat)")

print("\nuniform phases (a = pi): pure conflict gets crushed")
uniform = SpectralModel(shared=1.0 + 0.0j, phase_halfwidth=np.pi)
curve = attenuation_curve(uniform, [4, 16, 64, 256, 1024], SeededRng(3), trials=2000)
print(f"  E|filtered mean| per S: {np.round(curve.class_magnitudes, 5)}")
print(f"  filtered slope: {curve.class_slope:.3f}  (theory: -1)")
print(f"  raw-mean slope: {curve.consensus_slope:.3f}  (theory: -0.5)")
export_metrics_csv(curve, "decay_curve.csv")
print("\nwrote resultant_sweep.csv and decay_curve.csv")
