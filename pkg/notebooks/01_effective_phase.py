# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
#   kernelspec:
#     display_name: Python 3
#     name: python3
# ---

# # Effective phase of a line set
#
# A two-line TRL calibration is well conditioned where the electrical length
# difference of its lines stays away from 0 and 180 degrees. With more lines
# every pair contributes, and the effective phase condenses all pairs into one
# number per frequency.

import numpy as np

from mtrl_lines import medium, trl_classic
from mtrl_lines.eigenmetrics import effective_phase

fr4 = medium.constant(2.6)
CM = 1e-2

# ## Classic two-line bands
#
# A 6 cm line difference on a substrate with eps' = 2.6 has its quarter-wave
# point at 0.775 GHz and repeats every half-wave period.

for n in range(4):
    lo, hi = trl_classic.band_edges(0.06, 2.6, 30, n)
    print(f"band {n}: {lo/1e9:6.3f} .. {hi/1e9:6.3f} GHz with 30 deg margin")

# ## Adding lines
#
# Compare the thru plus one line with the sparse set {0, 1, 4, 6} cm.

f = np.linspace(0.2e9, 20e9, 100)
two = effective_phase(np.array([0, 6])*CM, fr4, f)
four = effective_phase(np.array([0, 1, 4, 6])*CM, fr4, f)
for k in range(0, f.size, 9):
    print(f"{f[k]/1e9:6.2f} GHz   two-line {two.phi_deg[k]:5.1f} deg   four-line {four.phi_deg[k]:5.1f} deg")

# The four-line set stays above 30 degrees up to the first null of the unit
# spacing, while the two-line set drops to zero at each multiple of its
# half-wave frequency.

print("bands above 30 deg:", [(round(a/1e9, 2), round(b/1e9, 2)) for a, b in four.bands_above(30)])

# ## Repeated lines
#
# Measuring the same line several times should not change the design metric.
# Occurrence scaling removes the bias from duplicated pairs.

rep = effective_phase(np.array([0, 1, 4, 6, 6, 6])*CM, fr4, f, scaling="occurrence")
print("max |kappa difference|:", np.max(np.abs(rep.kappa - four.kappa)))
