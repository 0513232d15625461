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

# # Designing a kit
#
# Three routes to a set of line lengths for the same job: the closed-form
# line count, a sparse ruler scaled to the band, and the constrained
# optimizer.

import numpy as np

from mtrl_lines import line_count, medium, optimizer, rulers

fr4 = medium.constant(2.6)
f_min, f_max, margin = 1e9, 8e9, 30.0

# The lowest frequency fixes the longest line: its electrical length must
# reach the margin at f_min.

l_max = optimizer.longest_line_for(fr4, f_min, margin)
print(f"longest line {l_max*1e3:.3f} mm")
print(line_count.recommend_lines(l_max, f_min, f_max, 2.6, margin))

# ## Sparse ruler
#
# The unit length puts f_max on the upper band edge; the marks of a Golomb
# ruler multiply it.

kit = rulers.design_by_ruler(f_min, f_max, margin, fr4)
print(kit.ruler, np.round(kit.lengths*1e3, 3), f"min phase {kit.min_phase_deg:.1f} deg")

# ## Optimizer
#
# Differential evolution over the interior lengths, with thru and longest
# line pinned. A 0.1 mm quantization mimics a layout grid.

res = optimizer.design_lines(f_min, f_max, fr4, margin, quantization_step=0.1e-3,
                             cfg=optimizer.OptimizerConfig(seed=1, max_generations=500))
print(np.round(res.lengths*1e3, 3), f"loss {res.loss:.3f}",
      f"min phase above lower anchor {res.min_phase_in_span_deg:.1f} deg")

# At f_min itself the longest pair sits exactly on the margin and every other
# pair is shorter, so the effective phase there is below the margin for any
# kit with more than two lines. A longer l_max buys headroom at the low end.

res2 = optimizer.design_lines(f_min, f_max, fr4, margin, l_max=1.5*l_max,
                              cfg=optimizer.OptimizerConfig(seed=1, max_generations=500))
print(np.round(res2.lengths*1e3, 3), f"min phase over the whole range {res2.min_phase_deg:.1f} deg")

# ## Waveguide
#
# Dispersion is handled by the medium model; anchors follow the exact phase
# constant.

wg = medium.RectangularWaveguide(864e-6)
res = optimizer.design_lines(220e9, 300e9, wg, margin, l_max=5e-3)
print(np.round(res.lengths*1e3, 4), f"min phase {res.min_phase_deg:.1f} deg")
