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

# # Monte Carlo sensitivity
#
# Synthetic measurements with complex Gaussian noise on every T-matrix entry
# are calibrated with the weighted eigenproblem, and the normalized error
# terms are compared with their true value (zero for ideal error boxes).

import numpy as np
from scipy.stats import spearmanr

from mtrl_lines import mc_sensitivity as mc
from mtrl_lines import medium, optimizer

MM = 1e-3
alumina = medium.constant(5.2)
grid = np.linspace(1e9, 110e9, 110)

# A commercial-style set and an optimized set with the same count and longest
# line.

iss = np.array([0, 0.25, 0.7, 1.6, 3.3, 5.05])*MM
prob = optimizer.DesignProblem(6, optimizer.ConstraintSet(l_max=5.05*MM, quantization_step=50e-6),
                               alumina, 1e9, 110e9,
                               loss=optimizer.LossSpec("regularized", length_sigma=10e-6))
opt = optimizer.optimize(prob).lengths
print("optimized:", np.round(opt/MM, 3), "mm")

cfg = mc.McConfig(trials=100, noise_sigma=0.1, seed=0)
r_iss = mc.run_mc(iss, alumina, grid, cfg)
r_opt = mc.run_mc(opt, alumina, grid, cfg)

# The error follows 1/lambda closely: lambda is the eigenvalue separation that
# the noise has to overcome.

for name, r in [("iss", r_iss), ("opt", r_opt)]:
    rho = spearmanr(r.mae_mean, 1/r.lambda_nominal).statistic
    print(f"{name}: spearman(MAE, 1/lambda) = {rho:.3f}, worst 1/lambda = {np.max(1/r.lambda_nominal):.3f}")

ratio = r_iss.mae_mean/r_opt.mae_mean
for k in np.argsort(ratio)[::-1][:6]:
    print(f"{grid[k]/1e9:5.0f} GHz  ISS/optimized MAE = {ratio[k]:.2f}")
