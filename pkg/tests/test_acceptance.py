"""Acceptance checks, one per criterion.

Each check returns ``(passed, detail)``; the test records a PASS/FAIL line
and asserts. The lines are repeated in the pytest terminal summary, and
``python tests/test_acceptance.py`` prints them without pytest.

Pinned tolerances are written next to each check.
"""

import math
import sys
import time

import numpy as np
import pytest

from mtrl_lines import line_count, mc_sensitivity as mc, medium, optimizer as op, rulers
from mtrl_lines import trl_classic as tc
from mtrl_lines.eigenmetrics import (build_weighting, effective_phase, lambda_batch,
                                     lambda_jacobian, lambda_value)

C0 = 299792458.0
CM, MM = 1e-2, 1e-3

RESULTS = {}


def _report(n, passed, detail):
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return passed, line


def _min_phase(lengths, model, f_lo, f_hi, points=5001):
    f = np.linspace(f_lo, f_hi, points)
    return float(effective_phase(lengths, model, f).phi_deg.min())


# 1. band edges of 6 cm at eps' = 2.6: +-1 MHz, < 1 ms per call
def check_1():
    lo0 = tc.band_edges(0.06, 2.6, 90, 0)[0]
    lo5 = tc.band_edges(0.06, 2.6, 90, 5)[0]
    reps = 1000
    t = time.perf_counter()
    for _ in range(reps):
        tc.band_edges(0.06, 2.6, 90, 5)
    per_call = (time.perf_counter() - t)/reps
    ok = abs(lo0 - 0.775e9) <= 1e6 and abs(lo5 - 8.521e9) <= 1e6 and per_call < 1e-3
    return ok, f"band0 {lo0/1e9:.6f} GHz, band5 {lo5/1e9:.6f} GHz, {per_call*1e6:.1f} us/call"


# 2. phi = 20 deg <=> f_max = 8 f_min, plus 1000 random phi; relative 1e-12
def check_2():
    ok = tc.band_index(1.0, 8.0, 20) == 0 and abs(tc.achieved_margin(1.0, 8.0, 0) - 20) <= 20e-12
    rng = np.random.default_rng(2)
    worst = 0.0
    for phi in rng.uniform(1e-6, 90, 1000):
        f_min = 10**rng.uniform(6, 11)
        f_max = (180 - phi)/phi*f_min
        ok &= tc.band_index(f_min, f_max, phi) == 0
        worst = max(worst, abs(tc.achieved_margin(f_min, f_max, 0) - phi)/phi)
    ok &= worst <= 1e-12
    return bool(ok), f"max relative error {worst:.2e} over 1000 margins"


# 3. lambda levels 8 and 12 (+-5 %) at the 1 cm quarter-wave point, 4.648 GHz
def check_3():
    f = C0/(4*CM*math.sqrt(2.6))
    g = medium.gamma(2.6, f)
    a = float(lambda_value(build_weighting(np.array([0, 1, 3])*CM, g)))
    b = float(lambda_value(build_weighting(np.array([0, 1, 4, 6])*CM, g)))
    ok = abs(a - 8) <= 0.4 and abs(b - 12) <= 0.6
    return ok, f"f = {f/1e9:.4f} GHz: lambda {{0,1,3}} = {a:.6f}, {{0,1,4,6}} = {b:.6f}"


# 4. kappa reductions on a 501-point grid, relative 1e-12
def check_4():
    f = np.linspace(0.1e9, 25e9, 501)
    model = medium.constant(2.6, 0.02)
    g = medium.gamma(model, f)
    l12 = 2.3*CM
    w = np.abs(np.exp(g*l12) - np.exp(-g*l12))
    k2 = effective_phase(np.array([0, l12]), model, f).kappa
    k3 = effective_phase(np.array([0, l12, l12]), model, f).kappa
    k4 = effective_phase(np.array([0, 1, 4, 6])*CM, model, f).kappa
    k6 = effective_phase(np.array([0, 1, 4, 6, 6, 6])*CM, model, f, scaling="occurrence").kappa

    def rel(a, b):
        return float(np.max(np.abs(a - b)/np.maximum(np.abs(b), 1e-300)))

    errs = rel(k2, w), rel(k3, w), rel(k6, k4)
    return max(errs) <= 1e-12, "relative errors two-line {:.1e}, repeated {:.1e}, occurrence {:.1e}".format(*errs)


# 5. lambda Jacobian vs central differences: relative 1e-6; translation sum 1e-10
def check_5():
    rng = np.random.default_rng(5)
    worst_fd = worst_sum = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        l = np.sort(rng.uniform(0, 5*CM, n))
        model = medium.constant(rng.uniform(1.5, 10), rng.uniform(0, 0.5))
        f = rng.uniform(0.5e9, 40e9)
        g = medium.gamma(model, f)
        J = lambda_jacobian(l, model, f)
        h = 1e-4/abs(g)
        fd = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd[i] = (lambda_value(build_weighting(l + 1 + e, g))
                     - lambda_value(build_weighting(l + 1 - e, g)))/(2*h)
        scale = np.max(np.abs(J))
        worst_fd = max(worst_fd, np.max(np.abs(J - fd))/scale)
        worst_sum = max(worst_sum, abs(J.sum())/scale)
    ok = worst_fd < 1e-6 and worst_sum <= 1e-10
    return ok, f"max relative FD error {worst_fd:.2e}, max |sum|/max|J| {worst_sum:.2e}"


# 6. ideal L W L^T P Q = diag(-lambda, 0, 0, lambda), off-diagonal < 1e-10 lambda
def check_6():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in range(2, 9):
        for eps in (5.2 + 0j, 5.2 - 0.5j):
            l = np.concatenate([[0], np.sort(rng.uniform(0.1, 5, n - 1))])*MM
            g = medium.gamma(eps, 60e9)
            lam = float(lambda_value(build_weighting(l, g)))
            H = mc.build_H(l, g)
            worst = max(worst, np.max(np.abs(H - np.diag([-lam, 0, 0, lam])))/lam)
    return worst < 1e-10, f"max |H - diag|/lambda {worst:.2e} over N = 2..8, lossy and lossless"


# 7. noise-free error-term recovery, 1e-8
def check_7():
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (2, 3, 5):
        A = np.eye(2) + 0.3*(rng.standard_normal((2, 2)) + 1j*rng.standard_normal((2, 2)))
        B = np.eye(2) + 0.3*(rng.standard_normal((2, 2)) + 1j*rng.standard_normal((2, 2)))
        l = np.concatenate([[0], np.sort(rng.uniform(0.2, 5, n - 1))])*MM
        model = medium.constant(5.2, 0.1)
        g = medium.gamma(model, 37e9)
        W = build_weighting(l, g)
        F = mc.build_F(mc.synthesize(l, model, 37e9, A=A, B=B, k=0.7 + 0.2j), W).F
        got = mc.extract_error_terms(F, float(lambda_value(W))).as_array()
        truth = np.array([A[1, 0]/A[0, 0], A[0, 1]/A[1, 1], B[0, 1]/B[0, 0], B[1, 0]/B[1, 1]])
        worst = max(worst, np.max(np.abs(got - truth)/np.abs(truth)))
    return worst <= 1e-8, f"max relative error {worst:.2e} for N in {{2, 3, 5}}"


# 8. line count: M_max = 6, N = 4, exact
def check_8():
    m_max = line_count.pairs_full_band(0.06, 8.5215e9, 2.6, 30)
    n = line_count.lines_from_pairs(m_max)
    rec = line_count.recommend_lines(0.06, 0.0, 8.5215e9, 2.6, 30)
    ok = m_max == 6 and n == 4 and rec.n_lines == 4
    return ok, f"M_max = {m_max}, N = {n}, pipeline N = {rec.n_lines}"


# 9. DE within 1 % of the exhaustive 0.05 cm grid minimum; < 5 min
def check_9():
    model = medium.constant(2.6)
    f0 = medium.frequency_at_phase(model, 6*CM, 0.5*np.pi)
    f5 = medium.frequency_at_phase(model, 6*CM, 5.5*np.pi)
    t = time.perf_counter()
    res = op.optimize(op.DesignProblem(4, op.ConstraintSet(l_max=6*CM), model, f0, f5),
                      op.OptimizerConfig(seed=0))
    elapsed = time.perf_counter() - t
    grid = np.linspace(*res.anchors_used, op.default_grid_points(6*CM, model, *res.anchors_used))
    g = medium.gamma(model, grid)
    x = np.arange(121)*0.05*CM
    i, j = np.triu_indices(x.size)
    L = np.column_stack([np.zeros(i.size), x[i], x[j], np.full(i.size, 6*CM)])
    losses = op._loss_from_lambda(lambda_batch(L, g))
    best = float(losses.min())
    ok = res.loss <= best + 0.01*abs(best) and elapsed < 300
    return ok, (f"DE {res.loss:.5f} at {np.round(res.lengths/CM, 3).tolist()} cm, grid "
                f"{best:.5f} at {np.round(L[losses.argmin()]/CM, 2).tolist()} cm, {elapsed:.1f} s")


# 10. WM-864, 220-300 GHz, l_max = 5 mm: 4 lines, phi >= 30 deg on a 5001-point grid
def check_10():
    wg = medium.RectangularWaveguide(864e-6)
    res = op.design_lines(220e9, 300e9, wg, 30, l_max=5*MM,
                          loss=op.LossSpec("regularized", length_sigma=10e-6))
    phi = _min_phase(res.lengths, wg, 220e9, 300e9)
    ok = res.lengths.size == 4 and phi >= 30
    return ok, f"{res.lengths.size} lines {np.round(res.lengths/MM, 4).tolist()} mm, min phi {phi:.2f} deg"


# 11. eps' = 5.2, 2 GHz - 1.1 THz: 14 lines with phi >= 30 deg for the optimizer
#     and the Golomb-ruler path, checked on a 5001-point grid
def check_11(max_generations=300):
    model = medium.constant(5.2)
    t = time.perf_counter()
    res = op.design_lines(2e9, 1.1e12, model, 30,
                          loss=op.LossSpec("regularized", length_sigma=10e-6),
                          cfg=op.OptimizerConfig(max_generations=max_generations))
    elapsed = time.perf_counter() - t
    phi_opt = _min_phase(res.lengths, model, 2e9, 1.1e12)
    ruler = rulers.design_by_ruler(2e9, 1.1e12, 30, model, n_lines=14, check=False)
    phi_rul = _min_phase(ruler.lengths, model, 2e9, 1.1e12)
    ok = res.lengths.size == 14 and phi_opt >= 30 and phi_rul >= 30
    return ok, (f"optimizer {res.lengths.size} lines min phi {phi_opt:.2f} deg "
                f"(span above lower anchor {res.min_phase_in_span_deg:.2f} deg, {elapsed:.0f} s); "
                f"golomb-14 min phi {phi_rul:.2f} deg")


# 12. MC ordering, eps' = 5.2, 1-110 GHz, 500 trials; < 10 min
def check_12():
    from scipy.stats import spearmanr
    model = medium.constant(5.2)
    t = time.perf_counter()
    iss = np.array([0, 0.25, 0.7, 1.6, 3.3, 5.05])*MM
    prob = op.DesignProblem(6, op.ConstraintSet(l_max=5.05*MM, quantization_step=50e-6), model,
                            1e9, 110e9, loss=op.LossSpec("regularized", length_sigma=10e-6))
    opt = op.optimize(prob, op.OptimizerConfig(seed=0)).lengths
    grid = np.linspace(1e9, 110e9, 110)
    cfg = mc.McConfig(trials=500, noise_sigma=0.1, seed=0)
    r_iss = mc.run_mc(iss, model, grid, cfg)
    r_opt = mc.run_mc(opt, model, grid, cfg)
    elapsed = time.perf_counter() - t
    rho = [spearmanr(r.mae_mean, 1/r.lambda_nominal).statistic for r in (r_iss, r_opt)]
    w_iss, w_opt = (float(np.max(1/r.lambda_nominal)) for r in (r_iss, r_opt))
    f_peak = grid[int(np.argmax(r_iss.mae_mean/r_opt.mae_mean))]
    in_band = 35e9 <= f_peak <= 50e9 or 70e9 <= f_peak <= 90e9
    ok = min(rho) > 0.5 and w_iss > w_opt and in_band and elapsed < 600
    return ok, (f"spearman ISS {rho[0]:.3f} opt {rho[1]:.3f}; worst 1/lambda ISS {w_iss:.4f} "
                f"> opt {w_opt:.4f}; largest excess at {f_peak/1e9:.0f} GHz; "
                f"opt set {np.round(opt/MM, 3).tolist()} mm; {elapsed:.0f} s")


# 13. Golomb table orders <= 6 re-derived by search; {0,1,4,6} covers 1..6; exact
def check_13():
    same = all(rulers.search_golomb(n) == rulers.GOLOMB[n] for n in range(1, 7))
    rep = rulers.verify_ruler((0, 1, 4, 6))
    ok = same and rep.covered == frozenset(range(1, 7)) and rep.is_golomb
    return ok, f"orders 1..6 re-derived: {same}; {{0,1,4,6}} covers {sorted(rep.covered)}"


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 14)}


@pytest.mark.parametrize("n", [n for n in CHECKS if n not in (9, 11, 12)])
def test_criterion(n):
    passed, line = _report(n, *CHECKS[n]())
    assert passed, line


@pytest.mark.slow
@pytest.mark.parametrize("n", [9, 11, 12])
def test_criterion_scenario(n):
    passed, line = _report(n, *CHECKS[n]())
    assert passed, line


if __name__ == "__main__":
    failed = 0
    for n, check in CHECKS.items():
        failed += not _report(n, *check())[0]
    sys.exit(1 if failed else 0)
