"""Constrained line-length optimization.

The thru is pinned at 0 and the longest line at ``l_max``; the interior
lengths are searched with differential evolution (rand/1/bin). Candidates are
repaired onto the ordered, gap-respecting region before evaluation, and extra
linear equalities enter through a quadratic penalty followed by an exact
projection at the end.

Losses (lower is better)::

    minmax_mean = 0.5*(max_f(-lambda) - mean_f(lambda))
    regularized = minmax_mean + sqrt(mean_f(J_lambda Sigma J_lambda^T))
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import line_count
from .eigenmetrics import (PhaseCurve, check_lengths, effective_phase,
                           lambda_and_jacobian_batch, lambda_and_jacobian_uniform, lambda_batch,
                           lambda_jacobian_batch)
from .errors import ConfigError, InfeasibleError
from .medium import (ConstantMedium, as_medium, frequency_at_phase, gamma as gamma_of,
                     phase_constant)

log = logging.getLogger(__name__)

LOSS_KINDS = ("minmax_mean", "regularized", "regularized_equality")

# members per evaluation chunk; fixed so results do not depend on thread count
_CHUNK = 16
_GAP_PENALTY = 1e6


@dataclass
class ConstraintSet:
    l_max: float
    l_min_gap: float = 0.0
    extra_equalities: list = field(default_factory=list)  # [(row of N coefficients, rhs_m)]
    quantization_step: Optional[float] = None

    def validate(self, n_lines: int):
        if not self.l_max > 0:
            raise ConfigError("l_max must be > 0")
        if self.l_min_gap < 0:
            raise ConfigError("l_min_gap must be >= 0")
        if self.l_max < (n_lines - 1)*self.l_min_gap - 1e-15:
            raise InfeasibleError(f"{n_lines} lines with gap {self.l_min_gap:g} m do not fit "
                                  f"below l_max = {self.l_max:g} m")
        if self.quantization_step is not None and not self.quantization_step > 0:
            raise ConfigError("quantization_step must be > 0")
        for row, _ in self.extra_equalities:
            if len(row) != n_lines:
                raise ConfigError(f"equality rows need {n_lines} coefficients, got {len(row)}")


@dataclass
class LossSpec:
    kind: str = "minmax_mean"
    length_cov: Optional[np.ndarray] = None   # N x N, m^2
    length_sigma: Optional[float] = None      # shortcut for sigma^2 * I
    equality_penalty_weight: float = 1e8

    def covariance(self, n: int):
        if self.kind == "minmax_mean":
            return None
        if self.length_cov is not None:
            cov = np.asarray(self.length_cov, dtype=float)
            if cov.shape != (n, n):
                raise ConfigError(f"length covariance must be {n}x{n}")
            if not np.allclose(cov, cov.T) or np.min(np.linalg.eigvalsh(cov)) < -1e-30:
                raise ConfigError("length covariance must be symmetric positive semidefinite")
            return cov
        sigma = 0.0 if self.length_sigma is None else float(self.length_sigma)
        if sigma < 0:
            raise ConfigError("length_sigma must be >= 0")
        return sigma**2*np.eye(n)

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")


@dataclass
class OptimizerConfig:
    population_factor: int = 15
    max_generations: int = 2000
    mutation: float = 0.7
    crossover: float = 0.9
    seed: int = 0
    grid_points: Optional[int] = None   # None: max(201, 10 per band of the longest line)
    convergence_tol: float = 1e-4
    threads: int = 1
    polish_exhaustive_limit: int = 729  # 3**6

    def __post_init__(self):
        if not 0 < self.mutation < 2:
            raise ConfigError("mutation F must be in (0, 2)")
        if not 0 <= self.crossover <= 1:
            raise ConfigError("crossover CR must be in [0, 1]")
        if self.population_factor < 1 or self.max_generations < 1:
            raise ConfigError("population_factor and max_generations must be >= 1")
        if self.grid_points is not None and self.grid_points < 2:
            raise ConfigError("grid_points must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


@dataclass
class DesignProblem:
    n_lines: int
    constraints: ConstraintSet
    model: object
    f_lo_target: float
    f_hi_target: float
    loss: LossSpec = field(default_factory=LossSpec)
    margin_deg: Optional[float] = None


@dataclass
class DesignResult:
    lengths: np.ndarray
    loss: float
    anchors_used: tuple
    phase_curve: PhaseCurve
    feasible: bool
    converged: bool
    generations_run: int
    history: list
    min_phase_deg: float
    margin_met: Optional[bool] = None
    n_lines_tried: list = field(default_factory=list)
    # minimum over the optimized span [max(f_lo_target, lower anchor), f_hi_target]
    min_phase_in_span_deg: float = float("nan")


# --- frequency anchors ------------------------------------------------------------

def _electrical_turns(model, l, f):
    """beta*l/pi, i.e. the position of f on the longest line's band ladder."""
    return float(phase_constant(model, f))*l/np.pi if f > 0 else 0.0


def anchor_frequencies(l_max: float, model, f_lo_target: Optional[float] = None,
                       f_hi_target: Optional[float] = None):
    """Quarter-wave centers of the longest line bracketing the target range.

    Lower anchor: the highest band center not above ``f_lo_target`` (band 0
    when the target is below it or omitted). Upper anchor: the lowest band
    center not below ``f_hi_target``.
    """
    model = as_medium(model)
    if not l_max > 0:
        raise ConfigError("l_max must be > 0")
    n_lo = 0
    if f_lo_target is not None and f_lo_target > model.f_lower:
        n_lo = max(0, math.floor(_electrical_turns(model, l_max, f_lo_target) - 0.5 + 1e-9))
    f_lo = frequency_at_phase(model, l_max, (n_lo + 0.5)*np.pi)
    if f_hi_target is None:
        return f_lo, f_lo
    n_hi = max(n_lo, math.ceil(_electrical_turns(model, l_max, f_hi_target) - 0.5 - 1e-9))
    return f_lo, frequency_at_phase(model, l_max, (n_hi + 0.5)*np.pi)


def default_grid_points(l_max, model, f_lo, f_hi, minimum=201, per_band=10):
    bands = _electrical_turns(model, l_max, f_hi) - _electrical_turns(model, l_max, f_lo)
    return int(max(minimum, math.ceil(per_band*bands) + 1))


# --- losses -------------------------------------------------------------------------

def _loss_from_lambda(lam):
    return 0.5*(-np.min(lam, axis=-1) - np.mean(lam, axis=-1))


def _uncertainty_term(L, g, cov, J=None):
    if J is None:
        J = lambda_jacobian_batch(L, g)                 # (P, M, N)
    diag = np.diag(cov)
    if np.count_nonzero(cov - np.diag(diag)) == 0:
        q = np.einsum("pmi,i,pmi->pm", J, diag, J)
    else:
        q = np.einsum("pmi,ij,pmj->pm", J, cov, J)
    return np.sqrt(np.maximum(np.mean(q, axis=-1), 0.0))


def loss_minmax_mean(lines, model, grid) -> float:
    l = check_lengths(lines)
    g = gamma_of(as_medium(model), np.asarray(grid, dtype=float))
    return float(_loss_from_lambda(lambda_batch(l[None, :], np.atleast_1d(g)))[0])


def loss_regularized(lines, model, grid, cov) -> float:
    l = check_lengths(lines)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (l.size, l.size):
        raise ConfigError(f"covariance must be {l.size}x{l.size}")
    g = np.atleast_1d(gamma_of(as_medium(model), np.asarray(grid, dtype=float)))
    base = _loss_from_lambda(lambda_batch(l[None, :], g))[0]
    return float(base + _uncertainty_term(l[None, :], g, cov)[0])


# --- search space -------------------------------------------------------------------

class _Space:
    """Interior coordinates x (k = N - 2) <-> full length vectors."""

    def __init__(self, n, cons: ConstraintSet):
        self.n, self.k = n, n - 2
        self.l_max, self.gap = cons.l_max, cons.l_min_gap
        i = np.arange(1, self.k + 1)
        self.lo = i*self.gap
        self.hi = self.l_max - (self.k + 1 - i)*self.gap

    def full(self, X):
        X = np.atleast_2d(X)
        P = X.shape[0]
        return np.hstack([np.zeros((P, 1)), X, np.full((P, 1), self.l_max)])

    def repair(self, X):
        X = np.sort(np.clip(X, self.lo, self.hi), axis=-1)
        if self.gap > 0:
            for j in range(1, self.k):   # forward then backward sweep enforce the gap ladder
                X[:, j] = np.maximum(X[:, j], X[:, j - 1] + self.gap)
            for j in range(self.k - 2, -1, -1):
                X[:, j] = np.minimum(X[:, j], X[:, j + 1] - self.gap)
            X = np.clip(X, self.lo, self.hi)
        return X

    def gap_violation(self, L):
        d = np.diff(L, axis=-1)
        return np.sum(np.maximum(self.gap - d, 0.0), axis=-1)


class _Objective:
    def __init__(self, problem: DesignProblem, grid, space: _Space, threads=1):
        self.space = space
        self.g = np.atleast_1d(gamma_of(as_medium(problem.model), grid))
        grid = np.asarray(grid, dtype=float)
        step = np.diff(grid)
        # gamma is linear in f for constant media: the uniform-grid recurrence applies
        # (the per-step loop only pays off once there are enough pairs per step)
        self.uniform = (isinstance(as_medium(problem.model), ConstantMedium) and grid.size > 2
                        and problem.n_lines >= 6
                        and np.allclose(step, step[0], rtol=1e-12, atol=0))
        self.cov = problem.loss.covariance(problem.n_lines)
        if self.cov is not None and not np.any(self.cov):
            self.cov = None
        eq = problem.constraints.extra_equalities
        self.C = np.array([r for r, _ in eq], dtype=float).reshape(len(eq), problem.n_lines)
        self.b = np.array([v for _, v in eq], dtype=float)
        self.w_eq = problem.loss.equality_penalty_weight
        self.threads = threads

    def _chunk(self, L):
        need_j = self.cov is not None
        if self.uniform:
            dg = (self.g[-1] - self.g[0])/(self.g.size - 1)
            lam, J = lambda_and_jacobian_uniform(L, self.g[0], dg, self.g.size, need_j)
        else:
            lam, J = lambda_and_jacobian_batch(L, self.g, jacobian=need_j)
        out = _loss_from_lambda(lam)
        if self.cov is not None:
            out = out + _uncertainty_term(L, self.g, self.cov, J)
        return out

    def base(self, L):
        L = np.atleast_2d(L)
        chunks = [L[i:i + _CHUNK] for i in range(0, L.shape[0], _CHUNK)]
        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                parts = list(ex.map(self._chunk, chunks))
        else:
            parts = [self._chunk(c) for c in chunks]
        return np.concatenate(parts)

    def penalty(self, L):
        L = np.atleast_2d(L)
        pen = _GAP_PENALTY*self.space.gap_violation(L)
        if self.C.size:
            r = L @ self.C.T - self.b
            pen = pen + self.w_eq*np.sum(r**2, axis=-1)
        return pen

    def __call__(self, X):
        L = self.space.full(X)
        return self.base(L) + self.penalty(L)


def _project_equalities(x, space: _Space, C, b):
    """Least-change projection of the interior vector onto C l = b."""
    if C.size == 0:
        return x
    Cf = C[:, 1:-1]
    rhs = b - C[:, -1]*space.l_max - C[:, 0]*0.0
    active = np.any(Cf != 0, axis=1)
    fixed_resid = np.abs(rhs[~active])
    if np.any(fixed_resid > 1e-12*max(1.0, space.l_max)):
        raise InfeasibleError("an equality constraint involves only the anchored lines and is not met")
    if not active.any():
        return x
    Cf, rhs = Cf[active], rhs[active]
    r = Cf @ x - rhs
    return x - np.linalg.pinv(Cf) @ r


# --- differential evolution ---------------------------------------------------------

def _de(obj: _Objective, space: _Space, cfg: OptimizerConfig, progress=None):
    k = space.k
    P = max(5, cfg.population_factor*k)
    rng0 = np.random.default_rng([cfg.seed, 0])
    X = space.repair(space.lo + rng0.random((P, k))*(space.hi - space.lo))
    f = obj(X)
    best = int(np.argmin(f))
    history = [float(f[best])]
    converged = False
    gen = 0
    for gen in range(1, cfg.max_generations + 1):
        rng = np.random.default_rng([cfg.seed, gen])
        idx = np.empty((P, 3), dtype=int)
        for i in range(P):
            choices = rng.choice(P - 1, 3, replace=False)
            idx[i] = choices + (choices >= i)
        mutant = X[idx[:, 0]] + cfg.mutation*(X[idx[:, 1]] - X[idx[:, 2]])
        cross = rng.random((P, k)) < cfg.crossover
        cross[np.arange(P), rng.integers(0, k, P)] = True
        trial = space.repair(np.where(cross, mutant, X))
        ft = obj(trial)
        better = ft <= f
        X[better], f[better] = trial[better], ft[better]
        best = int(np.argmin(f))
        history.append(float(f[best]))
        if progress is not None:
            progress(gen, history[-1])
        if np.std(f) <= cfg.convergence_tol*abs(np.mean(f)):
            converged = True
            break
    return X[best].copy(), float(f[best]), gen, history, converged


def _quantize_polish(x, obj: _Objective, space: _Space, step, limit):
    """Round to the step grid, then improve by +-1 step moves."""
    def snap(v):
        q = np.round(v/step)*step
        return np.clip(q, np.ceil(space.lo/step - 1e-9)*step, np.floor(space.hi/step + 1e-9)*step)

    x = snap(x)
    k = x.size
    if 3**k <= limit:
        moves = np.array(list(itertools.product((-1, 0, 1), repeat=k)), dtype=float)
        cand = snap(x[None, :] + moves*step)
        vals = obj(cand)
        return cand[int(np.argmin(vals))]
    best = float(obj(x[None, :])[0])
    improved = True
    while improved:
        improved = False
        for j in range(k):
            for s in (-1, 1):
                y = x.copy()
                y[j] += s*step
                y = snap(y)
                v = float(obj(y[None, :])[0])
                if v < best - 1e-15*abs(best):
                    x, best, improved = y, v, True
    return x


def optimize(problem: DesignProblem, cfg: OptimizerConfig | None = None,
             grid=None, progress: Callable | None = None) -> DesignResult:
    """Optimize the interior lengths of ``problem``; see the module docstring."""
    cfg = cfg or OptimizerConfig()
    n = int(problem.n_lines)
    if n < 2:
        raise ConfigError("need at least 2 lines")
    cons = problem.constraints
    cons.validate(n)
    model = as_medium(problem.model)
    if not 0 <= problem.f_lo_target < problem.f_hi_target:
        raise ConfigError("need 0 <= f_lo_target < f_hi_target")
    anchors = anchor_frequencies(cons.l_max, model, problem.f_lo_target, problem.f_hi_target)
    if grid is None:
        m = cfg.grid_points or default_grid_points(cons.l_max, model, *anchors)
        grid = np.linspace(anchors[0], anchors[1], m)
    grid = np.asarray(grid, dtype=float)

    space = _Space(n, cons)
    obj = _Objective(problem, grid, space, cfg.threads)

    if space.k == 0:
        x, gens, history, converged = np.zeros(0), 0, [], True
    else:
        x, _, gens, history, converged = _de(obj, space, cfg, progress)
        if obj.C.size:
            x = _project_equalities(x, space, obj.C, obj.b)
        if cons.quantization_step:
            x = _quantize_polish(x, obj, space, cons.quantization_step,
                                 cfg.polish_exhaustive_limit)
            if obj.C.size:
                log.warning("quantized lengths satisfy the equality rows only to within the step")
    if not converged:
        warnings.warn(f"differential evolution stopped after {gens} generations without "
                      "meeting the convergence tolerance", RuntimeWarning, stacklevel=2)

    lengths = space.full(x)[0]
    loss = float(obj.base(lengths[None, :])[0])
    feasible = bool(space.gap_violation(lengths[None, :])[0] <= 1e-12
                    and np.all(np.diff(lengths) >= -1e-15))
    if obj.C.size:
        tol = 1e-9 if not cons.quantization_step else cons.quantization_step
        feasible &= bool(np.all(np.abs(obj.C @ lengths - obj.b) <= tol))

    check = check_grid(cons.l_max, model, max(problem.f_lo_target, model.f_lower),
                       problem.f_hi_target)
    curve = effective_phase(lengths, model, check)
    phi_min = float(np.min(curve.phi_deg))
    margin_met = None if problem.margin_deg is None else phi_min >= problem.margin_deg - 1e-9
    in_span = curve.frequency >= min(anchors[0], problem.f_hi_target)
    phi_span = float(np.min(curve.phi_deg[in_span])) if in_span.any() else phi_min
    return DesignResult(lengths=lengths, loss=loss, anchors_used=tuple(float(a) for a in anchors),
                        phase_curve=curve, feasible=feasible, converged=converged,
                        generations_run=gens, history=history, min_phase_deg=phi_min,
                        margin_met=margin_met, n_lines_tried=[n],
                        min_phase_in_span_deg=phi_span)


def check_grid(l_max, model, f_lo, f_hi, minimum=501):
    """Evaluation grid for margin checks over the target range."""
    model = as_medium(model)
    if f_lo <= model.f_lower:
        f_lo = model.f_lower*(1 + 1e-9) if model.f_lower > 0 else f_lo
    m = default_grid_points(l_max, model, f_lo, f_hi, minimum=minimum)
    return np.linspace(f_lo, f_hi, m)


# --- full pipeline --------------------------------------------------------------------

def longest_line_for(model, f_min: float, margin_deg: float) -> float:
    """Length whose electrical length equals the margin at ``f_min``."""
    beta = float(phase_constant(as_medium(model), f_min))
    if beta <= 0:
        raise InfeasibleError(f"no propagation at {f_min:g} Hz")
    return (margin_deg/180)*np.pi/beta


def design_lines(f_min: float, f_max: float, model, margin_deg: float = 30.0,
                 l_max: Optional[float] = None, n_lines: Optional[int] = None,
                 l_min_gap: float = 0.0, loss: LossSpec | None = None,
                 cfg: OptimizerConfig | None = None, quantization_step=None,
                 extra_equalities=(), max_extra_lines: int = 6,
                 progress: Callable | None = None) -> DesignResult:
    """End-to-end design: longest line, line count, anchors and optimization.

    For constant lossless media the line count comes from the closed form.
    Otherwise the count starts one below the dispersion-aware estimate and
    grows until the margin holds over the optimized span. Below the lower
    anchor the margin is bounded by the longest pair alone, so with the
    default ``l_max`` it cannot hold strictly at ``f_min`` for more than two
    lines; ``margin_met`` still reports the full range.
    """
    model = as_medium(model)
    if not 0 < f_min < f_max:
        raise ConfigError("need 0 < f_min < f_max")
    if not 0 < margin_deg < 90:
        raise ConfigError("phase margin must be within (0, 90) degrees")
    loss = loss or LossSpec()
    if l_max is None:
        l_max = longest_line_for(model, f_min, margin_deg)

    def run(n):
        cons = ConstraintSet(l_max=l_max, l_min_gap=l_min_gap,
                             extra_equalities=list(extra_equalities),
                             quantization_step=quantization_step)
        prob = DesignProblem(n_lines=n, constraints=cons, model=model, f_lo_target=f_min,
                             f_hi_target=f_max, loss=loss, margin_deg=margin_deg)
        return optimize(prob, cfg, progress=progress)

    if n_lines is not None:
        return run(int(n_lines))

    est = line_count.recommend_for_model(l_max, f_min, f_max, model, margin_deg).n_lines
    if isinstance(model, ConstantMedium) and model.lossless:
        return run(est)
    tried, res = [], None
    for n in range(max(2, est - 1), est + max_extra_lines + 1):
        res = run(n)
        tried.append(n)
        if res.min_phase_in_span_deg >= margin_deg - 1e-9:
            break
    res.n_lines_tried = tried
    return res
