"""Monte Carlo sensitivity of the weighted multiline TRL eigenproblem.

Measured T-matrices of the lines are stacked column-major into ``M`` (4 x N)
and combined into the 4x4 system::

    F = M W D^-1 M^T P Q,   D = diag(det M_i)

For error boxes ``A``, ``B`` and ideal lines ``F = X H X^-1`` with
``X = B^T kron A`` and ``H = L W L^T P Q = diag(-lambda, 0, 0, lambda)``, so the
eigenvectors of ``-lambda`` and ``+lambda`` carry the normalized error terms.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigenmetrics import build_weighting, check_lengths, lambda_value
from .errors import ConfigError, DegenerateError, UnsupportedIndexError
from .medium import as_medium, eps_complex, gamma as gamma_of, gamma_from_eps

P = np.array([[1, 0, 0, 0],
              [0, 0, 1, 0],
              [0, 1, 0, 0],
              [0, 0, 0, 1]], dtype=float)
Q = np.array([[0, 0, 0, 1],
              [0, -1, 0, 0],
              [0, 0, -1, 0],
              [1, 0, 0, 0]], dtype=float)
PQ = P @ Q

TERM_NAMES = ("a21_over_a11", "a12", "b12_over_b11", "b21")


@dataclass(frozen=True)
class ErrorTerms:
    """Normalized error terms. ``a12`` and ``b21`` are relative to ``a22`` and ``b22``."""

    a21_over_a11: complex
    a12: complex
    b12_over_b11: complex
    b21: complex

    def as_array(self):
        return np.array([self.a21_over_a11, self.a12, self.b12_over_b11, self.b21])


@dataclass
class SystemMatrices:
    M: np.ndarray
    D: np.ndarray
    W: np.ndarray
    F: np.ndarray


@dataclass(frozen=True)
class McConfig:
    trials: int = 500
    noise_sigma: float = 0.1
    length_sigma: float = 0.0
    eps_sigma: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.noise_sigma < 0 or self.length_sigma < 0 or min(self.eps_sigma) < 0:
            raise ConfigError("standard deviations must be >= 0")
        if len(self.eps_sigma) != 2:
            raise ConfigError("eps_sigma is (real, imag)")


@dataclass
class McResult:
    frequency: np.ndarray
    mae: np.ndarray           # (M, 4) in TERM_NAMES order
    excluded: np.ndarray      # (M,) trials dropped as degenerate
    lambda_nominal: np.ndarray
    trials: int

    @property
    def mae_mean(self):
        return self.mae.mean(axis=-1)


def vec(T):
    """Column-major vectorization over the last two axes."""
    T = np.asarray(T)
    return np.swapaxes(T, -1, -2).reshape(T.shape[:-2] + (-1,))


def unvec(v, n=2):
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (n, n)), -1, -2)


def line_matrix(lengths, gamma):
    """Ideal line T-matrices ``diag(exp(-g*l), exp(g*l))``: shape ``(..., N, 2, 2)``."""
    l = np.asarray(lengths, dtype=float)
    g = np.asarray(gamma, dtype=complex)[..., None]
    out = np.zeros(np.broadcast_shapes(g.shape, l.shape) + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-g*l)
    out[..., 1, 1] = np.exp(g*l)
    return out


def synthesize(lines, model, f, noise_sigma=0.0, rng=None, A=None, B=None, k=1.0, gamma=None):
    """Measurements ``k*A*L_i*B + noise``; shape ``(N, 2, 2)`` or ``(M, N, 2, 2)``.

    Noise is complex Gaussian per T-matrix entry with ``noise_sigma/sqrt(2)`` on
    each of the real and imaginary parts. ``gamma`` overrides the model.
    """
    l = np.asarray(lines, dtype=float)
    g = gamma_of(as_medium(model), f) if gamma is None else np.asarray(gamma, dtype=complex)
    T = line_matrix(l, g)
    if A is not None:
        T = np.asarray(A, dtype=complex) @ T
    if B is not None:
        T = T @ np.asarray(B, dtype=complex)
    T = k*T
    if noise_sigma > 0:
        if rng is None:
            raise ConfigError("a random generator is required when noise_sigma > 0")
        z = rng.standard_normal(T.shape + (2,))
        T = T + noise_sigma/np.sqrt(2)*(z[..., 0] + 1j*z[..., 1])
    return T


def build_F(measurements, W) -> SystemMatrices:
    Tm = np.asarray(measurements, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if Tm.shape[-3] < 2:
        raise ConfigError("need at least 2 line measurements")
    d = np.linalg.det(Tm)
    if np.any(np.abs(d) < 1e-300) or not np.all(np.isfinite(d)):
        raise DegenerateError("singular line measurement")
    Mm = np.swapaxes(vec(Tm), -1, -2)                        # (..., 4, N)
    F = Mm @ (W/d[..., None, :]) @ np.swapaxes(Mm, -1, -2) @ PQ
    return SystemMatrices(M=Mm, D=d, W=W, F=F)


def build_H(lines, gamma):
    """``L W L^T P Q`` for ideal lines."""
    l = check_lengths(lines)
    W = build_weighting(l, gamma)
    Lm = np.swapaxes(vec(line_matrix(l, gamma)), -1, -2)
    return Lm @ W @ np.swapaxes(Lm, -1, -2) @ PQ


def _null_vector(A):
    _, _, vh = np.linalg.svd(A)
    return np.conj(vh[..., -1, :])


def measured_lambda(F, lambda_nominal):
    """``sqrt(trace(F^2)/2)`` on the branch nearest ``lambda_nominal``."""
    F = np.asarray(F)
    lam = np.sqrt(np.trace(F @ F, axis1=-2, axis2=-1)/2 + 0j)
    flip = np.abs(lam - lambda_nominal) > np.abs(-lam - lambda_nominal)
    return np.where(flip, -lam, lam)


def extract_error_terms_batch(F, lambda_nominal, rel_tol=1e-9):
    """Vectorized extraction: returns ``(terms (..., 4), degenerate (...))``."""
    F = np.asarray(F, dtype=complex)
    lam = measured_lambda(F, lambda_nominal)
    scale = np.linalg.norm(F, axis=(-2, -1))
    degenerate = ~(np.abs(lam) >= rel_tol*scale) | (scale == 0)
    lam = np.where(degenerate, 1.0, lam)
    eye = np.eye(4)
    xm = _null_vector(F + lam[..., None, None]*eye)
    xp = _null_vector(F - lam[..., None, None]*eye)
    with np.errstate(divide="ignore", invalid="ignore"):
        xm = xm/xm[..., :1]
        xp = xp/xp[..., 3:]
    terms = np.stack([xm[..., 1], xp[..., 2], xm[..., 2], xp[..., 1]], axis=-1)
    bad = degenerate | ~np.all(np.isfinite(terms), axis=-1)
    terms = np.where(bad[..., None], np.nan, terms)
    return terms, bad


def extract_error_terms(F, lambda_nominal) -> ErrorTerms:
    terms, bad = extract_error_terms_batch(np.asarray(F)[None], lambda_nominal)
    if bad[0]:
        raise DegenerateError("measured eigenvalue is numerically zero")
    return ErrorTerms(*(complex(t) for t in terms[0]))


def _trial(t, l, eps_nom, f, W, lam, cfg: McConfig):
    rng = np.random.default_rng([cfg.seed, t])
    dl = rng.normal(0.0, 1.0, l.size)*cfg.length_sigma
    de = rng.normal(0.0, 1.0, 2)*np.asarray(cfg.eps_sigma, dtype=float)
    er = np.maximum(eps_nom.real + de[0], 1e-12)
    ei = np.maximum(-eps_nom.imag + de[1], 0.0)
    g = gamma_from_eps(er - 1j*ei, f)
    meas = synthesize(l + dl, None, f, cfg.noise_sigma, rng, gamma=g)
    d = np.linalg.det(meas)
    singular = np.any(np.abs(d) < 1e-300, axis=-1)
    if singular.any():
        meas = np.where(singular[:, None, None, None], line_matrix(l, 0.0), meas)
    F = build_F(meas, W).F
    terms, bad = extract_error_terms_batch(F, lam)
    bad |= singular
    err = np.where(bad[:, None], 0.0, np.abs(terms))
    return err, bad


def run_mc(lines, model, grid, cfg: McConfig, threads: int = 1) -> McResult:
    """Mean absolute error of the four normalized terms per frequency.

    The weighting matrix is built from the nominal lengths and medium; lengths,
    permittivity (shared by all lines of a trial) and measurements are
    perturbed. Each trial draws from its own ``default_rng([seed, trial])``.
    """
    l = check_lengths(lines)
    model = as_medium(model)
    f = np.asarray(grid, dtype=float)
    if f.ndim != 1 or np.any(f <= 0):
        raise ConfigError("MC grid must be a 1-D array of positive frequencies")
    eps_nom = eps_complex(model, f)
    g = gamma_from_eps(eps_nom, f)
    W = build_weighting(l, g)
    lam = lambda_value(W)

    def one(t):
        return _trial(t, l, eps_nom, f, W, lam, cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, range(cfg.trials)))
    else:
        results = [one(t) for t in range(cfg.trials)]
    total = np.zeros((f.size, 4))
    excluded = np.zeros(f.size, dtype=int)
    for err, bad in results:        # trial order, independent of scheduling
        total += err
        excluded += bad
    used = cfg.trials - excluded
    with np.errstate(invalid="ignore", divide="ignore"):
        mae = np.where(used[:, None] > 0, total/np.maximum(used, 1)[:, None], np.nan)
    return McResult(frequency=f, mae=mae, excluded=excluded, lambda_nominal=lam,
                    trials=cfg.trials)


def rank_deficient_pinv(R):
    """Pseudo-inverse of ``F - mu*I`` for a simple eigenvalue ``mu``.

    The smallest singular value is zero in exact arithmetic and is always
    dropped; a relative cutoff could keep it when rounding lifts it.
    """
    u, s, vh = np.linalg.svd(R)
    inv = np.zeros_like(s)
    inv[:-1] = 1/s[:-1]
    return (np.conj(vh).T*inv) @ np.conj(u).T


def eigenvector_jacobian(F, J_F, index, normalize=None, rel_tol=1e-8):
    """Derivative of an eigenvector of ``F`` with respect to parameters.

    ``J_F`` is ``d vec(F)/d p`` with shape ``(16, p)`` (column-major vec).
    ``index`` counts eigenvalues ordered by real part (0 is ``-lambda``, 3 is
    ``+lambda``). Without ``normalize`` the unit-norm eigenvector is used and
    the result is the component orthogonal to it; ``"first"`` or ``"last"``
    returns the derivative of the eigenvector scaled to 1 in that entry.
    """
    F = np.asarray(F, dtype=complex)
    J_F = np.asarray(J_F, dtype=complex)
    if F.shape != (4, 4) or J_F.ndim != 2 or J_F.shape[0] != 16:
        raise ConfigError("need F of shape (4, 4) and J_F of shape (16, p)")
    mu, U = np.linalg.eig(F)
    order = np.argsort(mu.real, kind="stable")
    mu, U = mu[order], U[:, order]
    if not 0 <= index < 4:
        raise UnsupportedIndexError("eigenvalue index must be in 0..3")
    scale = max(np.linalg.norm(F), np.finfo(float).tiny)
    others = np.delete(mu, index)
    if np.min(np.abs(others - mu[index])) <= rel_tol*scale:
        raise UnsupportedIndexError(f"eigenvalue {index} is repeated; its eigenvector is not unique")
    V = np.linalg.inv(U).T
    u, v, m = U[:, index], V[:, index], mu[index]
    eye = np.eye(4)
    G = np.kron(u[None, :], np.outer(u, v))/(v @ u) - np.kron(u[None, :], eye)
    du = rank_deficient_pinv(F - m*eye) @ G @ J_F
    if normalize is None:
        return du
    e = {"first": 0, "last": 3}.get(normalize)
    if e is None:
        raise ConfigError("normalize must be None, 'first' or 'last'")
    return du/u[e] - np.outer(u, du[e])/u[e]**2
