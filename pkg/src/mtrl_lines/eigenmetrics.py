"""Eigenvalue metrics of the weighted multiline TRL eigenproblem.

For lines ``l_1..l_N`` and propagation constant ``gamma`` every line pair has
an eigengap ``|w_ij| = |exp(gamma*l_ij) - exp(-gamma*l_ij)|`` with
``l_ij = l_i - l_j``. From these we get

* ``lambda = sum_{i<j} |w_ij|**2`` -- the calibration eigenvalue,
* ``kappa = lambda / (sum_{i<j} |w_ij|)`` -- eigengap-weighted mean eigengap,
* ``phi = arcsin(kappa/2)`` -- the effective phase in degrees.

The weighting matrix built here stores ``conj(w_ij)`` so that the 4x4 system
``L W L^T P Q`` is ``diag(-lambda, 0, 0, lambda)`` for lossy media as well;
every scalar metric depends on ``|w_ij|`` only.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ConfigError
from .medium import as_medium, gamma as gamma_of


def check_lengths(lengths, name="lengths") -> np.ndarray:
    l = np.asarray(lengths, dtype=float)
    if l.ndim != 1 or l.size < 2:
        raise ConfigError(f"{name}: need a 1-D set of at least 2 line lengths")
    if np.any(~np.isfinite(l)) or np.any(l < 0):
        raise ConfigError(f"{name}: lengths must be finite and >= 0")
    return l


def pair_differences(lengths) -> np.ndarray:
    l = np.asarray(lengths, dtype=float)
    return l[..., :, None] - l[..., None, :]


def build_weighting(lengths, gamma) -> np.ndarray:
    """Skew-symmetric weighting matrix ``W[i, j] = conj(exp(g*l_ij) - exp(-g*l_ij))``.

    ``gamma`` may be a scalar or an array of shape ``(M,)``; the result then has
    shape ``(M, N, N)``.
    """
    l = check_lengths(lengths)
    g = np.asarray(gamma, dtype=complex)
    d = pair_differences(l)
    e = np.exp(g[..., None, None]*d)
    return np.conj(e - 1/e)


def lambda_value(W) -> np.ndarray:
    """``0.5*||W||_F**2`` over the last two axes."""
    W = np.asarray(W)
    return 0.5*np.sum(np.abs(W)**2, axis=(-2, -1))


def lambda_pairwise(lengths, gamma) -> np.ndarray:
    """Direct pair sum ``sum_{i<j} |w_ij|**2``; independent of :func:`build_weighting`."""
    l = check_lengths(lengths)
    g = np.atleast_1d(np.asarray(gamma, dtype=complex))
    out = np.zeros(g.shape, dtype=float)
    for i in range(l.size):
        for j in range(i + 1, l.size):
            d = l[i] - l[j]
            out += np.abs(np.exp(g*d) - np.exp(-g*d))**2
    return out if np.ndim(gamma) else out[0]


# --- scaling matrices -------------------------------------------------------

def ones_scaling(n: int) -> np.ndarray:
    return np.ones((n, n))


def occurrence_weights(lengths, tol: float = 1e-12) -> np.ndarray:
    """``q_i = 1/(number of lines with the same length as line i)``."""
    l = check_lengths(lengths)
    same = np.abs(l[:, None] - l[None, :]) <= tol*max(1.0, np.max(np.abs(l)))
    return 1.0/same.sum(axis=1)


def occurrence_scaling(q) -> np.ndarray:
    """``S = q q^T``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or np.any(q < 0) or not np.any(q > 0):
        raise ConfigError("occurrence weights must be a non-negative, non-zero vector")
    return np.outer(q, q)


def norm_order_scaling(W, m: int) -> np.ndarray:
    """Element-wise ``|W|**(m-1)``; ``m = 1`` reproduces the default weighting."""
    if m < 1:
        raise ConfigError("norm order m must be >= 1")
    return np.abs(W)**(m - 1)


def check_scaling(S, n: int) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.shape[-2:] != (n, n):
        raise ConfigError(f"scaling matrix must be {n}x{n}")
    if np.any(S < 0) or not np.allclose(S, np.swapaxes(S, -1, -2)):
        raise ConfigError("scaling matrix must be symmetric and non-negative")
    if not np.any(S > 0):
        raise ConfigError("scaling matrix must not be identically zero")
    return S


def kappa_value(W, S=None):
    """Normalized eigenvalue ``kappa_S = 2*lambda_S/||vec(S*W)||_1``.

    Returns ``(kappa, degenerate)``. Where the scaled weighting vanishes
    entirely, ``kappa`` is reported as 0 and ``degenerate`` is True.
    """
    W = np.asarray(W)
    a = np.abs(W)
    if S is not None:
        S = check_scaling(S, W.shape[-1])
        a_s = S*a
    else:
        a_s = a
    num = np.sum(a_s*a, axis=(-2, -1))   # 2*lambda_S = vec(W_S)^H vec(W)
    den = np.sum(a_s, axis=(-2, -1))
    degenerate = den <= np.finfo(float).tiny
    kappa = np.where(degenerate, 0.0, num/np.where(degenerate, 1.0, den))
    return kappa, degenerate


def phase_from_kappa(kappa) -> np.ndarray:
    """``arcsin(kappa/2)`` in degrees; kappa > 2 (lossy lines) clips to 90."""
    return np.degrees(np.arcsin(np.clip(np.asarray(kappa)/2, 0.0, 1.0)))


@dataclass
class PhaseCurve:
    frequency: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    phi_deg: np.ndarray
    degenerate: np.ndarray

    CSV_COLUMNS = ("frequency_hz", "lambda", "kappa", "phi_deg", "degenerate_flag")

    def min_phase(self, f_lo=None, f_hi=None) -> float:
        m = self._mask(f_lo, f_hi)
        return float(np.min(self.phi_deg[m]))

    def _mask(self, f_lo, f_hi):
        m = np.ones(self.frequency.shape, bool)
        if f_lo is not None:
            m &= self.frequency >= f_lo
        if f_hi is not None:
            m &= self.frequency <= f_hi
        if not m.any():
            raise ConfigError("no grid points inside the requested frequency window")
        return m

    def bands_above(self, margin_deg: float, tol: float = 1e-9):
        """Contiguous grid intervals ``[(f_start, f_stop), ...]`` where ``phi >= margin``."""
        ok = self.phi_deg >= margin_deg - tol
        bands, start = [], None
        for k, flag in enumerate(ok):
            if flag and start is None:
                start = k
            if not flag and start is not None:
                bands.append((float(self.frequency[start]), float(self.frequency[k - 1])))
                start = None
        if start is not None:
            bands.append((float(self.frequency[start]), float(self.frequency[-1])))
        return bands

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for row in zip(self.frequency, self.lam, self.kappa, self.phi_deg, self.degenerate):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])),
                        repr(float(row[3])), int(bool(row[4]))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def effective_phase(lengths, model, frequencies, scaling=None, order: int = 1) -> PhaseCurve:
    """Per-frequency lambda, kappa and effective phase.

    ``scaling`` is ``None``, ``"occurrence"`` or an explicit ``N x N`` matrix;
    ``order`` applies the element-wise norm-order weighting on top of it. The
    reported lambda is the eigenvalue of the scaled problem, ``lambda_S``.
    """
    l = check_lengths(lengths)
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    W = build_weighting(l, gamma_of(as_medium(model), f))
    if scaling is None:
        S = np.ones((l.size, l.size))
    elif isinstance(scaling, str):
        if scaling != "occurrence":
            raise ConfigError(f"unknown scaling {scaling!r}")
        S = occurrence_scaling(occurrence_weights(l))
    else:
        S = check_scaling(scaling, l.size)
    if order != 1:
        S = S*norm_order_scaling(W, order)
    kappa, degenerate = kappa_value(W, S)
    lam = 0.5*np.sum(S*np.abs(W)**2, axis=(-2, -1))
    return PhaseCurve(f, lam, kappa, phase_from_kappa(kappa), degenerate)


def effective_phase_rms(lengths, model, f):
    """Pair-count normalized phase ``arcsin(sqrt(lambda/C(N,2))/2)`` in degrees.

    Kept for comparison; it miscounts repeated lines.
    """
    l = check_lengths(lengths)
    W = build_weighting(l, gamma_of(as_medium(model), f))
    lam = lambda_value(W)
    return np.degrees(np.arcsin(np.clip(np.sqrt(lam/comb(l.size, 2))/2, 0.0, 1.0)))


def lambda_jacobian(lengths, model, f) -> np.ndarray:
    """d(lambda)/d(l_i) = 2*sum_{j!=i} Re{gamma*conj(w_ij)*(exp(g*l_ij) + exp(-g*l_ij))}.

    Shape ``(N,)`` for scalar ``f``, ``(M, N)`` for an array of frequencies.
    """
    l = check_lengths(lengths)
    g = np.asarray(gamma_of(as_medium(model), f), dtype=complex)
    d = pair_differences(l)
    e = np.exp(g[..., None, None]*d)
    w = e - 1/e
    terms = 2*np.real(g[..., None, None]*np.conj(w)*(e + 1/e))
    return terms.sum(axis=-1)


# --- batched real-arithmetic kernels used inside the optimizer ------------------
# |w(d)|^2 = 2*(cosh(2*alpha*d) - cos(2*beta*d))
# d|w(d)|^2/dd = 4*(alpha*sinh(2*alpha*d) + beta*sin(2*beta*d))

def _pair_geometry(L):
    n = L.shape[-1]
    iu = np.triu_indices(n, 1)
    d = L[..., iu[0]] - L[..., iu[1]]                                  # (P, pairs)
    inc = np.zeros((iu[0].size, n))
    inc[np.arange(iu[0].size), iu[0]] = 1.0
    inc[np.arange(iu[0].size), iu[1]] = -1.0
    return d, inc


def lambda_batch(lengths, gamma) -> np.ndarray:
    """lambda for a population of length sets: ``(P, N)`` x ``(M,)`` -> ``(P, M)``."""
    return lambda_and_jacobian_batch(lengths, gamma, jacobian=False)[0]


def lambda_jacobian_batch(lengths, gamma) -> np.ndarray:
    """Jacobian for a population: ``(P, N)`` x ``(M,)`` -> ``(P, M, N)``."""
    return lambda_and_jacobian_batch(lengths, gamma)[1]


def lambda_and_jacobian_batch(lengths, gamma, jacobian=True):
    """Both kernels from one pass over the unique pairs.

    The pair derivative is odd in ``l_ij``, so the per-line Jacobian is the
    pair term mapped through the +1/-1 incidence matrix.
    """
    L = np.atleast_2d(np.asarray(lengths, dtype=float))
    g = np.atleast_1d(np.asarray(gamma, dtype=complex))
    a, b = g.real, g.imag
    d, inc = _pair_geometry(L)
    arg_b = d[:, None, :]*(2*b)[:, None]                                # (P, M, pairs)
    lossy = np.any(a != 0)
    if lossy:
        arg_a = d[:, None, :]*(2*a)[:, None]
        lam = 2*np.sum(np.cosh(arg_a) - np.cos(arg_b), axis=-1)
    else:
        lam = 2*(d.shape[-1] - np.sum(np.cos(arg_b), axis=-1))
    if not jacobian:
        return lam, None
    s = np.sin(arg_b)*(4*b)[:, None]
    if lossy:
        s += np.sinh(arg_a)*(4*a)[:, None]
    return lam, s @ inc


def lambda_and_jacobian_uniform(lengths, gamma0, dgamma, points, jacobian=True):
    """Same as :func:`lambda_and_jacobian_batch` for ``gamma_k = gamma0 + k*dgamma``.

    Constant media on a uniform grid have gamma linear in frequency, so every
    pair phasor ``exp(2*gamma_k*l_ij)`` advances by a fixed factor per grid
    step; one complex multiply per step replaces the trig evaluations.
    """
    L = np.atleast_2d(np.asarray(lengths, dtype=float))
    d, inc = _pair_geometry(L)
    g0, dg = complex(gamma0), complex(dgamma)
    lossy = g0.real != 0 or dg.real != 0
    z = np.exp(2*d*g0)
    step = np.exp(2*d*dg)
    P, K = d.shape
    lam = np.empty((P, points))
    s = np.empty((P, points, K)) if jacobian else None
    for k in range(points):
        gk = g0 + k*dg
        if lossy:
            mag = np.abs(z)
            c, sn = z.real/mag, z.imag/mag
            lam[:, k] = np.sum(mag + 1/mag, axis=-1) - 2*np.sum(c, axis=-1)
            if jacobian:
                s[:, k] = 4*gk.imag*sn + 2*gk.real*(mag - 1/mag)
        else:
            lam[:, k] = 2*(K - np.sum(z.real, axis=-1))
            if jacobian:
                s[:, k] = 4*gk.imag*z.imag
        z = z*step
    return lam, (s @ inc if jacobian else None)
