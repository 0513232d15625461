"""Transmission media: complex relative effective permittivity and propagation constant.

Three dispersion models are provided:

* :class:`ConstantMedium` -- frequency independent (TEM-like) permittivity
* :class:`TabulatedMedium` -- measured or simulated data, linearly interpolated
* :class:`RectangularWaveguide` -- lossless TE10 dispersion of an air- or
  dielectric-filled rectangular waveguide

Permittivity follows the engineering convention ``eps = eps' - j*eps''`` with
``eps'' >= 0`` for passive media.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import BelowCutoffError, ConfigError, FrequencyRangeError

C0 = 299792458.0  # speed of light in vacuum (m/s)


@dataclass(frozen=True)
class Permittivity:
    eps_real: float
    eps_imag: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.eps_real) or self.eps_real <= 0:
            raise ConfigError(f"eps_real must be > 0, got {self.eps_real}")
        if not np.isfinite(self.eps_imag) or self.eps_imag < 0:
            raise ConfigError(f"eps_imag must be >= 0, got {self.eps_imag}")

    @property
    def value(self) -> complex:
        return complex(self.eps_real, -self.eps_imag)


@dataclass(frozen=True)
class ConstantMedium:
    permittivity: Permittivity

    lossless = property(lambda self: self.permittivity.eps_imag == 0)
    dispersive = False
    f_lower = 0.0
    f_upper = np.inf

    def eps(self, f):
        f = np.asarray(f, dtype=float)
        return np.full(f.shape, self.permittivity.value, dtype=complex)


@dataclass(frozen=True)
class TabulatedMedium:
    """Permittivity table with linear interpolation of eps' and eps'' separately.

    Frequencies outside the table raise :class:`FrequencyRangeError`; there is
    no extrapolation.
    """

    frequencies: tuple
    eps_real: tuple
    eps_imag: tuple

    dispersive = True

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        er = np.asarray(self.eps_real, dtype=float)
        ei = np.asarray(self.eps_imag, dtype=float)
        if f.ndim != 1 or f.size < 2:
            raise ConfigError("tabulated medium needs at least 2 points")
        if er.shape != f.shape or ei.shape != f.shape:
            raise ConfigError("tabulated columns must have equal length")
        if np.any(np.diff(f) <= 0) or f[0] <= 0:
            raise ConfigError("tabulated frequencies must be positive and strictly increasing")
        if np.any(er <= 0) or np.any(ei < 0):
            raise ConfigError("tabulated permittivity needs eps_real > 0 and eps_imag >= 0")

    @classmethod
    def from_points(cls, points):
        """Build from ``[(f_hz, Permittivity | (eps_real, eps_imag)), ...]``."""
        fs, ers, eis = [], [], []
        for f, p in points:
            if not isinstance(p, Permittivity):
                p = Permittivity(*p)
            fs.append(float(f))
            ers.append(p.eps_real)
            eis.append(p.eps_imag)
        return cls(tuple(fs), tuple(ers), tuple(eis))

    @property
    def lossless(self):
        return not any(self.eps_imag)

    @property
    def f_lower(self):
        return self.frequencies[0]

    @property
    def f_upper(self):
        return self.frequencies[-1]

    def eps(self, f):
        f = np.asarray(f, dtype=float)
        if np.any(f < self.f_lower) or np.any(f > self.f_upper):
            raise FrequencyRangeError(
                f"frequency outside tabulated range [{self.f_lower:g}, {self.f_upper:g}] Hz")
        er = np.interp(f, self.frequencies, self.eps_real)
        ei = np.interp(f, self.frequencies, self.eps_imag)
        return er - 1j*ei


@dataclass(frozen=True)
class RectangularWaveguide:
    """Lossless TE10 mode: ``eps' = eps_r*(1 - (fc/f)**2)`` with ``fc = c0/(2a*sqrt(eps_r))``."""

    width: float
    eps_r: float = 1.0

    lossless = True
    dispersive = True
    f_upper = np.inf

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"waveguide width must be > 0, got {self.width}")
        if not self.eps_r >= 1:
            raise ConfigError(f"waveguide filling eps_r must be >= 1, got {self.eps_r}")

    @property
    def cutoff(self) -> float:
        return C0/(2*self.width*np.sqrt(self.eps_r))

    @property
    def f_lower(self):
        return self.cutoff

    def eps(self, f):
        f = np.asarray(f, dtype=float)
        if np.any(f <= self.cutoff):
            raise BelowCutoffError(
                f"frequency at or below TE10 cutoff {self.cutoff/1e9:.4f} GHz")
        return (self.eps_r*(1 - (self.cutoff/f)**2)).astype(complex)


DispersionModel = Union[ConstantMedium, TabulatedMedium, RectangularWaveguide]


def constant(eps_real: float, eps_imag: float = 0.0) -> ConstantMedium:
    return ConstantMedium(Permittivity(eps_real, eps_imag))


def as_medium(model) -> DispersionModel:
    """Accept a model, a :class:`Permittivity`, or a plain number ``eps' - j*eps''``."""
    if isinstance(model, (ConstantMedium, TabulatedMedium, RectangularWaveguide)):
        return model
    if isinstance(model, Permittivity):
        return ConstantMedium(model)
    if isinstance(model, (int, float, complex, np.number)):
        z = complex(model)
        return constant(z.real, -z.imag)
    raise ConfigError(f"cannot interpret {model!r} as a dispersion model")


def _check_f(f):
    f = np.asarray(f, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f < 0):
        raise ConfigError("frequencies must be finite and non-negative")
    return f


def permittivity_at(model, f: float) -> Permittivity:
    model = as_medium(model)
    if not float(f) > 0:
        raise ConfigError(f"frequency must be > 0, got {f}")
    e = complex(model.eps(float(f)))
    # eps'' can come out as -0.0 from interpolation of zeros
    return Permittivity(e.real, max(-e.imag, 0.0))


def eps_complex(model, f):
    """Vectorized ``eps' - j*eps''`` on an array of frequencies."""
    return as_medium(model).eps(_check_f(f))


def gamma(model, f):
    """Propagation constant ``(2*pi*f/c0)*sqrt(-eps)`` on the passive branch.

    Returns complex scalar for scalar ``f`` and an array otherwise.
    """
    f = _check_f(f)
    g = gamma_from_eps(as_medium(model).eps(f), f)
    return g[()] if g.ndim == 0 else g


def frequency_grid(f_min: float, f_max: float, points: int) -> np.ndarray:
    """Linearly spaced grid; ``f_min`` may be zero for DC-anchored sweeps."""
    if points < 2:
        raise ConfigError("frequency grid needs at least 2 points")
    if not 0 <= f_min < f_max:
        raise ConfigError(f"need 0 <= f_min < f_max, got {f_min}, {f_max}")
    return np.linspace(f_min, f_max, int(points))


def phase_constant(model, f):
    """beta(f) = Im(gamma) in rad/m."""
    return np.imag(gamma(model, f))


def frequency_at_phase(model, length: float, phase: float) -> float:
    """Frequency where the electrical length ``beta(f)*length`` equals ``phase`` (rad).

    Closed form for constant media; bracketed root search otherwise. Assumes
    ``beta(f)`` is increasing, which holds for all models shipped here.
    """
    model = as_medium(model)
    if length <= 0 or phase < 0:
        raise ConfigError("need length > 0 and phase >= 0")
    if isinstance(model, ConstantMedium):
        beta_per_hz = phase_constant(model, 1.0)
        return phase/(beta_per_hz*length)

    lo = model.f_lower*(1 + 1e-12) if model.f_lower > 0 else 1.0
    def resid(f):
        return phase_constant(model, f)*length - phase
    if resid(lo) >= 0:
        return lo
    hi = max(2*lo, 1.0)
    while resid(hi) < 0:
        if hi >= model.f_upper:
            raise FrequencyRangeError("requested electrical length lies above the model's range")
        hi = min(2*hi, model.f_upper)
    return brentq(resid, lo, hi, xtol=1e-12*hi, rtol=4*np.finfo(float).eps, maxiter=200)


def gamma_from_eps(eps, f):
    """Propagation constant from already evaluated ``eps' - j*eps''`` values."""
    eps = np.asarray(eps, dtype=complex)
    f = _check_f(f)
    # -eps' + j*eps'' with eps'' >= 0 keeps the principal root in the first quadrant;
    # adding +0.0 turns a -0.0 imaginary part into +0.0 so lossless media give +j*beta
    g = np.sqrt(-eps.real + 1j*(np.maximum(-eps.imag, 0.0) + 0.0))
    return 2*np.pi*f/C0*g
