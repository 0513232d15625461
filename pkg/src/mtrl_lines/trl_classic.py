"""Classical two-line TRL band arithmetic.

A line pair with length difference ``l`` is usable wherever its electrical
length stays a phase margin ``phi`` away from multiples of 180 degrees::

    pi*n + pi*phi/180 <= beta*l <= pi*n + pi*(1 - phi/180)

``eps_real`` is treated as a constant per call (use a band average or the DC
value for quasi-TEM lines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InfeasibleError
from .medium import C0

# floor/ceil guard against representation error when a band boundary is hit exactly
_EPS = 1e-9


@dataclass(frozen=True)
class BandSpec:
    f_min: float
    f_max: float
    phase_margin_deg: float
    band_index: int


@dataclass(frozen=True)
class TrlDesign:
    length_diff: float
    achieved_margin: float
    band_index: int
    f_min: float
    f_max: float


def _check_margin(margin_deg, lo=0.0, hi=90.0):
    if not lo <= margin_deg <= hi:
        raise ConfigError(f"phase margin must be within [{lo}, {hi}] degrees, got {margin_deg}")


def band_edges(l_diff: float, eps_real: float, margin_deg: float, n: int = 0):
    """Return ``(f_min, f_max)`` of band ``n`` for a pair with length difference ``l_diff``."""
    if l_diff <= 0 or eps_real <= 0:
        raise ConfigError("need l_diff > 0 and eps_real > 0")
    if n < 0:
        raise ConfigError("band index must be >= 0")
    _check_margin(margin_deg)
    scale = C0/(2*l_diff*math.sqrt(eps_real))
    return (n + margin_deg/180)*scale, (n + 1 - margin_deg/180)*scale


def band_index(f_min: float, f_max: float, margin_deg: float) -> int:
    """Largest band index consistent with both edges; clamped to 0 for wideband requests."""
    if not 0 < f_min < f_max:
        raise ConfigError("need 0 < f_min < f_max")
    _check_margin(margin_deg)
    q = f_min/f_max
    n = math.floor((q - (q + 1)*margin_deg/180)/(1 - q) + _EPS)
    return max(n, 0)


def achieved_margin(f_min: float, f_max: float, n: int) -> float:
    """Phase margin actually obtained when both edges are forced into band ``n``."""
    if not 0 < f_min <= f_max:
        raise ConfigError("need 0 < f_min <= f_max")
    if n < 0:
        raise ConfigError("band index must be >= 0")
    q = f_min/f_max
    phi = 180*(n*q - n + q)/(q + 1)
    if phi < 0:
        raise InfeasibleError(f"band {n} is infeasible for f_max/f_min = {1/q:g}")
    return phi


def length_for_band(f: float, eps_real: float, margin_deg: float, n: int = 0,
                    anchor: str = "low") -> float:
    """Length difference placing the band-``n`` lower (``anchor='low'``) or upper
    (``anchor='high'``) edge at ``f``."""
    if f <= 0 or eps_real <= 0:
        raise ConfigError("need f > 0 and eps_real > 0")
    _check_margin(margin_deg)
    scale = C0/(2*f*math.sqrt(eps_real))
    if anchor == "low":
        return scale*(n + margin_deg/180)
    if anchor == "high":
        return scale*(n + 1 - margin_deg/180)
    raise ConfigError(f"anchor must be 'low' or 'high', got {anchor!r}")


def design_trl(f_min: float, f_max: float, eps_real: float, margin_deg: float) -> TrlDesign:
    """Two-line design covering ``[f_min, f_max]`` in the highest feasible band."""
    _check_margin(margin_deg, 0.0, 90.0)
    n = band_index(f_min, f_max, margin_deg)
    phi = achieved_margin(f_min, f_max, n)
    l = length_for_band(f_min, eps_real, phi, n, "low")
    return TrlDesign(length_diff=l, achieved_margin=phi, band_index=n, f_min=f_min, f_max=f_max)
