"""Recommended number of lines for lossless kits.

Counts the nulls of the longest line (relative to the thru) inside the
frequency range; each null needs one more line pair. The closed form counts
electrical half-turns ``2*l*f*sqrt(eps')/c0``. For dispersive media
:func:`recommend_for_model` evaluates the same count with the true phase
constant, ``beta(f)*l/pi``, which coincides with it for constant eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .medium import C0, as_medium, phase_constant

_EPS = 1e-9


@dataclass(frozen=True)
class LineCountResult:
    m_max: int
    m_min: int
    m: int
    n_lines: int
    # True when no divisor of m_max exists inside [m_min, m_max) so the
    # full-band pair count is used even for a narrow band
    harmonic_fallback: bool = False

    @property
    def recommendation_band(self):
        return tuple(sorted({max(2, self.n_lines - 1), self.n_lines, self.n_lines + 1}))


def _pairs_from_turns(turns: float, margin_deg: float) -> int:
    if not 0 <= margin_deg <= 90:
        raise ConfigError("phase margin must be within [0, 90] degrees")
    return math.ceil(turns - 1 + margin_deg/180 - _EPS) + 1


def _turns(l_max, f, eps_real):
    if l_max <= 0 or eps_real <= 0 or f < 0:
        raise ConfigError("need l_max > 0, eps_real > 0, f >= 0")
    return 2*l_max*f*math.sqrt(eps_real)/C0


def pairs_full_band(l_max: float, f_max: float, eps_real: float, margin_deg: float) -> int:
    """Line pairs needed to cover DC..f_max."""
    return _pairs_from_turns(_turns(l_max, f_max, eps_real), margin_deg)


def pairs_banded(l_max: float, f_min: float, f_max: float, eps_real: float,
                 margin_deg: float) -> int:
    """Line pairs needed to cover f_min..f_max (the bandwidth replaces f_max)."""
    if f_min > f_max:
        raise ConfigError("need f_min <= f_max")
    return _pairs_from_turns(_turns(l_max, f_max - f_min, eps_real), margin_deg)


def pairs_harmonic(m_min: int, m_max: int) -> int:
    """Smallest m in [m_min, m_max] dividing m_max."""
    if not 1 <= m_min <= m_max:
        raise ConfigError("need 1 <= m_min <= m_max")
    for m in range(m_min, m_max + 1):
        if m_max % m == 0:
            return m
    return m_max  # unreachable: m_max divides itself


def lines_from_pairs(m: int) -> int:
    """Invert ``m = N(N-1)/2`` rounding half up."""
    if m < 1:
        raise ConfigError("need m >= 1")
    return math.floor((1 + math.sqrt(1 + 8*m))/2 + 0.5)


def _result(m_max, m_min):
    m_min = min(m_min, m_max)
    m = pairs_harmonic(m_min, m_max)
    return LineCountResult(m_max=m_max, m_min=m_min, m=m, n_lines=max(2, lines_from_pairs(m)),
                           harmonic_fallback=(m == m_max and m_min < m_max))


def recommend_lines(l_max: float, f_min: float, f_max: float, eps_real: float,
                    margin_deg: float) -> LineCountResult:
    """Full pair-count pipeline for a constant ``eps_real``."""
    m_max = pairs_full_band(l_max, f_max, eps_real, margin_deg)
    m_min = pairs_banded(l_max, f_min, f_max, eps_real, margin_deg)
    return _result(m_max, m_min)


def recommend_for_model(l_max: float, f_min: float, f_max: float, model,
                        margin_deg: float) -> LineCountResult:
    """Pair-count pipeline with electrical lengths taken from the medium's beta(f)."""
    model = as_medium(model)
    if l_max <= 0 or not 0 <= f_min <= f_max:
        raise ConfigError("need l_max > 0 and 0 <= f_min <= f_max")
    b_hi = float(phase_constant(model, f_max))
    b_lo = float(phase_constant(model, f_min)) if f_min > 0 else 0.0
    m_max = _pairs_from_turns(b_hi*l_max/np.pi, margin_deg)
    m_min = _pairs_from_turns((b_hi - b_lo)*l_max/np.pi, margin_deg)
    return _result(m_max, m_min)
