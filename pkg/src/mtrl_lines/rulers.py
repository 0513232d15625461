"""Sparse-ruler line sets.

Line lengths are integer marks times a unit length ``l0``. Because every pair
difference is then a multiple of ``l0`` the effective phase repeats with the
period of ``l0``'s half-wave frequency; ``l0`` sets the upper band edge and the
longest line the lower one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import line_count, trl_classic
from .eigenmetrics import effective_phase
from .errors import ConfigError, InfeasibleError, UnsupportedOrderError
from .medium import as_medium, eps_complex, frequency_grid

FAMILIES = ("golomb", "perfect", "wichmann")

# optimal (shortest known) Golomb rulers
GOLOMB = {
    1: (0,),
    2: (0, 1),
    3: (0, 1, 3),
    4: (0, 1, 4, 6),
    5: (0, 1, 4, 9, 11),
    6: (0, 1, 4, 10, 12, 17),
    7: (0, 1, 4, 10, 18, 23, 25),
    8: (0, 1, 4, 9, 15, 22, 32, 34),
    9: (0, 1, 5, 12, 25, 27, 35, 41, 44),
    10: (0, 1, 6, 10, 23, 26, 34, 41, 53, 55),
    11: (0, 1, 4, 13, 28, 33, 47, 54, 64, 70, 72),
    12: (0, 2, 6, 24, 29, 40, 43, 55, 68, 75, 76, 85),
    13: (0, 2, 5, 25, 37, 43, 59, 70, 85, 89, 98, 99, 106),
    14: (0, 4, 6, 20, 35, 52, 59, 77, 78, 86, 89, 99, 122, 127),
    15: (0, 4, 20, 30, 57, 59, 62, 76, 100, 111, 123, 136, 144, 145, 151),
    16: (0, 1, 4, 11, 26, 32, 56, 68, 76, 115, 117, 134, 150, 163, 168, 177),
    17: (0, 5, 7, 17, 52, 56, 67, 80, 81, 100, 122, 138, 159, 165, 168, 191, 199),
    18: (0, 2, 10, 22, 53, 56, 82, 83, 89, 98, 130, 148, 153, 167, 188, 192, 205, 216),
    19: (0, 1, 6, 25, 32, 72, 100, 108, 120, 130, 153, 169, 187, 190, 204, 231, 233, 242,
         246),
    20: (0, 1, 8, 11, 68, 77, 94, 116, 121, 156, 158, 179, 194, 208, 212, 228, 240, 253,
         259, 283),
}

# every distance measured exactly once
PERFECT = {2: (0, 1), 3: (0, 1, 3), 4: (0, 1, 4, 6)}


def wichmann_marks(r: int, s: int) -> tuple:
    """Marks of the Wichmann ruler W(r, s): gaps 1^r, r+1, (2r+1)^r, (4r+3)^s, (2r+2)^(r+1), 1^r.

    The ruler has ``4r + s + 3`` marks and length ``4r(r+s+2) + 3(s+1)``.
    """
    if r < 0 or s < 0:
        raise ConfigError("Wichmann parameters must be >= 0")
    gaps = [1]*r + [r + 1] + [2*r + 1]*r + [4*r + 3]*s + [2*r + 2]*(r + 1) + [1]*r
    return tuple(int(x) for x in np.concatenate([[0], np.cumsum(gaps)]))


def _wichmann_table(max_order=20):
    table = dict(PERFECT)
    for n in range(4, max_order + 1):
        best = None
        for r in range(0, (n - 3)//4 + 1):
            marks = wichmann_marks(r, n - 4*r - 3)
            if best is None or marks[-1] > best[-1]:
                best = marks
        table[n] = best
    return table


WICHMANN = _wichmann_table()

_TABLES = {"golomb": GOLOMB, "perfect": PERFECT, "wichmann": WICHMANN}


@dataclass(frozen=True)
class Ruler:
    marks: tuple
    family: str

    @property
    def order(self) -> int:
        return len(self.marks)

    @property
    def length(self) -> int:
        return self.marks[-1]


@dataclass(frozen=True)
class RulerReport:
    is_golomb: bool
    covered: frozenset
    gaps: frozenset

    @property
    def complete(self) -> bool:
        return not self.gaps


@dataclass
class RulerDesign:
    l0: float
    ruler: Ruler
    lengths: np.ndarray
    covered_bands: list = field(default_factory=list)
    eps_real: float = 0.0
    band_n: int = 0
    min_phase_deg: float = float("nan")
    margin_met: bool = False


def ruler_for_order(n_lines: int, family: str = "golomb") -> Ruler:
    if family not in _TABLES:
        raise ConfigError(f"unknown ruler family {family!r}; choose from {FAMILIES}")
    table = _TABLES[family]
    if n_lines not in table or n_lines < 2:
        lo, hi = max(2, min(table)), max(table)
        raise UnsupportedOrderError(f"{family} rulers are tabulated for orders {lo}..{hi}, "
                                    f"got {n_lines}")
    return Ruler(tuple(table[n_lines]), family)


def verify_ruler(marks) -> RulerReport:
    """Census of pairwise differences."""
    m = [int(x) for x in (marks.marks if isinstance(marks, Ruler) else marks)]
    if m != sorted(set(m)) or not m or m[0] != 0:
        raise ConfigError("ruler marks must be strictly increasing and start at 0")
    diffs = [b - a for a, b in combinations(m, 2)]
    covered = frozenset(diffs)
    gaps = frozenset(range(1, m[-1] + 1)) - covered
    return RulerReport(is_golomb=len(covered) == len(diffs), covered=covered, gaps=gaps)


def search_golomb(order: int, max_length: int | None = None):
    """Shortest Golomb ruler of a given order by depth-first search.

    Exponential; meant for cross-checking the table at small orders. Returns
    the lexicographically first optimal ruler whose first gap does not exceed
    its last (the mirror-image convention used by the table).
    """
    if order < 1:
        raise ConfigError("order must be >= 1")
    if order == 1:
        return (0,)
    limit = max_length if max_length is not None else order*order
    for length in range(order - 1, limit + 1):
        found = _golomb_dfs([0], set(), order, length)
        if found is not None:
            return tuple(found)
    return None


def _golomb_dfs(marks, used, order, length):
    if len(marks) == order - 1:
        new = {length - m for m in marks}
        if len(new) == len(marks) and not (new & used):
            cand = marks + [length]
            if cand[1] - cand[0] <= cand[-1] - cand[-2]:
                return cand
        return None
    for x in range(marks[-1] + 1, length):
        new = {x - m for m in marks}
        if len(new) < len(marks) or (new & used) or (length - x) in used | new:
            continue
        res = _golomb_dfs(marks + [x], used | new, order, length)
        if res is not None:
            return res
    return None


def _band_eps(model, f_min, f_max, points=501):
    f = np.linspace(f_min, f_max, points)
    return float(np.mean(eps_complex(model, f).real))


def design_by_ruler(f_min: float, f_max: float, margin_deg: float, model, band_n: int = 0,
                    n_lines: int | None = None, family: str = "golomb",
                    check: bool = True, points: int = 501) -> RulerDesign:
    """Scale a sparse ruler so that ``l0`` puts ``f_max`` on the upper band-``band_n`` edge.

    Without ``n_lines`` the order comes from the pair-count pipeline and is
    increased until the margin holds on the check grid. With ``check`` set an
    explicit order that misses the margin raises :class:`InfeasibleError`;
    otherwise the shortfall is reported through ``margin_met``.
    """
    model = as_medium(model)
    if not 0 < f_min < f_max:
        raise ConfigError("need 0 < f_min < f_max")
    if not 0 < margin_deg < 90:
        raise ConfigError("phase margin must be within (0, 90) degrees")
    eps_r = _band_eps(model, f_min, f_max)
    l0 = trl_classic.length_for_band(f_max, eps_r, margin_deg, band_n, "high")

    if n_lines is None:
        l_need = trl_classic.length_for_band(f_min, eps_r, margin_deg, 0, "low")
        orders = range(max(2, line_count.recommend_lines(
            l_need, f_min, f_max, eps_r, margin_deg).n_lines), max(_TABLES[family]) + 1)
        explicit = False
    else:
        orders = [n_lines]
        explicit = True

    grid = frequency_grid(f_min, f_max, points)
    design = None
    for n in orders:
        ruler = ruler_for_order(n, family)
        lengths = np.asarray(ruler.marks, dtype=float)*l0
        curve = effective_phase(lengths, model, grid)
        phi_min = float(np.min(curve.phi_deg))
        design = RulerDesign(l0=l0, ruler=ruler, lengths=lengths,
                             covered_bands=covered_bands(ruler, l0, eps_r, margin_deg, band_n),
                             eps_real=eps_r, band_n=band_n, min_phase_deg=phi_min,
                             margin_met=phi_min >= margin_deg - 1e-9)
        if design.margin_met:
            return design
    if check:
        which = f"order {n_lines}" if explicit else f"orders up to {orders[-1]}"
        raise InfeasibleError(f"{family} ruler with {which} reaches only {design.min_phase_deg:.2f} deg "
                              f"(< {margin_deg} deg) over {f_min:g}..{f_max:g} Hz")
    return design


def covered_bands(ruler: Ruler, l0: float, eps_real: float, margin_deg: float,
                  up_to: int = 0) -> list:
    """Bands ``0..up_to`` of a harmonic set: lower edge from the longest line,
    upper edge from ``l0``, repeating every half-wave period of ``l0``."""
    if ruler.length == 0:
        return []
    period = trl_classic.band_edges(l0, eps_real, 0.0, 1)[0]
    lo0 = trl_classic.band_edges(ruler.length*l0, eps_real, margin_deg, 0)[0]
    out = []
    for k in range(up_to + 1):
        hi = trl_classic.band_edges(l0, eps_real, margin_deg, k)[1]
        out.append(trl_classic.BandSpec(f_min=k*period + lo0, f_max=hi,
                                        phase_margin_deg=margin_deg, band_index=k))
    return out
