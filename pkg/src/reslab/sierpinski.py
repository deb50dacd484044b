"""Sierpinski gasket approximating graphs and the level-to-level rate experiments.

Level ``n`` has vertex set ``V_n`` (corners of the ``3**n`` cells of the word
recursion), nearest-neighbour edges of conductance ``(5/3)**n`` and the
measure ``mu_n(x) = #{cells containing x} / 3**(n+1)``.

Coordinates are stored exactly as integer pairs ``(a, b)`` in the lattice
basis ``e1 = (1, 0)``, ``e2 = (1/2, sqrt(3)/2)`` over the denominator ``2**n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .exponents import sierpinski_exponents
from .metric import EmbeddedPair, FiniteMetricSpace, bl_distance, hausdorff_distance
from .network import ResistanceNetwork, heat_kernel_row, semigroup_parts, spectral

MAX_LEVEL = 8
CORNERS = ((0, 0), (1, 0), (0, 1))
RATE_BASE = 3.0 / 5.0


@dataclass(frozen=True, eq=False)
class SGLevel:
    n: int
    coords: tuple          # integer lattice pairs over 2**n
    edges: tuple           # (i, j) with i < j
    cell_count: np.ndarray  # cells containing each vertex
    words: tuple            # cell words, each a tuple of 0/1/2
    cells: tuple            # corner vertex indices per cell, aligned with words

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def conductance(self) -> float:
        return (5.0 / 3.0) ** self.n

    @property
    def mass(self) -> np.ndarray:
        return self.cell_count / 3.0 ** (self.n + 1)

    def exact_mass(self):
        return [Fraction(int(c), 3 ** (self.n + 1)) for c in self.cell_count]

    def euclidean(self) -> np.ndarray:
        a = np.array([p[0] for p in self.coords], dtype=float)
        b = np.array([p[1] for p in self.coords], dtype=float)
        scale = 2.0 ** self.n
        return np.column_stack([(a + 0.5 * b) / scale, (math.sqrt(3) / 2) * b / scale])

    def index_of(self) -> dict:
        return {p: i for i, p in enumerate(self.coords)}

    def network(self) -> ResistanceNetwork:
        return _network(self.n)


@lru_cache(maxsize=None)
def build_sg_level(n: int) -> SGLevel:
    if not 0 <= n <= MAX_LEVEL:
        raise ValueError(f"level must lie in [0, {MAX_LEVEL}], got {n}")
    index: dict = {}
    coords: list = []
    count: list = []
    edges = set()
    words = []
    cells = []
    for c in CORNERS:          # outer corners get indices 0, 1, 2
        p = (c[0] << n, c[1] << n)
        index[p] = len(coords)
        coords.append(p)
        count.append(0)
    for word in itertools.product(range(3), repeat=n):
        ox = sum(CORNERS[i][0] << (n - k - 1) for k, i in enumerate(word))
        oy = sum(CORNERS[i][1] << (n - k - 1) for k, i in enumerate(word))
        cell = []
        for c in CORNERS:
            p = (ox + c[0], oy + c[1])
            if p not in index:
                index[p] = len(coords)
                coords.append(p)
                count.append(0)
            count[index[p]] += 1
            cell.append(index[p])
        for a, b in itertools.combinations(cell, 2):
            edges.add((min(a, b), max(a, b)))
        words.append(word)
        cells.append(tuple(cell))
    return SGLevel(n, tuple(coords), tuple(sorted(edges)), np.array(count, dtype=float),
                   tuple(words), tuple(cells))


@lru_cache(maxsize=None)
def _network(n: int) -> ResistanceNetwork:
    lvl = build_sg_level(n)
    c = lvl.conductance
    return ResistanceNetwork.from_edges(lvl.n_vertices, [(i, j, c) for i, j in lvl.edges])


@lru_cache(maxsize=None)
def _spectral(n: int):
    lvl = build_sg_level(n)
    return spectral(_network(n), lvl.mass)


def sg_resistance_matrix(lvl: SGLevel) -> np.ndarray:
    return _network(lvl.n).R


def embed(lower: int, upper: int) -> np.ndarray:
    """Indices in ``V_upper`` of the vertices of ``V_lower`` (in ``V_lower`` order)."""
    if lower > upper:
        raise ValueError("lower level must not exceed upper level")
    idx = build_sg_level(upper).index_of()
    shift = upper - lower
    return np.array([idx[(a << shift, b << shift)] for a, b in build_sg_level(lower).coords])


def decimation_check(n: int) -> float:
    """max |R_{n+1} - R_n| over pairs of V_n."""
    emb = embed(n, n + 1)
    fine = sg_resistance_matrix(build_sg_level(n + 1))[np.ix_(emb, emb)]
    return float(np.abs(fine - sg_resistance_matrix(build_sg_level(n))).max())


def _pair_in_level(n_small: int, n_big: int, with_mass: bool):
    big = build_sg_level(n_big)
    emb = embed(n_small, n_big)
    space = FiniteMetricSpace(range(big.n_vertices), sg_resistance_matrix(big), validate=False)
    kw = {}
    if with_mass:
        kw = {"massA": build_sg_level(n_small).mass, "massB": big.mass}
    return EmbeddedPair(space, tuple(emb), tuple(range(big.n_vertices)), **kw)


def _ratio_rows(values: dict) -> list:
    rows = []
    prev = None
    for n in sorted(values):
        v = values[n]
        rows.append({"n": n, "value": v, "ratio": (v / prev) if prev else float("nan")})
        prev = v
    return rows


def sg_hausdorff_decay(n_max: int) -> dict:
    """Hausdorff distances in the resistance metric.

    ``successive`` holds ``d_H(V_n, V_{n+1})`` (metric of level n+1) and
    ``to_finest`` holds ``d_H(V_n, V_{n_max})`` (metric of level n_max), each
    with the ratio to the previous row.  ``fitted_ratio`` is the geometric
    decay factor from a log-linear fit to the successive values.
    """
    succ = {n: hausdorff_distance(_pair_in_level(n, n + 1, False)) for n in range(n_max)}
    finest = {n: hausdorff_distance(_pair_in_level(n, n_max, False)) for n in range(n_max)}
    return {"successive": _ratio_rows(succ), "to_finest": _ratio_rows(finest),
            "fitted_ratio": _fit_ratio(succ)}


def sg_measure_decay(n_max: int, kappa: float = 1.0) -> dict:
    """``d_BL^kappa(mu_n, mu_{n+1})`` and ``d_BL^kappa(mu_n, mu_{n_max})`` in the resistance metric."""
    def dist(a, b):
        pair = _pair_in_level(a, b, True)
        mu, nu = pair.ambient_masses()
        return bl_distance(pair.ambient, mu, nu, kappa, method="highs")

    succ = {n: dist(n, n + 1) for n in range(n_max)}
    finest = {n: dist(n, n_max) for n in range(n_max)}
    return {"successive": _ratio_rows(succ), "to_finest": _ratio_rows(finest),
            "fitted_ratio": _fit_ratio(succ), "expected_ratio": RATE_BASE ** kappa}


def _fit_ratio(values: dict) -> float:
    ns = np.array(sorted(values), dtype=float)
    if ns.size < 2:
        return float("nan")
    ys = np.log([values[int(n)] for n in ns])
    slope = np.polyfit(ns, ys, 1)[0]
    return float(math.exp(slope))


def euclid_resistance_fit(lvl: SGLevel) -> float:
    """Least-squares slope of log R against log d_E over all vertex pairs."""
    R = sg_resistance_matrix(lvl)
    xy = lvl.euclidean()
    dE = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)
    iu = np.triu_indices(lvl.n_vertices, 1)
    return float(np.polyfit(np.log(dE[iu]), np.log(R[iu]), 1)[0])


def ahlfors_fit(lvl: SGLevel, n_radii: int = 12, centers: Optional[np.ndarray] = None):
    """Fit ``mu_n(B(x, r)) ~ c r**s`` in the resistance metric.

    Radii run geometrically from one edge-scale resistance ``(3/5)**n`` up
    to half the diameter.  Returns ``(lower_c, upper_c, exponent)`` where the constants
    bound the ratios ``mu(B(x,r)) / r**s`` over the grid.
    """
    R = sg_resistance_matrix(lvl)
    mass = lvl.mass
    if centers is None:
        centers = np.arange(lvl.n_vertices)
    edge_r = float((3.0 / 5.0) ** lvl.n)
    radii = np.geomspace(edge_r, 0.5 * R.max(), n_radii)
    vols = np.array([[mass[R[x] < r].sum() for r in radii] for x in centers])
    logr = np.repeat(np.log(radii)[None, :], len(centers), axis=0).ravel()
    s = float(np.polyfit(logr, np.log(vols.ravel()), 1)[0])
    ratios = vols / radii[None, :] ** s
    return float(ratios.min()), float(ratios.max()), s


def coordinate_x(lvl: SGLevel) -> np.ndarray:
    return lvl.euclidean()[:, 0]


def _bound_table(errors: dict, e1: float, e2: float, calibrate_at: int) -> list:
    base = errors[calibrate_at]
    shape = lambda n: RATE_BASE ** (e1 * n) * n ** e2  # noqa: E731
    C = base / shape(calibrate_at)
    rows = []
    prev = None
    for n in sorted(errors):
        err = errors[n]
        rows.append({"n": n, "err": err, "bound": C * shape(n),
                     "ratio": err / prev if prev else float("nan")})
        prev = err
    return rows


def sg_semigroup_error(n_lo: int, n_hi: int, t: float = 1.0, f: Optional[Callable] = None,
                       corner: int = 0, kappa: float = 1.0) -> dict:
    """Level-to-level semigroup differences at an outer corner.

    For ``n`` in ``[n_lo, n_hi)`` computes ``|P^n_t f(p) - P^{n+1}_t f(p)|``.
    The stationary mean and the decaying part of ``P_t f`` are differenced
    separately so that the mixing regime (``exp(-lambda_1 t)`` near machine
    precision) is still resolved.  ``f`` maps an ``(N, 2)`` array of
    Euclidean points to values; the default is the first coordinate.
    """
    if f is None:
        f = lambda xy: xy[:, 0]  # noqa: E731
    parts = {}
    for n in range(n_lo, n_hi + 1):
        lvl = build_sg_level(n)
        spec = _spectral(n)
        fv = np.asarray(f(lvl.euclidean()), dtype=float)
        mean, rest = semigroup_parts(spec, t, fv)
        parts[n] = (mean, float(rest[corner]))
    errors = {n: abs((parts[n][0] - parts[n + 1][0]) + (parts[n][1] - parts[n + 1][1]))
              for n in range(n_lo, n_hi)}
    e1, e2, _, _ = sierpinski_exponents(kappa)
    return {"t": t, "kappa": kappa, "E1": e1, "E2": e2,
            "rows": _bound_table(errors, e1, e2, n_lo),
            "fitted_ratio": _fit_ratio(errors)}


def sg_heat_kernel_error(n_lo: int, n_hi: int, t: float = 1.0, x: int = 0, y: int = 1,
                         kappa: float = 1.0) -> dict:
    """Level-to-level heat-kernel differences ``|p_n(t,x,y) - p_{n+1}(t,x,y)|`` at outer corners.

    The constant mode (``1 / mu(F) = 1`` at every level) cancels exactly and
    is left out.
    """
    if x > 2 or y > 2:
        raise ValueError("matched points must be outer corners (indices 0, 1, 2)")
    vals = {}
    for n in range(n_lo, n_hi + 1):
        spec = _spectral(n)
        w = np.exp(-spec.eigenvalues[1:] * t)
        vals[n] = float(np.sum(spec.phi[x, 1:] * spec.phi[y, 1:] * w))
    errors = {n: abs(vals[n] - vals[n + 1]) for n in range(n_lo, n_hi)}
    _, _, e1, e2 = sierpinski_exponents(kappa)
    return {"t": t, "kappa": kappa, "E1": e1, "E2": e2,
            "rows": _bound_table(errors, e1, e2, n_lo),
            "fitted_ratio": _fit_ratio(errors)}


def corner_heat_kernel(n: int, t: float, x: int = 0) -> np.ndarray:
    return heat_kernel_row(_spectral(n), t, x)
