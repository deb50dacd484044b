"""Real trees coded by piecewise-linear excursions.

An excursion ``f`` on a grid ``t_0 = 0 < ... < t_N`` codes the tree
``[0, sigma_f] / ~`` with ``d(s, t) = f(s) + f(t) - 2 min_{[s,t]} f`` and the
pushforward of Lebesgue measure.  All infima are taken over breakpoints, so
every tree distance below is exact up to rounding.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .metric import EmbeddedPair, FiniteMetricSpace, bl_distance, hausdorff_distance

QUOTIENT_TOL = 1e-12
DEFAULT_EPS = 1e-9


class ExcursionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CodedExcursion:
    t: np.ndarray
    f: np.ndarray

    def __init__(self, t, f):
        t = np.asarray(t, dtype=float)
        f = np.asarray(f, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or t.size < 2:
            raise ExcursionError("need matching 1-d arrays with at least two points")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ExcursionError("grid must start at 0 and increase strictly")
        if np.any(f < 0) or f[0] != 0.0 or f[-1] != 0.0:
            raise ExcursionError("values must be nonnegative and vanish at both ends")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", f)

    @property
    def sigma(self) -> float:
        pos = np.flatnonzero(self.f > 0)
        return float(self.t[pos[-1] + 1]) if pos.size else 0.0

    def __call__(self, s):
        return np.interp(s, self.t, self.f, right=0.0)

    def restricted(self) -> "CodedExcursion":
        """The same excursion cut at ``sigma``."""
        k = int(np.searchsorted(self.t, self.sigma)) + 1
        k = max(k, 2)
        return CodedExcursion(self.t[:k], self.f[:k])

    def on_grid(self, grid) -> "CodedExcursion":
        grid = np.asarray(grid, dtype=float)
        return CodedExcursion(grid, self(grid))


def tree_pseudometric(exc: CodedExcursion, s: float, t: float) -> float:
    if s > t:
        s, t = t, s
    inner = (exc.t > s) & (exc.t < t)
    fs, ft = float(exc(s)), float(exc(t))
    low = min(fs, ft, float(exc.f[inner].min()) if inner.any() else math.inf)
    return fs + ft - 2 * low


def pseudometric_matrix(values: np.ndarray) -> np.ndarray:
    """``f_i + f_j - 2 min_{i..j} f`` for values at consecutive grid points."""
    v = np.asarray(values, dtype=float)
    n = v.size
    D = np.zeros((n, n))
    for i in range(n):
        run = np.minimum.accumulate(v[i:])
        D[i, i:] = v[i] + v[i:] - 2 * run
    D = np.maximum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True, eq=False)
class CodedTree:
    times: np.ndarray        # one representative time per tree point
    dist: np.ndarray
    mass: np.ndarray
    labels: np.ndarray       # grid index -> representative index
    root: int

    def space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(range(self.times.size), self.dist, validate=False)


def _trapezoid_weights(t: np.ndarray, upto: float) -> np.ndarray:
    w = np.zeros(t.size)
    cell = np.diff(np.minimum(t, upto))
    w[:-1] += cell / 2
    w[1:] += cell / 2
    return w


def _quotient(D: np.ndarray, tol: float):
    n = D.shape[0]
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    ii, jj = np.nonzero(np.triu(D <= tol, 1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(n)])
    reps, labels = np.unique(roots, return_inverse=True)
    return reps, labels


def build_coded_tree(exc: CodedExcursion, tol: float = QUOTIENT_TOL) -> CodedTree:
    """Quotient the grid of ``[0, sigma_f]`` by ``d = 0`` and push the cell lengths forward."""
    e = exc.restricted()
    D = pseudometric_matrix(e.f)
    reps, labels = _quotient(D, tol)
    mass = np.bincount(labels, weights=_trapezoid_weights(e.t, e.sigma), minlength=reps.size)
    return CodedTree(e.t[reps], D[np.ix_(reps, reps)], mass, labels, int(labels[0]))


def four_point_defect(D: np.ndarray, max_quads: Optional[int] = None, seed: int = 0) -> float:
    """Largest violation of ``d(a,b)+d(c,d) <= max(d(a,c)+d(b,d), d(a,d)+d(b,c))``."""
    n = D.shape[0]
    if n < 4:
        return 0.0
    if max_quads is None:
        idx = np.array(np.meshgrid(*(np.arange(n),) * 4, indexing="ij")).reshape(4, -1)
        if idx.shape[1] > 2_000_000:
            max_quads = 200_000
    if max_quads is not None:
        idx = np.random.default_rng(seed).integers(0, n, size=(4, max_quads))
    a, b, c, d = idx
    lhs = D[a, b] + D[c, d]
    rhs = np.maximum(D[a, c] + D[b, d], D[a, d] + D[b, c])
    return float(max(0.0, (lhs - rhs).max()))


def sup_difference(f: CodedExcursion, g: CodedExcursion, upto: Optional[float] = None) -> float:
    """``sup_{[0, upto]} |f - g|`` (default ``upto = sigma_f ^ sigma_g``), exact at breakpoints."""
    if upto is None:
        upto = min(f.sigma, g.sigma)
    grid = np.union1d(f.t, g.t)
    grid = np.union1d(grid[grid <= upto], [upto])
    return float(np.abs(f(grid) - g(grid)).max())


def ghp_bound(f: CodedExcursion, g: CodedExcursion, kappa: float = 1.0) -> float:
    """``2 a + 2^kappa (sigma_f ^ sigma_g) a^kappa + |sigma_f - sigma_g|`` with ``a = sup |f - g|``."""
    a = sup_difference(f, g)
    sf, sg = f.sigma, g.sigma
    return 2 * a + 2 ** kappa * min(sf, sg) * a ** kappa + abs(sf - sg)


@dataclass(frozen=True)
class EmbeddingResult:
    achieved: float
    distortion: float
    hausdorff: float
    bl: float
    epsilon: float


def correspondence_embedding(f: CodedExcursion, g: CodedExcursion, epsilon: float = DEFAULT_EPS,
                             kappa: float = 1.0) -> EmbeddingResult:
    """Embed both trees into the glued space built from the time-matched correspondence.

    Both excursions are sampled on the union of their breakpoints over
    ``[0, sigma_f v sigma_g]`` (past its own support an excursion sits at the
    root).  The cross distance is
    ``min_k d^f(x, x_k) + d^g(y_k, y) + dis/2 + epsilon``, the masses are the
    trapezoid weights of each support, and the result is the embedded
    GHP-type distance of the two trees inside that space.
    """
    if epsilon <= 0:
        raise ExcursionError("epsilon must be positive")
    top = max(f.sigma, g.sigma)
    grid = np.union1d(f.t, g.t)
    grid = np.union1d(grid[grid <= top], [top])
    Df = pseudometric_matrix(f(grid))
    Dg = pseudometric_matrix(g(grid))
    dis = float(np.abs(Df - Dg).max())

    rf, lf = _quotient(Df, QUOTIENT_TOL)
    rg, lg = _quotient(Dg, QUOTIENT_TOL)
    Af, Ag = Df[np.ix_(rf, rf)], Dg[np.ix_(rg, rg)]
    # min-plus product through the matched times
    Pf = Df[rf]             # rep of f -> grid time
    Pg = Dg[rg]
    cross = np.full((rf.size, rg.size), np.inf)
    for k in range(grid.size):
        np.minimum(cross, Pf[:, k][:, None] + Pg[:, k][None, :], out=cross)
    cross += dis / 2 + epsilon

    nf = rf.size
    Z = np.block([[Af, cross], [cross.T, Ag]])
    space = FiniteMetricSpace(range(Z.shape[0]), Z, validate=False)
    mf = np.bincount(lf, weights=_trapezoid_weights(grid, f.sigma), minlength=nf)
    mg = np.bincount(lg, weights=_trapezoid_weights(grid, g.sigma), minlength=rg.size)
    pair = EmbeddedPair(space, tuple(range(nf)), tuple(range(nf, nf + rg.size)),
                        massA=mf, massB=mg)
    haus = hausdorff_distance(pair)
    bl = bl_distance(space, *pair.ambient_masses(), kappa)
    return EmbeddingResult(max(haus, bl), dis, haus, bl, epsilon)


def _first_reach(vals, times, level):
    """Time from ``times[0]`` until the PL path first moves ``level`` away from ``vals[0]``."""
    start = vals[0]
    hit = np.flatnonzero(np.abs(vals[1:] - start) >= level)
    if hit.size == 0:
        return math.inf
    j = hit[0] + 1
    a, b = vals[j - 1], vals[j]
    target = start + level if b >= start + level else start - level
    frac = (target - a) / (b - a)
    return abs(times[j - 1] + frac * (times[j] - times[j - 1]) - times[0])


def modulus_inverse(exc: CodedExcursion, r: float) -> float:
    """``sup{h > 0 : omega(h) < r}`` for the exact modulus of continuity on ``[0, sigma_f]``.

    The extremal pairs have one end at a breakpoint, so it is enough to scan
    each breakpoint for the nearest time where ``|f - f(t_i)|`` reaches ``r``.
    """
    e = exc.restricted()
    best = math.inf
    t, v = e.t, e.f
    for i in range(t.size):
        best = min(best, _first_reach(v[i:], t[i:], r), _first_reach(v[i::-1], t[i::-1], r))
    return best


def _linear_sublevel(a, b, ya, yb, r):
    """Length of ``{s in [a, b] : y(s) < r}`` for ``y`` linear from ``ya`` to ``yb``."""
    if b <= a:
        return 0.0
    if ya < r and yb < r:
        return b - a
    if ya >= r and yb >= r:
        return 0.0
    cross = a + (r - ya) / (yb - ya) * (b - a)
    return cross - a if ya < r else b - cross


def _one_side_ball(t, v, f0, r):
    """Lebesgue measure of ``{s : d(s, t0) < r}`` along the path ``(t, v)`` leaving ``t0 = t[0]``.

    With ``M`` the running minimum, ``d = f + f0 - 2 M`` is linear on each
    segment except where ``f`` drops below ``M``; there the segment is split
    and ``d = f0 - f`` on the lower part.
    """
    total = 0.0
    M = f0
    for k in range(1, t.size):
        h = abs(t[k] - t[k - 1])
        fa, fb = v[k - 1], v[k]
        if fb < M:
            c = (fa - M) / (fa - fb) * h          # fa >= M always
            total += _linear_sublevel(0.0, c, fa + f0 - 2 * M, f0 - M, r)
            total += _linear_sublevel(c, h, f0 - M, f0 - fb, r)
            M = fb
        else:
            total += _linear_sublevel(0.0, h, fa + f0 - 2 * M, fb + f0 - 2 * M, r)
    return total


def _split_at(exc: CodedExcursion, t0: float):
    e = exc.restricted()
    f0 = float(e(t0))
    right = e.t > t0
    left = e.t < t0
    tr = np.concatenate([[t0], e.t[right]])
    vr = np.concatenate([[f0], e.f[right]])
    tl = np.concatenate([[t0], e.t[left][::-1]])
    vl = np.concatenate([[f0], e.f[left][::-1]])
    return f0, (tr, vr), (tl, vl)


def ball_mass(exc: CodedExcursion, t0: float, r: float) -> float:
    """``m^f(B(p^f(t0), r))`` computed exactly on the piecewise-linear code."""
    f0, (tr, vr), (tl, vl) = _split_at(exc, t0)
    return _one_side_ball(tr, vr, f0, r) + _one_side_ball(tl, vl, f0, r)


def ball_mass_scan(exc: CodedExcursion, t0: float, r: float, points: int = 20001) -> float:
    """Grid-scan estimate of the same ball mass; a cross-check for :func:`ball_mass`."""
    e = exc.restricted()
    s = np.linspace(0.0, e.sigma, points)
    grid = np.union1d(s, e.t)
    vals = e(grid)
    i0 = int(np.argmin(np.abs(grid - t0)))
    run_r = np.minimum.accumulate(vals[i0:])
    run_l = np.minimum.accumulate(vals[i0::-1])[::-1]
    d = np.concatenate([vals[:i0] + vals[i0] - 2 * run_l[:-1], vals[i0:] + vals[i0] - 2 * run_r])
    inside = d < r
    w = _trapezoid_weights(grid, e.sigma)
    return float(w[inside].sum())


def _band_length(h, fa, fb, f0, r):
    """Length of ``{|f - f0| < r}`` on a segment of length ``h`` where ``f`` is linear."""
    lo, hi = f0 - r, f0 + r
    if fa == fb:
        return h if lo < fa < hi else 0.0
    # parameter range where lo < f < hi, intersected with [0, h]
    s1 = (lo - fa) / (fb - fa) * h
    s2 = (hi - fa) / (fb - fa) * h
    a, b = min(s1, s2), max(s1, s2)
    return max(0.0, min(b, h) - max(a, 0.0))


def _upper_side(t, v, f0, r):
    """Band length inside the component of ``{f > f0 - r}`` on one side of ``t[0]``."""
    total = 0.0
    floor = f0 - r
    for k in range(1, t.size):
        h = abs(t[k] - t[k - 1])
        fa, fb = v[k - 1], v[k]
        if fb <= floor:
            total += _band_length((fa - floor) / (fa - fb) * h, fa, floor, f0, r)
            break
        total += _band_length(h, fa, fb, f0, r)
    return total


def ball_volume_bounds(exc: CodedExcursion, t0: float, r: float) -> tuple[float, float, float]:
    """``(lower, measured, upper)`` for ``m^f(B(p^f(t0), r))``.

    ``lower = omega^{-1}(r/2) ^ sigma_f/2``; ``upper`` is the Lebesgue measure
    of the part of ``I(t0, r)`` where ``|f - f(t0)| < r``, with ``I(t0, r)`` the
    component of ``{f > f(t0) - r}`` containing ``t0``.
    """
    if r <= 0:
        raise ExcursionError("r must be positive")
    sigma = exc.sigma
    if not 0 <= t0 <= sigma:
        raise ExcursionError("t0 must lie in [0, sigma_f]")
    lower = min(modulus_inverse(exc, r / 2), sigma / 2)
    f0, (tr, vr), (tl, vl) = _split_at(exc, t0)
    upper = _upper_side(tr, vr, f0, r) + _upper_side(tl, vl, f0, r)
    return lower, ball_mass(exc, t0, r), upper


def random_excursion(rng: np.random.Generator, steps: int) -> CodedExcursion:
    """Strictly positive random-walk excursion with ``2 steps + 2`` steps on ``[0, 1]``.

    A uniform Dyck path of length ``2 steps`` comes from the cycle lemma; it is
    lifted by one unit, closed with an up and a down step and scaled by
    ``1/sqrt(length)``.
    """
    if steps < 1:
        raise ExcursionError("steps must be positive")
    seq = rng.permutation(np.r_[np.ones(steps), -np.ones(steps + 1)])
    walk = np.cumsum(seq)
    # rotate to start right after the first minimum: partial sums stay >= 0
    k = int(np.argmin(walk)) + 1
    dyck = np.roll(seq, -k)[:-1]
    path = np.concatenate([[0.0, 1.0], 1.0 + np.cumsum(dyck), [0.0]])
    L = path.size - 1
    return CodedExcursion(np.arange(L + 1) / L, path / math.sqrt(L))


def random_pair(seed: int, steps_range=(5, 40)) -> tuple[CodedExcursion, CodedExcursion]:
    rng = np.random.default_rng(seed)
    a, b = rng.integers(steps_range[0], steps_range[1] + 1, size=2)
    return random_excursion(rng, int(a)), random_excursion(rng, int(b))


def read_excursion_csv(text: str) -> CodedExcursion:
    """Rows ``t,f``; a header row and ``#`` comment lines are skipped."""
    ts, fs = [], []
    for row in csv.reader(line for line in io.StringIO(text) if not line.startswith("#")):
        if not row:
            continue
        try:
            ts.append(float(row[0]))
            fs.append(float(row[1]))
        except ValueError:
            if ts:
                raise ExcursionError(f"bad excursion row: {row}")
    return CodedExcursion(ts, fs)


def write_excursion_csv(exc: CodedExcursion) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "f"])
    for a, b in zip(exc.t, exc.f):
        w.writerow([repr(float(a)), repr(float(b))])
    return out.getvalue()


def perturbed_pair(seed: int, steps_range=(5, 40), scale: float = 0.05) -> tuple[CodedExcursion, CodedExcursion]:
    """A random excursion and a nearby one on the same grid.

    The copy adds uniform noise of size ``scale`` at interior points and is
    clipped at zero, so ``||f - g||`` is at most ``scale``.
    """
    rng = np.random.default_rng(seed)
    f = random_excursion(rng, int(rng.integers(steps_range[0], steps_range[1] + 1)))
    noise = rng.uniform(-scale, scale, size=f.f.size)
    noise[[0, -1]] = 0.0
    g = np.maximum(f.f + noise, 0.0)
    g[1:-1] = np.maximum(g[1:-1], 1e-6)      # keep sigma_g = sigma_f
    return f, CodedExcursion(f.t, g)
