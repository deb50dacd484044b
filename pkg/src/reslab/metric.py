"""Finite measured metric spaces and the distances between them.

Everything here works on explicit distance matrices.  Measures are plain
weight vectors indexed like the points of the space.  The Gromov-Hausdorff
type quantities are evaluated on a *given* embedding into a common ambient
space, so they are upper bounds for the corresponding infima.

Balls follow the usual split: ``B(x, r)`` is open (``d < r``) and ``D(x, r)``
is closed (``d <= r``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lp import bl_lp_dense, bl_lp_highs

__all__ = [
    "FiniteMetricSpace",
    "MeasuredFiniteMetricSpace",
    "EmbeddedPair",
    "PartialFunction",
    "bl_norm",
    "holder_constant",
    "mcshane_extend",
    "bl_distance",
    "hausdorff_distance",
    "rooted_bl_distance",
    "local_hausdorff_distance",
    "ghp_embedded_distance",
    "open_ball_mass",
    "load_space",
    "dump_space",
]

# spaces up to this size go to the dense simplex, larger ones to HiGHS
DENSE_LP_LIMIT = 40


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite set of labelled points with a distance matrix."""

    points: tuple
    dist: np.ndarray

    def __init__(self, points: Sequence, dist, *, validate: bool = True, tol: float = 1e-10):
        d = np.array(dist, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "points", tuple(points))
        object.__setattr__(self, "dist", d)
        if validate:
            self.validate(tol)

    @classmethod
    def from_matrix(cls, dist, **kw):
        return cls(range(len(dist)), dist, **kw)

    def __len__(self):
        return len(self.points)

    def validate(self, tol: float = 1e-10) -> None:
        d = self.dist
        n = len(self.points)
        if d.shape != (n, n):
            raise ValueError(f"distance matrix has shape {d.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have zero diagonal")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        off = d[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("distinct points must be at positive distance")
        if n <= 150:
            # d[i,k] <= d[i,j] + d[j,k]
            slack = d[:, None, :] - d[:, :, None] - d[None, :, :]
            if slack.max(initial=0.0) > tol * max(1.0, d.max(initial=0.0)):
                raise ValueError("triangle inequality violated")

    def subspace(self, idx) -> "FiniteMetricSpace":
        idx = np.asarray(idx, dtype=int)
        return FiniteMetricSpace([self.points[i] for i in idx],
                                 self.dist[np.ix_(idx, idx)], validate=False)


@dataclass(frozen=True, eq=False)
class MeasuredFiniteMetricSpace:
    space: FiniteMetricSpace
    mass: np.ndarray
    root: Optional[int] = None

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.shape != (len(self.space),):
            raise ValueError("mass vector length must match the number of points")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)
        if self.root is not None and not 0 <= self.root < len(self.space):
            raise ValueError("root index out of range")

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.mass > 0))


@dataclass(frozen=True, eq=False)
class EmbeddedPair:
    """Two subsets of one ambient space, optionally with masses and roots.

    ``massA``/``massB`` are aligned with ``indexA``/``indexB``.
    """

    ambient: FiniteMetricSpace
    indexA: tuple
    indexB: tuple
    massA: Optional[np.ndarray] = None
    massB: Optional[np.ndarray] = None
    rootA: Optional[int] = None
    rootB: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "indexA", tuple(int(i) for i in self.indexA))
        object.__setattr__(self, "indexB", tuple(int(i) for i in self.indexB))
        if not self.indexA or not self.indexB:
            raise ValueError("embedded sets must be nonempty")
        n = len(self.ambient)
        for idx in (self.indexA, self.indexB):
            if min(idx) < 0 or max(idx) >= n:
                raise ValueError("index outside the ambient space")
        for name, idx in (("massA", self.indexA), ("massB", self.indexB)):
            m = getattr(self, name)
            if m is not None:
                m = np.array(m, dtype=float)
                if m.shape != (len(idx),) or np.any(m < 0):
                    raise ValueError(f"{name} must be nonnegative and aligned with its index set")
                object.__setattr__(self, name, m)
        if self.rootA is not None and self.rootA not in self.indexA:
            raise ValueError("rootA must lie in indexA")
        if self.rootB is not None and self.rootB not in self.indexB:
            raise ValueError("rootB must lie in indexB")

    def ambient_masses(self):
        """Both measures as full-length vectors on the ambient space."""
        if self.massA is None or self.massB is None:
            raise ValueError("this operation needs masses on both sides")
        n = len(self.ambient)
        mu = np.zeros(n)
        nu = np.zeros(n)
        np.add.at(mu, list(self.indexA), self.massA)
        np.add.at(nu, list(self.indexB), self.massB)
        return mu, nu


@dataclass(frozen=True, eq=False)
class PartialFunction:
    domain: tuple
    values: np.ndarray

    def __init__(self, domain, values):
        dom = tuple(int(i) for i in domain)
        vals = np.array(values, dtype=float)
        if not dom:
            raise ValueError("empty domain")
        if vals.shape != (len(dom),):
            raise ValueError("values must align with the domain")
        if len(set(dom)) != len(dom):
            raise ValueError("domain has repeated indices")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "values", vals)

    @classmethod
    def full(cls, values):
        return cls(range(len(values)), values)


def _check_kappa(kappa):
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")


def holder_constant(values, dist, kappa: float = 1.0) -> float:
    """max over i != j of |f_i - f_j| / d_ij**kappa (0 for a single point)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty domain")
    if v.size == 1:
        return 0.0
    d = np.asarray(dist, dtype=float)
    off = ~np.eye(v.size, dtype=bool)
    diff = np.abs(v[:, None] - v[None, :])[off]
    return float((diff / d[off] ** kappa).max())


def bl_norm(space: FiniteMetricSpace, f: PartialFunction, kappa: float = 1.0):
    """Return ``(sup_norm, holder_const, bl_norm)`` of ``f`` on its domain."""
    _check_kappa(kappa)
    dom = np.asarray(f.domain)
    sup = float(np.abs(f.values).max())
    hc = holder_constant(f.values, space.dist[np.ix_(dom, dom)], kappa)
    return sup, hc, sup + hc


def mcshane_extend(space: FiniteMetricSpace, f: PartialFunction, kappa: float = 1.0) -> np.ndarray:
    """Extend ``f`` to the whole space keeping its sup norm and Hoelder constant.

    ``g(x) = max_a f(a) - L d(x, a)**kappa`` clamped to ``[min f, max f]``.
    """
    _check_kappa(kappa)
    dom = np.asarray(f.domain)
    L = holder_constant(f.values, space.dist[np.ix_(dom, dom)], kappa)
    dk = space.dist[:, dom] ** kappa
    g = (f.values[None, :] - L * dk).max(axis=1)
    out = np.clip(g, f.values.min(), f.values.max())
    out[dom] = f.values
    return out


def bl_distance(space: FiniteMetricSpace, mu, nu, kappa: float = 1.0, *,
                method: str = "auto", return_witness: bool = False):
    """BL^kappa distance between two weight vectors on ``space``.

    Solves ``max sum_i f_i (mu_i - nu_i)`` over ``|f_i| <= s``,
    ``|f_i - f_j| <= l d_ij**kappa``, ``s + l <= 1``.

    ``method`` is ``"simplex"``, ``"highs"`` or ``"auto"`` (simplex for small
    supports).  Points carrying no mass in either measure are dropped first:
    by McShane extension they do not change the optimum.
    """
    _check_kappa(kappa)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    n = len(space)
    if mu.shape != (n,) or nu.shape != (n,):
        raise ValueError(f"measures must have length {n}")
    if np.any(mu < 0) or np.any(nu < 0):
        raise ValueError("measures must be nonnegative")
    w = mu - nu
    support = np.flatnonzero((mu > 0) | (nu > 0))
    if support.size == 0 or not np.any(w[support]):
        result = (0.0, np.zeros(n), 0.0, 0.0)
    else:
        dk = space.dist[np.ix_(support, support)] ** kappa
        if method == "auto":
            method = "simplex" if support.size <= DENSE_LP_LIMIT else "highs"
        if method == "simplex":
            val, f, s, l = bl_lp_dense(w[support], dk)
        elif method == "highs":
            val, f, s, l = bl_lp_highs(w[support], dk)
        else:
            raise ValueError(f"unknown LP method {method!r}")
        full = np.zeros(n)
        full[support] = f
        result = (max(val, 0.0), full, s, l)
    if return_witness:
        return result
    return result[0]


def hausdorff_distance(pair: EmbeddedPair) -> float:
    d = pair.ambient.dist[np.ix_(pair.indexA, pair.indexB)]
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _common_root(pair: EmbeddedPair) -> int:
    if pair.rootA is None or pair.rootB is None:
        raise ValueError("rooted distances need roots on both sides")
    if pair.rootA != pair.rootB:
        raise ValueError("rooted distances need a root-preserving embedding (rootA == rootB)")
    return pair.rootA


def _step_integral(breaks, values):
    """int_0^inf e^{-r} v(r) dr for v piecewise constant, v = values[i] on [breaks[i], breaks[i+1])."""
    total = 0.0
    for i, v in enumerate(values):
        lo = math.exp(-breaks[i])
        hi = math.exp(-breaks[i + 1]) if i + 1 < len(breaks) else 0.0
        total += (lo - hi) * v
    return total


def rooted_bl_distance(pair: EmbeddedPair, kappa: float = 1.0, **lp_kw) -> float:
    """``int_0^inf e^{-r} (1 ^ d_BL(mu^(r), nu^(r))) dr`` with closed balls at the root."""
    root = _common_root(pair)
    mu, nu = pair.ambient_masses()
    d_root = pair.ambient.dist[root]
    support = np.flatnonzero((mu > 0) | (nu > 0))
    breaks = np.unique(d_root[support])
    values = []
    for r in breaks:
        keep = d_root <= r
        values.append(min(1.0, bl_distance(pair.ambient, np.where(keep, mu, 0.0),
                                           np.where(keep, nu, 0.0), kappa, **lp_kw)))
    return _step_integral(list(breaks), values)


def local_hausdorff_distance(pair: EmbeddedPair) -> float:
    """Fell-type distance ``int_0^inf e^{-r} (1 ^ d_H(A^(r), B^(r))) dr``.

    One side empty gives integrand 1, both empty gives 0.
    """
    root = _common_root(pair)
    d_root = pair.ambient.dist[root]
    A = np.asarray(pair.indexA)
    B = np.asarray(pair.indexB)
    breaks = np.unique(np.concatenate([d_root[A], d_root[B]]))
    values = []
    for r in breaks:
        a = A[d_root[A] <= r]
        b = B[d_root[B] <= r]
        if a.size == 0 and b.size == 0:
            values.append(0.0)
        elif a.size == 0 or b.size == 0:
            values.append(1.0)
        else:
            d = pair.ambient.dist[np.ix_(a, b)]
            values.append(min(1.0, float(max(d.min(axis=1).max(), d.min(axis=0).max()))))
    # below the first breakpoint both restricted sets are empty
    if breaks[0] > 0:
        breaks = np.concatenate([[0.0], breaks])
        values = [0.0] + values
    return _step_integral(list(breaks), values)


def ghp_embedded_distance(pair: EmbeddedPair, kappa: float = 1.0, rooted: bool = False,
                          **lp_kw) -> float:
    """Hausdorff v BL^kappa (v root distance when ``rooted``) on this embedding.

    An upper bound for the GH-type infimum over all embeddings.
    """
    mu, nu = pair.ambient_masses()
    val = max(hausdorff_distance(pair), bl_distance(pair.ambient, mu, nu, kappa, **lp_kw))
    if rooted:
        if pair.rootA is None or pair.rootB is None:
            raise ValueError("rooted comparison needs both roots")
        val = max(val, float(pair.ambient.dist[pair.rootA, pair.rootB]))
    return val


def open_ball_mass(space: FiniteMetricSpace, mass, x: int, r: float) -> float:
    return float(np.asarray(mass)[space.dist[x] < r].sum())


def dump_space(mspace: MeasuredFiniteMetricSpace) -> str:
    doc = {
        "points": list(mspace.space.points),
        "dist": mspace.space.dist.tolist(),
        "mass": mspace.mass.tolist(),
    }
    if mspace.root is not None:
        doc["root"] = mspace.root
    return json.dumps(doc)


def load_space(text: str) -> MeasuredFiniteMetricSpace:
    doc = json.loads(text)
    unknown = set(doc) - {"points", "dist", "mass", "root"}
    if unknown:
        raise ValueError(f"unknown keys in space document: {sorted(unknown)}")
    space = FiniteMetricSpace(doc["points"], doc["dist"])
    mass = doc.get("mass", [0.0] * len(space))
    return MeasuredFiniteMetricSpace(space, mass, doc.get("root"))
