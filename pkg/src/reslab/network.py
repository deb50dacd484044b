"""Finite resistance networks and the potential theory of their random walks.

Conventions
-----------
* Energy ``E(f, f) = 1/2 sum_{x,y} c_xy (f(x) - f(y))**2``, i.e. ``f @ L @ f``
  with ``L`` the graph Laplacian, so a single edge of conductance ``c`` has
  effective resistance ``1/c``.
* Generator ``Lap f(x) = (1/mu_x) sum_y c_xy (f(y) - f(x))``; the negative
  generator is ``M^{-1} L``.
* Heat kernels and Green functions are densities with respect to ``mu``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .metric import bl_norm, FiniteMetricSpace, PartialFunction

# eigenvalues below -NEG_EIG_TOL * max(1, lambda_max) indicate a bug
NEG_EIG_TOL = 1e-12


class NetworkError(ValueError):
    pass


def _grounded_inverse(L: np.ndarray, ground: int) -> np.ndarray:
    """Inverse of L with row/column ``ground`` removed, padded back with zeros."""
    n = L.shape[0]
    keep = np.r_[0:ground, ground + 1:n]
    G = np.zeros((n, n))
    if keep.size:
        cf = linalg.cho_factor(L[np.ix_(keep, keep)])
        G[np.ix_(keep, keep)] = linalg.cho_solve(cf, np.eye(keep.size))
    return G


def _pair_resistance(L: np.ndarray, y: int, z: int) -> float:
    if y == z:
        return 0.0
    n = L.shape[0]
    keep = np.r_[0:z, z + 1:n]
    rhs = np.zeros(keep.size)
    yi = y if y < z else y - 1
    rhs[yi] = 1.0
    u = linalg.cho_solve(linalg.cho_factor(L[np.ix_(keep, keep)]), rhs)
    return float(u[yi])


def laplacian(cond: np.ndarray) -> np.ndarray:
    return np.diag(cond.sum(axis=1)) - cond


class ResistanceNetwork:
    """Connected weighted graph with symmetric conductances.

    The full matrix of effective resistances is computed at construction
    (one Cholesky factorisation of the Laplacian grounded at vertex 0).
    """

    def __init__(self, conductances):
        c = np.array(conductances, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise NetworkError("conductance matrix must be square")
        if np.any(np.diag(c) != 0):
            raise NetworkError("conductance matrix must have zero diagonal")
        if not np.array_equal(c, c.T):
            raise NetworkError("conductances must be symmetric")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise NetworkError("conductances must be finite and nonnegative")
        ncomp, _ = connected_components(c > 0, directed=False)
        if ncomp != 1:
            raise NetworkError(f"network is disconnected ({ncomp} components)")
        c.setflags(write=False)
        self.conductances = c
        self.n_vertices = c.shape[0]
        L = laplacian(c)
        L.setflags(write=False)
        self.laplacian = L
        G = _grounded_inverse(L, 0)
        d = np.diag(G)
        R = d[:, None] + d[None, :] - 2.0 * G
        np.fill_diagonal(R, 0.0)
        R = 0.5 * (R + R.T)
        R.setflags(write=False)
        self.R = R

    @classmethod
    def from_edges(cls, n: int, edges: Iterable):
        c = np.zeros((n, n))
        for i, j, w in edges:
            if i == j:
                raise NetworkError("self-loops are not allowed")
            c[i, j] += w
            c[j, i] += w
        return cls(c)

    def edges(self):
        i, j = np.nonzero(np.triu(self.conductances))
        return [(int(a), int(b), float(self.conductances[a, b])) for a, b in zip(i, j)]

    def energy(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(f @ self.laplacian @ f)

    @property
    def diameter(self) -> float:
        return float(self.R.max())

    def metric_space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(range(self.n_vertices), self.R, validate=False)

    def __repr__(self):
        return f"ResistanceNetwork(n={self.n_vertices}, edges={len(self.edges())})"


def _check_mass(net: ResistanceNetwork, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (net.n_vertices,):
        raise NetworkError("measure length must equal the number of vertices")
    if np.any(mu <= 0):
        raise NetworkError("network measures need full support (all masses > 0)")
    return mu


def contract(net: ResistanceNetwork, A) -> tuple[np.ndarray, np.ndarray]:
    """Identify the vertex set ``A`` to a single node.

    Returns the contracted conductance matrix and the vertex map.  The fused
    node gets the last index; parallel conductances are summed and edges
    inside ``A`` disappear.
    """
    A = sorted(set(int(a) for a in A))
    if not A:
        raise NetworkError("the fused set must be nonempty")
    n = net.n_vertices
    rest = [v for v in range(n) if v not in set(A)]
    vmap = np.empty(n, dtype=int)
    vmap[rest] = np.arange(len(rest))
    vmap[A] = len(rest)
    m = len(rest) + 1
    c = np.zeros((m, m))
    np.add.at(c, (vmap[:, None], vmap[None, :]), net.conductances)
    np.fill_diagonal(c, 0.0)
    return c, vmap


def effective_resistance(net: ResistanceNetwork, x: int, y: int) -> float:
    return float(net.R[x, y])


def fused_resistance(net: ResistanceNetwork, y: int, z: int, A) -> float:
    """Effective resistance between ``y`` and ``z`` once ``A`` is fused to one node."""
    c, vmap = contract(net, A)
    return _pair_resistance(laplacian(c), int(vmap[y]), int(vmap[z]))


def resistance_to_set(net: ResistanceNetwork, x: int, A) -> float:
    """``R(x, A)``: resistance from ``x`` to the set ``A`` held at one potential."""
    A = set(int(a) for a in A)
    if not A:
        raise NetworkError("the target set must be nonempty")
    if x in A:
        return 0.0
    c, vmap = contract(net, A)
    return _pair_resistance(laplacian(c), int(vmap[x]), c.shape[0] - 1)


class KilledSystem:
    """Network, measure and killing set ``A``; the walk dies on hitting ``A``.

    Holds the fused network (``A`` contracted to one node) with its full
    resistance matrix, from which the Green kernel follows.
    """

    def __init__(self, net: ResistanceNetwork, mu, A):
        self.net = net
        self.mu = _check_mass(net, mu)
        A = tuple(sorted(set(int(a) for a in A)))
        if not A:
            raise NetworkError("killing set must be nonempty")
        if len(A) >= net.n_vertices:
            raise NetworkError("killing set must be a proper subset")
        self.A = A
        self.U = tuple(v for v in range(net.n_vertices) if v not in set(A))
        c, vmap = contract(net, A)
        self._fused = ResistanceNetwork(c)
        self._vmap = vmap

    @property
    def in_A(self) -> np.ndarray:
        mask = np.zeros(self.net.n_vertices, dtype=bool)
        mask[list(self.A)] = True
        return mask

    def green_matrix(self) -> np.ndarray:
        """``g_A(y, z) = (R(y,A) + R(z,A) - R_A(y,z)) / 2`` for all vertex pairs."""
        Rf = self._fused.R
        a = Rf.shape[0] - 1
        idx = self._vmap
        to_A = Rf[idx, a]
        g = 0.5 * (to_A[:, None] + to_A[None, :] - Rf[np.ix_(idx, idx)])
        mask = self.in_A
        g[mask, :] = 0.0
        g[:, mask] = 0.0
        return g


def green_function(sys: KilledSystem, y: int, z: int) -> float:
    if y in sys.A or z in sys.A:
        return 0.0
    Rf = sys._fused.R
    a = Rf.shape[0] - 1
    vy, vz = sys._vmap[y], sys._vmap[z]
    return float(0.5 * (Rf[vy, a] + Rf[vz, a] - Rf[vy, vz]))


def point_green(net: ResistanceNetwork, x: int, y: int, z: int) -> float:
    R = net.R
    return float(0.5 * (R[x, y] + R[x, z] - R[y, z]))


def point_green_matrix(net: ResistanceNetwork, x: int) -> np.ndarray:
    R = net.R
    return 0.5 * (R[x][:, None] + R[x][None, :] - R)


def killed_green_apply(sys: KilledSystem, f) -> np.ndarray:
    """``(G_A f)(y) = sum_z g_A(y, z) f(z) mu_z``."""
    f = np.asarray(f, dtype=float)
    return sys.green_matrix() @ (f * sys.mu)


def occupation_time(sys: KilledSystem, f) -> np.ndarray:
    """``E_y[int_0^{sigma_A} f(X_t) dt]`` from ``(-Lap restricted to U) u = f``.

    Independent of :func:`killed_green_apply`; used as its oracle.
    """
    f = np.asarray(f, dtype=float)
    U = list(sys.U)
    L = sys.net.laplacian[np.ix_(U, U)]
    u = np.zeros(sys.net.n_vertices)
    u[U] = linalg.solve(L, sys.mu[U] * f[U], assume_a="pos")
    return u


def restricted_green_density(sys: KilledSystem) -> np.ndarray:
    """``[(-Lap_U)^{-1}]_{yz} / mu_z`` on U x U, zero elsewhere."""
    U = list(sys.U)
    n = sys.net.n_vertices
    inv = np.linalg.inv(np.diag(1.0 / sys.mu[U]) @ sys.net.laplacian[np.ix_(U, U)])
    g = np.zeros((n, n))
    g[np.ix_(U, U)] = inv / sys.mu[U][None, :]
    return g


def resolvent_window(net: ResistanceNetwork, mu) -> float:
    """Upper end of the alpha range where the killed resolvent series converges."""
    mu = _check_mass(net, mu)
    return 1.0 / (net.diameter * mu.sum())


def resolvent_series(net: ResistanceNetwork, mu, x: int, alpha: float, f,
                     tol: float = 1e-13, max_terms: int = 10_000) -> np.ndarray:
    """``G_x^alpha f = sum_{i>=1} (-alpha)^{i-1} G_x^i f`` summed until terms drop below ``tol``."""
    mu = _check_mass(net, mu)
    if not 0 < alpha < resolvent_window(net, mu):
        raise NetworkError(
            f"alpha={alpha} outside the convergence window (0, {resolvent_window(net, mu)})")
    f = np.asarray(f, dtype=float)
    K = point_green_matrix(net, x) * mu[None, :]
    term = K @ f
    total = term.copy()
    coef = 1.0
    for _ in range(max_terms):
        coef *= -alpha
        term = K @ term
        step = coef * term
        total += step
        if np.abs(step).max() < tol:
            return total
    raise NetworkError("resolvent series did not converge")


def resolvent_direct(net: ResistanceNetwork, mu, x: int, alpha: float, f) -> np.ndarray:
    """Solve ``(alpha - Lap) u = f`` off ``x`` with ``u(x) = 0``; valid for any alpha > 0."""
    mu = _check_mass(net, mu)
    f = np.asarray(f, dtype=float)
    U = [v for v in range(net.n_vertices) if v != x]
    M = np.diag(mu[U])
    u = np.zeros(net.n_vertices)
    u[U] = linalg.solve(alpha * M + net.laplacian[np.ix_(U, U)], mu[U] * f[U], assume_a="pos")
    return u


def killed_potential_density(sys: KilledSystem, alpha: float) -> np.ndarray:
    """``g_A^alpha(y, z)`` for the walk killed on ``A`` (zero on ``A``)."""
    U = list(sys.U)
    n = sys.net.n_vertices
    M = np.diag(sys.mu[U])
    g = np.zeros((n, n))
    g[np.ix_(U, U)] = np.linalg.inv(alpha * M + sys.net.laplacian[np.ix_(U, U)])
    return g


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of the negative generator, orthonormal in ``L^2(mu)``.

    ``vertices`` lists the network vertices the eigenvectors live on (all of
    them for the free walk, the complement of the killing set otherwise).
    ``phi[:, i]`` is the i-th eigenfunction.
    """

    eigenvalues: np.ndarray
    phi: np.ndarray
    mass: np.ndarray
    vertices: tuple
    conservative: bool

    def index(self, v: int) -> int:
        try:
            return self._pos[v]
        except KeyError:
            raise NetworkError(f"vertex {v} is not in the domain of this decomposition") from None

    def __post_init__(self):
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(self.vertices)})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["eigenvalue"] + [f"v{v}" for v in self.vertices])
        for lam, vec in zip(self.eigenvalues, self.phi.T):
            w.writerow([repr(float(lam))] + [repr(float(a)) for a in vec])
        return buf.getvalue()


def _eigensolve(L: np.ndarray, mu: np.ndarray, vertices, conservative: bool):
    s = 1.0 / np.sqrt(mu)
    S = s[:, None] * L * s[None, :]
    lam, V = linalg.eigh(0.5 * (S + S.T))
    floor = NEG_EIG_TOL * max(1.0, abs(lam[-1])) * max(1, L.shape[0])
    if lam[0] < -floor:
        raise NetworkError(f"negative eigenvalue {lam[0]:.3e}: generator is not a valid Laplacian")
    phi = V * s[:, None]
    if conservative:
        # connected network: the kernel is exactly the constants
        lam[0] = 0.0
        const = np.full(mu.size, 1.0 / math.sqrt(mu.sum()))
        rest = phi[:, 1:]
        rest -= np.outer(const, const @ (mu[:, None] * rest))
        phi[:, 0] = const
    lam = np.where(lam < 0, 0.0, lam)
    return SpectralDecomposition(lam, phi, mu, tuple(vertices), conservative)


def spectral(net: ResistanceNetwork, mu) -> SpectralDecomposition:
    mu = _check_mass(net, mu)
    return _eigensolve(net.laplacian, mu, range(net.n_vertices), True)


def killed_spectral(sys: KilledSystem) -> SpectralDecomposition:
    U = list(sys.U)
    return _eigensolve(sys.net.laplacian[np.ix_(U, U)], sys.mu[U], U, False)


def _check_t(t):
    if not t > 0:
        raise NetworkError("time must be positive")


def heat_kernel_matrix(spec: SpectralDecomposition, t: float) -> np.ndarray:
    _check_t(t)
    w = np.exp(-spec.eigenvalues * t)
    return (spec.phi * w[None, :]) @ spec.phi.T


def heat_kernel(spec: SpectralDecomposition, t: float, x: int, y: int) -> float:
    _check_t(t)
    w = np.exp(-spec.eigenvalues * t)
    return float(np.sum(spec.phi[spec.index(x)] * spec.phi[spec.index(y)] * w))


def heat_kernel_row(spec: SpectralDecomposition, t: float, x: int) -> np.ndarray:
    _check_t(t)
    w = np.exp(-spec.eigenvalues * t)
    return spec.phi @ (spec.phi[spec.index(x)] * w)


def semigroup_parts(spec: SpectralDecomposition, t: float, f) -> tuple[float, np.ndarray]:
    """Split ``P_t f`` into the stationary mean and the decaying remainder.

    Only meaningful for conservative decompositions; keeping the two parts
    apart avoids cancellation when ``P_t f`` is very close to its mean.
    """
    if not spec.conservative:
        raise NetworkError("semigroup_parts needs a conservative decomposition")
    f = np.asarray(f, dtype=float)
    mean = math.fsum(f * spec.mass) / math.fsum(spec.mass)
    coeff = spec.phi[:, 1:].T @ (spec.mass * f)
    rest = spec.phi[:, 1:] @ (np.exp(-spec.eigenvalues[1:] * t) * coeff)
    return mean, rest


def semigroup_apply(spec: SpectralDecomposition, t: float, f) -> np.ndarray:
    """``P_t f(x) = sum_y p(t, x, y) f(y) mu_y`` through the eigen-expansion."""
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    _check_t(t)
    coeff = spec.phi.T @ (spec.mass * f)
    return spec.phi @ (np.exp(-spec.eigenvalues * t) * coeff)


def potential_density(spec: SpectralDecomposition, alpha: float, x: int, y: int) -> float:
    """``g^alpha(x, y) = sum_i phi_i(x) phi_i(y) / (alpha + lambda_i)``."""
    if not alpha > 0:
        raise NetworkError("alpha must be positive")
    px, py = spec.phi[spec.index(x)], spec.phi[spec.index(y)]
    return float(np.sum(px * py / (alpha + spec.eigenvalues)))


def expected_hitting_time(net: ResistanceNetwork, mu, x: int, y: int) -> float:
    """``E_x[sigma_y]`` from ``(-Lap) u = 1`` off ``y``, ``u(y) = 0``."""
    mu = _check_mass(net, mu)
    if x == y:
        return 0.0
    U = [v for v in range(net.n_vertices) if v != y]
    u = linalg.solve(net.laplacian[np.ix_(U, U)], mu[U], assume_a="pos")
    return float(u[U.index(x)])


def hitting_probability(sys: KilledSystem, x: int, t: float,
                        spec: Optional[SpectralDecomposition] = None) -> float:
    """``P_x(sigma_A <= t) = 1 - sum_z p_killed(t, x, z) mu_z``."""
    if x in sys.A:
        return 1.0
    if t == 0:
        return 0.0
    spec = spec if spec is not None else killed_spectral(sys)
    row = heat_kernel_row(spec, t, x)
    survive = float(row @ spec.mass)
    return min(1.0, max(0.0, 1.0 - survive))


def open_ball(net: ResistanceNetwork, x: int, r: float) -> np.ndarray:
    return np.flatnonzero(net.R[x] < r)


def exit_bound_eval(net: ResistanceNetwork, mu, x: int, A, delta: float, t: float) -> float:
    """Upper bound ``2[1 - (R-d)/(R+d) exp(-2t / (mu(B(x,d)) (R-d)))]`` on ``P_x(sigma_A <= t)``."""
    mu = _check_mass(net, mu)
    R = resistance_to_set(net, x, A)
    if not 0 < delta < R:
        raise NetworkError(f"delta must lie in (0, R(x,A)) = (0, {R})")
    if t < 0:
        raise NetworkError("t must be nonnegative")
    ball = float(mu[open_ball(net, x, delta)].sum())
    return 2.0 * (1.0 - (R - delta) / (R + delta) * math.exp(-2.0 * t / (ball * (R - delta))))


def hk_diag_bound_check(spec: SpectralDecomposition, net: ResistanceNetwork, mu, x: int,
                        t: float, A) -> tuple[float, float]:
    """Return ``(2 sup_{y in A} R(x,y) / t + sqrt(2) / mu(A), p(t, x, x))``."""
    mu = _check_mass(net, mu)
    A = list(A)
    if not A:
        raise NetworkError("A must be nonempty")
    bound = 2.0 * net.R[x, A].max() / t + math.sqrt(2.0) / mu[A].sum()
    return float(bound), heat_kernel(spec, t, x, x)


def holder_norm_of_kernel(spec: SpectralDecomposition, t: float, x: int, kappa: float,
                          metric: np.ndarray) -> float:
    """BL^kappa norm of ``y -> p(t, x, y)`` measured in ``metric``."""
    row = heat_kernel_row(spec, t, x)
    space = FiniteMetricSpace(spec.vertices, np.asarray(metric)[np.ix_(spec.vertices, spec.vertices)],
                              validate=False)
    return bl_norm(space, PartialFunction.full(row), kappa)[2]


def dump_network(net: ResistanceNetwork, mu=None) -> str:
    doc = {"n": net.n_vertices, "edges": [list(e) for e in net.edges()]}
    if mu is not None:
        doc["mass"] = list(map(float, mu))
    return json.dumps(doc)


def load_network(text: str):
    """Parse ``{"n": ..., "edges": [[i, j, c], ...], "mass": [...]}``.

    Returns ``(network, mass)``; ``mass`` is None when absent.
    """
    doc = json.loads(text)
    unknown = set(doc) - {"n", "edges", "mass"}
    if unknown:
        raise NetworkError(f"unknown keys in network document: {sorted(unknown)}")
    net = ResistanceNetwork.from_edges(int(doc["n"]), [(int(i), int(j), float(c)) for i, j, c in doc["edges"]])
    mass = doc.get("mass")
    if mass is not None:
        mass = _check_mass(net, mass)
    return net, mass
