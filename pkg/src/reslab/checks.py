"""Seeded random corpora and the numerical identity checks run by the CLI.

Each check returns ``(worst, tolerance)``; it passes when ``worst <= tolerance``.
"""

from __future__ import annotations

import numpy as np

from .metric import (FiniteMetricSpace, PartialFunction, bl_distance, bl_norm,
                     mcshane_extend, open_ball_mass)
from .network import (KilledSystem, ResistanceNetwork, expected_hitting_time, green_function,
                      heat_kernel_matrix, killed_potential_density, resolvent_direct,
                      resolvent_series, resolvent_window, restricted_green_density, spectral)


def random_network(rng: np.random.Generator, n_max: int = 12, n_min: int = 3):
    """Connected network with conductances in ``[0.1, 10]`` and masses in ``[0.1, 2]``.

    A random spanning tree guarantees connectivity; extra edges are added
    with probability 0.3.
    """
    n = int(rng.integers(n_min, n_max + 1))
    C = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[int(rng.integers(0, k))]
        C[a, b] = C[b, a] = rng.uniform(0.1, 10.0)
    extra = np.triu(rng.random((n, n)) < 0.3, 1) & (C == 0)
    vals = rng.uniform(0.1, 10.0, size=(n, n))
    C[extra] = vals[extra]
    C = np.triu(C, 1)
    C = C + C.T
    return ResistanceNetwork(C), rng.uniform(0.1, 2.0, size=n)


def network_corpus(count: int = 50, seed: int = 0, n_max: int = 12):
    rng = np.random.default_rng(seed)
    return [random_network(rng, n_max) for _ in range(count)]


def random_metric_space(rng: np.random.Generator, n_max: int = 12):
    """Resistance metric of a random network; always a genuine metric."""
    net, mass = random_network(rng, n_max)
    return FiniteMetricSpace(range(net.n_vertices), net.R), mass


def _random_subset(rng, n):
    k = int(rng.integers(1, n))
    return tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))


def green_check(corpus, seed: int = 1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for net, mu in corpus:
        A = _random_subset(rng, net.n_vertices)
        sys = KilledSystem(net, mu, A)
        oracle = restricted_green_density(sys)
        for y in sys.U:
            for z in sys.U:
                worst = max(worst, abs(green_function(sys, y, z) - oracle[y, z]))
    return worst, 1e-9


def commute_check(corpus):
    worst = 0.0
    for net, mu in corpus:
        total = mu.sum()
        for x in range(net.n_vertices):
            for y in range(x + 1, net.n_vertices):
                lhs = expected_hitting_time(net, mu, x, y) + expected_hitting_time(net, mu, y, x)
                worst = max(worst, abs(lhs - net.R[x, y] * total))
    return worst, 1e-9


def resolvent_check(corpus, seed: int = 2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for net, mu in corpus:
        x = int(rng.integers(net.n_vertices))
        f = rng.uniform(-1, 1, net.n_vertices)
        alpha = 0.5 * resolvent_window(net, mu)
        worst = max(worst, float(np.abs(resolvent_series(net, mu, x, alpha, f)
                                        - resolvent_direct(net, mu, x, alpha, f)).max()))
    return worst, 1e-8


def heat_kernel_check(corpus, times=(0.05, 0.5, 2.0)):
    worst = 0.0
    for net, mu in corpus:
        spec = spectral(net, mu)
        for t in times:
            P = heat_kernel_matrix(spec, t)
            worst = max(worst, float(np.abs(P - P.T).max()))
            worst = max(worst, float(np.abs(P @ mu - 1.0).max()))
            P2 = heat_kernel_matrix(spec, 2 * t)
            worst = max(worst, float(np.abs((P * mu[None, :]) @ P - P2).max()))
    return worst, 1e-9


def potential_lipschitz_check(corpus, seed: int = 3, alphas=(0.1, 1.0, 10.0)):
    """``max (|g(x,y) - g(x,z)| - 2 R(y,z))``; the inequality is exact, so the tolerance is 0."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for net, mu in corpus:
        sys = KilledSystem(net, mu, _random_subset(rng, net.n_vertices))
        for a in alphas:
            g = killed_potential_density(sys, a)
            gap = np.abs(g[:, :, None] - g[:, None, :]) - 2 * net.R[None, :, :]
            worst = max(worst, float(gap.max()))
    return worst, 0.0


def ball_inequality_check(count: int = 200, seed: int = 4, kappa: float = 1.0):
    """``nu(B(x,r)) - mu(B(x,r+rho)) - (1 + rho^-kappa) d_BL(mu,nu)``, maximised; must stay <= 0."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(count):
        space, _ = random_metric_space(rng, 8)
        n = len(space)
        mu = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 1.5)
        nu = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 1.5)
        d = bl_distance(space, mu, nu, kappa)
        scale = space.dist.max()
        for _ in range(5):
            x = int(rng.integers(n))
            r = rng.uniform(0, scale)
            rho = rng.uniform(0.01, scale)
            gap = (open_ball_mass(space, nu, x, r) - open_ball_mass(space, mu, x, r + rho)
                   - (1 + rho ** -kappa) * d)
            worst = max(worst, gap)
    return worst, 0.0


def mcshane_check(count: int = 200, seed: int = 5, kappa: float = 1.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        space, _ = random_metric_space(rng, 10)
        n = len(space)
        dom = _random_subset(rng, n)
        f = PartialFunction(dom, rng.uniform(-1, 1, len(dom)))
        ext = mcshane_extend(space, f, kappa)
        sup_a, hc_a, _ = bl_norm(space, f, kappa)
        sup_x, hc_x, _ = bl_norm(space, PartialFunction.full(ext), kappa)
        worst = max(worst, abs(sup_a - sup_x), abs(hc_a - hc_x),
                    float(np.abs(ext[list(dom)] - f.values).max()))
    return worst, 1e-12


NETWORK_CHECKS = {
    "green": green_check,
    "commute": commute_check,
    "resolvent": resolvent_check,
    "heat_kernel": heat_kernel_check,
    "potential_lipschitz": potential_lipschitz_check,
}
SPACE_CHECKS = {
    "ball_inequality": ball_inequality_check,
    "mcshane": mcshane_check,
}
