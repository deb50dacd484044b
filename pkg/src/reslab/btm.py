"""One-dimensional Bouchaud trap model on ``n^{-1} Z``.

Depths ``tau_x = U_x^{-1/alpha}`` are i.i.d. Pareto.  The scaled walk has
measure ``mu_n = (1/n) sum tau_x delta_{x/n}`` and one of two edge
conductances:

* ``paper_generator``: ``n/2`` per edge, so the generator is
  ``n^2/(2 tau_x) sum_{y~x} (f(y) - f(x))``;
* ``unit_resistance``: ``n`` per edge, so the resistance metric is the
  Euclidean one.

The homogenized limit is Brownian motion run at speed ``sigma^2 = 1/E[tau]``
(``2/E[tau]`` for ``unit_resistance``), with ``E[tau] = alpha/(alpha-1)``.

Chains live on a finite window with reflecting ends.  Heat kernels come from
a partial spectral solve of the symmetric tridiagonal matrix
``M^{-1/2} L M^{-1/2}``: eigenvalues above ``cutoff / t`` are dropped, which
costs at most ``(1/mu_x) exp(-cutoff)`` per kernel value.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .exponents import btm_annealed_exponents, btm_quenched_exponents
from .lp import bl_lp_line

CONVENTIONS = ("paper_generator", "unit_resistance")
SPECTRAL_CUTOFF = 40.0
CDF_GRID = 4001


class BTMError(ValueError):
    pass


def mean_depth(alpha: float) -> float:
    if alpha <= 1:
        raise BTMError(f"alpha={alpha} must exceed 1")
    return alpha / (alpha - 1)


def limit_variance(alpha_mean: float, convention: str = "paper_generator") -> float:
    _check_convention(convention)
    return (1.0 if convention == "paper_generator" else 2.0) / alpha_mean


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise BTMError(f"unknown convention {convention!r}; use one of {CONVENTIONS}")


def _stream_position(sites: np.ndarray) -> np.ndarray:
    # 0, 1, -1, 2, -2, ... so a larger window extends the same stream
    return np.where(sites > 0, 2 * sites - 1, -2 * sites)


@dataclass(frozen=True, eq=False)
class TrapEnvironment:
    alpha: float
    window: int
    tau: np.ndarray      # tau[x + window] for x in -window..window
    seed: Optional[int]

    def depth(self, sites) -> np.ndarray:
        sites = np.asarray(sites)
        if np.any(np.abs(sites) > self.window):
            raise BTMError("site outside the sampled window")
        return self.tau[sites + self.window]


def sample_environment(alpha: float, window: int, seed: int) -> TrapEnvironment:
    """Pareto depths keyed by ``(seed, site)``.

    Site ``x`` always reads the same position of a Philox stream keyed by
    ``seed``, so growing ``window`` never resamples existing sites.
    """
    if alpha <= 1:
        raise BTMError(f"alpha={alpha} must exceed 1")
    if window < 0:
        raise BTMError("window must be nonnegative")
    draws = np.random.Generator(np.random.Philox(key=int(seed))).random(2 * window + 1)
    sites = np.arange(-window, window + 1)
    u = 1.0 - draws[_stream_position(sites)]     # in (0, 1]
    return TrapEnvironment(float(alpha), int(window), u ** (-1.0 / alpha), int(seed))


def constant_environment(window: int) -> TrapEnvironment:
    """``tau = 1`` everywhere; the homogeneous walk used for calibration."""
    return TrapEnvironment(math.inf, int(window), np.ones(2 * window + 1), None)


@dataclass(frozen=True, eq=False)
class BTMChain:
    n: int
    r: float
    radius: int              # sites -radius..radius
    mass: np.ndarray         # tau_x / n
    conductance: float       # per edge
    convention: str
    alpha_mean: float

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.sites / self.n

    def rates(self) -> tuple[np.ndarray, np.ndarray]:
        """Jump rates ``(to the right, to the left)`` per site."""
        c = self.conductance
        right = np.full(self.mass.size, c) / self.mass
        left = right.copy()
        right[-1] = 0.0
        left[0] = 0.0
        return right, left

    def generator(self) -> np.ndarray:
        """Dense generator matrix; for tests on small windows."""
        right, left = self.rates()
        Q = np.diag(right[:-1], 1) + np.diag(left[1:], -1)
        Q -= np.diag(right + left)
        return Q

    def symmetric_form(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of ``M^{-1/2} L M^{-1/2}``."""
        c = self.conductance
        deg = np.full(self.mass.size, 2 * c)
        deg[0] = deg[-1] = c
        d = deg / self.mass
        e = -c / np.sqrt(self.mass[:-1] * self.mass[1:])
        return d, e


def build_chain(env: TrapEnvironment, n: int, r: float,
                convention: str = "paper_generator") -> BTMChain:
    _check_convention(convention)
    if n < 1 or r <= 0:
        raise BTMError("need n >= 1 and r > 0")
    radius = int(math.floor(n * r))
    if radius > env.window:
        raise BTMError(f"window {env.window} too small for n={n}, r={r} (needs {radius})")
    tau = env.depth(np.arange(-radius, radius + 1))
    cond = n / 2.0 if convention == "paper_generator" else float(n)
    am = 1.0 if math.isinf(env.alpha) else mean_depth(env.alpha)
    return BTMChain(int(n), float(r), radius, tau / n, cond, convention, am)


@dataclass(frozen=True, eq=False)
class ChainSpectrum:
    eigenvalues: np.ndarray
    phi: np.ndarray          # L^2(mu)-orthonormal eigenfunctions, columns
    complete: bool


def chain_spectrum(chain: BTMChain, t_min: Optional[float] = None) -> ChainSpectrum:
    """Eigenpairs needed for heat kernels at times ``>= t_min`` (all of them if None)."""
    d, e = chain.symmetric_form()
    if d.size == 1:
        return ChainSpectrum(np.zeros(1), np.ones((1, 1)) / math.sqrt(chain.mass[0]), True)
    if t_min is None:
        lam, v = linalg.eigh_tridiagonal(d, e)
        complete = True
    else:
        lam, v = linalg.eigh_tridiagonal(d, e, select="v",
                                         select_range=(-1.0, SPECTRAL_CUTOFF / t_min),
                                         lapack_driver="stemr")
        complete = lam.size == d.size
    lam = np.maximum(lam, 0.0)
    phi = v / np.sqrt(chain.mass)[:, None]
    return ChainSpectrum(lam, phi, complete)


def btm_heat_kernel_row(chain: BTMChain, t: float, x: int = 0,
                        spec: Optional[ChainSpectrum] = None) -> np.ndarray:
    """``p_n(t, x, .)`` on the window, density with respect to ``mu_n``."""
    if t <= 0:
        raise BTMError("t must be positive")
    spec = spec if spec is not None else chain_spectrum(chain, t)
    i = int(x) + chain.radius
    return spec.phi @ (np.exp(-spec.eigenvalues * t) * spec.phi[i])


def btm_heat_kernel(chain: BTMChain, t: float, x: int, y: int,
                    spec: Optional[ChainSpectrum] = None) -> float:
    return float(btm_heat_kernel_row(chain, t, x, spec)[int(y) + chain.radius])


def limit_heat_kernel(alpha_mean: float, t: float, x, y,
                      convention: str = "paper_generator"):
    """Density of the homogenized diffusion with respect to ``E[tau] dx``."""
    s2 = limit_variance(alpha_mean, convention) * t
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.exp(-z * z / (2 * s2)) / (alpha_mean * math.sqrt(2 * math.pi * s2))


def escape_radius(t: float, err_floor: float = 1e-4, ratio: float = 1e-6) -> float:
    """Radius with ``4 exp(-r^2/(8t)) <= ratio * err_floor``."""
    return math.sqrt(8 * t * math.log(4.0 / (ratio * err_floor)))


def _row_at_origin(chain, t):
    row = btm_heat_kernel_row(chain, t, 0)
    return row, row * chain.mass


def quenched_cdf_error(env: TrapEnvironment, n: int, t: float, r: Optional[float] = None,
                       convention: str = "paper_generator", _row=None) -> float:
    """``sup_x |P(X_t <= x) - P(X^n_t <= x)|`` over 4001 points spanning six limit deviations."""
    chain = build_chain(env, n, r if r is not None else escape_radius(t), convention)
    _, prob = _row if _row is not None else _row_at_origin(chain, t)
    sd = math.sqrt(limit_variance(chain.alpha_mean, convention) * t)
    grid = np.linspace(-6 * sd, 6 * sd, CDF_GRID)
    cdf = np.cumsum(prob)
    # right-continuous step: count sites with x/n <= g
    k = np.searchsorted(chain.positions, grid, side="right")
    discrete = np.where(k > 0, cdf[np.maximum(k - 1, 0)], 0.0)
    return float(np.abs(stats.norm.cdf(grid, scale=sd) - discrete).max())


def quenched_hk_error(env: TrapEnvironment, n: int, t: float, r: Optional[float] = None,
                      convention: str = "paper_generator", _row=None) -> float:
    """``max_y |p_n(t, 0, y) - p(t, 0, y/n)|`` over the window."""
    chain = build_chain(env, n, r if r is not None else escape_radius(t), convention)
    row, _ = _row if _row is not None else _row_at_origin(chain, t)
    lim = limit_heat_kernel(chain.alpha_mean, t, 0.0, chain.positions, convention)
    return float(np.abs(row - lim).max())


def quenched_sg_error(env: TrapEnvironment, n: int, t: float, r: Optional[float] = None,
                      convention: str = "paper_generator", _row=None) -> float:
    """``|P_t f(0) - P^n_t f(0)|`` for ``f = cos``, whose Gaussian mean is ``exp(-sigma^2 t/2)``."""
    chain = build_chain(env, n, r if r is not None else escape_radius(t), convention)
    _, prob = _row if _row is not None else _row_at_origin(chain, t)
    s2 = limit_variance(chain.alpha_mean, convention) * t
    return float(abs(math.exp(-s2 / 2) - prob @ np.cos(chain.positions)))


def quenched_bl_error(env: TrapEnvironment, n: int, r: float = 1.0, kappa: float = 1.0,
                      refine: int = 8) -> float:
    """``d_BL(mu^(r), mu_n^(r))`` on ``[-r, r]``.

    The limit measure ``E[tau] dx`` is replaced by point masses at the
    midpoints of a grid ``refine`` times finer than ``1/n``.
    """
    if refine < 8:
        raise BTMError("the Lebesgue grid must be at least 8 times finer than 1/n")
    chain = build_chain(env, n, r)
    cells = 2 * int(math.ceil(n * r)) * refine
    h = 2 * r / cells
    lx = -r + h * (np.arange(cells) + 0.5)
    x = np.concatenate([chain.positions, lx])
    w = np.concatenate([chain.mass, np.full(cells, -chain.alpha_mean * h)])
    return bl_lp_line(w, x, kappa)[0]


def rate_fit(errors: dict) -> dict:
    """Fit ``err ~ C n^{-E}``; returns the exponent and a 95% band."""
    ns = np.array(sorted(errors), dtype=float)
    if ns.size < 2:
        raise BTMError("need at least two n values")
    ys = np.log([errors[int(n)] for n in ns])
    fit = stats.linregress(np.log(ns), ys)
    E = -fit.slope
    if ns.size > 2:
        half = stats.t.ppf(0.975, ns.size - 2) * fit.stderr
    else:
        half = float("nan")
    return {"exponent": float(E), "stderr": float(fit.stderr), "band": (float(E - half), float(E + half)),
            "log_C": float(fit.intercept)}


def quenched_experiment(alpha: float, n_list: Sequence[int], t: float = 1.0, seed: int = 0,
                        r: Optional[float] = None, bl_r: float = 1.0, kappa: float = 1.0,
                        convention: str = "paper_generator", with_bl: bool = True) -> list:
    """Per-n quenched errors for one environment."""
    r = r if r is not None else escape_radius(t)
    nmax = max(n_list)
    env = sample_environment(alpha, int(math.floor(nmax * max(r, bl_r))), seed)
    rows = []
    for n in n_list:
        chain = build_chain(env, n, r, convention)
        cached = _row_at_origin(chain, t)
        rows.append({
            "n": int(n),
            "seed": int(seed),
            "cdf_err": quenched_cdf_error(env, n, t, r, convention, _row=cached),
            "bl_err": quenched_bl_error(env, n, bl_r, kappa) if with_bl else float("nan"),
            "hk_err": quenched_hk_error(env, n, t, r, convention, _row=cached),
            "sg_err": quenched_sg_error(env, n, t, r, convention, _row=cached),
        })
    return rows


def trial_seed(base_seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(i)]).generate_state(1, np.uint64)[0])


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("RESLAB_THREADS", "1")))
    except ValueError:
        return 1


def _trial(args):
    alpha, n_list, t, seed, r, bl_r, kappa, convention, with_bl = args
    return quenched_experiment(alpha, n_list, t, seed, r, bl_r, kappa, convention, with_bl)


def annealed_experiment(alpha: float, kappa: float, n_list: Sequence[int], trials: int,
                        base_seed: int, t: float = 1.0, r: Optional[float] = None,
                        bl_r: float = 1.0, convention: str = "paper_generator",
                        with_bl: bool = True) -> dict:
    """Average the quenched errors over ``trials`` environments.

    Trial ``i`` uses ``trial_seed(base_seed, i)``.  Trials run in up to
    ``RESLAB_THREADS`` worker processes; results are folded in trial order.
    """
    if trials < 1:
        raise BTMError("trials must be positive")
    jobs = [(alpha, tuple(n_list), t, trial_seed(base_seed, i), r, bl_r, kappa, convention, with_bl)
            for i in range(trials)]
    workers = min(_thread_cap(), trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial, jobs))
    else:
        per_trial = [_trial(j) for j in jobs]
    rows = [row for trial in per_trial for row in trial]
    keys = ("cdf_err", "bl_err", "hk_err", "sg_err")
    mean = {n: {k: float(np.mean([row[k] for row in rows if row["n"] == n])) for k in keys}
            for n in n_list}
    fits = {k: rate_fit({n: mean[n][k] for n in n_list}) for k in keys
            if all(np.isfinite(mean[n][k]) and mean[n][k] > 0 for n in n_list)}
    try:
        theory = btm_annealed_exponents(alpha, kappa)
    except ValueError:
        theory = None
    return {"rows": rows, "mean": mean, "fits": fits, "theory_sup": theory}


def quenched_theory(alpha: float, kappa: float = 1.0) -> tuple[float, float]:
    return btm_quenched_exponents(alpha, kappa)


def exit_probability_bound_check(chain: BTMChain, t: float, r: float, x: int = 0) -> tuple[float, float]:
    """``(P_x(exit B(x/n, r) by t), 4 exp(-r^2/(8t)))`` with Euclidean balls.

    The walk is killed on the first site at Euclidean distance ``>= r``; the
    survival mass comes from a full spectral solve of the killed chain.
    """
    if t <= 0 or r <= 0:
        raise BTMError("t and r must be positive")
    if r > 4 * chain.n * t:
        raise BTMError("the bound needs r <= 4 n t")
    k = int(math.ceil(r * chain.n - 1e-12))     # first killed offset
    lo, hi = x - k, x + k
    if lo < -chain.radius or hi > chain.radius:
        raise BTMError("window does not contain the exit sites")
    bound = 4.0 * math.exp(-r * r / (8 * t))
    if k == 0:
        return 1.0, bound
    idx = np.arange(lo + 1, hi) + chain.radius       # surviving sites
    m = chain.mass[idx]
    c = chain.conductance
    d = 2 * c / m
    e = -c / np.sqrt(m[:-1] * m[1:])
    if idx.size == 1:
        lam, v = d, np.ones((1, 1))
    else:
        lam, v = linalg.eigh_tridiagonal(d, e)
    phi = v / np.sqrt(m)[:, None]
    i = x - lo - 1
    survive = float(np.sum(np.exp(-lam * t) * phi[i] * (phi.T @ m)))
    return min(1.0, max(0.0, 1.0 - survive)), bound
