"""Small linear-program solvers used by the bounded-Lipschitz metric.

Two routes are provided:

* :func:`simplex_max` -- a dense dictionary simplex for problems of the form
  ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0`` (the origin is feasible,
  so no phase one is needed).  Used for small spaces.
* :func:`bl_lp_highs` -- the bounded-Lipschitz LP solved by HiGHS with lazy
  generation of the pairwise Hoelder constraints.  Used for spaces with more
  than a few dozen points, where the dense dictionary would hold millions of
  rows.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

log = logging.getLogger(__name__)


class LPError(RuntimeError):
    """Raised when an LP is unbounded or the solver fails to converge."""


def simplex_max(c, A, b, *, tol=1e-12, pivot_tol=1e-9, max_iter=50_000):
    """Maximize ``c @ x`` subject to ``A @ x <= b`` and ``x >= 0``.

    ``b`` must be nonnegative.  Entering variables follow Dantzig's rule;
    after a run of degenerate pivots the solver switches to Bland's rule,
    which cannot cycle.  The ratio test is Harris-style: among rows within
    ``tol`` of the minimum ratio the largest pivot element wins, which keeps
    the dictionary well conditioned on the very degenerate BL programs.

    Returns
    -------
    value : float
    x : ndarray
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("simplex_max needs b >= 0 (origin-feasible form)")

    # dictionary: basic_i = D[i, 0] + sum_j D[i, j] * nonbasic_j ; last row is z
    D = np.empty((m + 1, n + 1))
    D[:m, 0] = b
    D[:m, 1:] = -A
    D[m, 0] = 0.0
    D[m, 1:] = c
    # labels 0..n-1 are structural variables, n..n+m-1 slacks
    basic = np.arange(n, n + m)
    nonbasic = np.arange(n)
    scale = max(1.0, np.abs(A).max(initial=0.0))

    degenerate_run = 0
    for _ in range(max_iter):
        obj = D[m, 1:]
        bland = degenerate_run > 50
        if bland:
            candidates = np.flatnonzero(obj > tol)
            if candidates.size == 0:
                break
            j = candidates[np.argmin(nonbasic[candidates])]
        else:
            j = int(np.argmax(obj))
            if obj[j] <= tol:
                break
        col = D[:m, j + 1]
        rows = np.flatnonzero(col < -pivot_tol * scale)
        if rows.size == 0:
            raise LPError("LP is unbounded")
        rhs = np.maximum(D[rows, 0], 0.0)
        ratios = rhs / -col[rows]
        # Harris pass: loosen each row by tol, then pick the largest pivot
        bound = ((rhs + tol) / -col[rows]).min()
        ties = rows[ratios <= bound]
        if bland:
            r = int(ties[np.argmin(basic[ties])])
        else:
            r = int(ties[np.argmax(-col[ties])])
        degenerate_run = degenerate_run + 1 if D[r, 0] <= tol else 0

        piv = D[r, j + 1]
        newrow = -D[r] / piv
        newrow[j + 1] = 1.0 / piv
        colj = D[:, j + 1].copy()
        D += np.outer(colj, newrow)
        D[:, j + 1] = colj * newrow[j + 1]
        D[r] = newrow
        np.maximum(D[:m, 0], 0.0, out=D[:m, 0])
        basic[r], nonbasic[j] = nonbasic[j], basic[r]
    else:
        raise LPError(f"simplex did not converge in {max_iter} pivots")

    x = np.zeros(n + m)
    x[basic] = D[:m, 0]
    return float(D[m, 0]), x[:n]


def bl_lp_dense(weights, dk):
    """BL LP via :func:`simplex_max`.

    Variables are ``u_i = f_i + s >= 0`` together with ``s`` and ``l``, so
    every constraint has a nonnegative right-hand side.
    """
    w = np.asarray(weights, dtype=float)
    N = w.size
    iu, ju = np.nonzero(~np.eye(N, dtype=bool))
    npair = iu.size
    # columns: u_0..u_{N-1}, s, l
    A = np.zeros((N + npair + 1, N + 2))
    A[np.arange(N), np.arange(N)] = 1.0          # u_i - 2 s <= 0
    A[np.arange(N), N] = -2.0
    rows = N + np.arange(npair)                 # u_i - u_j - l d_ij <= 0
    A[rows, iu] = 1.0
    A[rows, ju] -= 1.0
    A[rows, N + 1] = -dk[iu, ju]
    A[-1, N] = 1.0                              # s + l <= 1
    A[-1, N + 1] = 1.0
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    c = np.concatenate([w, [-w.sum(), 0.0]])
    value, x = simplex_max(c, A, b)
    s = x[N]
    return value, x[:N] - s, s, x[N + 1]


def _initial_pairs(dk, k):
    N = dk.shape[0]
    k = min(k, N - 1)
    masked = dk + np.diag(np.full(N, np.inf))
    nbr = np.argpartition(masked, k - 1, axis=1)[:, :k]
    i = np.repeat(np.arange(N), k)
    j = nbr.ravel()
    a, b = np.minimum(i, j), np.maximum(i, j)
    return set(zip(a.tolist(), b.tolist()))


def _solve_pairs(w, pa, dpair, method="highs"):
    """One HiGHS solve of the BL LP restricted to the Hoelder pairs ``pa``."""
    N = w.size
    P = pa.shape[0]
    r = np.arange(P)
    data = np.concatenate([np.ones(P), -np.ones(P), -dpair,
                           -np.ones(P), np.ones(P), -dpair])
    rr = np.concatenate([r, r, r, P + r, P + r, P + r])
    cc = np.concatenate([pa[:, 0], pa[:, 1], np.full(P, N + 1),
                         pa[:, 0], pa[:, 1], np.full(P, N + 1)])
    hold = sparse.coo_matrix((data, (rr, cc)), shape=(2 * P, N + 2))
    idx = np.arange(N)
    box = sparse.coo_matrix(
        (np.concatenate([np.ones(N), -np.ones(N), -np.ones(2 * N)]),
         (np.concatenate([idx, N + idx, idx, N + idx]),
          np.concatenate([idx, idx, np.full(2 * N, N)]))),
        shape=(2 * N, N + 2))
    budget = sparse.coo_matrix(([1.0, 1.0], ([0, 0], [N, N + 1])), shape=(1, N + 2))
    A = sparse.vstack([hold, box, budget]).tocsr()
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    c = -np.concatenate([w, [0.0, 0.0]])       # variables f_0..f_{N-1}, s, l
    bounds = [(None, None)] * N + [(0, None), (0, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method=method)
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    return float(-res.fun), res.x[:N], res.x[N], res.x[N + 1]


def bl_lp_line(weights, x, kappa=1.0):
    """BL LP for points on the real line with ``kappa = 1``.

    On a line the Lipschitz condition between neighbours in sorted order
    implies it for every pair, so only ``N - 1`` pair constraints are
    needed and no distance matrix is formed.
    """
    if kappa != 1.0:
        raise ValueError("the neighbour reduction is exact only for kappa = 1")
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.size == 1:
        return abs(w[0]), np.array([np.sign(w[0])]), 1.0, 0.0
    order = np.argsort(x, kind="stable")
    pa = np.column_stack([order[:-1], order[1:]])
    # interior point scales far better than simplex on this banded program
    value, f, s, l = _solve_pairs(w, pa, np.abs(x[order[1:]] - x[order[:-1]]), method="highs-ipm")
    return value, f, s, l


def bl_lp_highs(weights, dk, *, tol=1e-10, k_init=8, max_rounds=200,
                pairs=None):
    """BL LP via HiGHS with constraint generation.

    Starts from the ``k_init`` nearest neighbours of every point (or from the
    explicit ``pairs`` set when supplied), then repeatedly adds the violated
    Hoelder constraints until none exceed ``tol``.
    """
    w = np.asarray(weights, dtype=float)
    N = w.size
    if N == 1:
        return abs(w[0]), np.array([np.sign(w[0])]), 1.0, 0.0
    active = set(pairs) if pairs is not None else _initial_pairs(dk, k_init)
    check_all = pairs is None
    for _ in range(max_rounds):
        pa = np.array(sorted(active), dtype=int).reshape(-1, 2)
        value, f, s, l = _solve_pairs(w, pa, dk[pa[:, 0], pa[:, 1]])
        if not check_all:
            break
        viol = np.abs(f[:, None] - f[None, :]) - l * dk
        np.fill_diagonal(viol, -np.inf)
        bad_i, bad_j = np.nonzero(np.triu(viol > tol * max(1.0, l)))
        if bad_i.size == 0:
            break
        # add the worst offenders to keep rounds few
        order = np.argsort(-viol[bad_i, bad_j])
        added = 0
        for t in order[: max(4 * N, 500)]:
            key = (int(bad_i[t]), int(bad_j[t]))
            if key not in active:
                active.add(key)
                added += 1
        if added == 0:
            break
    else:
        raise LPError("constraint generation did not settle")
    log.debug("bl_lp_highs: %d active pairs of %d", len(active), N * (N - 1) // 2)
    return value, f, s, l
